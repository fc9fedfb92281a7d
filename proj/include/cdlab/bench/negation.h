/*
 * Copyright 2026 The cdlab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef CDLAB_BENCH_NEGATION_H_
#define CDLAB_BENCH_NEGATION_H_

#include <cstdint>
#include <string>
#include <vector>

#include "cdlab/cdep/trainer.h"
#include "cdlab/net/dataset.h"
#include "cdlab/net/network.h"

namespace cdlab::bench {

// Word lists of the sentiment grammar. Polarity words carry a signed weight,
// an intensifier doubles the word that follows it and each "not" flips the
// sign of the phrase it starts.
struct Vocabulary {
  std::vector<std::string> positive = {"good", "great", "nice"};
  std::vector<double> positive_weight = {1.0, 2.0, 1.0};
  std::vector<std::string> negative = {"bad", "awful", "dull"};
  std::vector<double> negative_weight = {-1.0, -2.0, -1.0};
  std::vector<std::string> intensifiers = {"very", "really"};
  std::vector<std::string> fillers = {"the", "movie", "was", "plot", "it", "and"};
  std::string negation = "not";

  // Token ids: negation, positive, negative, intensifiers, fillers.
  std::vector<std::string> Words() const;
  int64_t size() const;
  int Id(const std::string& word) const;  // throws InvalidArgument if unknown
};

// One polarity phrase: [not]* [intensifier] word, as token positions.
struct Phrase {
  int64_t start = 0;     // first token of the phrase
  int64_t word = 0;      // position of the polarity word
  int negations = 0;
  bool intensified = false;
};

struct Sentence {
  std::vector<int> tokens;
  std::vector<Phrase> phrases;
  double score = 0.0;  // compositional score; never zero
};

// Score of a token sequence under the grammar.
double CompositionalScore(const Vocabulary& vocab, const std::vector<int>& tokens);

struct NegationData {
  Vocabulary vocab;
  std::vector<Sentence> sentences;
  net::Dataset data;  // one-hot [n, max_length, V], zero rows pad; label 1 iff score > 0
};

// One or two phrases per sentence separated by fillers. Throws
// InvalidArgument when max_length is below 14 or n_samples < 1.
NegationData MakeNegationSentiment(int64_t n_samples, const Vocabulary& vocab, uint64_t seed,
                                   int64_t max_length = 14);

// One-hot rows for the tokens followed by zero padding.
Tensor EncodeTokens(const std::vector<int>& tokens, int64_t max_length, int64_t vocab_size);

// CD score beta(positive) - beta(negative) of the token positions [lo, hi).
double PhraseScore(const net::Network& net, const Tensor& x, int64_t lo, int64_t hi);

struct NegationConfig {
  int64_t n_train = 2000;
  int64_t n_test = 500;
  int64_t hidden = 24;
  uint64_t seed = 0;
  cdep::TrainConfig train;
};

NegationConfig DefaultNegationConfig();

struct NegationResult {
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  int occurrences = 0;  // test phrases "not <positive>" with one negation
  // Of those, phrases whose score has the opposite sign of the positive word
  // scored as a one-token sentence.
  int flipped = 0;
  double flip_rate = 0.0;
  // Same count against the word's score inside the negated sentence.
  int context_flipped = 0;
  uint64_t data_seed = 0;
};

net::Network SentimentLstm(int64_t vocab_size, int64_t max_length, int64_t hidden,
                           uint64_t seed);

// Trains the LSTM and checks the sign of CD scores of negated positive
// phrases against the word alone on the test split.
NegationResult RunNegation(const NegationConfig& config);

}  // namespace cdlab::bench

#endif  // CDLAB_BENCH_NEGATION_H_
