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

#include "cdlab/bench/negation.h"

#include <algorithm>

#include "cdlab/cd/cd.h"
#include "cdlab/errors.h"
#include "cdlab/net/model_io.h"
#include "cdlab/random.h"

namespace cdlab::bench {

std::vector<std::string> Vocabulary::Words() const {
  std::vector<std::string> w = {negation};
  for (const auto* list : {&positive, &negative, &intensifiers, &fillers}) {
    w.insert(w.end(), list->begin(), list->end());
  }
  return w;
}

int64_t Vocabulary::size() const { return static_cast<int64_t>(Words().size()); }

int Vocabulary::Id(const std::string& word) const {
  const auto w = Words();
  const auto it = std::find(w.begin(), w.end(), word);
  if (it == w.end()) throw InvalidArgument("unknown word '" + word + "'");
  return static_cast<int>(it - w.begin());
}

namespace {

struct Ranges {
  int pos, neg, inten, fill, end;
};

Ranges IdRanges(const Vocabulary& v) {
  Ranges r;
  r.pos = 1;
  r.neg = r.pos + static_cast<int>(v.positive.size());
  r.inten = r.neg + static_cast<int>(v.negative.size());
  r.fill = r.inten + static_cast<int>(v.intensifiers.size());
  r.end = r.fill + static_cast<int>(v.fillers.size());
  return r;
}

double WordWeight(const Vocabulary& v, const Ranges& r, int id) {
  if (id >= r.pos && id < r.neg) return v.positive_weight[id - r.pos];
  if (id >= r.neg && id < r.inten) return v.negative_weight[id - r.neg];
  return 0.0;
}

}  // namespace

double CompositionalScore(const Vocabulary& vocab, const std::vector<int>& tokens) {
  const Ranges r = IdRanges(vocab);
  double score = 0.0, sign = 1.0, scale = 1.0;
  for (int id : tokens) {
    if (id == 0) {
      sign = -sign;
    } else if (id >= r.inten && id < r.fill) {
      scale *= 2.0;
    } else if (id >= r.pos && id < r.inten) {
      score += sign * scale * WordWeight(vocab, r, id);
      sign = 1.0;
      scale = 1.0;
    } else {
      sign = 1.0;  // a filler ends the phrase
      scale = 1.0;
    }
  }
  return score;
}

NegationData MakeNegationSentiment(int64_t n_samples, const Vocabulary& vocab, uint64_t seed,
                                   int64_t max_length) {
  if (n_samples < 1) throw InvalidArgument("negation: need at least one sample");
  if (max_length < 14) throw InvalidArgument("negation: max_length must be at least 14");
  if (vocab.positive.empty() || vocab.negative.empty() || vocab.intensifiers.empty() ||
      vocab.fillers.empty() || vocab.positive.size() != vocab.positive_weight.size() ||
      vocab.negative.size() != vocab.negative_weight.size()) {
    throw InvalidArgument("negation: every word list must be nonempty with matching weights");
  }
  const Ranges r = IdRanges(vocab);
  Rng rng = MakeRng(seed, 0x5e47);
  auto pick = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi - 1)(rng); };
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  NegationData out;
  out.vocab = vocab;
  std::vector<Tensor> rows;
  while (static_cast<int64_t>(out.sentences.size()) < n_samples) {
    Sentence s;
    const int n_phrases = unit(rng) < 0.5 ? 1 : 2;
    for (int p = 0; p < n_phrases; ++p) {
      for (int f = pick(0, 3); f > 0; --f) s.tokens.push_back(pick(r.fill, r.end));
      Phrase ph;
      ph.start = static_cast<int64_t>(s.tokens.size());
      const double u = unit(rng);
      ph.negations = u < 0.5 ? 0 : (u < 0.9 ? 1 : 2);
      for (int k = 0; k < ph.negations; ++k) s.tokens.push_back(0);
      ph.intensified = unit(rng) < 0.3;
      if (ph.intensified) s.tokens.push_back(pick(r.inten, r.fill));
      ph.word = static_cast<int64_t>(s.tokens.size());
      s.tokens.push_back(unit(rng) < 0.5 ? pick(r.pos, r.neg) : pick(r.neg, r.inten));
      s.phrases.push_back(ph);
    }
    if (unit(rng) < 0.5) s.tokens.push_back(pick(r.fill, r.end));
    s.score = CompositionalScore(vocab, s.tokens);
    if (s.score == 0.0) continue;
    out.data.labels.push_back(s.score > 0.0 ? 1 : 0);
    rows.push_back(EncodeTokens(s.tokens, max_length, vocab.size()));
    out.sentences.push_back(std::move(s));
  }
  out.data.inputs = net::Stack(rows);
  return out;
}

Tensor EncodeTokens(const std::vector<int>& tokens, int64_t max_length, int64_t vocab_size) {
  if (static_cast<int64_t>(tokens.size()) > max_length) {
    throw InvalidArgument("negation: sentence longer than max_length");
  }
  std::vector<double> x(max_length * vocab_size, 0.0);
  for (size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t] < 0 || tokens[t] >= vocab_size) throw InvalidArgument("token out of range");
    x[t * vocab_size + tokens[t]] = 1.0;
  }
  return Tensor({max_length, vocab_size}, std::move(x));
}

double PhraseScore(const net::Network& net, const Tensor& x, int64_t lo, int64_t hi) {
  const int64_t len = x.shape()[x.rank() - 2], v = x.shape()[x.rank() - 1];
  std::vector<double> m(len * v, 0.0);
  for (int64_t t = lo; t < hi; ++t) std::fill_n(m.begin() + t * v, v, 1.0);
  const Tensor mask({len, v}, std::move(m));
  return cd::ComputeCdScore(net, x, mask, 1).beta_logit -
         cd::ComputeCdScore(net, x, mask, 0).beta_logit;
}

NegationConfig DefaultNegationConfig() {
  NegationConfig c;
  c.train.learning_rate = 0.1;
  c.train.momentum = 0.9;
  c.train.epochs = 60;
  c.train.batch_size = 32;
  c.train.pixels_per_batch = 0;
  return c;
}

net::Network SentimentLstm(int64_t vocab_size, int64_t max_length, int64_t hidden,
                           uint64_t seed) {
  net::Architecture arch;
  arch.input_shape = {max_length, vocab_size};
  arch.num_classes = 2;
  net::LayerDesc lstm{net::LayerKind::kLstm};
  lstm.hidden = hidden;
  arch.layers = {lstm, {net::LayerKind::kLinear, 2}};
  return net::InitRandom(arch, seed);
}

NegationResult RunNegation(const NegationConfig& c) {
  NegationResult result;
  Rng seeds = MakeRng(c.seed, 0x9e9);
  result.data_seed = seeds();
  const Vocabulary vocab;
  const auto train = MakeNegationSentiment(c.n_train, vocab, result.data_seed);
  const auto test = MakeNegationSentiment(c.n_test, vocab, seeds());
  const int64_t len = train.data.inputs.shape()[1];
  cdep::TrainConfig tc = c.train;
  tc.seed = c.seed;
  tc.lambda = 0.0;
  const auto net =
      cdep::Train(SentimentLstm(vocab.size(), len, c.hidden, c.seed + 1), train.data, tc).net;
  result.train_accuracy = net::Accuracy(net, train.data);
  result.test_accuracy = net::Accuracy(net, test.data);
  const int first_negative = 1 + static_cast<int>(vocab.positive.size());
  for (size_t i = 0; i < test.sentences.size(); ++i) {
    const Sentence& s = test.sentences[i];
    const Tensor x = net::BatchRow(test.data.inputs, static_cast<int64_t>(i));
    for (const Phrase& ph : s.phrases) {
      const int word = s.tokens[ph.word];
      if (ph.negations != 1 || ph.intensified || word < 1 || word >= first_negative) continue;
      const double phrase = PhraseScore(net, x, ph.start, ph.word + 1);
      const Tensor single = EncodeTokens({word}, len, vocab.size());
      const double alone = PhraseScore(net, single, 0, 1);
      const double in_context = PhraseScore(net, x, ph.word, ph.word + 1);
      ++result.occurrences;
      result.flipped += (phrase < 0.0 && alone > 0.0) || (phrase > 0.0 && alone < 0.0);
      result.context_flipped +=
          (phrase < 0.0 && in_context > 0.0) || (phrase > 0.0 && in_context < 0.0);
    }
  }
  result.flip_rate =
      result.occurrences > 0 ? static_cast<double>(result.flipped) / result.occurrences : 0.0;
  return result;
}

}  // namespace cdlab::bench
