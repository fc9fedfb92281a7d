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

#ifndef CDLAB_ERRORS_H_
#define CDLAB_ERRORS_H_

#include <stdexcept>
#include <string>

namespace cdlab {

// Base class of every error raised by the library. `code()` is a stable
// machine-readable identifier used by the CLI error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& message)
      : Error("shape_mismatch", message) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& message)
      : Error("domain_error", message) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& message)
      : Error("invalid_argument", message) {}
};

class ModelFormatError : public Error {
 public:
  explicit ModelFormatError(const std::string& message)
      : Error("malformed_model", message) {}
};

class VersionMismatchError : public Error {
 public:
  explicit VersionMismatchError(const std::string& message)
      : Error("version_mismatch", message) {}
};

class ShapeInconsistencyError : public Error {
 public:
  explicit ShapeInconsistencyError(const std::string& message)
      : Error("shape_inconsistency", message) {}
};

class UnsupportedLayerError : public Error {
 public:
  explicit UnsupportedLayerError(const std::string& message)
      : Error("unsupported_layer", message) {}
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& message, int step)
      : Error("divergence", message), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io_error", message) {}
};

}  // namespace cdlab

#endif  // CDLAB_ERRORS_H_
