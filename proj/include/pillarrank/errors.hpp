// Copyright 2026 The pillarrank Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace pillarrank {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration: bad hyperparameters, out-of-range sizes, unknown keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Rejected input data (NaN scores, degenerate embeddings, bad ids).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Non-finite losses or gradients during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Failure reading or writing one of the on-disk formats.
class FormatError : public Error {
 public:
  enum class Kind {
    Io,
    BadMagic,
    VersionMismatch,
    UnsupportedDtype,
    Truncated,
    DimensionOverflow,
    TrailingData,
    Parse,
  };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace pillarrank
