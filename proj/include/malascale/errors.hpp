// Copyright 2026 The malascale Authors.
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

#ifndef MALASCALE_ERRORS_HPP_
#define MALASCALE_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace malascale {

/// Bad argument: out-of-range order, index, empty input, unknown name.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A non-finite value appeared where a finite one is required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative solver ran out of iterations.
class ConvergenceError : public NumericError {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : NumericError(what), last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

/// An operation was called on an object that is not in the required state.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Configuration file or flag problem. `key()` names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace malascale

#endif  // MALASCALE_ERRORS_HPP_
