/*
 * Copyright 2026 The cmdp-lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cmdp {

/// A solver or sampler precondition does not hold (step size cap, chain
/// ergodicity, data budget). The CLI maps it to exit code 2.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A tuple source ran out before the requested number of tuples.
class DataExhausted : public PreconditionError {
 public:
  DataExhausted(const std::string& what, std::int64_t required, std::int64_t available)
      : PreconditionError(what), required_(required), available_(available) {}

  std::int64_t required() const { return required_; }
  std::int64_t available() const { return available_; }

 private:
  std::int64_t required_;
  std::int64_t available_;
};

}  // namespace cmdp
