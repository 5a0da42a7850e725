/*
 * Copyright 2026 The greedlab Authors.
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

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace greedlab {

/// Violated precondition of a public operation (bad sizes, out-of-range knobs).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operand shapes that an op cannot combine. The message names the op and both shapes.
class ShapeError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// Input outside the mathematical domain of an op (e.g. log of a non-positive value).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Config file problems, always carrying the offending line number.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, const std::string& what)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// A loss went non-finite. Carries enough to write a diagnostic record.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(std::uint64_t iteration, double d_loss, double g_loss)
      : std::runtime_error("non-finite loss at iteration " + std::to_string(iteration) +
                           " (d_loss=" + std::to_string(d_loss) + ", g_loss=" +
                           std::to_string(g_loss) + ")"),
        iteration_(iteration),
        d_loss_(d_loss),
        g_loss_(g_loss) {}

  std::uint64_t iteration() const noexcept { return iteration_; }
  double d_loss() const noexcept { return d_loss_; }
  double g_loss() const noexcept { return g_loss_; }

 private:
  std::uint64_t iteration_;
  double d_loss_;
  double g_loss_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractError(message);
}

}  // namespace greedlab
