// Copyright 2026 The minkl Authors
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

#ifndef MINKL_ERRORS_HPP
#define MINKL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace minkl {

/// Base class of every error raised by the library. Carries the name of the
/// module that raised it so pipeline reports can attribute failures.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what);

  [[nodiscard]] const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

/// Precondition or domain violation on user-supplied input.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A simulated path produced a non-finite or exploding state.
class SimulationDiverged : public Error {
 public:
  SimulationDiverged(std::size_t path, std::size_t step, const std::string& detail);
  std::size_t path;
  std::size_t step;
};

/// A constraint callable returned a non-finite value.
class EvaluationError : public Error {
 public:
  EvaluationError(std::string module, std::size_t path, const std::string& detail);
  std::size_t path;
};

/// A constraint column has zero sample variance.
class DegenerateConstraint : public Error {
 public:
  DegenerateConstraint(std::string module, std::size_t column, const std::string& label);
  std::size_t column;
};

/// The constraint targets cannot be attained on the available support.
class InfeasibleTarget : public Error {
 public:
  using Error::Error;
};

/// Linear system too ill-conditioned to trust the solve.
class IllConditioned : public Error {
 public:
  using Error::Error;
};

class SingularMatrix : public Error {
 public:
  using Error::Error;
};

/// omega lost strict positivity on the grid.
class PositivityViolation : public Error {
 public:
  using Error::Error;
};

/// Grid-backed field evaluated outside its domain without clamping.
class ExtrapolationError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

/// Malformed files, configs or constraint strings.
class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace minkl

#endif
