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

#include "minkl/errors.hpp"

namespace minkl {

namespace {
std::string tagged(const std::string& module, const std::string& what) {
  return "[" + module + "] " + what;
}
}  // namespace

Error::Error(std::string module, const std::string& what)
    : std::runtime_error(tagged(module, what)), module_(std::move(module)) {}

SimulationDiverged::SimulationDiverged(std::size_t path_index, std::size_t step_index,
                                       const std::string& detail)
    : Error("sde_core", "simulation diverged on path " + std::to_string(path_index) + " at step " +
                            std::to_string(step_index) + ": " + detail),
      path(path_index),
      step(step_index) {}

EvaluationError::EvaluationError(std::string module, std::size_t path_index,
                                 const std::string& detail)
    : Error(std::move(module),
            "non-finite constraint value on path " + std::to_string(path_index) + ": " + detail),
      path(path_index) {}

DegenerateConstraint::DegenerateConstraint(std::string module, std::size_t col,
                                           const std::string& label)
    : Error(std::move(module), "constraint column " + std::to_string(col) + " ('" + label +
                                   "') has zero sample variance; the multiplier equation is ill-posed"),
      column(col) {}

}  // namespace minkl
