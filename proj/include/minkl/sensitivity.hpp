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

#ifndef MINKL_SENSITIVITY_HPP
#define MINKL_SENSITIVITY_HPP

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "minkl/constraint_model.hpp"

namespace minkl {

/// Nonnegative weight on [0, 1] with unit integral. An antiderivative, when
/// known, makes the empirical quantile integral exact on step functions.
class DistortionWeight {
 public:
  DistortionWeight(std::string label, std::function<double(double)> gamma,
                   std::function<double(double)> antiderivative = {});

  static DistortionWeight identity();
  static DistortionWeight tvar(double beta);

  [[nodiscard]] double operator()(double u) const { return gamma_(u); }
  [[nodiscard]] const std::string& label() const noexcept { return label_; }
  [[nodiscard]] bool has_antiderivative() const noexcept { return static_cast<bool>(cumulative_); }
  /// int_0^u gamma, exact if an antiderivative was given, else midpoint quadrature.
  [[nodiscard]] double cumulative(double u) const;

 private:
  std::string label_;
  std::function<double(double)> gamma_;
  std::function<double(double)> cumulative_;
};

/// C^{-1} delta . cov(F, ell), with 1/n normalized moments.
double entropic_derivative(const FunctionalSamples& functionals, std::span<const double> target,
                           const Eigen::VectorXd& delta);

/// int_0^1 F^{-1}(u) gamma(u) du on the (weighted) empirical law.
double distortion_value(std::span<const double> samples, const DistortionWeight& gamma,
                        std::span<const double> weights = {});

/// Tail average above the empirical beta quantile, computed directly.
double tvar_direct(std::span<const double> samples, double beta);

struct DistortionDerivative {
  double value = 0.0;
  std::size_t distinct = 0;
  std::vector<std::string> warnings;
};

/// -C^{-1} delta . int E[(F - EF) 1{ell <= y}] gamma(F_ell(y)) dy, summed over sample gaps.
DistortionDerivative distortion_entropic_derivative(const FunctionalSamples& functionals,
                                                    std::span<const double> target,
                                                    const Eigen::VectorXd& delta,
                                                    const DistortionWeight& gamma);

}  // namespace minkl

#endif
