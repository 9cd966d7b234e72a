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

#include "minkl/closed_form.hpp"

#include <cmath>
#include <limits>

#include "minkl/errors.hpp"

namespace minkl {

TwoVarSolution two_var_solution(const TwoVarSpec& s) {
  const double p3 = 1.0 - s.p1 - s.p2;
  if (!(s.p1 > 0.0 && s.p2 > 0.0 && p3 > 0.0)) {
    throw DomainError("closed_form", "two-VaR piece probabilities must be positive");
  }
  if (!(0.0 < s.beta1 && s.beta1 < s.beta2 && s.beta2 < 1.0)) {
    throw DomainError("closed_form", "two-VaR levels need 0 < beta1 < beta2 < 1");
  }
  TwoVarSolution out;
  out.w_low = s.beta1 / s.p1;
  out.w_mid = (s.beta2 - s.beta1) / s.p2;
  out.w_high = (1.0 - s.beta2) / p3;
  out.normalizer = p3 / (1.0 - s.beta2);
  out.eta1 = std::log((s.p1 / s.beta1) * ((1.0 - s.beta2) / p3));
  out.eta2 = std::log((s.p2 / (s.beta2 - s.beta1)) * ((1.0 - s.beta2) / p3));
  return out;
}

double pinned_multiplier(double p_b, double q) {
  if (!(p_b > 0.0 && p_b < 1.0) || !(q > 0.0 && q < 1.0)) {
    throw DomainError("closed_form", "pinned multiplier needs p_B and q in (0, 1)");
  }
  // Sign matches the density exp(-eta 1_B) used everywhere else.
  return std::log((p_b / q) * ((1.0 - q) / (1.0 - p_b)));
}

double BrownianVarianceSolution::a(double t) const {
  return 2.0 * eta2 / (2.0 * eta2 * (horizon - t) + 1.0);
}

double BrownianVarianceSolution::lambda(double t, double x) const {
  return (2.0 * eta2 * x + eta1) / (2.0 * eta2 * (horizon - t) + 1.0);
}

double BrownianVarianceSolution::drift(double t, double x) const {
  if (kappa == 1.0) return 0.0;
  return -x / (horizon / (1.0 - kappa) - t);
}

BrownianVarianceSolution brownian_variance_solution(double kappa, double horizon) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw DomainError("closed_form", "variance ratio kappa must be positive");
  }
  if (!(horizon > 0.0)) throw DomainError("closed_form", "horizon must be positive");
  BrownianVarianceSolution s;
  s.kappa = kappa;
  s.horizon = horizon;
  s.eta2 = kappa == 1.0 ? 0.0 : (1.0 - kappa) / (2.0 * kappa * horizon);
  return s;
}

double indep_increment_mean_residual(const IndepIncrementModel& m, double c, double eta) {
  const double bb = m.b * m.b;
  return m.x0 + m.A - eta * m.Sigma2 -
         m.ell * m.T * eta * bb * std::exp(-m.a * eta + 0.5 * eta * eta * bb) - m.ell * m.a * m.T - c;
}

double indep_increment_multiplier(const IndepIncrementModel& m, double c, double tol) {
  auto f = [&](double eta) { return indep_increment_mean_residual(m, c, eta); };
  double lo = -1.0;
  double hi = 1.0;
  for (int k = 0; f(lo) < 0.0; ++k) {
    if (k > 60) throw DomainError("closed_form", "could not bracket the multiplier from below");
    lo *= 2.0;
  }
  for (int k = 0; f(hi) > 0.0; ++k) {
    if (k > 60) throw DomainError("closed_form", "could not bracket the multiplier from above");
    hi *= 2.0;
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

int multiplier_sign(double expected, double target) {
  if (expected > target) return 1;
  if (expected < target) return -1;
  return 0;
}

}  // namespace minkl
