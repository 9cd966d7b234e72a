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

#ifndef MINKL_CLOSED_FORM_HPP
#define MINKL_CLOSED_FORM_HPP

#include <functional>

namespace minkl {

/// Reference probabilities of the three pieces cut by q1 < q2, plus targets.
struct TwoVarSpec {
  double p1 = 0.0;  // P(X_T <= q1)
  double p2 = 0.0;  // P(q1 < X_T <= q2)
  double beta1 = 0.0;
  double beta2 = 0.0;
};

struct TwoVarSolution {
  double eta1 = 0.0;
  double eta2 = 0.0;
  double w_low = 1.0;
  double w_mid = 1.0;
  double w_high = 1.0;
  double normalizer = 1.0;
};

/// Multipliers for the band constraints 1{X <= q1} -> beta1, 1{q1 < X <= q2} -> beta2 - beta1.
TwoVarSolution two_var_solution(const TwoVarSpec& spec);

/// Multiplier that moves P(B) from p_b to q for the constraint 1_B.
double pinned_multiplier(double p_b, double q);

struct BrownianVarianceSolution {
  double eta1 = 0.0;
  double eta2 = 0.0;
  double kappa = 1.0;
  double horizon = 1.0;

  /// a(t) = 2 eta2 / (2 eta2 (T - t) + 1).
  [[nodiscard]] double a(double t) const;
  /// lambda(t, x) = (2 eta2 x + eta1) / (2 eta2 (T - t) + 1).
  [[nodiscard]] double lambda(double t, double x) const;
  /// Drift of X under the optimal measure, -x / (T / (1 - kappa) - t).
  [[nodiscard]] double drift(double t, double x) const;
};

/// Tilt of a standard Brownian motion that scales Var(X_T) by kappa with mean kept at 0.
BrownianVarianceSolution brownian_variance_solution(double kappa, double horizon);

/// Mean-constraint model with independent increments: drift A, diffusion variance Sigma2,
/// one Gaussian-mark jump component N(a, b^2) at rate ell, compensated.
struct IndepIncrementModel {
  double x0 = 0.0;
  double A = 0.0;
  double Sigma2 = 1.0;
  double ell = 0.0;
  double a = 0.0;
  double b = 0.0;
  double T = 1.0;
};

/// x0 + A - eta Sigma2 - ell T eta b^2 e^{-a eta + eta^2 b^2 / 2} - ell a T - c.
double indep_increment_mean_residual(const IndepIncrementModel& m, double c, double eta);

/// Root of the residual in eta by bracketed bisection.
double indep_increment_multiplier(const IndepIncrementModel& m, double c, double tol = 1e-12);

/// sgn(expected - target).
int multiplier_sign(double expected, double target);

}  // namespace minkl

#endif
