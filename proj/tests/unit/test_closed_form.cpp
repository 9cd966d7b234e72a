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

#include <doctest.h>

#include <cmath>
#include <vector>

#include "minkl/closed_form.hpp"
#include "minkl/errors.hpp"
#include "minkl/tilt_solver.hpp"

using namespace minkl;

namespace {

// Three atoms 0, 1, 2 with the given frequencies out of n; columns are the
// indicators of atom 0 and atom 1.
FunctionalSamples three_atoms(int n0, int n1, int n2, double b1, double b2) {
  const int n = n0 + n1 + n2;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, 2);
  for (int i = 0; i < n0; ++i) m(i, 0) = 1.0;
  for (int i = n0; i < n0 + n1; ++i) m(i, 1) = 1.0;
  Eigen::VectorXd t(2);
  t << b1, b2 - b1;
  return make_samples(m, t);
}

}  // namespace

TEST_CASE("two-VaR closed form") {
  const TwoVarSolution id = two_var_solution({0.3, 0.5, 0.3, 0.8});
  CHECK(std::abs(id.eta1) < 1e-15);
  CHECK(std::abs(id.eta2) < 1e-15);
  CHECK(id.w_low == doctest::Approx(1.0));
  CHECK(id.w_mid == doctest::Approx(1.0));
  CHECK(id.w_high == doctest::Approx(1.0));

  const TwoVarSolution s = two_var_solution({0.5, 0.4, 0.45, 0.93});
  CHECK(s.w_low == doctest::Approx(0.9));
  CHECK(s.w_mid == doctest::Approx(1.2));
  CHECK(s.w_high == doctest::Approx(0.7));
  CHECK(s.normalizer == doctest::Approx(0.1 / 0.07));
  CHECK(s.eta1 == doctest::Approx(std::log(0.5 / 0.45 * 0.07 / 0.1)));
  CHECK(0.5 * s.w_low + 0.4 * s.w_mid + 0.1 * s.w_high == doctest::Approx(1.0).epsilon(1e-14));

  const TiltSolution num = solve_multipliers(three_atoms(500, 400, 100, 0.45, 0.93));
  REQUIRE(num.converged);
  CHECK(std::abs(num.eta(0) - s.eta1) < 1e-6);
  CHECK(std::abs(num.eta(1) - s.eta2) < 1e-6);
  CHECK(num.weights[0] * 1000.0 == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(num.weights[999] * 1000.0 == doctest::Approx(0.7).epsilon(1e-6));

  CHECK_THROWS_AS(two_var_solution({0.5, 0.5, 0.3, 0.8}), DomainError);
  CHECK_THROWS_AS(two_var_solution({0.3, 0.3, 0.8, 0.5}), DomainError);
}

TEST_CASE("pinned multiplier") {
  CHECK(std::abs(pinned_multiplier(0.3, 0.3)) < 1e-15);
  // Moving P(B) from 0.5 up to 0.9 needs exp(-eta) = 9.
  CHECK(pinned_multiplier(0.5, 0.9) == doctest::Approx(-std::log(9.0)));
  // Single-piece specialization of the two-VaR algebra.
  const TwoVarSolution two = two_var_solution({0.2, 0.3, 0.6, 0.7});
  CHECK(two.eta1 == doctest::Approx(std::log(0.2 / 0.6 * 0.3 / 0.5)));
  CHECK(pinned_multiplier(0.2, 0.6) == doctest::Approx(std::log(0.2 / 0.6 * 0.4 / 0.8)));

  // Two atoms, B = {first}: the density approaches 1_B / p_B.
  const double pb = 0.25;
  double prev = INFINITY;
  for (double k : {10.0, 100.0, 1000.0, 1e6}) {
    const double q = 1.0 - 1.0 / k;
    const double e = std::exp(-pinned_multiplier(pb, q));
    const double z = e * pb + (1.0 - pb);
    const double dev = std::max(std::abs(e / z - 1.0 / pb), std::abs(1.0 / z));
    CHECK(dev < prev);
    prev = dev;
  }
  CHECK(prev < 1e-5);
  CHECK_THROWS_AS(pinned_multiplier(0.0, 0.5), DomainError);
  CHECK_THROWS_AS(pinned_multiplier(0.5, 1.0), DomainError);
}

TEST_CASE("Brownian variance tilt") {
  const BrownianVarianceSolution half = brownian_variance_solution(0.5, 1.0);
  CHECK(half.eta1 == 0.0);
  CHECK(half.eta2 == doctest::Approx(0.5));
  CHECK(half.drift(0.0, 1.0) == doctest::Approx(-0.5));
  CHECK(half.a(1.0) == doctest::Approx(1.0));
  CHECK(half.lambda(0.0, 2.0) == doctest::Approx(2.0 / 2.0));
  CHECK(brownian_variance_solution(1.0, 1.0).eta2 == 0.0);
  CHECK(std::abs(brownian_variance_solution(1.0 - 1e-9, 1.0).eta2) < 1e-8);
  CHECK_THROWS_AS(brownian_variance_solution(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(brownian_variance_solution(-1.0, 1.0), DomainError);
}

TEST_CASE("independent-increment mean equation") {
  const IndepIncrementModel jumps{0.2, 0.1, 0.8, 1.5, 0.3, 0.6, 2.0};
  CHECK(indep_increment_mean_residual(jumps, 0.05, 0.0) ==
        doctest::Approx(0.2 + 0.1 - 1.5 * 0.3 * 2.0 - 0.05).epsilon(1e-14));

  const IndepIncrementModel linear{0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0};
  CHECK(indep_increment_multiplier(linear, -0.3) == doctest::Approx(0.3).epsilon(1e-11));

  const double eta = indep_increment_multiplier(jumps, -0.4);
  CHECK(std::abs(indep_increment_mean_residual(jumps, -0.4, eta)) < 1e-10);

  // Strictly decreasing in eta when |a| < 2b.
  double prev = INFINITY;
  for (double e = -5.0; e <= 5.0; e += 0.25) {
    const double r = indep_increment_mean_residual(jumps, 0.0, e);
    CHECK(r < prev);
    prev = r;
  }
}

TEST_CASE("multiplier sign") {
  CHECK(multiplier_sign(1.0, 1.0) == 0);
  CHECK(multiplier_sign(1.0, 0.5) == 1);
  CHECK(multiplier_sign(0.5, 1.0) == -1);
}
