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

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "minkl/errors.hpp"
#include "minkl/numerics.hpp"
#include "minkl/sensitivity.hpp"
#include "minkl/tilt_solver.hpp"

using namespace minkl;

namespace {

using Eigen::Index;

std::vector<double> normals(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> x(n);
  for (auto& v : x) v = d(rng);
  return x;
}

FunctionalSamples columns(const std::vector<std::vector<double>>& cols) {
  Eigen::MatrixXd m(static_cast<Index>(cols[0].size()), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    for (std::size_t i = 0; i < cols[j].size(); ++i) m(static_cast<Index>(i), static_cast<Index>(j)) = cols[j][i];
  }
  return make_samples(m, Eigen::VectorXd::Zero(m.cols()));
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

double mean_of(const std::vector<double>& v) { return pairwise_sum(v) / static_cast<double>(v.size()); }

/// Exact tilt to E F + eps delta.
std::vector<double> tilted_weights(FunctionalSamples s, const Eigen::VectorXd& delta, double eps) {
  s.targets = s.values.colwise().mean().transpose() + eps * delta;
  const TiltSolution sol = solve_multipliers(s);
  REQUIRE(sol.converged);
  return sol.weights;
}

}  // namespace

TEST_CASE("independent target has zero entropic derivative") {
  const std::size_t n = 100000;
  const auto f = normals(n, 1);
  const auto ell = normals(n, 2);
  const double d = entropic_derivative(columns({f}), ell, vec({1.0}));
  const double se = 1.0 / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(d) < 3.0 * se);
}

TEST_CASE("self derivative and linearity") {
  const auto x = normals(5000, 3);
  std::vector<double> x2(x.size()), cube(x.size()), mix(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    x2[i] = x[i] * x[i];
    cube[i] = x[i] * x[i] * x[i];
    mix[i] = 2.0 * cube[i] - 3.0 * x[i];
  }
  CHECK(entropic_derivative(columns({x}), x, vec({1.0})) == doctest::Approx(1.0).epsilon(1e-12));

  const FunctionalSamples two = columns({x, x2});
  const Eigen::VectorXd d1 = vec({1.0, 0.0}), d2 = vec({0.3, -0.7});
  const double a = entropic_derivative(two, cube, d1);
  const double b = entropic_derivative(two, x, d1);
  CHECK(entropic_derivative(two, mix, d1) == doctest::Approx(2.0 * a - 3.0 * b).epsilon(1e-10));
  CHECK(entropic_derivative(two, cube, 2.0 * d1 + d2) ==
        doctest::Approx(2.0 * a + entropic_derivative(two, cube, d2)).epsilon(1e-10));
  CHECK(entropic_derivative(two, cube, vec({0.0, 0.0})) == 0.0);

  CHECK_THROWS_AS(entropic_derivative(columns({x, x}), cube, d1), SingularMatrix);
  CHECK_THROWS_AS(entropic_derivative(two, cube, vec({1.0})), DomainError);
}

TEST_CASE("finite differences of the exact tilt converge to the derivative") {
  const auto x = normals(50000, 4);
  std::vector<double> x2(x.size()), ell(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    x2[i] = x[i] * x[i];
    ell[i] = x[i] * x[i] * x[i] + std::sin(x[i]);
  }
  const FunctionalSamples s = columns({x, x2});
  const Eigen::VectorXd delta = vec({1.0, 0.5});
  const double d = entropic_derivative(s, ell, delta);
  const double base = mean_of(ell);
  std::vector<double> err;
  for (double eps : {0.05, 0.025}) {
    const double fd = (weighted_expectation(tilted_weights(s, delta, eps), ell) - base) / eps;
    err.push_back(std::abs(fd - d));
  }
  CHECK(err[1] < err[0]);
  CHECK(err[1] / err[0] == doctest::Approx(0.5).epsilon(0.2));
  CHECK(err[1] < 0.05 * std::abs(d));
}

TEST_CASE("distortion values") {
  const auto x = normals(1000, 5);
  CHECK(distortion_value(x, DistortionWeight::identity()) == doctest::Approx(mean_of(x)).epsilon(1e-12));
  std::vector<double> w(x.size());
  double tot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) tot += (w[i] = std::exp(0.5 * x[i]));
  for (auto& v : w) v /= tot;
  CHECK(distortion_value(x, DistortionWeight::identity(), w) ==
        doctest::Approx(weighted_expectation(w, x)).epsilon(1e-12));

  const std::vector<double> pm{-1.0, 1.0, -1.0, 1.0};
  CHECK(distortion_value(pm, DistortionWeight::tvar(0.5)) == doctest::Approx(1.0).epsilon(1e-14));

  const auto big = normals(1000000, 6);
  const double exact = normal_pdf(normal_quantile(0.9)) / 0.1;
  CHECK(exact == doctest::Approx(1.7550).epsilon(1e-4));
  const double tv = distortion_value(big, DistortionWeight::tvar(0.9));
  CHECK(tv == doctest::Approx(exact).epsilon(0.01));
  CHECK(std::abs(tv - tvar_direct(big, 0.9)) < 1e-12);
  for (double beta : {0.0, 0.37, 0.9, 0.999}) {
    CHECK(std::abs(distortion_value(x, DistortionWeight::tvar(beta)) - tvar_direct(x, beta)) < 1e-12);
  }

  // Weight without an antiderivative goes through quadrature.
  const DistortionWeight lin("linear", [](double u) { return 2.0 * u; });
  CHECK(lin.cumulative(0.5) == doctest::Approx(0.25).epsilon(1e-9));
  CHECK_THROWS_AS(DistortionWeight("double", [](double) { return 2.0; }), DomainError);
  CHECK_THROWS_AS(DistortionWeight("neg", [](double u) { return 4.0 * u - 1.0; }), DomainError);
  CHECK_THROWS_AS(DistortionWeight::tvar(1.0), DomainError);
}

TEST_CASE("distortion derivative reduces to the entropic derivative for the mean") {
  const auto x = normals(4000, 7);
  const auto y = normals(4000, 8);
  std::vector<double> x2(x.size()), ell(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    x2[i] = x[i] * x[i];
    ell[i] = x[i] + 0.5 * y[i] * x2[i];
  }
  const FunctionalSamples s = columns({x, x2});
  const Eigen::VectorXd delta = vec({0.4, -1.0});
  const DistortionDerivative dd = distortion_entropic_derivative(s, ell, delta, DistortionWeight::identity());
  CHECK(std::abs(dd.value - entropic_derivative(s, ell, delta)) < 1e-10);
  CHECK(dd.warnings.empty());
  CHECK(distortion_entropic_derivative(s, ell, vec({0.0, 0.0}), DistortionWeight::tvar(0.9)).value == 0.0);

  std::vector<double> atoms(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) atoms[i] = std::round(x[i]);
  const DistortionDerivative da = distortion_entropic_derivative(s, atoms, delta, DistortionWeight::identity());
  CHECK(da.distinct < 100);
  CHECK_FALSE(da.warnings.empty());
}

TEST_CASE("TVaR distortion derivative matches finite differences of the exact tilt") {
  const std::size_t n = 200000;
  const auto x1 = normals(n, 9);
  const auto x2 = normals(n, 10);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = x1[i] + x2[i];
  std::vector<double> sorted = y;
  std::sort(sorted.begin(), sorted.end());
  const double q = sorted[static_cast<std::size_t>(0.9 * static_cast<double>(n))];
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) f[i] = y[i] < q ? 1.0 : 0.0;
  const FunctionalSamples s = columns({f});
  const Eigen::VectorXd delta = vec({1.0});
  const DistortionWeight tvar = DistortionWeight::tvar(0.95);
  const double d = distortion_entropic_derivative(s, y, delta, tvar).value;
  const double eps = 0.005;
  const double fd = (distortion_value(y, tvar, tilted_weights(s, delta, eps)) -
                     distortion_value(y, tvar, tilted_weights(s, delta, -eps))) / (2.0 * eps);
  CHECK(d < 0.0);
  CHECK(fd == doctest::Approx(d).epsilon(0.02));
}

TEST_CASE("TVaR sub-portfolio identity") {
  // f = 1{X1 + X2 < q} with q the alpha-quantile; for E X1 = 0 and delta = alpha the
  // derivative of X1 is minus the sub-portfolio TVaR sensitivity.
  const std::size_t n = 200000;
  const double alpha = 0.9;
  auto x1 = normals(n, 11);
  const auto x2 = normals(n, 12);
  const double m1 = mean_of(x1);
  for (auto& v : x1) v -= m1;
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = x1[i] + x2[i];
  std::vector<double> sorted = y;
  std::sort(sorted.begin(), sorted.end());
  const double q = sorted[static_cast<std::size_t>(alpha * static_cast<double>(n))];
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) f[i] = y[i] < q ? 1.0 : 0.0;
  const double d = entropic_derivative(columns({f}), x1, vec({alpha}));

  const double h = 1e-3;
  std::vector<double> up(n), down(n);
  for (std::size_t i = 0; i < n; ++i) {
    up[i] = y[i] + h * x1[i];
    down[i] = y[i] - h * x1[i];
  }
  const double sens = (tvar_direct(up, alpha) - tvar_direct(down, alpha)) / (2.0 * h);
  // Conditional sd of X1 in the tail is about 0.7, over n (1 - alpha) tail samples.
  const double se = 0.7 / std::sqrt(static_cast<double>(n) * (1.0 - alpha));
  CHECK(std::abs(d + sens) < 3.0 * se);
}
