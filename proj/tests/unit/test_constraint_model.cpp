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
#include <random>
#include <vector>

#include "minkl/constraint_model.hpp"
#include "minkl/errors.hpp"

using namespace minkl;

namespace {

PathEnsemble deterministic(std::size_t n_steps, double T, std::size_t n_paths,
                           const std::function<double(double)>& x_of_t) {
  PathEnsemble e(uniform_times(T, n_steps), n_paths, 1, {});
  for (std::size_t p = 0; p < n_paths; ++p) {
    auto s = e.path(p);
    for (std::size_t k = 0; k <= n_steps; ++k) s[k] = x_of_t(e.times()[k]);
  }
  return e;
}

StateFunction identity() {
  return [](std::span<const double> x) { return x[0]; };
}

FunctionalSamples column_samples(std::vector<std::vector<double>> cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(cols[0].size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    for (std::size_t i = 0; i < cols[j].size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cols[j][i];
  }
  return make_samples(m, Eigen::VectorXd::Zero(m.cols()));
}

}  // namespace

TEST_CASE("terminal column of a constant path") {
  ConstraintSet cs;
  cs.add(TerminalConstraint{"x", identity(), 0.0, {}});
  const auto s = evaluate_functionals(deterministic(5, 1.0, 7, [](double) { return 1.0; }), cs);
  CHECK(s.n_paths() == 7);
  for (std::size_t i = 0; i < 7; ++i) CHECK(s.values(static_cast<Eigen::Index>(i), 0) == 1.0);
}

TEST_CASE("left-Riemann clock integrates to T") {
  ConstraintSet cs;
  cs.add(RunningConstraint{"one", [](std::span<const double>) { return 1.0; }, 0.0, {}});
  const ProcessSpec spec = ProcessSpec::brownian(0.0, 2.0);
  const auto s = evaluate_functionals(simulate_paths(spec, 8, 20, 1), cs);
  for (std::size_t i = 0; i < 20; ++i) CHECK(s.values(static_cast<Eigen::Index>(i), 0) == 2.0);
  const auto s7 = evaluate_functionals(simulate_paths(spec, 7, 3, 1), cs);
  CHECK(s7.values(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("occupation time of a linear path below -0.1") {
  ConstraintSet cs;
  cs.add(barrier_time_constraint(-0.1, 0.0));
  for (std::size_t K : {10, 100, 1000}) {
    const auto s = evaluate_functionals(deterministic(K, 1.0, 1, [](double t) { return -t; }), cs);
    CHECK(std::abs(s.values(0, 0) - 0.9) <= 1.0 / static_cast<double>(K) + 1e-12);
  }
}

TEST_CASE("left-Riemann error halves with the time step") {
  ConstraintSet cs;
  cs.add(RunningConstraint{"sq", [](std::span<const double> x) { return x[0] * x[0]; }, 0.0, {}});
  auto err = [&](std::size_t K) {
    const auto s = evaluate_functionals(deterministic(K, 1.0, 1, [](double t) { return t; }), cs);
    return std::abs(s.values(0, 0) - 1.0 / 3.0);
  };
  const double ratio = err(100) / err(200);
  CHECK(ratio == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("columns stack terminal first") {
  ConstraintSet cs;
  cs.add(barrier_time_constraint(0.0, 0.1));
  cs.add(mean_constraint(0.2));
  cs.add(RunningConstraint{"one", [](std::span<const double>) { return 1.0; }, 0.7, {}});
  cs.add(second_moment_constraint(1.1));
  CHECK(cs.r1() == 2);
  CHECK(cs.labels() == std::vector<std::string>{"mean", "second_moment", "barrier_time(0)", "one"});
  const Eigen::VectorXd t = cs.targets();
  CHECK(t(0) == 0.2);
  CHECK(t(1) == 1.1);
  CHECK(t(2) == 0.1);
  CHECK(t(3) == 0.7);
  const auto s = evaluate_functionals(deterministic(4, 1.0, 2, [](double) { return 3.0; }), cs);
  CHECK(s.values(0, 0) == 3.0);
  CHECK(s.values(0, 1) == 9.0);
  CHECK(s.values(0, 2) == 0.0);
  CHECK(s.values(0, 3) == 1.0);
  CHECK(s.r1 == 2);
}

TEST_CASE("streaming evaluation matches the stored ensemble") {
  ConstraintSet cs;
  cs.add(mean_constraint(0.0));
  cs.add(barrier_time_constraint(-0.2, 0.1));
  const ProcessSpec spec = ProcessSpec::scalar([](double, double x) { return -x; }, [](double, double) { return 1.0; },
                                               0.0, 1.0);
  const auto a = evaluate_functionals(simulate_paths(spec, 50, 400, 9), cs);
  const auto b = simulate_functionals(spec, TiltFields::none(), 50, 400, 9, cs);
  CHECK(a.values == b.values);
}

TEST_CASE("non-finite constraint values are tagged with the path") {
  ConstraintSet cs;
  cs.add(TerminalConstraint{"log", [](std::span<const double> x) { return std::log(x[0]); }, 0.0, {}});
  PathEnsemble e = deterministic(2, 1.0, 3, [](double) { return 1.0; });
  e.path(2)[2] = -1.0;
  try {
    (void)evaluate_functionals(e, cs);
    FAIL("expected EvaluationError");
  } catch (const EvaluationError& err) {
    CHECK(err.path == 2);
    CHECK(err.module() == "constraint_model");
  }
}

TEST_CASE("sample moments") {
  CHECK_THROWS_AS((void)sample_moments(column_samples({std::vector<double>(10, 5.0)})), DegenerateConstraint);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  std::vector<double> x(2000);
  for (auto& v : x) v = n01(rng);
  const SampleMoments dup = sample_moments(column_samples({x, x}));
  CHECK(dup.covariance(0, 1) == dup.covariance(1, 0));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dup.covariance);
  CHECK(std::abs(eig.eigenvalues()(0)) < 1e-10 * eig.eigenvalues()(1));

  std::vector<double> big(1000000);
  for (auto& v : big) v = n01(rng);
  const SampleMoments m = sample_moments(column_samples({big}));
  CHECK(m.covariance(0, 0) == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("constraint validation and presets") {
  ConstraintSet empty;
  const double probe[2] = {0.0, 1.0};
  CHECK_THROWS_AS(empty.validate(1, probe), DomainError);

  ConstraintSet bad;
  bad.add(TerminalConstraint{"inv", [](std::span<const double> x) { return 1.0 / x[0]; }, 0.0, {}});
  CHECK_THROWS_AS(bad.validate(1, probe), DomainError);

  const ConstraintSet two = two_var_constraints(0.0, 1.0, 0.45, 0.93);
  CHECK(two.r1() == 2);
  CHECK(two.targets()(1) == doctest::Approx(0.48));
  const double in_band[1] = {0.5};
  const double below[1] = {-0.5};
  CHECK(two.terminal()[0].f(below) == 1.0);
  CHECK(two.terminal()[1].f(in_band) == 1.0);
  CHECK(two.terminal()[1].f(below) == 0.0);
  REQUIRE(two.terminal()[1].indicator.has_value());
  CHECK(two.terminal()[1].indicator->lower == 0.0);
  CHECK(two.terminal()[1].indicator->upper == 1.0);

  CHECK_THROWS_AS(var_constraint(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(two_var_constraints(0.0, 1.0, 0.5, 0.4), DomainError);
}
