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

#ifndef MINKL_CONSTRAINT_MODEL_HPP
#define MINKL_CONSTRAINT_MODEL_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "minkl/sde_core.hpp"

namespace minkl {

using StateFunction = std::function<double(std::span<const double> x)>;

/// Marks f(x) = 1{lower < x_0 <= upper}; infinite ends are open.
struct IndicatorHint {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

/// E^Q[f(X_T)] = target.
struct TerminalConstraint {
  std::string label;
  StateFunction f;
  double target = 0.0;
  /// Set when f is an interval indicator; lets the PDE engine smooth the step.
  std::optional<IndicatorHint> indicator;
};

/// E^Q[int_0^T g(X_s) ds] = target.
struct RunningConstraint {
  std::string label;
  StateFunction g;
  double target = 0.0;
  std::optional<IndicatorHint> indicator;
};

class ConstraintSet {
 public:
  ConstraintSet() = default;
  ConstraintSet(std::vector<TerminalConstraint> terminal, std::vector<RunningConstraint> running);

  ConstraintSet& add(TerminalConstraint c);
  ConstraintSet& add(RunningConstraint c);

  [[nodiscard]] const std::vector<TerminalConstraint>& terminal() const noexcept { return terminal_; }
  [[nodiscard]] const std::vector<RunningConstraint>& running() const noexcept { return running_; }
  [[nodiscard]] std::vector<TerminalConstraint>& terminal() noexcept { return terminal_; }
  [[nodiscard]] std::vector<RunningConstraint>& running() noexcept { return running_; }
  [[nodiscard]] std::size_t r1() const noexcept { return terminal_.size(); }
  [[nodiscard]] std::size_t r2() const noexcept { return running_.size(); }
  [[nodiscard]] std::size_t size() const noexcept { return r1() + r2(); }
  [[nodiscard]] bool empty() const noexcept { return size() == 0; }

  /// Terminal targets first, then running.
  [[nodiscard]] Eigen::VectorXd targets() const;
  [[nodiscard]] std::vector<std::string> labels() const;
  /// Replaces the targets in stacking order.
  void set_targets(const Eigen::VectorXd& targets);

  /// Throws DomainError when the set is empty or a callable is non-finite at
  /// the given probe states (each of length dim).
  void validate(std::size_t dim, std::span<const double> probe_states) const;

 private:
  std::vector<TerminalConstraint> terminal_;
  std::vector<RunningConstraint> running_;
};

/// The constraint vector per path, terminal columns first.
struct FunctionalSamples {
  Eigen::MatrixXd values;   // n_paths x r
  Eigen::VectorXd targets;  // r
  std::vector<std::string> labels;
  std::size_t r1 = 0;
  SeedManifest source;

  [[nodiscard]] std::size_t n_paths() const noexcept { return static_cast<std::size_t>(values.rows()); }
  [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(values.cols()); }
  /// values minus targets, row by row.
  [[nodiscard]] Eigen::MatrixXd centered() const;
};

/// Row of constraint values for one path: f_j(X_T), then left-Riemann sums of g_i.
void evaluate_path(const ConstraintSet& constraints, std::span<const double> times,
                   std::span<const double> states, std::size_t dim, std::span<double> out);

FunctionalSamples evaluate_functionals(const PathEnsemble& ensemble, const ConstraintSet& constraints);

/// Simulates and evaluates without storing the ensemble. Row p matches
/// evaluate_functionals on simulate_tilted_paths with the same arguments.
FunctionalSamples simulate_functionals(const ProcessSpec& spec, const TiltFields& tilt,
                                       std::size_t n_steps, std::size_t n_paths,
                                       std::uint64_t seed, const ConstraintSet& constraints);

struct SampleMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // unbiased, exactly symmetric
};

SampleMoments sample_moments(const FunctionalSamples& samples);

/// Samples from a plain matrix, e.g. terminal draws that never touched a path.
FunctionalSamples make_samples(Eigen::MatrixXd values, Eigen::VectorXd targets,
                               std::vector<std::string> labels = {}, std::size_t r1 = 0);

// Presets. `component` picks the state coordinate.
TerminalConstraint mean_constraint(double target, std::size_t component = 0);
TerminalConstraint second_moment_constraint(double target, std::size_t component = 0);
/// P(X_T <= level) = probability.
TerminalConstraint var_constraint(double level, double probability, std::size_t component = 0);
/// P(q1 < X_T <= q2) = probability.
TerminalConstraint band_constraint(double q1, double q2, double probability,
                                   std::size_t component = 0);
/// Expected time spent at or below level equals target.
RunningConstraint barrier_time_constraint(double level, double target, std::size_t component = 0);

/// The two-quantile set in band form: P(X_T <= q1) = beta1, P(q1 < X_T <= q2) = beta2 - beta1.
ConstraintSet two_var_constraints(double q1, double q2, double beta1, double beta2);

}  // namespace minkl

#endif
