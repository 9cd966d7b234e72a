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

#include "minkl/constraint_model.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "minkl/errors.hpp"
#include "minkl/numerics.hpp"

namespace minkl {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

ConstraintSet::ConstraintSet(std::vector<TerminalConstraint> terminal,
                             std::vector<RunningConstraint> running)
    : terminal_(std::move(terminal)), running_(std::move(running)) {}

ConstraintSet& ConstraintSet::add(TerminalConstraint c) {
  terminal_.push_back(std::move(c));
  return *this;
}

ConstraintSet& ConstraintSet::add(RunningConstraint c) {
  running_.push_back(std::move(c));
  return *this;
}

Eigen::VectorXd ConstraintSet::targets() const {
  Eigen::VectorXd t(static_cast<Eigen::Index>(size()));
  Eigen::Index k = 0;
  for (const auto& c : terminal_) t(k++) = c.target;
  for (const auto& c : running_) t(k++) = c.target;
  return t;
}

std::vector<std::string> ConstraintSet::labels() const {
  std::vector<std::string> out;
  for (const auto& c : terminal_) out.push_back(c.label);
  for (const auto& c : running_) out.push_back(c.label);
  return out;
}

void ConstraintSet::set_targets(const Eigen::VectorXd& targets) {
  if (static_cast<std::size_t>(targets.size()) != size()) {
    throw DomainError("constraint_model", "target vector length does not match the constraint set");
  }
  Eigen::Index k = 0;
  for (auto& c : terminal_) c.target = targets(k++);
  for (auto& c : running_) c.target = targets(k++);
}

void ConstraintSet::validate(std::size_t dim, std::span<const double> probe_states) const {
  if (empty()) throw DomainError("constraint_model", "constraint set is empty");
  for (const auto& c : terminal_) {
    if (!c.f) throw DomainError("constraint_model", "terminal constraint '" + c.label + "' has no f");
    if (!std::isfinite(c.target)) {
      throw DomainError("constraint_model", "terminal constraint '" + c.label + "' target non-finite");
    }
  }
  for (const auto& c : running_) {
    if (!c.g) throw DomainError("constraint_model", "running constraint '" + c.label + "' has no g");
    if (!std::isfinite(c.target)) {
      throw DomainError("constraint_model", "running constraint '" + c.label + "' target non-finite");
    }
  }
  if (dim == 0 || probe_states.size() % dim != 0) {
    throw DomainError("constraint_model", "probe states must be a multiple of the state dimension");
  }
  for (std::size_t p = 0; p < probe_states.size(); p += dim) {
    const auto x = probe_states.subspan(p, dim);
    for (const auto& c : terminal_) {
      if (!std::isfinite(c.f(x))) {
        throw DomainError("constraint_model", "terminal constraint '" + c.label + "' non-finite on probe point");
      }
    }
    for (const auto& c : running_) {
      if (!std::isfinite(c.g(x))) {
        throw DomainError("constraint_model", "running constraint '" + c.label + "' non-finite on probe point");
      }
    }
  }
}

Eigen::MatrixXd FunctionalSamples::centered() const {
  return values.rowwise() - targets.transpose();
}

void evaluate_path(const ConstraintSet& constraints, std::span<const double> times,
                   std::span<const double> states, std::size_t dim, std::span<double> out) {
  const std::size_t n_steps = times.size() - 1;
  const auto terminal = states.subspan(n_steps * dim, dim);
  std::size_t col = 0;
  for (const auto& c : constraints.terminal()) out[col++] = c.f(terminal);
  for (const auto& c : constraints.running()) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n_steps; ++k) {
      acc += c.g(states.subspan(k * dim, dim)) * (times[k + 1] - times[k]);
    }
    out[col++] = acc;
  }
}

namespace {

FunctionalSamples empty_samples(const ConstraintSet& constraints, std::size_t n_paths,
                                SeedManifest source) {
  if (constraints.empty()) throw DomainError("constraint_model", "constraint set is empty");
  if (n_paths == 0) throw DomainError("constraint_model", "ensemble is empty");
  FunctionalSamples s;
  s.values.resize(static_cast<Eigen::Index>(n_paths), static_cast<Eigen::Index>(constraints.size()));
  s.targets = constraints.targets();
  s.labels = constraints.labels();
  s.r1 = constraints.r1();
  s.source = source;
  return s;
}

void store_row(FunctionalSamples& s, std::size_t p, std::span<const double> row) {
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (!std::isfinite(row[j])) {
      throw EvaluationError("constraint_model", p, "column " + std::to_string(j) + " ('" + s.labels[j] + "')");
    }
    s.values(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j)) = row[j];
  }
}

}  // namespace

FunctionalSamples evaluate_functionals(const PathEnsemble& ensemble, const ConstraintSet& constraints) {
  FunctionalSamples s = empty_samples(constraints, ensemble.n_paths(), ensemble.seed_manifest());
  parallel_for(ensemble.n_paths(), [&](std::size_t begin, std::size_t end) {
    std::vector<double> row(constraints.size());
    for (std::size_t p = begin; p < end; ++p) {
      evaluate_path(constraints, ensemble.times(), ensemble.path(p), ensemble.dim(), row);
      store_row(s, p, row);
    }
  });
  return s;
}

FunctionalSamples simulate_functionals(const ProcessSpec& spec, const TiltFields& tilt,
                                       std::size_t n_steps, std::size_t n_paths,
                                       std::uint64_t seed, const ConstraintSet& constraints) {
  FunctionalSamples s = empty_samples(constraints, n_paths, SeedManifest{seed, 0});
  const std::size_t dim = spec.dim_state();
  simulate_streaming(spec, tilt, n_steps, n_paths, seed,
                     [&](std::size_t p, std::span<const double> times, std::span<const double> states) {
                       std::vector<double> row(constraints.size());
                       evaluate_path(constraints, times, states, dim, row);
                       store_row(s, p, row);
                     });
  return s;
}

SampleMoments sample_moments(const FunctionalSamples& samples) {
  const std::size_t n = samples.n_paths();
  const std::size_t r = samples.size();
  if (n < 2) throw DomainError("constraint_model", "sample moments need at least 2 paths");
  SampleMoments m;
  m.mean.resize(static_cast<Eigen::Index>(r));
  std::vector<std::vector<double>> cols(r, std::vector<double>(n));
  for (std::size_t j = 0; j < r; ++j) {
    for (std::size_t i = 0; i < n; ++i) cols[j][i] = samples.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    m.mean(static_cast<Eigen::Index>(j)) = pairwise_sum(cols[j]) / static_cast<double>(n);
    const double mu = m.mean(static_cast<Eigen::Index>(j));
    for (auto& v : cols[j]) v -= mu;
  }
  m.covariance.resize(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r));
  for (std::size_t j = 0; j < r; ++j) {
    for (std::size_t k = j; k < r; ++k) {
      const double c = pairwise_dot(cols[j], cols[k]) / static_cast<double>(n - 1);
      m.covariance(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = c;
      m.covariance(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = c;
    }
  }
  for (std::size_t j = 0; j < r; ++j) {
    const double v = m.covariance(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
    const double scale = std::max(1.0, std::abs(m.mean(static_cast<Eigen::Index>(j))));
    if (!(v > 1e-28 * scale * scale)) {
      throw DegenerateConstraint("constraint_model", j, j < samples.labels.size() ? samples.labels[j] : "");
    }
  }
  return m;
}

FunctionalSamples make_samples(Eigen::MatrixXd values, Eigen::VectorXd targets,
                               std::vector<std::string> labels, std::size_t r1) {
  if (values.cols() != targets.size()) {
    throw DomainError("constraint_model", "values and targets disagree on the constraint count");
  }
  if (values.rows() == 0 || values.cols() == 0) throw DomainError("constraint_model", "empty sample matrix");
  if (!values.allFinite() || !targets.allFinite()) {
    throw DomainError("constraint_model", "sample matrix holds non-finite entries");
  }
  FunctionalSamples s;
  s.values = std::move(values);
  s.targets = std::move(targets);
  s.r1 = r1 == 0 ? static_cast<std::size_t>(s.values.cols()) : r1;
  if (labels.empty()) {
    for (Eigen::Index j = 0; j < s.values.cols(); ++j) labels.push_back("c" + std::to_string(j));
  }
  s.labels = std::move(labels);
  return s;
}

TerminalConstraint mean_constraint(double target, std::size_t component) {
  return {"mean", [component](std::span<const double> x) { return x[component]; }, target, {}};
}

TerminalConstraint second_moment_constraint(double target, std::size_t component) {
  return {"second_moment",
          [component](std::span<const double> x) { return x[component] * x[component]; }, target, {}};
}

TerminalConstraint var_constraint(double level, double probability, std::size_t component) {
  if (!(probability > 0.0 && probability < 1.0)) {
    throw DomainError("constraint_model", "VaR probability must lie in (0, 1)");
  }
  return {"var(q=" + fmt(level) + ")",
          [component, level](std::span<const double> x) { return x[component] <= level ? 1.0 : 0.0; },
          probability, IndicatorHint{-std::numeric_limits<double>::infinity(), level}};
}

TerminalConstraint band_constraint(double q1, double q2, double probability, std::size_t component) {
  if (!(q1 < q2)) throw DomainError("constraint_model", "band needs q1 < q2");
  if (!(probability > 0.0 && probability < 1.0)) {
    throw DomainError("constraint_model", "band probability must lie in (0, 1)");
  }
  return {"band(" + fmt(q1) + "," + fmt(q2) + ")",
          [component, q1, q2](std::span<const double> x) {
            return (x[component] > q1 && x[component] <= q2) ? 1.0 : 0.0;
          },
          probability, IndicatorHint{q1, q2}};
}

RunningConstraint barrier_time_constraint(double level, double target, std::size_t component) {
  return {"barrier_time(" + fmt(level) + ")",
          [component, level](std::span<const double> x) { return x[component] <= level ? 1.0 : 0.0; },
          target, IndicatorHint{-std::numeric_limits<double>::infinity(), level}};
}

ConstraintSet two_var_constraints(double q1, double q2, double beta1, double beta2) {
  if (!(0.0 < beta1 && beta1 < beta2 && beta2 < 1.0)) {
    throw DomainError("constraint_model", "two-VaR levels need 0 < beta1 < beta2 < 1");
  }
  ConstraintSet set;
  set.add(var_constraint(q1, beta1));
  set.add(band_constraint(q1, q2, beta2 - beta1));
  return set;
}

}  // namespace minkl
