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

#include "minkl/tilt_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "minkl/errors.hpp"
#include "minkl/numerics.hpp"

namespace minkl {

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 60;
constexpr double kGradientRegime = 1e-3;

/// Column-major copy of the centered sample matrix, optionally scaled per column.
struct Columns {
  std::size_t n = 0;
  std::size_t r = 0;
  std::vector<std::vector<double>> data;
};

Columns centered_columns(const FunctionalSamples& s, const Eigen::VectorXd& scale) {
  Columns c;
  c.n = s.n_paths();
  c.r = s.size();
  c.data.assign(c.r, std::vector<double>(c.n));
  for (std::size_t j = 0; j < c.r; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double inv = 1.0 / scale(jj);
    for (std::size_t i = 0; i < c.n; ++i) {
      c.data[j][i] = (s.values(static_cast<Eigen::Index>(i), jj) - s.targets(jj)) * inv;
    }
  }
  return c;
}

/// Log of unnormalized weights: log_prior - a . X, plus the log-sum-exp pieces.
struct Exponent {
  std::vector<double> u;
  double max = 0.0;
  double log_sum = 0.0;  // log sum exp(u)
};

Exponent exponent(const Columns& c, const Eigen::VectorXd& a, std::span<const double> log_prior) {
  Exponent e;
  e.u.assign(c.n, 0.0);
  if (!log_prior.empty()) std::copy(log_prior.begin(), log_prior.end(), e.u.begin());
  for (std::size_t j = 0; j < c.r; ++j) {
    const double aj = a(static_cast<Eigen::Index>(j));
    if (aj == 0.0) continue;
    for (std::size_t i = 0; i < c.n; ++i) e.u[i] -= aj * c.data[j][i];
  }
  e.max = *std::max_element(e.u.begin(), e.u.end());
  if (!std::isfinite(e.max)) throw DomainError("tilt_solver", "non-finite tilt exponent");
  std::vector<double> ex(c.n);
  for (std::size_t i = 0; i < c.n; ++i) ex[i] = std::exp(e.u[i] - e.max);
  e.log_sum = e.max + std::log(pairwise_sum(ex));
  return e;
}

std::vector<double> normalized(const Exponent& e) {
  std::vector<double> w(e.u.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(e.u[i] - e.log_sum);
  const double s = pairwise_sum(w);
  for (auto& v : w) v /= s;
  return w;
}

void moments(const Columns& c, const std::vector<double>& w, Eigen::VectorXd& mean, Eigen::MatrixXd& cov) {
  mean.resize(static_cast<Eigen::Index>(c.r));
  cov.resize(static_cast<Eigen::Index>(c.r), static_cast<Eigen::Index>(c.r));
  std::vector<std::vector<double>> dev(c.r, std::vector<double>(c.n));
  for (std::size_t j = 0; j < c.r; ++j) {
    const double m = pairwise_dot(c.data[j], w);
    mean(static_cast<Eigen::Index>(j)) = m;
    for (std::size_t i = 0; i < c.n; ++i) dev[j][i] = (c.data[j][i] - m) * w[i];
  }
  for (std::size_t j = 0; j < c.r; ++j) {
    for (std::size_t k = j; k < c.r; ++k) {
      std::vector<double> col_k(c.n);
      for (std::size_t i = 0; i < c.n; ++i) col_k[i] = c.data[k][i] - mean(static_cast<Eigen::Index>(k));
      const double v = pairwise_dot(dev[j], col_k);
      cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = v;
      cov(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = v;
    }
  }
}

void ess_warnings(double ess, std::size_t n, std::vector<std::string>& warnings) {
  if (ess < 10.0) {
    warnings.push_back("tilt saturation: effective sample size " + std::to_string(ess) + " < 10");
  } else if (ess < 0.1 * static_cast<double>(n)) {
    warnings.push_back("low effective sample size " + std::to_string(ess) + " (< 10% of " +
                       std::to_string(n) + " paths)");
  }
}

Eigen::VectorXd column_sd(const FunctionalSamples& s) {
  const SampleMoments m = sample_moments(s);
  return m.covariance.diagonal().cwiseSqrt();
}

}  // namespace

CgfResult cgf_eval(const FunctionalSamples& samples, const Eigen::VectorXd& a) {
  if (static_cast<std::size_t>(a.size()) != samples.size() || !a.allFinite()) {
    throw DomainError("tilt_solver", "cgf argument must be finite with one entry per constraint");
  }
  const Columns c = centered_columns(samples, Eigen::VectorXd::Ones(a.size()));
  const Exponent e = exponent(c, -a, {});
  CgfResult out;
  out.value = e.log_sum - std::log(static_cast<double>(c.n));
  const auto w = normalized(e);
  moments(c, w, out.grad, out.hess);
  out.ess = effective_sample_size(w);
  ess_warnings(out.ess, c.n, out.warnings);
  return out;
}

TiltSolution solve_multipliers(const FunctionalSamples& samples, const SolverOptions& options) {
  return solve_multipliers(samples, {}, options);
}

TiltSolution solve_multipliers(const FunctionalSamples& samples, std::span<const double> log_prior,
                               const SolverOptions& options) {
  if (!log_prior.empty() && log_prior.size() != samples.n_paths()) {
    throw DomainError("tilt_solver", "log prior needs one entry per path");
  }
  const Eigen::VectorXd sd = column_sd(samples);
  const Columns c = centered_columns(samples, sd);
  const auto r = static_cast<Eigen::Index>(c.r);
  for (std::size_t j = 0; j < c.r; ++j) {
    const auto [lo, hi] = std::minmax_element(c.data[j].begin(), c.data[j].end());
    if (!(*lo < 0.0 && *hi > 0.0)) {
      throw InfeasibleTarget("tilt_solver", "target of '" + samples.labels[j] +
                                                "' lies outside the open range of its samples");
    }
  }

  Eigen::VectorXd a = Eigen::VectorXd::Zero(r);
  Exponent e = exponent(c, a, log_prior);
  std::vector<double> w = normalized(e);
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  moments(c, w, mean, cov);

  TiltSolution sol;
  int it = 0;
  while (mean.cwiseAbs().maxCoeff() > options.tol) {
    if (it >= options.max_iter) break;
    ++it;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > options.max_condition) {
      throw IllConditioned("tilt_solver", "tilted covariance condition number " +
                                              std::to_string(lo > 0.0 ? hi / lo : INFINITY) +
                                              " exceeds limit; rescale or drop redundant constraints");
    }
    // Objective phi(a) = log sum prior * exp(-a . X); gradient -mean, Hessian cov.
    const Eigen::VectorXd dir =
        eig.eigenvectors() * (eig.eigenvectors().transpose() * mean).cwiseQuotient(eig.eigenvalues());
    if ((a + dir).cwiseAbs().maxCoeff() > options.eta_cap) {
      throw InfeasibleTarget("tilt_solver", "Newton step drives the multiplier past cap " +
                                                std::to_string(options.eta_cap) +
                                                "; targets look unattainable on the sample support");
    }
    const double slope = -mean.dot(dir);
    double step = 1.0;
    bool accepted = false;
    for (int h = 0; h < kMaxHalvings; ++h, step *= 0.5) {
      const Eigen::VectorXd trial = a + step * dir;
      Exponent et = exponent(c, trial, log_prior);
      bool ok = et.log_sum <= e.log_sum + kArmijo * step * slope;
      Eigen::VectorXd trial_mean;
      Eigen::MatrixXd trial_cov;
      std::vector<double> trial_w;
      if (!ok && mean.cwiseAbs().maxCoeff() < kGradientRegime) {
        // Objective decrease drowns in rounding near the optimum; fall back to the gradient norm.
        trial_w = normalized(et);
        moments(c, trial_w, trial_mean, trial_cov);
        ok = trial_mean.cwiseAbs().maxCoeff() < mean.cwiseAbs().maxCoeff();
      }
      if (ok) {
        a = trial;
        e = std::move(et);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no further progress at double precision
    w = normalized(e);
    moments(c, w, mean, cov);
  }

  sol.eta = a.cwiseQuotient(sd);
  sol.weights = std::move(w);
  sol.iterations = it;
  sol.std_residual = mean;
  sol.residual = mean.cwiseProduct(sd);
  sol.converged = mean.cwiseAbs().maxCoeff() <= options.tol;
  sol.kl = kl_divergence(sol.weights, c.n);
  sol.ess = effective_sample_size(sol.weights);
  ess_warnings(sol.ess, c.n, sol.warnings);
  if (!sol.converged) {
    sol.warnings.push_back("not converged after " + std::to_string(it) + " iterations");
  }
  return sol;
}

std::vector<double> rn_weights(const FunctionalSamples& samples, const Eigen::VectorXd& eta) {
  return rn_weights(samples, eta, {});
}

std::vector<double> rn_weights(const FunctionalSamples& samples, const Eigen::VectorXd& eta,
                               std::span<const double> log_prior) {
  if (static_cast<std::size_t>(eta.size()) != samples.size() || !eta.allFinite()) {
    throw DomainError("tilt_solver", "eta must be finite with one entry per constraint");
  }
  const Columns c = centered_columns(samples, Eigen::VectorXd::Ones(eta.size()));
  return normalized(exponent(c, eta, log_prior));
}

double kl_divergence(std::span<const double> weights, std::size_t n_paths) {
  std::vector<double> terms(weights.size());
  const double n = static_cast<double>(n_paths);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    terms[i] = weights[i] > 0.0 ? weights[i] * std::log(weights[i] * n) : 0.0;
  }
  return std::max(0.0, pairwise_sum(terms));
}

double weighted_expectation(std::span<const double> weights, std::span<const double> values) {
  return pairwise_dot(values, weights);
}

Eigen::VectorXd weighted_expectations(std::span<const double> weights, const FunctionalSamples& samples) {
  if (weights.size() != samples.n_paths()) throw DomainError("tilt_solver", "weights/path count mismatch");
  Eigen::VectorXd out(static_cast<Eigen::Index>(samples.size()));
  std::vector<double> col(samples.n_paths());
  for (Eigen::Index j = 0; j < out.size(); ++j) {
    for (std::size_t i = 0; i < col.size(); ++i) col[i] = samples.values(static_cast<Eigen::Index>(i), j);
    out(j) = pairwise_dot(col, weights);
  }
  return out;
}

double effective_sample_size(std::span<const double> weights) {
  return 1.0 / pairwise_dot(weights, weights);
}

namespace {

Eigen::VectorXd solve_checked(const Eigen::MatrixXd& C, const Eigen::VectorXd& delta, const char* module) {
  if (C.rows() != C.cols() || C.rows() != delta.size()) {
    throw DomainError(module, "covariance and delta dimensions disagree");
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(C);
  if (!lu.isInvertible()) throw SingularMatrix(module, "constraint covariance is singular");
  return lu.solve(delta);
}

}  // namespace

Eigen::VectorXd perturbation_multiplier(const Eigen::MatrixXd& C, const Eigen::VectorXd& delta, double eps) {
  return -eps * solve_checked(C, delta, "tilt_solver");
}

double perturbation_kl(const Eigen::MatrixXd& C, const Eigen::VectorXd& delta, double eps) {
  return eps * eps * delta.dot(solve_checked(C, delta, "tilt_solver"));
}

}  // namespace minkl
