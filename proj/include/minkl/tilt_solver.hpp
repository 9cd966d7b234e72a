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

#ifndef MINKL_TILT_SOLVER_HPP
#define MINKL_TILT_SOLVER_HPP

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include "minkl/constraint_model.hpp"

namespace minkl {

struct CgfResult {
  double value = 0.0;    // log mean exp(a . X)
  Eigen::VectorXd grad;  // tilted mean of X
  Eigen::MatrixXd hess;  // tilted covariance of X (1/n normalized)
  double ess = 0.0;
  std::vector<std::string> warnings;
};

/// Cumulant generating function of X = values - targets on the empirical measure.
CgfResult cgf_eval(const FunctionalSamples& samples, const Eigen::VectorXd& a);

struct SolverOptions {
  double tol = 1e-8;         // on max |residual| / sd, per column
  int max_iter = 100;
  double eta_cap = 1e3;      // on standardized multipliers
  double max_condition = 1e12;
};

struct TiltSolution {
  Eigen::VectorXd eta;
  std::vector<double> weights;  // sum to 1
  double kl = 0.0;
  Eigen::VectorXd residual;     // E^Q[F] - targets, original units
  Eigen::VectorXd std_residual; // residual / column sd
  int iterations = 0;
  bool converged = false;
  double ess = 0.0;
  std::vector<std::string> warnings;
};

/// Minimizes a -> log mean exp(-a . X) by damped Newton on standardized columns.
TiltSolution solve_multipliers(const FunctionalSamples& samples, const SolverOptions& options = {});

/// Same projection starting from a reference measure with per-path log weights
/// (unnormalized). KL in the result is still measured against the uniform measure.
TiltSolution solve_multipliers(const FunctionalSamples& samples, std::span<const double> log_prior,
                               const SolverOptions& options = {});

/// Weights proportional to exp(-eta . X), summing to 1.
std::vector<double> rn_weights(const FunctionalSamples& samples, const Eigen::VectorXd& eta);
std::vector<double> rn_weights(const FunctionalSamples& samples, const Eigen::VectorXd& eta,
                               std::span<const double> log_prior);

/// sum_i w_i log(w_i n_paths), with 0 log 0 = 0.
double kl_divergence(std::span<const double> weights, std::size_t n_paths);

double weighted_expectation(std::span<const double> weights, std::span<const double> values);
/// Weighted mean of every constraint column.
Eigen::VectorXd weighted_expectations(std::span<const double> weights, const FunctionalSamples& samples);

/// 1 / sum w_i^2.
double effective_sample_size(std::span<const double> weights);

/// First-order multiplier -C^{-1} delta eps.
Eigen::VectorXd perturbation_multiplier(const Eigen::MatrixXd& C, const Eigen::VectorXd& delta, double eps);
/// eps^2 delta' C^{-1} delta.
double perturbation_kl(const Eigen::MatrixXd& C, const Eigen::VectorXd& delta, double eps);

}  // namespace minkl

#endif
