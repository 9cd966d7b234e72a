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

#ifndef MINKL_PDE_ENGINE_HPP
#define MINKL_PDE_ENGINE_HPP

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

#include "minkl/constraint_model.hpp"
#include "minkl/sde_core.hpp"

namespace minkl {

struct Grid {
  double x_min = -4.0;
  double x_max = 4.0;
  std::size_t n_x = 401;
  std::size_t n_t = 400;
  double T = 1.0;

  [[nodiscard]] double dx() const { return (x_max - x_min) / static_cast<double>(n_x - 1); }
  [[nodiscard]] double dt() const { return T / static_cast<double>(n_t); }
  [[nodiscard]] double x(std::size_t i) const { return x_min + static_cast<double>(i) * dx(); }
  [[nodiscard]] double t(std::size_t k) const { return T * static_cast<double>(k) / static_cast<double>(n_t); }

  /// Shape checks; throws DomainError.
  void validate() const;
  /// Requires [x0 - 4 sigma0 sqrt(T), x0 + 4 sigma0 sqrt(T)] inside the grid.
  void check_margin(double x0, double sigma0) const;
};

/// Values on the (time, space) lattice; row k holds time t_k.
struct FieldTX {
  Grid grid;
  std::string label;
  Eigen::MatrixXd values;  // (n_t + 1) x n_x

  /// Bilinear interpolation; throws ExtrapolationError outside the grid.
  [[nodiscard]] double at(double t, double x) const;
  /// Bilinear interpolation with both coordinates clamped to the grid.
  [[nodiscard]] double at_clamped(double t, double x) const;
  /// Linear interpolation in x at t = 0.
  [[nodiscard]] double initial(double x) const;

  [[nodiscard]] std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
  static FieldTX read_csv(const std::filesystem::path& path);
};

/// Boundary rule for omega. log_quadratic extrapolates log omega with constant curvature,
/// which keeps Gaussian-type growth from being reflected back into the domain.
/// Error fields k and ell always use a reflecting boundary.
enum class PdeBoundary { log_quadratic, neumann };

struct PdeOptions {
  double theta = 0.5;  // Crank-Nicolson
  PdeBoundary boundary = PdeBoundary::log_quadratic;
  double sigma_min = 1e-6;
  bool smooth_indicators = true;
};

/// Result of a backward solve, with the theta actually used.
struct OmegaSolve {
  FieldTX omega;
  double theta = 0.5;
};

/// omega(t, x) = E_{t,x}[exp(-eta1 . (f(X_T) - c) - eta2 . int_t^T (g(X_s) - d / T) ds)].
OmegaSolve solve_omega_detailed(const Grid& grid, const ScalarField& mu, const ScalarField& sigma,
                                const Eigen::VectorXd& eta1, const Eigen::VectorXd& eta2,
                                const ConstraintSet& constraints, const PdeOptions& options = {});
FieldTX solve_omega(const Grid& grid, const ScalarField& mu, const ScalarField& sigma,
                    const Eigen::VectorXd& eta1, const Eigen::VectorXd& eta2,
                    const ConstraintSet& constraints, const PdeOptions& options = {});

/// lambda(t, x) = -sigma(t, x) d/dx log omega(t, x).
FieldTX drift_adjustment(const FieldTX& omega, const ScalarField& sigma);

/// k_j with terminal data f_j - c_j under drift mu - sigma lambda; one field per terminal constraint.
std::vector<FieldTX> solve_terminal_error(const Grid& grid, const ScalarField& mu, const ScalarField& sigma,
                                          const FieldTX& lambda, const ConstraintSet& constraints,
                                          const PdeOptions& options = {});

/// ell_i with source g_i and zero terminal data; ell_i(0, x0) estimates E^Q[int g_i].
std::vector<FieldTX> solve_running_error(const Grid& grid, const ScalarField& mu, const ScalarField& sigma,
                                         const FieldTX& lambda, const ConstraintSet& constraints,
                                         const PdeOptions& options = {});

/// Reference standard deviations of each constraint functional under the model, from
/// first and second moment solves. Used to standardize residuals.
Eigen::VectorXd reference_moments_sd(const Grid& grid, const ScalarField& mu, const ScalarField& sigma,
                                     double x0, const ConstraintSet& constraints,
                                     Eigen::VectorXd* means = nullptr, const PdeOptions& options = {});

struct CalibrationOptions {
  double tol = 1e-4;  // max |residual| / reference sd
  int max_outer = 50;
  double bump = 1e-4;
  PdeOptions pde;
};

struct CalibrationReport {
  Eigen::VectorXd eta;
  Eigen::VectorXd residual;      // original units
  Eigen::VectorXd std_residual;  // residual / scale
  Eigen::VectorXd scale;
  int iterations = 0;
  bool converged = false;
  double theta = 0.5;
  std::vector<double> residual_history;  // max |std residual| per outer iterate
  std::vector<std::string> warnings;
};

struct CalibrationResult {
  Eigen::VectorXd eta;
  FieldTX omega;
  FieldTX lambda;
  CalibrationReport report;
};

/// Outer loop: damped Newton on eta -> (k(0, x0), ell(0, x0) - d) with a
/// forward-difference Jacobian.
CalibrationResult calibrate_multipliers(const Grid& grid, const ScalarField& mu, const ScalarField& sigma,
                                        double x0, const ConstraintSet& constraints,
                                        const CalibrationOptions& options = {});

enum class Extrapolation { error, clamp };

/// Tilt for sde_core from a lambda field (1-D models).
TiltFields lambda_tilt(const FieldTX& lambda, Extrapolation mode = Extrapolation::clamp);

}  // namespace minkl

#endif
