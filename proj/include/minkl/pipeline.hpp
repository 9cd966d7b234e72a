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

#ifndef MINKL_PIPELINE_HPP
#define MINKL_PIPELINE_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "minkl/calibrate_io.hpp"
#include "minkl/constraint_model.hpp"
#include "minkl/pde_engine.hpp"
#include "minkl/sde_core.hpp"

namespace minkl {

/// A constraint parsed from text, e.g. "var(level=0.9,shift=+10%)". Targets
/// given relative to the reference (shift, scale) are resolved by the pipeline.
struct ConstraintRequest {
  enum class Kind { var, mean, second_moment, barrier_time };
  enum class Mode { absolute, shift, scale };

  Kind kind = Kind::mean;
  std::string text;
  double level = 0.0;  // var: probability level; barrier_time: barrier
  Mode mode = Mode::absolute;
  double value = 0.0;  // absolute target / quantile, shift fraction, or scale factor
};

ConstraintRequest parse_constraint(const std::string& text);

struct ModelConfig {
  std::string source = "builtin";  // builtin | fitted
  std::string kind = "ou";         // builtin: brownian | ou
  double kappa = 1.0;              // ou mean reversion speed
  double theta = 0.0;              // ou mean level
  double sigma = 1.0;
  std::string path;                // fitted model CSV
  double x0 = 0.0;
  double horizon = 1.0;
};

struct RunConfig {
  std::string engine = "mc";  // mc | pde
  ModelConfig model;
  std::vector<std::string> constraints;
  std::size_t n_paths = 100000;
  std::size_t n_steps = 200;
  std::uint64_t seed = 42;
  double mc_tol = 1e-8;
  int mc_max_iter = 100;
  // PDE grid; a zero half-width picks 8 sd of the terminal law around x0.
  double pde_half_width = 0.0;
  std::size_t pde_n_x = 401;
  std::size_t pde_n_t = 400;
  double pde_tol = 1e-4;
  int pde_max_outer = 50;
  std::size_t hist_bins = 50;
  std::size_t tau_bins = 10;
};

/// Reads a JSON config; unknown keys are rejected.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& json_text);
/// Fully resolved config, defaults included.
std::string config_json(const RunConfig& config);

struct Histogram {
  std::string label;
  std::vector<double> edges;
  std::vector<double> mass_p;
  std::vector<double> mass_q;
};

struct RunReport {
  RunConfig config;
  std::string engine;
  bool converged = false;
  std::vector<std::string> labels;
  Eigen::VectorXd reference;  // E^P of each constraint functional
  Eigen::VectorXd targets;
  Eigen::VectorXd eta;
  Eigen::VectorXd achieved;   // E^Q of each constraint functional
  Eigen::VectorXd residual;
  double kl = 0.0;
  double kl_mc = 0.0;  // pde engine: Girsanov estimate along the tilted paths
  double ess = 0.0;
  int iterations = 0;
  std::vector<std::string> warnings;
  std::vector<Histogram> histograms;  // X_T first, then one per barrier
  std::optional<FieldTX> lambda;
  std::optional<FittedModel> fitted;
  std::map<std::string, double> grid;  // pde diagnostics
};

ProcessSpec build_model(const ModelConfig& model, std::optional<FittedModel>* fitted = nullptr);

RunReport run_pipeline(const RunConfig& config);

/// Writes manifest.json, hist_*.csv, lambda.csv and model.csv as applicable and
/// returns the file names written, sorted.
std::vector<std::string> export_report(const RunReport& report, const std::filesystem::path& out_dir);

std::string manifest_json(const RunReport& report);

/// Exit status for the CLI: 0 converged, 2 not converged.
int exit_status(const RunReport& report);

}  // namespace minkl

#endif
