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

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "minkl/calibrate_io.hpp"
#include "minkl/errors.hpp"
#include "minkl/pde_engine.hpp"
#include "minkl/pipeline.hpp"

namespace {

constexpr int kExitOther = 1;
constexpr int kExitInfeasible = 3;
constexpr int kExitInput = 4;

/// --model accepts a builtin kind or a fitted-model CSV path.
void apply_model(minkl::RunConfig& cfg, const std::string& model) {
  if (model.empty()) return;
  if (model == "ou" || model == "brownian") {
    cfg.model.source = "builtin";
    cfg.model.kind = model;
  } else {
    cfg.model.source = "fitted";
    cfg.model.path = model;
  }
}

void print_summary(const minkl::RunReport& r) {
  std::printf("engine     %s\n", r.engine.c_str());
  std::printf("status     %s (%d iterations)\n", r.converged ? "converged" : "NOT converged", r.iterations);
  std::printf("kl         %.10g\n", r.kl);
  if (r.engine == "mc") std::printf("ess        %.6g\n", r.ess);
  for (std::size_t i = 0; i < r.labels.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    std::printf("%-36s ref %-12.6g target %-12.6g eta %-12.6g residual %.3g\n", r.labels[i].c_str(),
                r.reference(k), r.targets(k), r.eta(k), r.residual(k));
  }
  for (const auto& w : r.warnings) std::printf("warning: %s\n", w.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"minkl: minimum-KL measures under expectation constraints"};
  app.require_subcommand(1);

  // fit
  auto* fit = app.add_subcommand("fit", "Fit a binned drift/volatility model to a price series");
  std::string fit_csv, fit_out = "model.csv";
  std::size_t fit_bins = 20;
  minkl::FitOptions fit_opt;
  fit->add_option("csv", fit_csv, "CSV with header 'timestamp,value'")->required();
  fit->add_option("--bins", fit_bins, "Number of state bins")->capture_default_str();
  fit->add_option("--out", fit_out, "Output model CSV")->capture_default_str();
  fit->add_option("--min-count", fit_opt.min_count, "Increments needed for a bin to be fitted")->capture_default_str();
  fit->add_option("--sigma-floor", fit_opt.sigma_floor, "Lower bound on fitted volatility")->capture_default_str();
  fit->add_option("--time-scale", fit_opt.time_scale, "Timestamp units per model time unit")->capture_default_str();

  // solve / report share the run options
  minkl::RunConfig cfg;
  std::string config_path, model, out_dir;
  std::vector<std::string> constraints;
  std::string engine;
  double tol = 0.0;
  auto add_run_options = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run config");
    sub->add_option("--model", model, "ou | brownian | path to a fitted model CSV");
    sub->add_option("--engine", engine, "mc | pde")->check(CLI::IsMember({"mc", "pde"}));
    sub->add_option("--constraint", constraints, "e.g. \"var(level=0.9,shift=+10%)\"");
    sub->add_option("--tol", tol, "Solver tolerance (standardized units)");
    sub->add_option("--seed", cfg.seed, "Base seed");
    sub->add_option("--paths", cfg.n_paths, "Monte Carlo paths");
    sub->add_option("--steps", cfg.n_steps, "Time steps per path");
    sub->add_option("--x0", cfg.model.x0, "Initial state");
    sub->add_option("--horizon", cfg.model.horizon, "Horizon T");
  };
  auto* solve = app.add_subcommand("solve", "Solve for the minimum-KL measure and print a summary");
  add_run_options(solve);
  solve->add_option("--out", out_dir, "Also write report artifacts here");
  auto* report = app.add_subcommand("report", "Solve and write report artifacts");
  add_run_options(report);
  report->add_option("--out", out_dir, "Output directory")->required();

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate terminal values under a grid tilt");
  std::string sim_model = "ou", tilt_path, sim_out = "terminal.csv";
  std::size_t sim_paths = 10000, sim_steps = 200;
  std::uint64_t sim_seed = 42;
  double sim_x0 = 0.0, sim_T = 1.0;
  sim->add_option("--model", sim_model, "ou | brownian | fitted model CSV")->capture_default_str();
  sim->add_option("--tilt", tilt_path, "lambda.csv from a pde report; omitted means the reference measure");
  sim->add_option("--paths", sim_paths)->capture_default_str();
  sim->add_option("--steps", sim_steps)->capture_default_str();
  sim->add_option("--seed", sim_seed)->capture_default_str();
  sim->add_option("--x0", sim_x0)->capture_default_str();
  sim->add_option("--horizon", sim_T)->capture_default_str();
  sim->add_option("--out", sim_out)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*fit) {
      const minkl::SeriesData series = minkl::read_series_csv(fit_csv);
      const minkl::FittedModel fm = minkl::fit_drift_vol(series, fit_bins, fit_opt);
      fm.save_csv(fit_out);
      std::printf("fitted %zu bins (%zu occupied) -> %s\n", fm.bins().size(), fm.occupied(), fit_out.c_str());
      return 0;
    }
    if (*sim) {
      minkl::ModelConfig mc;
      mc.x0 = sim_x0;
      mc.horizon = sim_T;
      minkl::RunConfig tmp;
      tmp.model = mc;
      apply_model(tmp, sim_model);
      const minkl::ProcessSpec spec = minkl::build_model(tmp.model);
      minkl::TiltFields tilt;
      if (!tilt_path.empty()) tilt = minkl::lambda_tilt(minkl::FieldTX::read_csv(tilt_path));
      const minkl::PathEnsemble ens = minkl::simulate_tilted_paths(spec, tilt, sim_steps, sim_paths, sim_seed);
      std::ofstream os(sim_out, std::ios::binary);
      if (!os) throw minkl::InputError("calibrate_io", "cannot write " + sim_out);
      os << "path,x_T\n";
      char buf[64];
      for (std::size_t p = 0; p < ens.n_paths(); ++p) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", p, ens.terminal(p)[0]);
        os << buf;
      }
      std::printf("wrote %zu terminal values -> %s\n", ens.n_paths(), sim_out.c_str());
      return 0;
    }
    // solve / report
    minkl::RunConfig run = cfg;
    if (!config_path.empty()) {
      // The file is the base; flags given on the command line override it.
      minkl::RunConfig base = minkl::load_config(config_path);
      CLI::App* sub = *solve ? solve : report;
      if (sub->count("--seed")) base.seed = cfg.seed;
      if (sub->count("--paths")) base.n_paths = cfg.n_paths;
      if (sub->count("--steps")) base.n_steps = cfg.n_steps;
      if (sub->count("--x0")) base.model.x0 = cfg.model.x0;
      if (sub->count("--horizon")) base.model.horizon = cfg.model.horizon;
      run = base;
    }
    apply_model(run, model);
    if (!engine.empty()) run.engine = engine;
    if (!constraints.empty()) run.constraints = constraints;
    if (tol > 0.0) {
      if (run.engine == "mc") run.mc_tol = tol;
      else run.pde_tol = tol;
    }
    const minkl::RunReport rep = minkl::run_pipeline(run);
    print_summary(rep);
    if (!out_dir.empty()) {
      for (const auto& f : minkl::export_report(rep, out_dir)) std::printf("wrote %s/%s\n", out_dir.c_str(), f.c_str());
    }
    return minkl::exit_status(rep);
  } catch (const minkl::InfeasibleTarget& e) {
    std::fprintf(stderr, "infeasible: %s\n", e.what());
    return kExitInfeasible;
  } catch (const minkl::InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitInput;
  } catch (const minkl::FitError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitInput;
  } catch (const minkl::DomainError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitOther;
  }
}
