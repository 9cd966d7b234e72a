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
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include "minkl/errors.hpp"
#include "minkl/pipeline.hpp"

using namespace minkl;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("minkl_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

RunConfig small_config() {
  RunConfig c;
  c.n_paths = 20000;
  c.n_steps = 50;
  c.seed = 7;
  c.pde_n_x = 201;
  c.pde_n_t = 100;
  return c;
}

}  // namespace

TEST_CASE("constraint text parsing") {
  const ConstraintRequest v = parse_constraint("var(level=0.9,shift=+10%)");
  CHECK(v.kind == ConstraintRequest::Kind::var);
  CHECK(v.level == 0.9);
  CHECK(v.mode == ConstraintRequest::Mode::shift);
  CHECK(v.value == doctest::Approx(0.1));

  const ConstraintRequest b = parse_constraint("barrier_time(level=-0.1,scale=0.5)");
  CHECK(b.kind == ConstraintRequest::Kind::barrier_time);
  CHECK(b.level == -0.1);
  CHECK(b.mode == ConstraintRequest::Mode::scale);
  CHECK(b.value == 0.5);

  const ConstraintRequest m = parse_constraint(" mean( target = 0.25 ) ");
  CHECK(m.kind == ConstraintRequest::Kind::mean);
  CHECK(m.mode == ConstraintRequest::Mode::absolute);
  CHECK(m.value == 0.25);
  CHECK(parse_constraint("var(level=0.5,quantile=1.5)").value == 1.5);
  CHECK(parse_constraint("second_moment(scale=50%)").value == doctest::Approx(0.5));

  for (const char* bad : {"foo(x=1)", "var(level=1.2,shift=1)", "var(level=0.5)", "mean(target=1,scale=2)",
                          "var(level=0.5,shift=1,bogus=2)", "mean target=1", "mean(target=abc)",
                          "barrier_time(target=0.2)", "mean(target=1,target=2)"}) {
    CHECK_THROWS_AS(parse_constraint(bad), InputError);
  }
}

TEST_CASE("config parsing is strict and round-trips") {
  RunConfig c = parse_config(R"j({"engine":"pde","model":{"kind":"brownian","x0":0.5},
                                 "constraints":["mean(target=0.1)"],"mc":{"n_paths":1000,"seed":3},
                                 "pde":{"n_x":101},"histogram":{"bins":20}})j");
  CHECK(c.engine == "pde");
  CHECK(c.model.kind == "brownian");
  CHECK(c.model.x0 == 0.5);
  CHECK(c.n_paths == 1000);
  CHECK(c.seed == 3);
  CHECK(c.pde_n_x == 101);
  CHECK(c.hist_bins == 20);
  CHECK(c.n_steps == 200);
  CHECK(config_json(parse_config(config_json(c))) == config_json(c));

  CHECK_THROWS_AS(parse_config(R"({"engin":"mc"})"), InputError);
  CHECK_THROWS_AS(parse_config(R"({"mc":{"paths":10}})"), InputError);
  CHECK_THROWS_AS(parse_config(R"({"engine":"mcmc"})"), InputError);
  CHECK_THROWS_AS(parse_config(R"({"mc":{"n_paths":"many"}})"), InputError);
  CHECK_THROWS_AS(parse_config("{not json"), InputError);
  CHECK_THROWS_AS(load_config(scratch("missing.json")), InputError);
}

TEST_CASE("reference targets give the null tilt") {
  RunConfig c = small_config();
  c.constraints = {"mean(shift=0)", "var(level=0.9,shift=0)", "barrier_time(level=-0.1,scale=1)"};
  const RunReport r = run_pipeline(c);
  CHECK(r.converged);
  CHECK(exit_status(r) == 0);
  CHECK(r.eta.cwiseAbs().maxCoeff() < 1e-8);
  CHECK(r.kl <= 1e-6);
  CHECK(r.ess == doctest::Approx(20000.0).epsilon(1e-6));
  CHECK((r.reference - r.targets).cwiseAbs().maxCoeff() < 1e-15);

  RunConfig p = c;
  p.engine = "pde";
  const RunReport rp = run_pipeline(p);
  CHECK(rp.converged);
  // PDE multipliers absorb the Monte Carlo and time-step error of the reference values.
  CHECK(rp.eta.cwiseAbs().maxCoeff() < 0.15);
  CHECK(rp.kl <= 1e-3);
  REQUIRE(rp.lambda.has_value());
}

TEST_CASE("shifted targets resolve against the reference") {
  RunConfig c = small_config();
  c.model.x0 = 1.0;
  c.constraints = {"barrier_time(level=0.5,scale=0.5)", "mean(shift=+10%)"};
  const RunReport r = run_pipeline(c);
  REQUIRE(r.converged);
  CHECK(r.labels[0] == "mean(shift=+10%)");
  CHECK(r.targets(0) == doctest::Approx(1.1 * r.reference(0)));
  CHECK(r.targets(1) == doctest::Approx(0.5 * r.reference(1)));
  CHECK(r.residual.cwiseAbs().maxCoeff() < 1e-6);
  REQUIRE(r.histograms.size() == 2);
  // Halving the time below the barrier moves occupation mass toward zero.
  CHECK(r.histograms[1].mass_q[0] > r.histograms[1].mass_p[0]);
  double total = 0.0;
  for (double m : r.histograms[1].mass_q) total += m;
  CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("quantile tilts push mass away from the median") {
  RunConfig c = small_config();
  c.engine = "pde";
  c.model.x0 = 1.0;
  c.constraints = {"var(level=0.5,shift=-10%)", "var(level=0.9,shift=+10%)"};
  const RunReport r = run_pipeline(c);
  REQUIRE(r.converged);
  REQUIRE(r.lambda.has_value());
  // The drift adjustment is -sigma lambda; sigma = 1 in the builtin OU.
  const double med = std::exp(-1.0);  // median of X_T for x0 = 1
  for (double t : {0.0, 0.5}) {
    CHECK(-r.lambda->at(t, med + 1.0) > 0.0);
    CHECK(-r.lambda->at(t, med - 1.0) < 0.0);
  }
  CHECK(r.kl > 0.0);
  CHECK(r.kl_mc == doctest::Approx(r.kl).epsilon(0.1));
}

TEST_CASE("artifacts are byte-stable and the output directory is created") {
  RunConfig c = small_config();
  c.engine = "pde";
  c.constraints = {"var(level=0.9,shift=+10%)", "barrier_time(level=-0.1,scale=0.5)"};
  const fs::path a = scratch("a") / "nested" / "dir";
  const fs::path b = scratch("b");
  const auto files = export_report(run_pipeline(c), a);
  const auto again = export_report(run_pipeline(c), b);
  CHECK(files == again);
  CHECK(files == std::vector<std::string>{"hist_XT.csv", "hist_tau.csv", "lambda.csv", "manifest.json"});
  for (const auto& f : files) CHECK(slurp(a / f) == slurp(b / f));
  CHECK(slurp(a / "manifest.json").find("\"kl_girsanov_mc\"") != std::string::npos);
  CHECK(FieldTX::read_csv(a / "lambda.csv").values.rows() == 101);

  RunConfig empty = small_config();
  const auto only = export_report(run_pipeline(empty), scratch("empty"));
  CHECK(only == std::vector<std::string>{"hist_XT.csv", "manifest.json"});

  const fs::path blocker = scratch("blocker");
  { std::ofstream(blocker) << "x"; }
  CHECK_THROWS_AS(export_report(run_pipeline(empty), blocker / "sub"), InputError);
  fs::remove_all(scratch("a"));
  fs::remove_all(b);
  fs::remove_all(scratch("empty"));
  fs::remove(blocker);
}

TEST_CASE("fitted models run end to end") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  std::vector<double> t(20000), x(20000);
  for (std::size_t i = 1; i < x.size(); ++i) {
    t[i] = 0.01 * static_cast<double>(i);
    x[i] = x[i - 1] - x[i - 1] * 0.01 + 0.1 * z(rng);
  }
  const fs::path dir = scratch("fitted");
  fs::create_directories(dir);
  fit_drift_vol(SeriesData(t, x), 15).save_csv(dir / "model.csv");

  RunConfig c = small_config();
  c.model.source = "fitted";
  c.model.path = (dir / "model.csv").string();
  c.model.horizon = 0.5;
  c.constraints = {"var(level=0.9,shift=+10%)"};
  const RunReport r = run_pipeline(c);
  CHECK(r.converged);
  REQUIRE(r.fitted.has_value());
  const auto files = export_report(r, dir / "out");
  CHECK(std::find(files.begin(), files.end(), "model.csv") != files.end());
  fs::remove_all(dir);

  c.model.path = (dir / "gone.csv").string();
  CHECK_THROWS_AS(run_pipeline(c), InputError);
}

TEST_CASE("infeasible targets surface as InfeasibleTarget") {
  RunConfig c = small_config();
  c.constraints = {"mean(target=25)"};
  CHECK_THROWS_AS(run_pipeline(c), InfeasibleTarget);
  c.engine = "pde";
  c.constraints = {"barrier_time(level=-0.1,target=1.5)"};
  CHECK_THROWS_AS(run_pipeline(c), InfeasibleTarget);
}
