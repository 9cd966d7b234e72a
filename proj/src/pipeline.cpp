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

#include "minkl/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "minkl/errors.hpp"
#include "minkl/numerics.hpp"
#include "minkl/tilt_solver.hpp"

namespace minkl {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

double parse_number(const std::string& raw, const std::string& ctx, bool allow_percent) {
  std::string s = trim(raw);
  double factor = 1.0;
  if (allow_percent && !s.empty() && s.back() == '%') {
    s.pop_back();
    factor = 0.01;
  }
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw InputError("calibrate_io", ctx + ": cannot parse '" + raw + "' as a number");
  }
  return v * factor;
}

/// Smallest sample y with empirical CDF(y) >= beta.
double empirical_quantile(std::vector<double> y, double beta) {
  std::sort(y.begin(), y.end());
  auto k = static_cast<std::size_t>(std::ceil(beta * static_cast<double>(y.size())));
  k = std::clamp<std::size_t>(k, 1, y.size());
  return y[k - 1];
}

}  // namespace

// ---------------------------------------------------------------------------
// Constraint text

ConstraintRequest parse_constraint(const std::string& text) {
  static const std::regex form(R"(^\s*([a-z_]+)\s*\((.*)\)\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, form)) {
    throw InputError("calibrate_io", "constraint '" + text + "' is not of the form name(key=value,...)");
  }
  ConstraintRequest req;
  req.text = text;
  const std::string name = m[1];
  std::map<std::string, std::string> args;
  std::stringstream ss(m[2].str());
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw InputError("calibrate_io", "constraint '" + text + "': argument '" + item + "' lacks '='");
    const std::string key = trim(item.substr(0, eq));
    if (!args.emplace(key, item.substr(eq + 1)).second) {
      throw InputError("calibrate_io", "constraint '" + text + "': duplicate key '" + key + "'");
    }
  }
  auto take = [&](const std::string& key) -> std::optional<std::string> {
    auto it = args.find(key);
    if (it == args.end()) return std::nullopt;
    std::string v = it->second;
    args.erase(it);
    return v;
  };
  auto target_mode = [&](std::initializer_list<const char*> allowed) {
    int given = 0;
    for (const char* key : allowed) {
      if (auto v = take(key)) {
        ++given;
        const std::string k = key;
        if (k == "shift") {
          req.mode = ConstraintRequest::Mode::shift;
          req.value = parse_number(*v, text, true);
        } else if (k == "scale") {
          req.mode = ConstraintRequest::Mode::scale;
          req.value = parse_number(*v, text, true);
        } else {
          req.mode = ConstraintRequest::Mode::absolute;
          req.value = parse_number(*v, text, false);
        }
      }
    }
    if (given != 1) {
      std::string keys;
      for (const char* k : allowed) keys += std::string(keys.empty() ? "" : "|") + k;
      throw InputError("calibrate_io", "constraint '" + text + "' needs exactly one of " + keys);
    }
  };

  if (name == "var") {
    req.kind = ConstraintRequest::Kind::var;
    const auto level = take("level");
    if (!level) throw InputError("calibrate_io", "constraint '" + text + "' needs level=");
    req.level = parse_number(*level, text, false);
    if (!(req.level > 0.0 && req.level < 1.0)) throw InputError("calibrate_io", "VaR level must lie in (0, 1)");
    target_mode({"shift", "quantile"});
  } else if (name == "mean" || name == "second_moment") {
    req.kind = name == "mean" ? ConstraintRequest::Kind::mean : ConstraintRequest::Kind::second_moment;
    target_mode({"target", "shift", "scale"});
  } else if (name == "barrier_time") {
    req.kind = ConstraintRequest::Kind::barrier_time;
    const auto level = take("level");
    if (!level) throw InputError("calibrate_io", "constraint '" + text + "' needs level=");
    req.level = parse_number(*level, text, false);
    target_mode({"target", "scale", "shift"});
  } else {
    throw InputError("calibrate_io", "unknown constraint '" + name + "'");
  }
  if (!args.empty()) {
    throw InputError("calibrate_io", "constraint '" + text + "': unknown key '" + args.begin()->first + "'");
  }
  return req;
}

// ---------------------------------------------------------------------------
// Config

namespace {

template <class T>
T get_as(const ordered_json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InputError("calibrate_io", "config key '" + key + "' has the wrong type");
  }
}

void reject_unknown(const ordered_json& obj, std::initializer_list<const char*> known, const std::string& where) {
  if (!obj.is_object()) throw InputError("calibrate_io", "config section '" + where + "' must be an object");
  std::set<std::string> k(known.begin(), known.end());
  for (const auto& [key, _] : obj.items()) {
    if (!k.count(key)) throw InputError("calibrate_io", "unknown config key '" + where + "." + key + "'");
  }
}

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  j["engine"] = c.engine;
  j["model"] = {{"source", c.model.source}, {"kind", c.model.kind},   {"kappa", c.model.kappa},
                {"theta", c.model.theta},   {"sigma", c.model.sigma}, {"path", c.model.path},
                {"x0", c.model.x0},         {"horizon", c.model.horizon}};
  j["constraints"] = c.constraints;
  j["mc"] = {{"n_paths", c.n_paths}, {"n_steps", c.n_steps}, {"seed", c.seed}, {"tol", c.mc_tol},
             {"max_iter", c.mc_max_iter}};
  j["pde"] = {{"half_width", c.pde_half_width}, {"n_x", c.pde_n_x}, {"n_t", c.pde_n_t},
              {"tol", c.pde_tol}, {"max_outer", c.pde_max_outer}};
  j["histogram"] = {{"bins", c.hist_bins}, {"tau_bins", c.tau_bins}};
  return j;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("calibrate_io", std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(j, {"engine", "model", "constraints", "mc", "pde", "histogram"}, "config");
  RunConfig c;
  if (j.contains("engine")) c.engine = get_as<std::string>(j["engine"], "engine");
  if (c.engine != "mc" && c.engine != "pde") throw InputError("calibrate_io", "engine must be 'mc' or 'pde'");
  if (j.contains("model")) {
    const auto& m = j["model"];
    reject_unknown(m, {"source", "kind", "kappa", "theta", "sigma", "path", "x0", "horizon"}, "model");
    if (m.contains("source")) c.model.source = get_as<std::string>(m["source"], "model.source");
    if (m.contains("kind")) c.model.kind = get_as<std::string>(m["kind"], "model.kind");
    if (m.contains("kappa")) c.model.kappa = get_as<double>(m["kappa"], "model.kappa");
    if (m.contains("theta")) c.model.theta = get_as<double>(m["theta"], "model.theta");
    if (m.contains("sigma")) c.model.sigma = get_as<double>(m["sigma"], "model.sigma");
    if (m.contains("path")) c.model.path = get_as<std::string>(m["path"], "model.path");
    if (m.contains("x0")) c.model.x0 = get_as<double>(m["x0"], "model.x0");
    if (m.contains("horizon")) c.model.horizon = get_as<double>(m["horizon"], "model.horizon");
  }
  if (j.contains("constraints")) c.constraints = get_as<std::vector<std::string>>(j["constraints"], "constraints");
  if (j.contains("mc")) {
    const auto& m = j["mc"];
    reject_unknown(m, {"n_paths", "n_steps", "seed", "tol", "max_iter"}, "mc");
    if (m.contains("n_paths")) c.n_paths = get_as<std::size_t>(m["n_paths"], "mc.n_paths");
    if (m.contains("n_steps")) c.n_steps = get_as<std::size_t>(m["n_steps"], "mc.n_steps");
    if (m.contains("seed")) c.seed = get_as<std::uint64_t>(m["seed"], "mc.seed");
    if (m.contains("tol")) c.mc_tol = get_as<double>(m["tol"], "mc.tol");
    if (m.contains("max_iter")) c.mc_max_iter = get_as<int>(m["max_iter"], "mc.max_iter");
  }
  if (j.contains("pde")) {
    const auto& m = j["pde"];
    reject_unknown(m, {"half_width", "n_x", "n_t", "tol", "max_outer"}, "pde");
    if (m.contains("half_width")) c.pde_half_width = get_as<double>(m["half_width"], "pde.half_width");
    if (m.contains("n_x")) c.pde_n_x = get_as<std::size_t>(m["n_x"], "pde.n_x");
    if (m.contains("n_t")) c.pde_n_t = get_as<std::size_t>(m["n_t"], "pde.n_t");
    if (m.contains("tol")) c.pde_tol = get_as<double>(m["tol"], "pde.tol");
    if (m.contains("max_outer")) c.pde_max_outer = get_as<int>(m["max_outer"], "pde.max_outer");
  }
  if (j.contains("histogram")) {
    const auto& m = j["histogram"];
    reject_unknown(m, {"bins", "tau_bins"}, "histogram");
    if (m.contains("bins")) c.hist_bins = get_as<std::size_t>(m["bins"], "histogram.bins");
    if (m.contains("tau_bins")) c.tau_bins = get_as<std::size_t>(m["tau_bins"], "histogram.tau_bins");
  }
  if (c.n_paths < 2 || c.n_steps < 1) throw InputError("calibrate_io", "need n_paths >= 2 and n_steps >= 1");
  if (c.hist_bins < 1 || c.tau_bins < 1) throw InputError("calibrate_io", "histogram bin counts must be positive");
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("calibrate_io", "cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string config_json(const RunConfig& config) { return to_json(config).dump(2); }

// ---------------------------------------------------------------------------
// Model

namespace {

struct ModelFields {
  ScalarField mu;
  ScalarField sigma;
};

ModelFields model_fields(const ModelConfig& m, std::optional<FittedModel>* fitted) {
  if (m.source == "fitted") {
    if (m.path.empty()) throw InputError("calibrate_io", "fitted model source needs model.path");
    auto fm = std::make_shared<FittedModel>(FittedModel::load_csv(m.path));
    if (fitted) *fitted = *fm;
    return {[fm](double, double x) { return fm->mu(x); }, [fm](double, double x) { return fm->sigma(x); }};
  }
  if (m.source != "builtin") throw InputError("calibrate_io", "model.source must be 'builtin' or 'fitted'");
  if (!(m.sigma > 0.0)) throw InputError("calibrate_io", "model.sigma must be positive");
  const double s = m.sigma;
  if (m.kind == "brownian") {
    return {[](double, double) { return 0.0; }, [s](double, double) { return s; }};
  }
  if (m.kind == "ou") {
    const double k = m.kappa, th = m.theta;
    return {[k, th](double, double x) { return k * (th - x); }, [s](double, double) { return s; }};
  }
  throw InputError("calibrate_io", "model.kind must be 'brownian' or 'ou'");
}

}  // namespace

ProcessSpec build_model(const ModelConfig& model, std::optional<FittedModel>* fitted) {
  if (!(model.horizon > 0.0)) throw InputError("calibrate_io", "model.horizon must be positive");
  const ModelFields f = model_fields(model, fitted);
  return ProcessSpec::scalar(f.mu, f.sigma, model.x0, model.horizon);
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

Histogram make_histogram(std::string label, std::vector<double> edges, std::span<const double> values,
                         std::span<const double> w_p, std::span<const double> q_values,
                         std::span<const double> w_q) {
  Histogram h;
  h.label = std::move(label);
  h.edges = std::move(edges);
  const std::size_t nb = h.edges.size() - 1;
  auto fill = [&](std::span<const double> v, std::span<const double> w) {
    std::vector<std::vector<double>> parts(nb);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto it = std::upper_bound(h.edges.begin(), h.edges.end(), v[i]);
      std::size_t b = it == h.edges.begin() ? 0 : static_cast<std::size_t>(it - h.edges.begin()) - 1;
      b = std::min(b, nb - 1);
      parts[b].push_back(w.empty() ? 1.0 / static_cast<double>(v.size()) : w[i]);
    }
    std::vector<double> mass(nb);
    for (std::size_t b = 0; b < nb; ++b) mass[b] = pairwise_sum(parts[b]);
    return mass;
  };
  h.mass_p = fill(values, w_p);
  h.mass_q = fill(q_values, w_q);
  return h;
}

std::vector<double> uniform_edges(double lo, double hi, std::size_t bins) {
  if (!(hi > lo)) hi = lo + 1.0;
  std::vector<double> e(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) e[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  e.back() = hi;
  return e;
}

std::vector<double> column(const FunctionalSamples& s, std::size_t j) {
  std::vector<double> v(s.n_paths());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = s.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return v;
}

double column_mean(const FunctionalSamples& s, std::size_t j) {
  return pairwise_sum(column(s, j)) / static_cast<double>(s.n_paths());
}

double resolve(const ConstraintRequest& r, double ref) {
  switch (r.mode) {
    case ConstraintRequest::Mode::absolute: return r.value;
    case ConstraintRequest::Mode::shift: return ref + r.value * std::abs(ref);
    case ConstraintRequest::Mode::scale: return ref * r.value;
  }
  return r.value;
}

}  // namespace

RunReport run_pipeline(const RunConfig& config) {
  RunReport rep;
  rep.config = config;
  rep.engine = config.engine;
  std::optional<FittedModel> fitted;
  const ModelFields fields = model_fields(config.model, &fitted);
  rep.fitted = fitted;
  if (!(config.model.horizon > 0.0)) throw InputError("calibrate_io", "model.horizon must be positive");
  const ProcessSpec spec = ProcessSpec::scalar(fields.mu, fields.sigma, config.model.x0, config.model.horizon);
  const double T = config.model.horizon;

  std::vector<ConstraintRequest> requests;
  for (const auto& text : config.constraints) requests.push_back(parse_constraint(text));

  // Observables: X_T, then time below each barrier.
  ConstraintSet obs;
  obs.add(TerminalConstraint{"X_T", [](std::span<const double> x) { return x[0]; }, 0.0, {}});
  std::vector<double> barriers;
  for (const auto& r : requests) {
    if (r.kind == ConstraintRequest::Kind::barrier_time) {
      barriers.push_back(r.level);
      obs.add(barrier_time_constraint(r.level, 0.0));
    }
  }
  const FunctionalSamples ref = simulate_functionals(spec, TiltFields::none(), config.n_steps, config.n_paths,
                                                     config.seed, obs);
  const std::vector<double> xt = column(ref, 0);

  // Resolve targets against the reference measure.
  ConstraintSet cs;
  std::vector<double> refs;
  std::size_t barrier_idx = 0;
  for (const auto& r : requests) {
    switch (r.kind) {
      case ConstraintRequest::Kind::var: {
        double q = r.value;
        if (r.mode == ConstraintRequest::Mode::shift) q = resolve(r, empirical_quantile(xt, r.level));
        auto c = var_constraint(q, r.level);
        c.label = r.text;
        const double p = static_cast<double>(std::count_if(xt.begin(), xt.end(), [q](double v) { return v <= q; })) /
                         static_cast<double>(xt.size());
        refs.push_back(p);
        cs.add(std::move(c));
        break;
      }
      case ConstraintRequest::Kind::mean:
      case ConstraintRequest::Kind::second_moment: {
        const bool first = r.kind == ConstraintRequest::Kind::mean;
        std::vector<double> v = xt;
        if (!first) {
          for (auto& e : v) e *= e;
        }
        const double m = pairwise_sum(v) / static_cast<double>(v.size());
        auto c = first ? mean_constraint(resolve(r, m)) : second_moment_constraint(resolve(r, m));
        c.label = r.text;
        refs.push_back(m);
        cs.add(std::move(c));
        break;
      }
      case ConstraintRequest::Kind::barrier_time: {
        const double m = column_mean(ref, 1 + barrier_idx++);
        auto c = barrier_time_constraint(r.level, resolve(r, m));
        c.label = r.text;
        refs.push_back(m);
        cs.add(std::move(c));
        break;
      }
    }
  }
  // Stacking order is terminal first; reorder the reference values to match.
  {
    std::vector<double> term, run;
    for (std::size_t i = 0; i < requests.size(); ++i) {
      (requests[i].kind == ConstraintRequest::Kind::barrier_time ? run : term).push_back(refs[i]);
    }
    refs = term;
    refs.insert(refs.end(), run.begin(), run.end());
  }
  rep.labels = cs.labels();
  rep.targets = cs.targets();
  rep.reference = Eigen::Map<const Eigen::VectorXd>(refs.data(), static_cast<Eigen::Index>(refs.size()));

  const double lo = *std::min_element(xt.begin(), xt.end());
  const double hi = *std::max_element(xt.begin(), xt.end());
  std::vector<double> q_weights;
  std::vector<std::vector<double>> q_obs;  // pde engine: tilted observables per column

  if (cs.empty()) {
    rep.converged = true;
    rep.eta = Eigen::VectorXd(0);
    rep.achieved = Eigen::VectorXd(0);
    rep.residual = Eigen::VectorXd(0);
    rep.ess = static_cast<double>(config.n_paths);
  } else if (config.engine == "mc") {
    const FunctionalSamples samples = simulate_functionals(spec, TiltFields::none(), config.n_steps,
                                                           config.n_paths, config.seed, cs);
    SolverOptions opt;
    opt.tol = config.mc_tol;
    opt.max_iter = config.mc_max_iter;
    const TiltSolution sol = solve_multipliers(samples, opt);
    rep.converged = sol.converged;
    rep.eta = sol.eta;
    rep.achieved = weighted_expectations(sol.weights, samples);
    rep.residual = rep.achieved - rep.targets;
    rep.kl = sol.kl;
    rep.ess = sol.ess;
    rep.iterations = sol.iterations;
    rep.warnings = sol.warnings;
    q_weights = sol.weights;
  } else {
    const double sd = std::sqrt(std::max(1e-300, [&] {
      std::vector<double> d(xt.size());
      const double m = pairwise_sum(xt) / static_cast<double>(xt.size());
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = (xt[i] - m) * (xt[i] - m);
      return pairwise_sum(d) / static_cast<double>(d.size() - 1);
    }()));
    const double hw = config.pde_half_width > 0.0
                          ? config.pde_half_width
                          : 8.0 * std::max(sd, std::abs(fields.sigma(0.0, config.model.x0)) * std::sqrt(T));
    Grid grid{config.model.x0 - hw, config.model.x0 + hw, config.pde_n_x, config.pde_n_t, T};
    CalibrationOptions copt;
    copt.tol = config.pde_tol;
    copt.max_outer = config.pde_max_outer;
    const CalibrationResult cal = calibrate_multipliers(grid, fields.mu, fields.sigma, config.model.x0, cs, copt);
    rep.converged = cal.report.converged;
    rep.eta = cal.eta;
    rep.residual = cal.report.residual;
    rep.achieved = rep.targets + rep.residual;
    rep.iterations = cal.report.iterations;
    rep.warnings = cal.report.warnings;
    rep.kl = -std::log(cal.omega.initial(config.model.x0));
    rep.lambda = cal.lambda;
    rep.grid = {{"x_min", grid.x_min}, {"x_max", grid.x_max}, {"n_x", static_cast<double>(grid.n_x)},
                {"n_t", static_cast<double>(grid.n_t)}, {"theta", cal.report.theta},
                {"final_std_residual", cal.report.std_residual.cwiseAbs().maxCoeff()}};

    // Tilted simulation under the grid lambda, clamped at the grid edges.
    const TiltFields tilt = lambda_tilt(cal.lambda, Extrapolation::clamp);
    const std::size_t n_obs = obs.size();
    q_obs.assign(n_obs + cs.size(), std::vector<double>(config.n_paths));
    std::vector<double> kl_terms(config.n_paths);
    simulate_streaming(spec, tilt, config.n_steps, config.n_paths, config.seed,
                       [&](std::size_t p, std::span<const double> times, std::span<const double> states) {
                         std::vector<double> row(n_obs), crow(cs.size());
                         evaluate_path(obs, times, states, 1, row);
                         evaluate_path(cs, times, states, 1, crow);
                         for (std::size_t j = 0; j < n_obs; ++j) q_obs[j][p] = row[j];
                         for (std::size_t j = 0; j < cs.size(); ++j) q_obs[n_obs + j][p] = crow[j];
                         double acc = 0.0;
                         for (std::size_t k = 0; k + 1 < times.size(); ++k) {
                           const double l = cal.lambda.at_clamped(times[k], states[k]);
                           acc += 0.5 * l * l * (times[k + 1] - times[k]);
                         }
                         kl_terms[p] = acc;
                       });
    rep.kl_mc = pairwise_sum(kl_terms) / static_cast<double>(config.n_paths);
    for (std::size_t j = 0; j < cs.size(); ++j) {
      rep.grid["mc_achieved_" + std::to_string(j)] =
          pairwise_sum(q_obs[n_obs + j]) / static_cast<double>(config.n_paths);
    }
    rep.ess = static_cast<double>(config.n_paths);
  }

  // Histograms.
  const std::vector<double>& xq = q_obs.empty() ? xt : q_obs[0];
  rep.histograms.push_back(make_histogram("X_T", uniform_edges(lo, hi, config.hist_bins), xt, {}, xq, q_weights));
  for (std::size_t b = 0; b < barriers.size(); ++b) {
    const std::vector<double> tp = column(ref, 1 + b);
    const std::vector<double>& tq = q_obs.empty() ? tp : q_obs[1 + b];
    rep.histograms.push_back(make_histogram("tau(" + num(barriers[b]) + ")", uniform_edges(0.0, T, config.tau_bins),
                                            tp, {}, tq, q_weights));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Artifacts

namespace {

ordered_json vec_json(const Eigen::VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

std::string histogram_csv(const Histogram& h) {
  std::string out = "# " + h.label + "\nlo,hi,mass_P,mass_Q\n";
  for (std::size_t b = 0; b + 1 < h.edges.size(); ++b) {
    out += num(h.edges[b]) + ',' + num(h.edges[b + 1]) + ',' + num(h.mass_p[b]) + ',' + num(h.mass_q[b]) + '\n';
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> artifacts(const RunReport& r) {
  std::vector<std::pair<std::string, std::string>> files;
  for (std::size_t i = 0; i < r.histograms.size(); ++i) {
    std::string name = i == 0 ? "hist_XT.csv" : (i == 1 ? "hist_tau.csv" : "hist_tau_" + std::to_string(i) + ".csv");
    files.emplace_back(name, histogram_csv(r.histograms[i]));
  }
  if (r.lambda) files.emplace_back("lambda.csv", r.lambda->to_csv());
  if (r.fitted) files.emplace_back("model.csv", r.fitted->to_csv());
  return files;
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw InputError("calibrate_io", "cannot write " + p.string());
  os << content;
  if (!os) throw InputError("calibrate_io", "write failed for " + p.string());
}

}  // namespace

std::string manifest_json(const RunReport& r) {
  ordered_json j;
  j["tool"] = "minkl";
  j["version"] = kVersion;
  j["config"] = to_json(r.config);
  j["engine"] = r.engine;
  j["converged"] = r.converged;
  ordered_json cons = ordered_json::array();
  for (std::size_t i = 0; i < r.labels.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    cons.push_back({{"label", r.labels[i]},
                    {"reference", r.reference(k)},
                    {"target", r.targets(k)},
                    {"eta", r.eta(k)},
                    {"achieved", r.achieved(k)},
                    {"residual", r.residual(k)}});
  }
  j["constraints"] = cons;
  j["eta"] = vec_json(r.eta);
  j["kl"] = r.kl;
  if (r.engine == "pde") j["kl_girsanov_mc"] = r.kl_mc;
  j["ess"] = r.ess;
  j["iterations"] = r.iterations;
  j["seeds"] = {{"base_seed", r.config.seed},
                {"n_paths", r.config.n_paths},
                {"substreams", "path i draws from substream i of base_seed"}};
  ordered_json grid = ordered_json::object();
  for (const auto& [k, v] : r.grid) grid[k] = v;
  j["grid"] = grid;
  j["warnings"] = r.warnings;
  ordered_json files = ordered_json::array();
  for (const auto& [name, _] : artifacts(r)) files.push_back(name);
  j["artifacts"] = files;
  return j.dump(2) + "\n";
}

std::vector<std::string> export_report(const RunReport& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw InputError("calibrate_io", "cannot create output directory " + out_dir.string() + ": " + ec.message());
  std::vector<std::string> names{"manifest.json"};
  write_file(out_dir / "manifest.json", manifest_json(report));
  for (const auto& [name, content] : artifacts(report)) {
    write_file(out_dir / name, content);
    names.push_back(name);
  }
  std::sort(names.begin(), names.end());
  return names;
}

int exit_status(const RunReport& report) { return report.converged ? 0 : 2; }

}  // namespace minkl
