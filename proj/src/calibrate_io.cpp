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

#include "minkl/calibrate_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "minkl/errors.hpp"
#include "minkl/numerics.hpp"

namespace minkl {

namespace {

constexpr std::size_t kMinObservations = 100;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  const auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, const std::string& where) {
  const std::string t = trim(s);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(v)) {
    throw InputError("calibrate_io", where + ": cannot parse number '" + t + "'");
  }
  return v;
}

}  // namespace

SeriesData::SeriesData(std::vector<double> timestamps, std::vector<double> values)
    : timestamps_(std::move(timestamps)), values_(std::move(values)) {
  if (timestamps_.size() != values_.size()) {
    throw InputError("calibrate_io", "timestamps and values differ in length");
  }
  if (values_.size() < kMinObservations) {
    throw InputError("calibrate_io", "series needs at least 100 observations, got " + std::to_string(values_.size()));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(timestamps_[i]) || !std::isfinite(values_[i])) {
      throw InputError("calibrate_io", "non-finite entry at row " + std::to_string(i));
    }
    if (i > 0 && !(timestamps_[i] > timestamps_[i - 1])) {
      throw InputError("calibrate_io", "timestamps not strictly increasing at row " + std::to_string(i));
    }
  }
  const double n = static_cast<double>(values_.size());
  const double mean = pairwise_sum(values_) / n;
  std::vector<double> dev(values_.size());
  for (std::size_t i = 0; i < dev.size(); ++i) dev[i] = values_[i] - mean;
  const double var = pairwise_dot(dev, dev) / (n - 1.0);
  if (!(var > 0.0)) throw FitError("calibrate_io", "series has zero variance; nothing to fit");
  norm_ = Normalization{mean, std::sqrt(var)};
}

std::vector<double> SeriesData::normalized() const {
  std::vector<double> out(values_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = norm_.normalize(values_[i]);
  return out;
}

SeriesData read_series_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("calibrate_io", "cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || trim(line) != "timestamp,value") {
    throw InputError("calibrate_io", path.string() + ": expected header 'timestamp,value'");
  }
  std::vector<double> ts, vs;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw InputError("calibrate_io", path.string() + ": row " + std::to_string(row) + " lacks two fields");
    }
    const std::string where = path.string() + " row " + std::to_string(row);
    ts.push_back(parse_double(line.substr(0, comma), where));
    vs.push_back(parse_double(line.substr(comma + 1), where));
  }
  return {std::move(ts), std::move(vs)};
}

void write_series_csv(const std::filesystem::path& path, const std::vector<double>& timestamps,
                      const std::vector<double>& values) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("calibrate_io", "cannot write " + path.string());
  os << "timestamp,value\n";
  for (std::size_t i = 0; i < values.size(); ++i) os << num(timestamps[i]) << ',' << num(values[i]) << '\n';
}

// ---------------------------------------------------------------------------

FittedModel::FittedModel(std::vector<FittedBin> bins, Normalization norm, double sigma_floor)
    : bins_(std::move(bins)), norm_(norm), sigma_floor_(sigma_floor) {
  if (bins_.empty()) throw FitError("calibrate_io", "fitted model has no bins");
  for (const auto& b : bins_) {
    centers_.push_back(b.center);
    mus_.push_back(b.mu);
    sigmas_.push_back(std::max(b.sigma, sigma_floor_));
  }
  for (std::size_t i = 1; i < centers_.size(); ++i) {
    if (!(centers_[i] > centers_[i - 1])) throw FitError("calibrate_io", "bin centers must increase");
  }
}

double FittedModel::mu(double x) const { return interp_linear(centers_, mus_, x); }
double FittedModel::sigma(double x) const { return interp_linear(centers_, sigmas_, x); }

std::size_t FittedModel::occupied() const {
  return static_cast<std::size_t>(std::count_if(bins_.begin(), bins_.end(), [](const FittedBin& b) { return !b.inherited; }));
}

std::string FittedModel::to_csv() const {
  std::string out = "# shift=" + num(norm_.shift) + "\n# scale=" + num(norm_.scale) +
                    "\n# sigma_floor=" + num(sigma_floor_) + "\nlo,hi,center,mu,sigma,mu_se,count,inherited\n";
  for (const auto& b : bins_) {
    out += num(b.lo) + ',' + num(b.hi) + ',' + num(b.center) + ',' + num(b.mu) + ',' + num(b.sigma) + ',' +
           num(b.mu_se) + ',' + std::to_string(b.count) + ',' + (b.inherited ? "1" : "0") + '\n';
  }
  return out;
}

void FittedModel::save_csv(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("calibrate_io", "cannot write " + path.string());
  os << to_csv();
}

FittedModel FittedModel::load_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("calibrate_io", "cannot open " + path.string());
  Normalization norm;
  double floor = 1e-3;
  std::vector<FittedBin> bins;
  std::string line;
  bool header_seen = false;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2);
      const double v = parse_double(line.substr(eq + 1), path.string());
      if (key == "shift") norm.shift = v;
      else if (key == "scale") norm.scale = v;
      else if (key == "sigma_floor") floor = v;
      continue;
    }
    if (!header_seen) {
      if (line != "lo,hi,center,mu,sigma,mu_se,count,inherited") {
        throw InputError("calibrate_io", path.string() + ": unexpected model header");
      }
      header_seen = true;
      continue;
    }
    std::stringstream ss(line);
    std::string f[8];
    for (auto& s : f) {
      if (!std::getline(ss, s, ',')) throw InputError("calibrate_io", path.string() + ": short model row");
    }
    FittedBin b;
    b.lo = parse_double(f[0], path.string());
    b.hi = parse_double(f[1], path.string());
    b.center = parse_double(f[2], path.string());
    b.mu = parse_double(f[3], path.string());
    b.sigma = parse_double(f[4], path.string());
    b.mu_se = parse_double(f[5], path.string());
    b.count = static_cast<std::size_t>(parse_double(f[6], path.string()));
    b.inherited = trim(f[7]) == "1";
    bins.push_back(b);
  }
  if (!(norm.scale > 0.0)) throw InputError("calibrate_io", path.string() + ": scale must be positive");
  return {std::move(bins), norm, floor};
}

FittedModel fit_drift_vol(const SeriesData& series, std::size_t n_bins, const FitOptions& options) {
  if (n_bins < 2) throw FitError("calibrate_io", "need at least 2 bins");
  if (!(options.time_scale > 0.0) || !(options.sigma_floor > 0.0)) {
    throw FitError("calibrate_io", "time_scale and sigma_floor must be positive");
  }
  const std::vector<double> x = series.normalized();
  const auto& ts = series.timestamps();
  const std::size_t m = x.size() - 1;  // increments
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end() - 1);
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) throw FitError("calibrate_io", "increment start points do not span a range");
  const double width = (hi - lo) / static_cast<double>(n_bins);

  std::vector<std::vector<std::size_t>> members(n_bins);
  for (std::size_t i = 0; i < m; ++i) {
    const auto b = std::min(static_cast<std::size_t>((x[i] - lo) / width), n_bins - 1);
    members[b].push_back(i);
  }

  std::vector<FittedBin> bins(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    FittedBin& fb = bins[b];
    fb.lo = lo + width * static_cast<double>(b);
    fb.hi = b + 1 == n_bins ? hi : lo + width * static_cast<double>(b + 1);
    fb.center = 0.5 * (fb.lo + fb.hi);
    fb.count = members[b].size();
    if (fb.count < options.min_count) continue;
    std::vector<double> dx, dt;
    for (std::size_t i : members[b]) {
      dx.push_back(x[i + 1] - x[i]);
      dt.push_back((ts[i + 1] - ts[i]) / options.time_scale);
    }
    const double total_t = pairwise_sum(dt);
    fb.mu = pairwise_sum(dx) / total_t;  // dt-weighted mean of dx / dt
    std::vector<double> q(dx.size());
    for (std::size_t k = 0; k < dx.size(); ++k) {
      const double r = dx[k] - fb.mu * dt[k];
      q[k] = r * r / dt[k];
    }
    fb.sigma = std::max(std::sqrt(pairwise_sum(q) / static_cast<double>(q.size())), options.sigma_floor);
    fb.mu_se = fb.sigma / std::sqrt(total_t);
  }

  std::vector<std::size_t> occupied;
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (bins[b].count >= options.min_count) occupied.push_back(b);
  }
  if (occupied.size() < 2) {
    throw FitError("calibrate_io", "only " + std::to_string(occupied.size()) +
                                       " bins reach the occupancy threshold; use fewer bins or more data");
  }
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (bins[b].count >= options.min_count) continue;
    std::size_t best = occupied.front();
    for (std::size_t o : occupied) {
      const auto d = [&](std::size_t k) { return k > b ? k - b : b - k; };
      if (d(o) < d(best)) best = o;
    }
    bins[b].mu = bins[best].mu;
    bins[b].sigma = bins[best].sigma;
    bins[b].mu_se = bins[best].mu_se;
    bins[b].inherited = true;
  }
  return {std::move(bins), series.normalization(), options.sigma_floor};
}

}  // namespace minkl
