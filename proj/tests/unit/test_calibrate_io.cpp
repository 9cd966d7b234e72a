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
#include <vector>

#include "minkl/calibrate_io.hpp"
#include "minkl/errors.hpp"

using namespace minkl;
namespace fs = std::filesystem;

namespace {

/// Exact-in-law OU (kappa > 0) or Brownian (kappa = 0) series with unit volatility.
SeriesData synthetic(std::size_t n, double dt, double kappa, std::uint64_t seed, double x0 = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<double> t(n), x(n);
  x[0] = x0;
  const double a = kappa > 0.0 ? std::exp(-kappa * dt) : 1.0;
  const double s = kappa > 0.0 ? std::sqrt((1.0 - a * a) / (2.0 * kappa)) : std::sqrt(dt);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = dt * static_cast<double>(i);
    if (i > 0) x[i] = a * x[i - 1] + s * z(rng);
  }
  return SeriesData(t, x);
}

double pooled_se(const FittedModel& m) {
  double info = 0.0;
  for (const auto& b : m.bins()) {
    if (!b.inherited) info += 1.0 / (b.mu_se * b.mu_se);
  }
  return 1.0 / std::sqrt(info);
}

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("minkl_" + name); }

}  // namespace

TEST_CASE("Brownian round trip") {
  const SeriesData s = synthetic(100000, 0.01, 0.0, 1);
  const FittedModel m = fit_drift_vol(s, 20);
  const double scale = s.normalization().scale;
  CHECK(m.occupied() >= 10);
  for (const auto& b : m.bins()) {
    if (b.inherited) continue;
    CHECK(std::abs(b.mu) < 3.0 * b.mu_se);
    CHECK(b.sigma * scale == doctest::Approx(1.0).epsilon(0.05));
  }
}

TEST_CASE("OU round trip") {
  const SeriesData s = synthetic(100000, 0.01, 1.0, 2);
  const FittedModel m = fit_drift_vol(s, 20);
  const Normalization& nm = s.normalization();
  for (const auto& b : m.bins()) {
    // Thin tail bins hold points skewed toward the mode, away from the center.
    if (b.inherited || b.count < 500) continue;
    // Normalized drift is -(original center) / scale.
    CHECK(std::abs(b.mu + nm.denormalize(b.center) / nm.scale) < 3.0 * b.mu_se);
    CHECK(b.sigma * nm.scale == doctest::Approx(1.0).epsilon(0.05));
  }
  // Interpolation is linear between centers and flat outside.
  const auto& bins = m.bins();
  const double mid = 0.5 * (bins[8].center + bins[9].center);
  CHECK(m.mu(mid) == doctest::Approx(0.5 * (bins[8].mu + bins[9].mu)));
  CHECK(m.mu(bins.front().center - 10.0) == bins.front().mu);
  CHECK(m.sigma(bins.back().center + 10.0) == std::max(bins.back().sigma, m.sigma_floor()));
}

TEST_CASE("standard errors shrink with the square root of the length") {
  const double se1 = pooled_se(fit_drift_vol(synthetic(25000, 0.01, 1.0, 3), 10));
  const double se4 = pooled_se(fit_drift_vol(synthetic(100000, 0.01, 1.0, 3), 10));
  CHECK(se1 / se4 == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("sparse bins inherit and the fit rejects degenerate input") {
  const SeriesData s = synthetic(2000, 0.01, 1.0, 4);
  FitOptions opt;
  opt.min_count = 60;
  const FittedModel m = fit_drift_vol(s, 30, opt);
  bool any = false;
  for (const auto& b : m.bins()) {
    any = any || b.inherited;
    CHECK(m.sigma(b.center) >= m.sigma_floor());
  }
  CHECK(any);

  std::vector<double> t(200), v(200, 3.0);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  CHECK_THROWS_AS(SeriesData(t, v), FitError);
  CHECK_THROWS_AS(fit_drift_vol(s, 1), FitError);
  FitOptions strict;
  strict.min_count = 100000;
  CHECK_THROWS_AS(fit_drift_vol(s, 10, strict), FitError);

  std::vector<double> shortv(50, 1.0), shortt(50);
  for (std::size_t i = 0; i < 50; ++i) shortt[i] = static_cast<double>(i), shortv[i] = static_cast<double>(i % 3);
  CHECK_THROWS_AS(SeriesData(shortt, shortv), InputError);
  t[7] = t[6];
  v[7] = 4.0;
  CHECK_THROWS_AS(SeriesData(t, v), InputError);
}

TEST_CASE("series CSV") {
  const SeriesData s = synthetic(300, 0.5, 0.0, 5, 100.0);
  const fs::path p = temp_file("series.csv");
  write_series_csv(p, s.timestamps(), s.values());
  const SeriesData back = read_series_csv(p);
  CHECK(back.values() == s.values());
  CHECK(back.timestamps() == s.timestamps());

  {
    std::ofstream os(p);
    os << "time,price\n1,2\n";
  }
  CHECK_THROWS_AS(read_series_csv(p), InputError);
  {
    std::ofstream os(p);
    os << "timestamp,value\n1,abc\n";
  }
  CHECK_THROWS_AS(read_series_csv(p), InputError);
  fs::remove(p);
  CHECK_THROWS_AS(read_series_csv(temp_file("does_not_exist.csv")), InputError);
}

TEST_CASE("normalization and model CSV round trip") {
  const SeriesData s = synthetic(5000, 0.01, 2.0, 6, 50.0);
  const Normalization& nm = s.normalization();
  const auto z = s.normalized();
  for (std::size_t i = 0; i < z.size(); i += 97) {
    CHECK(std::abs(nm.denormalize(z[i]) - s.values()[i]) <= 1e-10 * std::max(1.0, std::abs(s.values()[i])));
  }

  const FittedModel m = fit_drift_vol(s, 12);
  const fs::path p = temp_file("model.csv");
  m.save_csv(p);
  const FittedModel back = FittedModel::load_csv(p);
  fs::remove(p);
  CHECK(back.bins().size() == m.bins().size());
  CHECK(back.normalization().shift == nm.shift);
  CHECK(back.normalization().scale == nm.scale);
  CHECK(back.sigma_floor() == m.sigma_floor());
  for (double x = -3.0; x <= 3.0; x += 0.37) {
    CHECK(back.mu(x) == m.mu(x));
    CHECK(back.sigma(x) == m.sigma(x));
  }
  CHECK(back.to_csv() == m.to_csv());
}

TEST_CASE("sigma floor applies to low-volatility bins") {
  std::vector<FittedBin> bins(2);
  bins[0] = {-1.0, 0.0, -0.5, 0.1, 1e-6, 0.0, 50, false};
  bins[1] = {0.0, 1.0, 0.5, -0.1, 0.5, 0.0, 50, false};
  const FittedModel m(bins, {}, 1e-3);
  CHECK(m.sigma(-0.5) == 1e-3);
  CHECK(m.sigma(0.5) == 0.5);
}
