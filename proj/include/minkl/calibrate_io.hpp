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

#ifndef MINKL_CALIBRATE_IO_HPP
#define MINKL_CALIBRATE_IO_HPP

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace minkl {

/// x_normalized = (x - shift) / scale.
struct Normalization {
  double shift = 0.0;
  double scale = 1.0;

  [[nodiscard]] double normalize(double v) const { return (v - shift) / scale; }
  [[nodiscard]] double denormalize(double v) const { return v * scale + shift; }
};

class SeriesData {
 public:
  /// Validates: at least 100 observations, strictly increasing finite timestamps,
  /// positive sample standard deviation of the values.
  SeriesData(std::vector<double> timestamps, std::vector<double> values);

  [[nodiscard]] const std::vector<double>& timestamps() const noexcept { return timestamps_; }
  [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }
  [[nodiscard]] const Normalization& normalization() const noexcept { return norm_; }
  [[nodiscard]] std::vector<double> normalized() const;
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

 private:
  std::vector<double> timestamps_;
  std::vector<double> values_;
  Normalization norm_;
};

/// CSV with header "timestamp,value".
SeriesData read_series_csv(const std::filesystem::path& path);
void write_series_csv(const std::filesystem::path& path, const std::vector<double>& timestamps,
                      const std::vector<double>& values);

struct FittedBin {
  double lo = 0.0;
  double hi = 0.0;
  double center = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
  double mu_se = 0.0;   // standard error of mu: sigma / sqrt(total time in bin)
  std::size_t count = 0;
  bool inherited = false;  // too few increments; copied from the nearest occupied bin
};

struct FitOptions {
  std::size_t min_count = 20;
  double sigma_floor = 1e-3;
  double time_scale = 1.0;  // timestamp units per model time unit
};

/// Binned drift/volatility in normalized units, piecewise linear between bin
/// centers with constant extrapolation.
class FittedModel {
 public:
  FittedModel() = default;
  FittedModel(std::vector<FittedBin> bins, Normalization norm, double sigma_floor);

  [[nodiscard]] double mu(double x) const;
  [[nodiscard]] double sigma(double x) const;
  [[nodiscard]] const std::vector<FittedBin>& bins() const noexcept { return bins_; }
  [[nodiscard]] const Normalization& normalization() const noexcept { return norm_; }
  [[nodiscard]] double sigma_floor() const noexcept { return sigma_floor_; }
  [[nodiscard]] std::size_t occupied() const;

  [[nodiscard]] std::string to_csv() const;
  void save_csv(const std::filesystem::path& path) const;
  static FittedModel load_csv(const std::filesystem::path& path);

 private:
  std::vector<FittedBin> bins_;
  std::vector<double> centers_, mus_, sigmas_;
  Normalization norm_;
  double sigma_floor_ = 1e-3;
};

/// Per-bin Gaussian maximum likelihood on the Euler increments of the normalized series.
FittedModel fit_drift_vol(const SeriesData& series, std::size_t n_bins, const FitOptions& options = {});

}  // namespace minkl

#endif
