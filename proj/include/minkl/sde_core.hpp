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

#ifndef MINKL_SDE_CORE_HPP
#define MINKL_SDE_CORE_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "minkl/numerics.hpp"

namespace minkl {

/// f(t, x) -> out. Diffusion fields write an n-by-m matrix into out, row-major.
using VectorField = std::function<void(double t, std::span<const double> x, std::span<double> out)>;
/// gamma^{(j)}(t, x, z) -> out (length n).
using JumpCoefficient =
    std::function<void(double t, std::span<const double> x, double z, std::span<double> out)>;

using ScalarField = std::function<double(double t, double x)>;

/// Per-path random source. Path i always draws from the same substream, so an
/// ensemble of any size reproduces the first paths of a larger one.
class PathRng {
 public:
  explicit PathRng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  unsigned long poisson(double mean);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Mark law of a compound-Poisson component. The three families are closed
/// under exponential tilting z -> e^{-eta z}.
class MarkDistribution {
 public:
  enum class Kind { gaussian, exponential, constant };

  static MarkDistribution gaussian(double mean, double sd);
  /// Exponential marks with the given rate (mean 1 / rate).
  static MarkDistribution exponential(double rate);
  static MarkDistribution constant(double value);

  [[nodiscard]] Kind kind() const noexcept { return kind_; }
  [[nodiscard]] double mean() const;
  [[nodiscard]] double second_moment() const;
  [[nodiscard]] double sample(PathRng& rng) const;

  /// True when E[e^{-eta z}] is finite.
  [[nodiscard]] bool tilt_admissible(double eta) const;
  /// E[e^{-eta z}].
  [[nodiscard]] double tilt_normalizer(double eta) const;
  /// The law with density proportional to e^{-eta z} times this one.
  [[nodiscard]] MarkDistribution tilted(double eta) const;

  /// Quadrature nodes and weights in mark space for E[h(z)].
  [[nodiscard]] const QuadratureRule& quadrature() const { return rule_; }

  double p1 = 0.0;  // gaussian mean | exponential rate | constant value
  double p2 = 0.0;  // gaussian sd

 private:
  MarkDistribution(Kind kind, double a, double b);
  Kind kind_;
  QuadratureRule rule_;
};

struct JumpComponent {
  std::string label;
  MarkDistribution marks;
  double rate = 0.0;
  JumpCoefficient coefficient;
  /// gamma(t, x, z) = z * gamma(t, x, 1); the compensator then uses the mark mean.
  bool linear_in_mark = false;
};

/// Reference Levy-Ito model dX = alpha dt + sigma dW + int gamma (mu - nu)(dt, dz).
/// Immutable once constructed; the constructor probes the coefficient fields.
class ProcessSpec {
 public:
  ProcessSpec(std::size_t dim_state, std::size_t dim_bm, VectorField drift, VectorField diffusion,
              std::vector<JumpComponent> jumps, std::vector<double> initial_state, double horizon);

  /// One-dimensional model with scalar drift mu(t, x) and volatility sigma(t, x).
  static ProcessSpec scalar(ScalarField mu, ScalarField sigma, double x0, double horizon,
                            std::vector<JumpComponent> jumps = {});
  static ProcessSpec brownian(double x0, double horizon, double sigma = 1.0);

  [[nodiscard]] std::size_t dim_state() const noexcept { return dim_state_; }
  [[nodiscard]] std::size_t dim_bm() const noexcept { return dim_bm_; }
  [[nodiscard]] const std::vector<double>& initial_state() const noexcept { return x0_; }
  [[nodiscard]] double horizon() const noexcept { return horizon_; }
  [[nodiscard]] const std::vector<JumpComponent>& jumps() const noexcept { return jumps_; }

  void drift(double t, std::span<const double> x, std::span<double> out) const;
  void diffusion(double t, std::span<const double> x, std::span<double> out) const;
  /// Adds rate * int gamma^{(j)}(t, x, z) marks(dz) of component j into out.
  void add_compensator(std::size_t j, double t, std::span<const double> x, std::span<double> out,
                       std::span<double> scratch) const;

 private:
  void probe() const;

  std::size_t dim_state_;
  std::size_t dim_bm_;
  VectorField drift_;
  VectorField diffusion_;
  std::vector<JumpComponent> jumps_;
  std::vector<double> x0_;
  double horizon_;
};

/// Tilted measure: Brownian drift adjustment lambda(t, x) in R^m plus optional
/// exponential mark tilts h(z) = 1 - e^{-eta z}, one slot per jump component.
struct TiltFields {
  VectorField lambda;                           // empty means lambda = 0
  std::vector<std::optional<double>> mark_tilt;  // empty means no component tilted

  static TiltFields none() { return {}; }
  static TiltFields constant_lambda(std::vector<double> value);
  [[nodiscard]] bool is_identity() const;
};

struct SeedManifest {
  std::uint64_t base_seed = 0;
  std::uint64_t first_stream = 0;  // path i uses substream first_stream + i
};

/// Discretized sample paths, states stored path-major: (path, step, component).
class PathEnsemble {
 public:
  PathEnsemble(std::vector<double> times, std::size_t n_paths, std::size_t dim,
               SeedManifest seeds);

  [[nodiscard]] const std::vector<double>& times() const noexcept { return times_; }
  [[nodiscard]] std::size_t n_paths() const noexcept { return n_paths_; }
  [[nodiscard]] std::size_t n_steps() const noexcept { return times_.size() - 1; }
  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] const SeedManifest& seed_manifest() const noexcept { return seeds_; }

  [[nodiscard]] std::span<const double> path(std::size_t p) const;
  [[nodiscard]] std::span<double> path(std::size_t p);
  [[nodiscard]] std::span<const double> state(std::size_t p, std::size_t k) const;
  [[nodiscard]] std::span<const double> terminal(std::size_t p) const { return state(p, n_steps()); }
  [[nodiscard]] const std::vector<double>& raw() const noexcept { return states_; }

 private:
  std::vector<double> times_;
  std::size_t n_paths_;
  std::size_t dim_;
  SeedManifest seeds_;
  std::vector<double> states_;
};

/// Uniform time grid 0 = t_0 < ... < t_K = T.
std::vector<double> uniform_times(double horizon, std::size_t n_steps);

/// Callback receiving one finished path: (path index, times, states of size (K+1)*n).
using PathVisitor =
    std::function<void(std::size_t path, std::span<const double> times, std::span<const double> states)>;

/// Streams paths [0, n_paths) under the (possibly tilted) measure to a visitor
/// without storing the ensemble. Visitors run concurrently on disjoint paths.
void simulate_streaming(const ProcessSpec& spec, const TiltFields& tilt, std::size_t n_steps,
                        std::size_t n_paths, std::uint64_t seed, const PathVisitor& visit);

PathEnsemble simulate_paths(const ProcessSpec& spec, std::size_t n_steps, std::size_t n_paths,
                            std::uint64_t seed);

PathEnsemble simulate_tilted_paths(const ProcessSpec& spec, const TiltFields& tilt,
                                   std::size_t n_steps, std::size_t n_paths, std::uint64_t seed);

}  // namespace minkl

#endif
