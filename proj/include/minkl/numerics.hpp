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

#ifndef MINKL_NUMERICS_HPP
#define MINKL_NUMERICS_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace minkl {

/// Pairwise (cascade) summation. The reduction tree depends only on the input
/// length, so results are reproducible regardless of threading.
double pairwise_sum(std::span<const double> values);

/// Sum of values[i] * weights[i] with the same pairwise reduction tree.
double pairwise_dot(std::span<const double> values, std::span<const double> weights);

double normal_cdf(double x);
double normal_pdf(double x);
/// Inverse standard-normal CDF, accurate to ~1e-15 on (0, 1).
double normal_quantile(double p);

/// SplitMix64 finalizer, used to derive independent per-path seeds.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t substream_seed(std::uint64_t base_seed, std::uint64_t stream);

/// Worker count from MINKL_THREADS, else hardware concurrency (at least 1).
unsigned default_thread_count();

/// Runs body(begin, end) over contiguous chunks of [0, n). Exceptions thrown by
/// a chunk are rethrown on the caller; the one from the lowest chunk wins.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                  unsigned threads = 0);

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;  // sum to 1: rules integrate against a probability law
};

/// n-point Gauss-Hermite rule for E[h(Z)], Z standard normal (Golub-Welsch).
QuadratureRule gauss_hermite_probabilists(int n);
/// n-point Gauss-Laguerre rule for E[h(E)], E standard exponential.
QuadratureRule gauss_laguerre(int n);

/// Piecewise-linear interpolation on increasing knots with constant extrapolation.
double interp_linear(std::span<const double> knots, std::span<const double> values, double x);

}  // namespace minkl

#endif
