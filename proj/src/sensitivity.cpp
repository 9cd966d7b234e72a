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

#include "minkl/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "minkl/errors.hpp"
#include "minkl/numerics.hpp"

namespace minkl {

namespace {

constexpr std::size_t kNormalizationNodes = std::size_t{1} << 21;
constexpr std::size_t kMinDistinct = 100;

std::vector<std::size_t> sorted_order(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  return idx;
}

Eigen::VectorXd solve_delta(const Eigen::MatrixXd& C, const Eigen::VectorXd& delta) {
  if (C.rows() != delta.size()) throw DomainError("sensitivity", "delta length does not match the constraints");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(C);
  if (!lu.isInvertible()) throw SingularMatrix("sensitivity", "constraint covariance is singular");
  return lu.solve(delta);
}

/// Centered columns of F and their 1/n covariance.
struct Centered {
  std::vector<std::vector<double>> cols;
  Eigen::MatrixXd C;
};

Centered center(const FunctionalSamples& s) {
  const std::size_t n = s.n_paths();
  const std::size_t r = s.size();
  if (n < 2) throw DomainError("sensitivity", "need at least 2 samples");
  Centered c;
  c.cols.assign(r, std::vector<double>(n));
  for (std::size_t j = 0; j < r; ++j) {
    for (std::size_t i = 0; i < n; ++i) c.cols[j][i] = s.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    const double m = pairwise_sum(c.cols[j]) / static_cast<double>(n);
    for (auto& v : c.cols[j]) v -= m;
  }
  c.C.resize(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r));
  for (std::size_t j = 0; j < r; ++j) {
    for (std::size_t k = j; k < r; ++k) {
      const double v = pairwise_dot(c.cols[j], c.cols[k]) / static_cast<double>(n);
      c.C(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = v;
      c.C(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = v;
    }
  }
  return c;
}

}  // namespace

DistortionWeight::DistortionWeight(std::string label, std::function<double(double)> gamma,
                                   std::function<double(double)> antiderivative)
    : label_(std::move(label)), gamma_(std::move(gamma)), cumulative_(std::move(antiderivative)) {
  if (!gamma_) throw DomainError("sensitivity", "distortion weight needs a callable");
  for (int k = 0; k <= 1000; ++k) {
    const double g = gamma_(k / 1000.0);
    if (!(g >= 0.0) || !std::isfinite(g)) {
      throw DomainError("sensitivity", "distortion weight '" + label_ + "' negative or non-finite on [0, 1]");
    }
  }
  double total;
  if (cumulative_) {
    total = cumulative_(1.0) - cumulative_(0.0);
  } else {
    std::vector<double> vals(kNormalizationNodes);
    const double h = 1.0 / static_cast<double>(kNormalizationNodes);
    for (std::size_t i = 0; i < kNormalizationNodes; ++i) vals[i] = gamma_((static_cast<double>(i) + 0.5) * h);
    total = pairwise_sum(vals) * h;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw DomainError("sensitivity", "distortion weight '" + label_ + "' integrates to " + std::to_string(total));
  }
}

DistortionWeight DistortionWeight::identity() {
  return {"mean", [](double) { return 1.0; }, [](double u) { return u; }};
}

DistortionWeight DistortionWeight::tvar(double beta) {
  if (!(beta >= 0.0 && beta < 1.0)) throw DomainError("sensitivity", "TVaR level must lie in [0, 1)");
  return {"tvar(" + std::to_string(beta) + ")",
          [beta](double u) { return u >= beta ? 1.0 / (1.0 - beta) : 0.0; },
          [beta](double u) { return std::max(u - beta, 0.0) / (1.0 - beta); }};
}

double DistortionWeight::cumulative(double u) const {
  if (cumulative_) return cumulative_(u) - cumulative_(0.0);
  const std::size_t m = 4096;
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) s += gamma_((static_cast<double>(i) + 0.5) * u / m);
  return s * u / m;
}

double entropic_derivative(const FunctionalSamples& functionals, std::span<const double> target,
                           const Eigen::VectorXd& delta) {
  const std::size_t n = functionals.n_paths();
  if (target.size() != n) throw DomainError("sensitivity", "target samples must match the path count");
  const Centered c = center(functionals);
  std::vector<double> l(target.begin(), target.end());
  const double ml = pairwise_sum(l) / static_cast<double>(n);
  for (auto& v : l) v -= ml;
  Eigen::VectorXd cov(static_cast<Eigen::Index>(c.cols.size()));
  for (std::size_t j = 0; j < c.cols.size(); ++j) {
    cov(static_cast<Eigen::Index>(j)) = pairwise_dot(c.cols[j], l) / static_cast<double>(n);
  }
  return solve_delta(c.C, delta).dot(cov);
}

double distortion_value(std::span<const double> samples, const DistortionWeight& gamma,
                        std::span<const double> weights) {
  const std::size_t n = samples.size();
  if (n == 0) throw DomainError("sensitivity", "distortion value of an empty sample");
  if (!weights.empty() && weights.size() != n) throw DomainError("sensitivity", "weights must match samples");
  const auto idx = sorted_order(samples);
  std::vector<double> terms(n);
  // Cumulative weight: exact k/n when unweighted, compensated running sum otherwise.
  double W = 0.0;
  double comp = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double W1 = 1.0;
    if (k + 1 < n) {
      if (weights.empty()) {
        W1 = static_cast<double>(k + 1) / static_cast<double>(n);
      } else {
        const double y = weights[idx[k]] - comp;
        W1 = W + y;
        comp = (W1 - W) - y;
      }
    }
    const double mass = gamma.has_antiderivative() ? gamma.cumulative(W1) - gamma.cumulative(W)
                                                   : gamma(0.5 * (W + W1)) * (W1 - W);
    terms[k] = samples[idx[k]] * mass;
    W = W1;
  }
  return pairwise_sum(terms);
}

double tvar_direct(std::span<const double> samples, double beta) {
  const std::size_t n = samples.size();
  if (n == 0) throw DomainError("sensitivity", "TVaR of an empty sample");
  if (!(beta >= 0.0 && beta < 1.0)) throw DomainError("sensitivity", "TVaR level must lie in [0, 1)");
  std::vector<double> y(samples.begin(), samples.end());
  std::sort(y.begin(), y.end());
  const double nd = static_cast<double>(n);
  // Left-continuous quantile index (1-based): smallest k with k / n >= beta.
  std::size_t k = static_cast<std::size_t>(std::ceil(beta * nd));
  if (k == 0) k = 1;
  double tail = (static_cast<double>(k) / nd - beta) * y[k - 1];
  std::vector<double> rest(y.begin() + static_cast<std::ptrdiff_t>(k), y.end());
  tail += pairwise_sum(rest) / nd;
  return tail / (1.0 - beta);
}

DistortionDerivative distortion_entropic_derivative(const FunctionalSamples& functionals,
                                                    std::span<const double> target,
                                                    const Eigen::VectorXd& delta,
                                                    const DistortionWeight& gamma) {
  const std::size_t n = functionals.n_paths();
  if (target.size() != n) throw DomainError("sensitivity", "target samples must match the path count");
  const Centered c = center(functionals);
  const Eigen::VectorXd v = solve_delta(c.C, delta);
  const auto idx = sorted_order(target);

  DistortionDerivative out;
  out.distinct = 1;
  for (std::size_t k = 1; k < n; ++k) {
    if (target[idx[k]] != target[idx[k - 1]]) ++out.distinct;
  }
  if (out.distinct < kMinDistinct) {
    out.warnings.push_back("target has only " + std::to_string(out.distinct) +
                           " distinct values; the distortion derivative assumes a continuous law");
  }
  // Running centered sums S_i over the sorted order, combined with v up front.
  std::vector<double> proj(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c.cols.size(); ++j) s += v(static_cast<Eigen::Index>(j)) * c.cols[j][idx[i]];
    proj[i] = s;
  }
  std::vector<double> terms(n - 1);
  double S = 0.0;
  double comp = 0.0;  // Kahan compensation for the running sum
  const double nd = static_cast<double>(n);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double y = proj[i] - comp;
    const double t = S + y;
    comp = (t - S) - y;
    S = t;
    const double u = static_cast<double>(i + 1) / nd;
    terms[i] = (S / nd) * gamma(u) * (target[idx[i + 1]] - target[idx[i]]);
  }
  out.value = -pairwise_sum(terms);
  return out;
}

}  // namespace minkl
