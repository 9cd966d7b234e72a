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

#include "minkl/sde_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "minkl/errors.hpp"

namespace minkl {

namespace {

constexpr int kQuadratureOrder = 64;
constexpr double kDivergenceFactor = 1e6;

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

unsigned long PathRng::poisson(double mean) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<unsigned long> dist(mean);
  return dist(engine_);
}

// ---------------------------------------------------------------------------
// MarkDistribution

MarkDistribution::MarkDistribution(Kind kind, double a, double b) : p1(a), p2(b), kind_(kind) {
  switch (kind_) {
    case Kind::gaussian: {
      rule_ = gauss_hermite_probabilists(kQuadratureOrder);
      for (auto& z : rule_.nodes) z = p1 + p2 * z;
      break;
    }
    case Kind::exponential: {
      rule_ = gauss_laguerre(kQuadratureOrder);
      for (auto& z : rule_.nodes) z /= p1;
      break;
    }
    case Kind::constant:
      rule_.nodes = {p1};
      rule_.weights = {1.0};
      break;
  }
}

MarkDistribution MarkDistribution::gaussian(double mean, double sd) {
  if (!std::isfinite(mean) || !(sd >= 0.0) || !std::isfinite(sd)) {
    throw DomainError("sde_core", "gaussian marks need finite mean and sd >= 0");
  }
  return {Kind::gaussian, mean, sd};
}

MarkDistribution MarkDistribution::exponential(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw DomainError("sde_core", "exponential marks need a positive finite rate");
  }
  return {Kind::exponential, rate, 0.0};
}

MarkDistribution MarkDistribution::constant(double value) {
  if (!std::isfinite(value)) throw DomainError("sde_core", "constant mark must be finite");
  return {Kind::constant, value, 0.0};
}

double MarkDistribution::mean() const {
  switch (kind_) {
    case Kind::gaussian: return p1;
    case Kind::exponential: return 1.0 / p1;
    case Kind::constant: return p1;
  }
  return 0.0;
}

double MarkDistribution::second_moment() const {
  switch (kind_) {
    case Kind::gaussian: return p1 * p1 + p2 * p2;
    case Kind::exponential: return 2.0 / (p1 * p1);
    case Kind::constant: return p1 * p1;
  }
  return 0.0;
}

double MarkDistribution::sample(PathRng& rng) const {
  switch (kind_) {
    case Kind::gaussian: return p1 + p2 * rng.normal();
    case Kind::exponential: return -std::log1p(-rng.uniform()) / p1;
    case Kind::constant: return p1;
  }
  return 0.0;
}

bool MarkDistribution::tilt_admissible(double eta) const {
  if (!std::isfinite(eta)) return false;
  if (kind_ == Kind::exponential) return p1 + eta > 0.0;
  return std::isfinite(tilt_normalizer(eta));
}

double MarkDistribution::tilt_normalizer(double eta) const {
  switch (kind_) {
    case Kind::gaussian: return std::exp(-p1 * eta + 0.5 * eta * eta * p2 * p2);
    case Kind::exponential:
      return p1 + eta > 0.0 ? p1 / (p1 + eta) : std::numeric_limits<double>::infinity();
    case Kind::constant: return std::exp(-eta * p1);
  }
  return 0.0;
}

MarkDistribution MarkDistribution::tilted(double eta) const {
  if (!tilt_admissible(eta)) {
    throw DomainError("sde_core", "mark tilt eta=" + std::to_string(eta) +
                                      " lies outside the mark mgf domain");
  }
  switch (kind_) {
    case Kind::gaussian: return gaussian(p1 - eta * p2 * p2, p2);
    case Kind::exponential: return exponential(p1 + eta);
    case Kind::constant: return *this;
  }
  return *this;
}

// ---------------------------------------------------------------------------
// ProcessSpec

ProcessSpec::ProcessSpec(std::size_t dim_state, std::size_t dim_bm, VectorField drift,
                         VectorField diffusion, std::vector<JumpComponent> jumps,
                         std::vector<double> initial_state, double horizon)
    : dim_state_(dim_state),
      dim_bm_(dim_bm),
      drift_(std::move(drift)),
      diffusion_(std::move(diffusion)),
      jumps_(std::move(jumps)),
      x0_(std::move(initial_state)),
      horizon_(horizon) {
  if (dim_state_ == 0 || dim_bm_ == 0) {
    throw DomainError("sde_core", "state and Brownian dimensions must be positive");
  }
  if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) {
    throw DomainError("sde_core", "horizon must be positive and finite");
  }
  if (x0_.size() != dim_state_ || !all_finite(x0_)) {
    throw DomainError("sde_core", "initial state must be finite with dim_state entries");
  }
  if (!drift_ || !diffusion_) throw DomainError("sde_core", "drift and diffusion are required");
  for (const auto& j : jumps_) {
    if (!(j.rate >= 0.0) || !std::isfinite(j.rate)) {
      throw DomainError("sde_core", "jump component '" + j.label + "' needs a finite rate >= 0");
    }
    if (!j.coefficient) {
      throw DomainError("sde_core", "jump component '" + j.label + "' has no coefficient");
    }
    if (!std::isfinite(j.marks.second_moment())) {
      throw DomainError("sde_core", "jump component '" + j.label + "' lacks a finite second moment");
    }
  }
  probe();
}

void ProcessSpec::probe() const {
  const std::size_t n = dim_state_;
  std::vector<double> x(n), a(n), s(n * dim_bm_), g(n);
  const double scale = 1.0;
  for (double tf : {0.0, 0.5, 1.0}) {
    const double t = tf * horizon_;
    for (int k = -2; k <= 2; ++k) {
      for (std::size_t i = 0; i < n; ++i) x[i] = x0_[i] + k * scale * (1.0 + std::abs(x0_[i]));
      drift_(t, x, a);
      diffusion_(t, x, s);
      if (!all_finite(a) || !all_finite(s)) {
        throw DomainError("sde_core", "drift/diffusion non-finite on probe point t=" +
                                          std::to_string(t));
      }
      for (const auto& j : jumps_) {
        for (double z : j.marks.quadrature().nodes) {
          j.coefficient(t, x, z, g);
          if (!all_finite(g)) {
            throw DomainError("sde_core", "jump coefficient '" + j.label +
                                              "' non-finite on probe point");
          }
        }
      }
    }
  }
  // Spot check of the declared finite second moment.
  for (std::size_t c = 0; c < jumps_.size(); ++c) {
    PathRng rng(substream_seed(0x5eed, c));
    double m2 = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const double z = jumps_[c].marks.sample(rng);
      m2 += z * z;
    }
    if (!std::isfinite(m2)) {
      throw DomainError("sde_core", "jump component '" + jumps_[c].label +
                                        "' produced non-finite mark samples");
    }
  }
}

ProcessSpec ProcessSpec::scalar(ScalarField mu, ScalarField sigma, double x0, double horizon,
                                std::vector<JumpComponent> jumps) {
  if (!mu || !sigma) throw DomainError("sde_core", "scalar model needs mu and sigma");
  VectorField drift = [mu](double t, std::span<const double> x, std::span<double> out) {
    out[0] = mu(t, x[0]);
  };
  VectorField diff = [sigma](double t, std::span<const double> x, std::span<double> out) {
    out[0] = sigma(t, x[0]);
  };
  return {1, 1, std::move(drift), std::move(diff), std::move(jumps), {x0}, horizon};
}

ProcessSpec ProcessSpec::brownian(double x0, double horizon, double sigma) {
  return scalar([](double, double) { return 0.0; }, [sigma](double, double) { return sigma; }, x0,
                horizon);
}

void ProcessSpec::drift(double t, std::span<const double> x, std::span<double> out) const {
  drift_(t, x, out);
}

void ProcessSpec::diffusion(double t, std::span<const double> x, std::span<double> out) const {
  diffusion_(t, x, out);
}

void ProcessSpec::add_compensator(std::size_t j, double t, std::span<const double> x,
                                  std::span<double> out, std::span<double> scratch) const {
  const auto& comp = jumps_[j];
  if (comp.rate == 0.0) return;
  if (comp.linear_in_mark) {
    comp.coefficient(t, x, 1.0, scratch);
    const double m = comp.rate * comp.marks.mean();
    for (std::size_t i = 0; i < dim_state_; ++i) out[i] += m * scratch[i];
    return;
  }
  const auto& rule = comp.marks.quadrature();
  for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
    comp.coefficient(t, x, rule.nodes[q], scratch);
    const double w = comp.rate * rule.weights[q];
    for (std::size_t i = 0; i < dim_state_; ++i) out[i] += w * scratch[i];
  }
}

// ---------------------------------------------------------------------------
// TiltFields / PathEnsemble

TiltFields TiltFields::constant_lambda(std::vector<double> value) {
  TiltFields tilt;
  tilt.lambda = [value = std::move(value)](double, std::span<const double>, std::span<double> out) {
    std::copy(value.begin(), value.end(), out.begin());
  };
  return tilt;
}

bool TiltFields::is_identity() const {
  if (lambda) return false;
  return std::none_of(mark_tilt.begin(), mark_tilt.end(),
                      [](const std::optional<double>& e) { return e.has_value(); });
}

PathEnsemble::PathEnsemble(std::vector<double> times, std::size_t n_paths, std::size_t dim,
                           SeedManifest seeds)
    : times_(std::move(times)),
      n_paths_(n_paths),
      dim_(dim),
      seeds_(seeds),
      states_(n_paths * times_.size() * dim, 0.0) {
  if (times_.size() < 2) throw DomainError("sde_core", "ensemble needs at least one step");
}

std::span<const double> PathEnsemble::path(std::size_t p) const {
  const std::size_t stride = times_.size() * dim_;
  return {states_.data() + p * stride, stride};
}

std::span<double> PathEnsemble::path(std::size_t p) {
  const std::size_t stride = times_.size() * dim_;
  return {states_.data() + p * stride, stride};
}

std::span<const double> PathEnsemble::state(std::size_t p, std::size_t k) const {
  return path(p).subspan(k * dim_, dim_);
}

std::vector<double> uniform_times(double horizon, std::size_t n_steps) {
  if (n_steps == 0) throw DomainError("sde_core", "n_steps must be at least 1");
  std::vector<double> t(n_steps + 1);
  for (std::size_t k = 0; k <= n_steps; ++k) {
    t[k] = horizon * static_cast<double>(k) / static_cast<double>(n_steps);
  }
  t.back() = horizon;
  return t;
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

struct CompiledTilt {
  std::vector<MarkDistribution> marks;  // per component: P marks or tilted marks
  std::vector<double> rates;            // per component: arrival rate under the measure
};

CompiledTilt compile_tilt(const ProcessSpec& spec, const TiltFields& tilt) {
  const auto& jumps = spec.jumps();
  if (!tilt.mark_tilt.empty() && tilt.mark_tilt.size() != jumps.size()) {
    throw DomainError("sde_core", "mark_tilt must have one slot per jump component");
  }
  CompiledTilt out;
  for (std::size_t j = 0; j < jumps.size(); ++j) {
    const bool tilted = !tilt.mark_tilt.empty() && tilt.mark_tilt[j].has_value();
    if (tilted) {
      const double eta = *tilt.mark_tilt[j];
      out.marks.push_back(jumps[j].marks.tilted(eta));
      out.rates.push_back(jumps[j].rate * jumps[j].marks.tilt_normalizer(eta));
    } else {
      out.marks.push_back(jumps[j].marks);
      out.rates.push_back(jumps[j].rate);
    }
  }
  return out;
}

}  // namespace

void simulate_streaming(const ProcessSpec& spec, const TiltFields& tilt, std::size_t n_steps,
                        std::size_t n_paths, std::uint64_t seed, const PathVisitor& visit) {
  if (n_paths == 0) throw DomainError("sde_core", "n_paths must be at least 1");
  const auto times = uniform_times(spec.horizon(), n_steps);
  const CompiledTilt compiled = compile_tilt(spec, tilt);
  const std::size_t n = spec.dim_state();
  const std::size_t m = spec.dim_bm();
  const auto& x0 = spec.initial_state();
  double x0_norm = 0.0;
  for (double v : x0) x0_norm = std::max(x0_norm, std::abs(v));
  const double guard = kDivergenceFactor * (1.0 + x0_norm);

  parallel_for(n_paths, [&](std::size_t begin, std::size_t end) {
    std::vector<double> states((n_steps + 1) * n);
    std::vector<double> a(n), s(n * m), lam(m), dw(m), scratch(n), jump(n);
    for (std::size_t p = begin; p < end; ++p) {
      PathRng rng(substream_seed(seed, p));
      std::copy(x0.begin(), x0.end(), states.begin());
      for (std::size_t k = 0; k < n_steps; ++k) {
        const double t = times[k];
        const double dt = times[k + 1] - times[k];
        const std::span<const double> x(states.data() + k * n, n);
        const std::span<double> xn(states.data() + (k + 1) * n, n);
        spec.drift(t, x, a);
        spec.diffusion(t, x, s);
        if (tilt.lambda) {
          tilt.lambda(t, x, lam);
          if (!all_finite(lam)) {
            throw DomainError("sde_core", "lambda non-finite at path " + std::to_string(p) +
                                              " step " + std::to_string(k));
          }
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < m; ++c) a[i] -= s[i * m + c] * lam[c];
          }
        }
        for (std::size_t j = 0; j < spec.jumps().size(); ++j) {
          std::fill(jump.begin(), jump.end(), 0.0);
          spec.add_compensator(j, t, x, jump, scratch);
          for (std::size_t i = 0; i < n; ++i) a[i] -= jump[i];
        }
        const double sq = std::sqrt(dt);
        for (std::size_t c = 0; c < m; ++c) dw[c] = sq * rng.normal();
        for (std::size_t i = 0; i < n; ++i) {
          double v = x[i] + a[i] * dt;
          for (std::size_t c = 0; c < m; ++c) v += s[i * m + c] * dw[c];
          xn[i] = v;
        }
        for (std::size_t j = 0; j < spec.jumps().size(); ++j) {
          const auto& comp = spec.jumps()[j];
          const unsigned long arrivals = rng.poisson(compiled.rates[j] * dt);
          for (unsigned long r = 0; r < arrivals; ++r) {
            const double z = compiled.marks[j].sample(rng);
            comp.coefficient(t, x, z, jump);
            for (std::size_t i = 0; i < n; ++i) xn[i] += jump[i];
          }
        }
        for (std::size_t i = 0; i < n; ++i) {
          if (!std::isfinite(xn[i])) throw SimulationDiverged(p, k + 1, "non-finite state");
          if (std::abs(xn[i]) > guard) {
            throw SimulationDiverged(p, k + 1, "|X| exceeded " + std::to_string(guard));
          }
        }
      }
      visit(p, times, states);
    }
  });
}

PathEnsemble simulate_tilted_paths(const ProcessSpec& spec, const TiltFields& tilt,
                                   std::size_t n_steps, std::size_t n_paths, std::uint64_t seed) {
  PathEnsemble ensemble(uniform_times(spec.horizon(), n_steps), n_paths, spec.dim_state(),
                        SeedManifest{seed, 0});
  simulate_streaming(spec, tilt, n_steps, n_paths, seed,
                     [&](std::size_t p, std::span<const double>, std::span<const double> states) {
                       auto dst = ensemble.path(p);
                       std::copy(states.begin(), states.end(), dst.begin());
                     });
  return ensemble;
}

PathEnsemble simulate_paths(const ProcessSpec& spec, std::size_t n_steps, std::size_t n_paths,
                            std::uint64_t seed) {
  return simulate_tilted_paths(spec, TiltFields::none(), n_steps, n_paths, seed);
}

}  // namespace minkl
