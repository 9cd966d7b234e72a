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

#include "minkl/pde_engine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>

#include "minkl/errors.hpp"
#include "minkl/numerics.hpp"

namespace minkl {

void Grid::validate() const {
  if (!(x_min < x_max) || !std::isfinite(x_min) || !std::isfinite(x_max)) {
    throw DomainError("pde_engine", "grid needs finite x_min < x_max");
  }
  if (n_x < 3) throw DomainError("pde_engine", "grid needs n_x >= 3");
  if (n_t < 1) throw DomainError("pde_engine", "grid needs n_t >= 1");
  if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("pde_engine", "grid horizon must be positive");
}

void Grid::check_margin(double x0, double sigma0) const {
  const double m = 4.0 * std::abs(sigma0) * std::sqrt(T);
  if (x0 - m < x_min || x0 + m > x_max) {
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "grid [%g, %g] does not cover x0=%g with a 4 sd margin (need [%g, %g])", x_min,
                  x_max, x0, x0 - m, x0 + m);
    throw DomainError("pde_engine", buf);
  }
}

// ---------------------------------------------------------------------------
// FieldTX

namespace {

struct Cell {
  std::size_t k0, k1, i0, i1;
  double wt, wx;
};

Cell locate(const Grid& g, double t, double x) {
  Cell c{};
  const double pt = std::clamp(t / g.dt(), 0.0, static_cast<double>(g.n_t));
  const double px = std::clamp((x - g.x_min) / g.dx(), 0.0, static_cast<double>(g.n_x - 1));
  c.k0 = std::min(static_cast<std::size_t>(pt), g.n_t - 1);
  c.k1 = c.k0 + 1;
  c.wt = pt - static_cast<double>(c.k0);
  c.i0 = std::min(static_cast<std::size_t>(px), g.n_x - 2);
  c.i1 = c.i0 + 1;
  c.wx = px - static_cast<double>(c.i0);
  return c;
}

double bilinear(const Eigen::MatrixXd& v, const Cell& c) {
  const auto k0 = static_cast<Eigen::Index>(c.k0), k1 = static_cast<Eigen::Index>(c.k1);
  const auto i0 = static_cast<Eigen::Index>(c.i0), i1 = static_cast<Eigen::Index>(c.i1);
  const double a = (1.0 - c.wx) * v(k0, i0) + c.wx * v(k0, i1);
  const double b = (1.0 - c.wx) * v(k1, i0) + c.wx * v(k1, i1);
  return (1.0 - c.wt) * a + c.wt * b;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double FieldTX::at(double t, double x) const {
  const double tol = 1e-12 * (1.0 + grid.T);
  if (t < -tol || t > grid.T + tol || x < grid.x_min || x > grid.x_max || !std::isfinite(x)) {
    throw ExtrapolationError("pde_engine", "field '" + label + "' evaluated outside its grid at t=" +
                                               num(t) + ", x=" + num(x));
  }
  return bilinear(values, locate(grid, t, x));
}

double FieldTX::at_clamped(double t, double x) const {
  if (std::isnan(t) || std::isnan(x)) {
    throw ExtrapolationError("pde_engine", "field '" + label + "' evaluated at NaN");
  }
  return bilinear(values, locate(grid, t, x));
}

double FieldTX::initial(double x) const {
  const Cell c = locate(grid, 0.0, x);
  const auto i0 = static_cast<Eigen::Index>(c.i0), i1 = static_cast<Eigen::Index>(c.i1);
  return (1.0 - c.wx) * values(0, i0) + c.wx * values(0, i1);
}

std::string FieldTX::to_csv() const {
  std::string out = "# label=" + label + ",x_min=" + num(grid.x_min) + ",x_max=" + num(grid.x_max) +
                    ",t_min=0,t_max=" + num(grid.T) + ",n_t=" + std::to_string(grid.n_t) +
                    ",n_x=" + std::to_string(grid.n_x) + "\n";
  for (Eigen::Index k = 0; k < values.rows(); ++k) {
    for (Eigen::Index i = 0; i < values.cols(); ++i) {
      if (i) out += ',';
      out += num(values(k, i));
    }
    out += '\n';
  }
  return out;
}

void FieldTX::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("pde_engine", "cannot write " + path.string());
  os << to_csv();
  if (!os) throw InputError("pde_engine", "write failed for " + path.string());
}

FieldTX FieldTX::read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("pde_engine", "cannot read " + path.string());
  std::string line;
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0) {
    throw InputError("pde_engine", path.string() + ": missing field header");
  }
  FieldTX f;
  std::stringstream hs(line.substr(2));
  std::string item;
  while (std::getline(hs, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw InputError("pde_engine", "malformed header item '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string val = item.substr(eq + 1);
    try {
      if (key == "label") f.label = val;
      else if (key == "x_min") f.grid.x_min = std::stod(val);
      else if (key == "x_max") f.grid.x_max = std::stod(val);
      else if (key == "t_max") f.grid.T = std::stod(val);
      else if (key == "n_t") f.grid.n_t = std::stoul(val);
      else if (key == "n_x") f.grid.n_x = std::stoul(val);
    } catch (const std::exception&) {
      throw InputError("pde_engine", "bad header value for '" + key + "'");
    }
  }
  f.grid.validate();
  f.values.resize(static_cast<Eigen::Index>(f.grid.n_t + 1), static_cast<Eigen::Index>(f.grid.n_x));
  for (Eigen::Index k = 0; k < f.values.rows(); ++k) {
    if (!std::getline(is, line)) throw InputError("pde_engine", path.string() + ": truncated field");
    const char* p = line.c_str();
    for (Eigen::Index i = 0; i < f.values.cols(); ++i) {
      char* end = nullptr;
      f.values(k, i) = std::strtod(p, &end);
      if (end == p) throw InputError("pde_engine", path.string() + ": bad number in row " + std::to_string(k));
      p = (*end == ',') ? end + 1 : end;
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Backward theta scheme

namespace {

struct LevelCoeffs {
  std::vector<double> b;  // first-order coefficient
  std::vector<double> D;  // second-order coefficient (half variance)
  std::vector<double> c;  // potential
  std::vector<double> s;  // source
};

using LevelFn = std::function<void(std::size_t k, LevelCoeffs& out)>;

struct Stencil {
  std::vector<double> l, d, r;
};

/// ghost, when set, holds (u_{-1} / u_0, u_n / u_{n-1}); otherwise the boundary is reflecting.
void assemble(const LevelCoeffs& co, double dx, Stencil& st, const std::array<double, 2>* ghost = nullptr) {
  const std::size_t n = co.b.size();
  st.l.assign(n, 0.0);
  st.d.assign(n, 0.0);
  st.r.assign(n, 0.0);
  const double dx2 = dx * dx;
  for (std::size_t i = 0; i < n; ++i) {
    const double dif = co.D[i] / dx2;
    if (ghost && (i == 0 || i == n - 1)) {
      const double b = co.b[i] / (2.0 * dx);
      if (i == 0) {
        st.r[i] = dif + b;
        st.d[i] = (*ghost)[0] * (dif - b) - 2.0 * dif - co.c[i];
      } else {
        st.l[i] = dif - b;
        st.d[i] = (*ghost)[1] * (dif + b) - 2.0 * dif - co.c[i];
      }
      continue;
    }
    if (i == 0) {
      // Ghost node u_{-1} = u_1: zero gradient, so the drift term vanishes.
      st.r[i] = 2.0 * dif;
      st.d[i] = -2.0 * dif - co.c[i];
      continue;
    }
    if (i == n - 1) {
      st.l[i] = 2.0 * dif;
      st.d[i] = -2.0 * dif - co.c[i];
      continue;
    }
    st.l[i] = dif;
    st.r[i] = dif;
    st.d[i] = -2.0 * dif - co.c[i];
    const double b = co.b[i];
    const double peclet = std::abs(b) * dx / (2.0 * co.D[i]);
    if (peclet > 2.0) {
      if (b > 0.0) {
        st.d[i] -= b / dx;
        st.r[i] += b / dx;
      } else {
        st.l[i] -= b / dx;
        st.d[i] += b / dx;
      }
    } else {
      st.l[i] -= b / (2.0 * dx);
      st.r[i] += b / (2.0 * dx);
    }
  }
}

/// Thomas algorithm; a sub, b diag, c super. Overwrites rhs with the solution.
void thomas(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& c,
            std::vector<double>& rhs) {
  const std::size_t n = b.size();
  std::vector<double> cp(n);
  double denom = b[0];
  if (denom == 0.0) throw SingularMatrix("pde_engine", "zero pivot in tridiagonal solve");
  cp[0] = c[0] / denom;
  rhs[0] /= denom;
  for (std::size_t i = 1; i < n; ++i) {
    denom = b[i] - a[i] * cp[i - 1];
    if (denom == 0.0) throw SingularMatrix("pde_engine", "zero pivot in tridiagonal solve");
    cp[i] = c[i] / denom;
    rhs[i] = (rhs[i] - a[i] * rhs[i - 1]) / denom;
  }
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= cp[i] * rhs[i + 1];
}

/// extrapolate continues the second difference of log u past each boundary, lagged one step; needs u > 0.
Eigen::MatrixXd backward_solve(const Grid& g, const std::vector<double>& terminal, const LevelFn& level,
                               double theta, bool extrapolate = false) {
  const std::size_t n = g.n_x;
  const double dt = g.dt();
  Eigen::MatrixXd u(static_cast<Eigen::Index>(g.n_t + 1), static_cast<Eigen::Index>(n));
  std::vector<double> cur = terminal;
  for (std::size_t i = 0; i < n; ++i) u(static_cast<Eigen::Index>(g.n_t), static_cast<Eigen::Index>(i)) = cur[i];

  LevelCoeffs next, now;
  for (auto* co : {&next, &now}) {
    co->b.assign(n, 0.0);
    co->D.assign(n, 0.0);
    co->c.assign(n, 0.0);
    co->s.assign(n, 0.0);
  }
  std::array<double, 2> ghost{1.0, 1.0};
  auto update_ghost = [&] {
    if (!extrapolate) return;
    if (!(cur[0] > 0.0 && cur[1] > 0.0 && cur[2] > 0.0 && cur[n - 1] > 0.0 && cur[n - 2] > 0.0 && cur[n - 3] > 0.0)) {
      throw PositivityViolation("pde_engine", "log-quadratic boundary needs positive boundary values");
    }
    const double r0 = cur[0] / cur[1], r1 = cur[2] / cur[1];
    const double s0 = cur[n - 1] / cur[n - 2], s1 = cur[n - 3] / cur[n - 2];
    ghost = {r0 * r0 * r1, s0 * s0 * s1};
  };
  const std::array<double, 2>* gp = extrapolate ? &ghost : nullptr;
  update_ghost();
  level(g.n_t, next);
  Stencil st_next, st_now;
  assemble(next, g.dx(), st_next, gp);
  std::vector<double> rhs(n), a(n), b(n), c(n);
  for (std::size_t k = g.n_t; k-- > 0;) {
    level(k, now);
    assemble(now, g.dx(), st_now, gp);
    for (std::size_t i = 0; i < n; ++i) {
      double lu = st_next.d[i] * cur[i];
      if (i > 0) lu += st_next.l[i] * cur[i - 1];
      if (i + 1 < n) lu += st_next.r[i] * cur[i + 1];
      rhs[i] = cur[i] + (1.0 - theta) * dt * (lu + next.s[i]) + theta * dt * now.s[i];
      a[i] = -theta * dt * st_now.l[i];
      b[i] = 1.0 - theta * dt * st_now.d[i];
      c[i] = -theta * dt * st_now.r[i];
    }
    thomas(a, b, c, rhs);
    cur = rhs;
    for (std::size_t i = 0; i < n; ++i) u(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = cur[i];
    std::swap(next, now);
    if (extrapolate && k > 0) {
      update_ghost();
      assemble(next, g.dx(), st_next, gp);
    } else {
      std::swap(st_next, st_now);
    }
  }
  if (!u.allFinite()) throw DomainError("pde_engine", "backward solve produced non-finite values");
  return u;
}

double logistic_below(double x, double q, double s) {
  if (q == std::numeric_limits<double>::infinity()) return 1.0;
  if (q == -std::numeric_limits<double>::infinity()) return 0.0;
  return 1.0 / (1.0 + std::exp((x - q) / s));
}

/// f evaluated at x, with interval indicators replaced by a logistic ramp of width 2 dx.
double state_value(const StateFunction& f, const std::optional<IndicatorHint>& hint, double x,
                   const Grid& g, const PdeOptions& o) {
  if (hint && o.smooth_indicators) {
    const double s = 0.5 * g.dx();
    return logistic_below(x, hint->upper, s) - logistic_below(x, hint->lower, s);
  }
  const double xs[1] = {x};
  return f(std::span<const double>(xs, 1));
}

double sigma_at(const ScalarField& sigma, double t, double x, const PdeOptions& o) {
  const double s = sigma(t, x);
  if (!std::isfinite(s)) throw DomainError("pde_engine", "sigma non-finite on grid");
  if (std::abs(s) < o.sigma_min) {
    throw DomainError("pde_engine", "sigma below sigma_min on grid at x=" + num(x));
  }
  return s;
}

void require_1d(const ConstraintSet& cs) {
  if (cs.empty()) throw DomainError("pde_engine", "constraint set is empty");
}

/// Level function for generator mu - sigma lambda, 1/2 sigma^2, with given potential/source per node.
LevelFn generator_level(const Grid& g, const ScalarField& mu, const ScalarField& sigma, const FieldTX* lambda,
                        const PdeOptions& o, std::function<double(std::size_t k, std::size_t i, double x)> potential,
                        std::function<double(std::size_t k, std::size_t i, double x)> source) {
  return [=, &g, &mu, &sigma](std::size_t k, LevelCoeffs& co) {
    const double t = g.t(k);
    for (std::size_t i = 0; i < g.n_x; ++i) {
      const double x = g.x(i);
      const double s = sigma_at(sigma, t, x, o);
      double b = mu(t, x);
      if (lambda) b -= s * lambda->values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i));
      if (!std::isfinite(b)) throw DomainError("pde_engine", "drift non-finite on grid");
      co.b[i] = b;
      co.D[i] = 0.5 * s * s;
      co.c[i] = potential ? potential(k, i, x) : 0.0;
      co.s[i] = source ? source(k, i, x) : 0.0;
    }
  };
}

FieldTX make_field(const Grid& g, std::string label, Eigen::MatrixXd v) {
  FieldTX f;
  f.grid = g;
  f.label = std::move(label);
  f.values = std::move(v);
  return f;
}

}  // namespace

OmegaSolve solve_omega_detailed(const Grid& grid, const ScalarField& mu, const ScalarField& sigma,
                                const Eigen::VectorXd& eta1, const Eigen::VectorXd& eta2,
                                const ConstraintSet& cs, const PdeOptions& options) {
  grid.validate();
  require_1d(cs);
  if (static_cast<std::size_t>(eta1.size()) != cs.r1() || static_cast<std::size_t>(eta2.size()) != cs.r2()) {
    throw DomainError("pde_engine", "multiplier blocks do not match the constraint set");
  }
  std::vector<double> terminal(grid.n_x);
  for (std::size_t i = 0; i < grid.n_x; ++i) {
    const double x = grid.x(i);
    double e = 0.0;
    for (std::size_t j = 0; j < cs.r1(); ++j) {
      const auto& c = cs.terminal()[j];
      const double eta = eta1(static_cast<Eigen::Index>(j));
      if (eta != 0.0) e -= eta * (state_value(c.f, c.indicator, x, grid, options) - c.target);
    }
    terminal[i] = std::exp(e);
  }
  std::vector<double> pot(grid.n_x, 0.0);
  for (std::size_t i = 0; i < grid.n_x; ++i) {
    for (std::size_t j = 0; j < cs.r2(); ++j) {
      const auto& c = cs.running()[j];
      const double eta = eta2(static_cast<Eigen::Index>(j));
      if (eta != 0.0) pot[i] += eta * (state_value(c.g, c.indicator, grid.x(i), grid, options) - c.target / grid.T);
    }
  }
  const LevelFn level = generator_level(grid, mu, sigma, nullptr, options,
                                        [&pot](std::size_t, std::size_t i, double) { return pot[i]; }, nullptr);
  auto positive = [](const Eigen::MatrixXd& u) { return (u.array() > 0.0).all(); };
  OmegaSolve out;
  out.theta = options.theta;
  const bool ll = options.boundary == PdeBoundary::log_quadratic;
  Eigen::MatrixXd u;
  try {
    u = backward_solve(grid, terminal, level, options.theta, ll);
  } catch (const PositivityViolation&) {
    u = Eigen::MatrixXd::Zero(1, 1);
  }
  if (!positive(u) && options.theta != 1.0) {
    out.theta = 1.0;
    u = backward_solve(grid, terminal, level, 1.0, ll);
  }
  if (!positive(u)) {
    throw PositivityViolation("pde_engine", "omega lost positivity even with the implicit scheme; refine the grid");
  }
  out.omega = make_field(grid, "omega", std::move(u));
  return out;
}

FieldTX solve_omega(const Grid& grid, const ScalarField& mu, const ScalarField& sigma,
                    const Eigen::VectorXd& eta1, const Eigen::VectorXd& eta2, const ConstraintSet& cs,
                    const PdeOptions& options) {
  return solve_omega_detailed(grid, mu, sigma, eta1, eta2, cs, options).omega;
}

FieldTX drift_adjustment(const FieldTX& omega, const ScalarField& sigma) {
  const Grid& g = omega.grid;
  if (!(omega.values.array() > 0.0).all()) {
    throw PositivityViolation("pde_engine", "drift adjustment needs a strictly positive omega");
  }
  const Eigen::MatrixXd L = omega.values.array().log().matrix();
  Eigen::MatrixXd lam(L.rows(), L.cols());
  const double dx = g.dx();
  const Eigen::Index n = L.cols();
  for (Eigen::Index k = 0; k < L.rows(); ++k) {
    const double t = g.t(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < n; ++i) {
      double d;
      if (i == 0) d = (L(k, 1) - L(k, 0)) / dx;
      else if (i == n - 1) d = (L(k, n - 1) - L(k, n - 2)) / dx;
      else d = (L(k, i + 1) - L(k, i - 1)) / (2.0 * dx);
      lam(k, i) = -sigma(t, g.x(static_cast<std::size_t>(i))) * d;
    }
  }
  return make_field(g, "lambda", std::move(lam));
}

std::vector<FieldTX> solve_terminal_error(const Grid& grid, const ScalarField& mu, const ScalarField& sigma,
                                          const FieldTX& lambda, const ConstraintSet& cs,
                                          const PdeOptions& options) {
  grid.validate();
  const LevelFn level = generator_level(grid, mu, sigma, &lambda, options, nullptr, nullptr);
  std::vector<FieldTX> out;
  for (const auto& c : cs.terminal()) {
    std::vector<double> terminal(grid.n_x);
    for (std::size_t i = 0; i < grid.n_x; ++i) {
      terminal[i] = state_value(c.f, c.indicator, grid.x(i), grid, options) - c.target;
    }
    out.push_back(make_field(grid, "k:" + c.label, backward_solve(grid, terminal, level, options.theta)));
  }
  return out;
}

std::vector<FieldTX> solve_running_error(const Grid& grid, const ScalarField& mu, const ScalarField& sigma,
                                         const FieldTX& lambda, const ConstraintSet& cs,
                                         const PdeOptions& options) {
  grid.validate();
  std::vector<FieldTX> out;
  const std::vector<double> zero(grid.n_x, 0.0);
  for (const auto& c : cs.running()) {
    std::vector<double> src(grid.n_x);
    for (std::size_t i = 0; i < grid.n_x; ++i) src[i] = state_value(c.g, c.indicator, grid.x(i), grid, options);
    const LevelFn level = generator_level(grid, mu, sigma, &lambda, options, nullptr,
                                          [&src](std::size_t, std::size_t i, double) { return src[i]; });
    out.push_back(make_field(grid, "ell:" + c.label, backward_solve(grid, zero, level, options.theta)));
  }
  return out;
}

Eigen::VectorXd reference_moments_sd(const Grid& grid, const ScalarField& mu, const ScalarField& sigma,
                                     double x0, const ConstraintSet& cs, Eigen::VectorXd* means,
                                     const PdeOptions& options) {
  grid.validate();
  require_1d(cs);
  const LevelFn plain = generator_level(grid, mu, sigma, nullptr, options, nullptr, nullptr);
  const auto r = static_cast<Eigen::Index>(cs.size());
  Eigen::VectorXd sd(r), mean(r);
  Eigen::Index col = 0;
  for (const auto& c : cs.terminal()) {
    std::vector<double> f1(grid.n_x), f2(grid.n_x);
    for (std::size_t i = 0; i < grid.n_x; ++i) {
      f1[i] = state_value(c.f, c.indicator, grid.x(i), grid, options);
      f2[i] = f1[i] * f1[i];
    }
    const double m1 = make_field(grid, "m1", backward_solve(grid, f1, plain, options.theta)).initial(x0);
    const double m2 = make_field(grid, "m2", backward_solve(grid, f2, plain, options.theta)).initial(x0);
    mean(col) = m1;
    sd(col) = std::sqrt(std::max(0.0, m2 - m1 * m1));
    ++col;
  }
  const std::vector<double> zero(grid.n_x, 0.0);
  for (const auto& c : cs.running()) {
    std::vector<double> g1(grid.n_x);
    for (std::size_t i = 0; i < grid.n_x; ++i) g1[i] = state_value(c.g, c.indicator, grid.x(i), grid, options);
    const LevelFn l1 = generator_level(grid, mu, sigma, nullptr, options, nullptr,
                                       [&g1](std::size_t, std::size_t i, double) { return g1[i]; });
    const Eigen::MatrixXd ell1 = backward_solve(grid, zero, l1, options.theta);
    // E[(int g)^2] = E[int 2 g(X_s) ell1(s, X_s) ds].
    const LevelFn l2 = generator_level(grid, mu, sigma, nullptr, options, nullptr,
                                       [&g1, &ell1](std::size_t k, std::size_t i, double) {
                                         return 2.0 * g1[i] * ell1(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i));
                                       });
    const double m1 = make_field(grid, "m1", ell1).initial(x0);
    const double m2 = make_field(grid, "m2", backward_solve(grid, zero, l2, options.theta)).initial(x0);
    mean(col) = m1;
    sd(col) = std::sqrt(std::max(0.0, m2 - m1 * m1));
    ++col;
  }
  const auto labels = cs.labels();
  for (Eigen::Index j = 0; j < r; ++j) {
    if (!(sd(j) > 1e-12)) throw DegenerateConstraint("pde_engine", static_cast<std::size_t>(j), labels[j]);
  }
  if (means) *means = mean;
  return sd;
}

namespace {

struct PipelineEval {
  Eigen::VectorXd residual;
  FieldTX omega;
  FieldTX lambda;
  double theta = 0.5;
};

PipelineEval pipeline(const Grid& g, const ScalarField& mu, const ScalarField& sigma, double x0,
                      const ConstraintSet& cs, const Eigen::VectorXd& eta, const PdeOptions& o) {
  const auto r1 = static_cast<Eigen::Index>(cs.r1());
  const auto r2 = static_cast<Eigen::Index>(cs.r2());
  PipelineEval ev;
  OmegaSolve os = solve_omega_detailed(g, mu, sigma, eta.head(r1), eta.tail(r2), cs, o);
  ev.theta = os.theta;
  ev.omega = std::move(os.omega);
  ev.lambda = drift_adjustment(ev.omega, sigma);
  PdeOptions inner = o;
  inner.theta = ev.theta;
  const auto k = solve_terminal_error(g, mu, sigma, ev.lambda, cs, inner);
  const auto ell = solve_running_error(g, mu, sigma, ev.lambda, cs, inner);
  ev.residual.resize(r1 + r2);
  for (Eigen::Index j = 0; j < r1; ++j) ev.residual(j) = k[static_cast<std::size_t>(j)].initial(x0);
  for (Eigen::Index j = 0; j < r2; ++j) {
    ev.residual(r1 + j) = ell[static_cast<std::size_t>(j)].initial(x0) - cs.running()[static_cast<std::size_t>(j)].target;
  }
  return ev;
}

}  // namespace

CalibrationResult calibrate_multipliers(const Grid& grid, const ScalarField& mu, const ScalarField& sigma,
                                        double x0, const ConstraintSet& cs, const CalibrationOptions& options) {
  grid.validate();
  require_1d(cs);
  grid.check_margin(x0, sigma(0.0, x0));
  for (const auto& c : cs.terminal()) {
    if (c.indicator && !(c.target > 0.0 && c.target < 1.0)) {
      throw InfeasibleTarget("pde_engine", "probability target of '" + c.label + "' must lie in (0, 1)");
    }
  }
  for (const auto& c : cs.running()) {
    if (c.indicator && !(c.target > 0.0 && c.target < grid.T)) {
      throw InfeasibleTarget("pde_engine", "occupation target of '" + c.label + "' must lie in (0, T)");
    }
  }
  const auto r = static_cast<Eigen::Index>(cs.size());
  CalibrationReport rep;
  rep.scale = reference_moments_sd(grid, mu, sigma, x0, cs, nullptr, options.pde);

  Eigen::VectorXd eta = Eigen::VectorXd::Zero(r);
  PipelineEval ev = pipeline(grid, mu, sigma, x0, cs, eta, options.pde);
  Eigen::VectorXd z = ev.residual.cwiseQuotient(rep.scale);
  rep.residual_history.push_back(z.cwiseAbs().maxCoeff());

  int it = 0;
  while (z.cwiseAbs().maxCoeff() > options.tol && it < options.max_outer) {
    ++it;
    Eigen::MatrixXd J(r, r);
    std::vector<Eigen::VectorXd> cols(static_cast<std::size_t>(r));
    parallel_for(static_cast<std::size_t>(r), [&](std::size_t begin, std::size_t end) {
      for (std::size_t j = begin; j < end; ++j) {
        Eigen::VectorXd bumped = eta;
        bumped(static_cast<Eigen::Index>(j)) += options.bump;
        cols[j] = pipeline(grid, mu, sigma, x0, cs, bumped, options.pde).residual.cwiseQuotient(rep.scale);
      }
    });
    for (Eigen::Index j = 0; j < r; ++j) J.col(j) = (cols[static_cast<std::size_t>(j)] - z) / options.bump;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
    if (!lu.isInvertible()) {
      throw SingularMatrix("pde_engine", "residual Jacobian is singular; rescale or remove redundant constraints");
    }
    const Eigen::VectorXd step = -lu.solve(z);
    double alpha = 1.0;
    bool accepted = false;
    for (int h = 0; h < 30; ++h, alpha *= 0.5) {
      const Eigen::VectorXd trial = eta + alpha * step;
      try {
        PipelineEval tv = pipeline(grid, mu, sigma, x0, cs, trial, options.pde);
        const Eigen::VectorXd tz = tv.residual.cwiseQuotient(rep.scale);
        if (tz.norm() < z.norm()) {
          eta = trial;
          ev = std::move(tv);
          z = tz;
          accepted = true;
          break;
        }
      } catch (const PositivityViolation&) {
        // treat as no decrease and keep halving
      }
    }
    rep.residual_history.push_back(z.cwiseAbs().maxCoeff());
    if (!accepted) {
      rep.warnings.push_back("line search stalled at outer iteration " + std::to_string(it));
      break;
    }
  }
  rep.eta = eta;
  rep.residual = ev.residual;
  rep.std_residual = z;
  rep.iterations = it;
  rep.theta = ev.theta;
  rep.converged = z.cwiseAbs().maxCoeff() <= options.tol;
  if (!rep.converged) rep.warnings.push_back("outer loop did not reach the tolerance");
  if (ev.theta != options.pde.theta) rep.warnings.push_back("implicit fallback engaged for omega");

  CalibrationResult out;
  out.eta = eta;
  out.omega = std::move(ev.omega);
  out.lambda = std::move(ev.lambda);
  out.report = std::move(rep);
  return out;
}

TiltFields lambda_tilt(const FieldTX& lambda, Extrapolation mode) {
  auto field = std::make_shared<const FieldTX>(lambda);
  TiltFields tilt;
  tilt.lambda = [field, mode](double t, std::span<const double> x, std::span<double> out) {
    out[0] = mode == Extrapolation::clamp ? field->at_clamped(t, x[0]) : field->at(t, x[0]);
  };
  return tilt;
}

}  // namespace minkl
