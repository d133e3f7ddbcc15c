// Copyright 2026 The malascale Authors.
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

#ifndef MALASCALE_LIMIT_HPP_
#define MALASCALE_LIMIT_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <utility>
#include <vector>

#include "malascale/errors.hpp"
#include "malascale/model.hpp"
#include "malascale/normal.hpp"
#include "malascale/quadrature.hpp"

namespace malascale {

inline QuadratureSpec default_quadrature(const ModelSpec& model) {
  QuadratureSpec q;
  q.half_width = default_half_width(model);
  return q;
}

/// Quantities of the N -> infinity limit. The marginal of every coordinate
/// converges to pi(x) = exp(psi(x) - log_norm) with psi = U - m H and
/// m = ∫ H dpi.
struct LimitState {
  ModelSpec model;
  QuadratureSpec quadrature;
  double m = 0.0;
  double theta_star = 0.0;  // y - m
  double log_norm = 0.0;
  double fixed_point_residual = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  double tau_sq = std::numeric_limits<double>::quiet_NaN();
  double tau = std::numeric_limits<double>::quiet_NaN();
  double ell_hat = std::numeric_limits<double>::quiet_NaN();
  double a_star = std::numeric_limits<double>::quiet_NaN();
  bool mean_field_solved = false;

  PsiContext psi() const { return {m}; }
  bool tau_solved() const { return std::isfinite(tau) && tau > 0.0; }

  double density(double x) const {
    return std::exp(eval_psi(model, psi(), x, 0) - log_norm);
  }

  /// ∫ f(x) pi(x) dx where f receives x and the psi jet at x.
  template <class F>
  double expect(F&& f) const {
    if (!mean_field_solved) throw StateError("limit state is not solved");
    const CompositeRule rule(quadrature);
    return rule.integrate([&](double x) {
      const Jet p = psi_jet(model, psi(), x);
      return f(x, p) * std::exp(p[0] - log_norm);
    });
  }
};

struct MeanFieldOptions {
  double damping = 0.5;
  int max_iterations = 500;
  double tolerance = 1e-10;
};

/// Solves m = ∫ H e^{U - mH} / ∫ e^{U - mH} by damped fixed-point iteration,
/// switching to a Newton step whenever the damped map contracts slowly.
inline LimitState solve_mean_field(const ModelSpec& model,
                                   const QuadratureSpec& quad,
                                   const MeanFieldOptions& opt = {}) {
  model.validate();
  quad.validate();
  const CompositeRule rule(quad);
  const std::size_t n = rule.size();
  std::vector<double> h(n);
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rule.nodes()[i];
    h[i] = eval_H(model, x, 0);
    u[i] = eval_U(model, x, 0);
    if (!std::isfinite(h[i]) || !std::isfinite(u[i])) {
      std::ostringstream msg;
      msg << "model is not finite at node x = " << x;
      throw NumericError(msg.str());
    }
  }

  // Moments of H under e^{U - mH}, with the exponent shifted by its maximum.
  struct Moments {
    double mean;
    double var;
    double log_norm;
  };
  auto moments = [&](double m) {
    double shift = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) shift = std::max(shift, u[i] - m * h[i]);
    double z = 0.0;
    double s1 = 0.0;
    double s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = rule.weights()[i] * std::exp(u[i] - m * h[i] - shift);
      z += w;
      s1 += w * h[i];
      s2 += w * h[i] * h[i];
    }
    const double mean = s1 / z;
    return Moments{mean, std::max(0.0, s2 / z - mean * mean), std::log(z) + shift};
  };

  double m = 0.0;
  double prev_residual = std::numeric_limits<double>::infinity();
  LimitState state;
  state.model = model;
  state.quadrature = quad;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    const Moments mo = moments(m);
    const double residual = mo.mean - m;
    state.iterations = it;
    if (!std::isfinite(residual)) {
      throw NumericError("mean-field iteration produced a non-finite residual");
    }
    if (std::abs(residual) < opt.tolerance) break;
    if (std::abs(residual) > 0.9 * prev_residual) {
      // f(m) = E_m H - m has f'(m) = -(1 + Var_m H).
      m += residual / (1.0 + mo.var);
    } else {
      m += opt.damping * residual;
    }
    prev_residual = std::abs(residual);
    if (it == opt.max_iterations) {
      throw ConvergenceError("mean-field fixed point did not converge", residual);
    }
  }
  const Moments final_moments = moments(m);
  state.m = m;
  state.theta_star = model.y - m;
  state.log_norm = final_moments.log_norm;
  state.fixed_point_residual = std::abs(final_moments.mean - m);
  state.mean_field_solved = true;
  return state;
}

/// K'(theta) for the exponential family generated by H under the prior mu.
inline double k_prime(const ModelSpec& model, double theta,
                      const QuadratureSpec& quad) {
  if (!std::isfinite(theta)) throw ArgumentError("k_prime requires finite theta");
  const CompositeRule rule(quad);
  // log dmu/dx + theta H; shifted per node by a bound to avoid overflow.
  double shift = -std::numeric_limits<double>::infinity();
  for (double x : rule.nodes()) {
    shift = std::max(shift, log_prior(model, x) + theta * eval_H(model, x, 0));
  }
  double z = 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double x = rule.nodes()[i];
    const double hx = eval_H(model, x, 0);
    const double w =
        rule.weights()[i] * std::exp(log_prior(model, x) + theta * hx - shift);
    z += w;
    s += w * hx;
  }
  return s / z;
}

/// The five expectations that make up tau^2, kept apart so that the two
/// integration-by-parts consequences (terms 4 and 5 vanish) are visible.
struct TauSquaredTerms {
  double psi2_sq_psi1_sq = 0.0;   // pi(psi''^2 psi'^2)
  double psi1_psi2_psi3 = 0.0;    // pi(psi' psi'' psi''')
  double psi3_sq = 0.0;           // pi(psi'''^2)
  double psi2_cube = 0.0;         // pi(psi''^3)
  double psi3_cube = 0.0;         // pi(psi'''^3)
  double ibp_factor = 0.0;        // pi(H'' + H' psi')
  double h1_psi_mix = 0.0;        // pi(H' (psi''' + psi' psi''))
  double h1_sq = 0.0;             // pi(H'^2)
  double h2 = 0.0;                // pi(H'')
  double h1_psi1 = 0.0;           // pi(H' psi')

  double term1() const { return 9.0 * psi2_sq_psi1_sq / 144.0; }
  double term2() const { return 18.0 * psi1_psi2_psi3 / 144.0; }
  double term3() const { return 15.0 * psi3_sq / 144.0; }
  double term4() const { return -18.0 * ibp_factor * h1_psi_mix / 144.0; }
  double term5() const {
    const double c = h2 + h1_psi1;
    return 9.0 * h1_sq * c * c / 144.0;
  }
  double total() const { return term1() + term2() + term3() + term4() + term5(); }
  double first_three() const { return term1() + term2() + term3(); }

  /// (1/48){5 pi(psi'''^2) - 3 pi(psi''^3)}: the independent-coordinates
  /// constant with the cube on the second derivative.
  double independent_form() const { return (5.0 * psi3_sq - 3.0 * psi2_cube) / 48.0; }
  /// The same expression with the cube on the third derivative.
  double independent_form_third_cube() const {
    return (5.0 * psi3_sq - 3.0 * psi3_cube) / 48.0;
  }
};

inline TauSquaredTerms tau_squared_terms(const LimitState& limit) {
  if (!limit.mean_field_solved) throw StateError("tau_squared needs a solved mean field");
  const ModelSpec& model = limit.model;
  const CompositeRule rule(limit.quadrature);
  TauSquaredTerms t;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double x = rule.nodes()[i];
    const Jet p = psi_jet(model, limit.psi(), x);
    const Jet h = H_jet(model, x);
    const double w = rule.weights()[i] * std::exp(p[0] - limit.log_norm);
    if (!std::isfinite(w)) {
      std::ostringstream msg;
      msg << "limit density is not finite at node x = " << x;
      throw NumericError(msg.str());
    }
    t.psi2_sq_psi1_sq += w * p[2] * p[2] * p[1] * p[1];
    t.psi1_psi2_psi3 += w * p[1] * p[2] * p[3];
    t.psi3_sq += w * p[3] * p[3];
    t.psi2_cube += w * p[2] * p[2] * p[2];
    t.psi3_cube += w * p[3] * p[3] * p[3];
    t.ibp_factor += w * (h[2] + h[1] * p[1]);
    t.h1_psi_mix += w * h[1] * (p[3] + p[1] * p[2]);
    t.h1_sq += w * h[1] * h[1];
    t.h2 += w * h[2];
    t.h1_psi1 += w * h[1] * p[1];
  }
  return t;
}

inline double tau_squared(const LimitState& limit) {
  return tau_squared_terms(limit).total();
}

/// a(ell) = 2 Phi(-ell^3 tau / 2).
inline double acceptance_limit(double ell, double tau) {
  return 2.0 * normal_cdf(-ell * ell * ell * tau / 2.0);
}

/// v(ell) = 2 ell^2 Phi(-ell^3 tau / 2).
inline double speed(double ell, double tau) {
  return 2.0 * ell * ell * normal_cdf(-ell * ell * ell * tau / 2.0);
}

struct OptimalScaling {
  double ell_hat;
  double a_star;
  double u;  // ell_hat^3 tau / 2
};

/// Maximizer of v. With u = ell^3 tau / 2 the stationarity condition is
/// 2 Phi(-u) = 3 u phi(u), which does not involve tau.
inline OptimalScaling optimal_ell(double tau) {
  if (!(tau > 0.0)) throw ArgumentError("optimal_ell requires tau > 0");
  auto f = [](double u) { return 2.0 * normal_cdf(-u) - 3.0 * u * normal_pdf(u); };
  double lo = 1e-6;
  double hi = 10.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double u = 0.5 * (lo + hi);
  return {std::cbrt(2.0 * u / tau), 2.0 * normal_cdf(-u), u};
}

/// Mean field, tau^2 and the optimal scaling in one call.
inline LimitState solve_limit(const ModelSpec& model, const QuadratureSpec& quad) {
  LimitState s = solve_mean_field(model, quad);
  s.tau_sq = tau_squared(s);
  if (!(s.tau_sq > 0.0)) {
    throw NumericError("tau^2 is not positive; the model has no Langevin correction");
  }
  s.tau = std::sqrt(s.tau_sq);
  const OptimalScaling opt = optimal_ell(s.tau);
  s.ell_hat = opt.ell_hat;
  s.a_star = opt.a_star;
  return s;
}

inline LimitState solve_limit(const ModelSpec& model) {
  return solve_limit(model, default_quadrature(model));
}

/// CDF table of a one-dimensional density known up to a constant through its
/// log. Between table points the CDF is completed by a local Gauss-Legendre
/// integral, so cdf() is accurate far beyond linear interpolation.
class DensityTable {
 public:
  DensityTable(std::function<double(double)> log_density, double lo, double hi,
               int grid_points)
      : log_density_(std::move(log_density)) {
    if (grid_points < 3) throw ArgumentError("CDF table needs at least 3 points");
    if (!(hi > lo)) throw ArgumentError("CDF table needs hi > lo");
    const int cells = grid_points - 1;
    const double width = (hi - lo) / cells;
    std::vector<double> xs(grid_points);
    for (int i = 0; i < grid_points; ++i) xs[i] = lo + i * width;
    xs.back() = hi;
    shift_ = -std::numeric_limits<double>::infinity();
    for (double x : xs) shift_ = std::max(shift_, log_density_(x));
    std::vector<double> cumulative(grid_points, 0.0);
    for (int i = 0; i < cells; ++i) {
      cumulative[i + 1] = cumulative[i] + cell_mass(xs[i], xs[i + 1]);
    }
    total_ = cumulative.back();
    if (!(total_ > 0.0) || !std::isfinite(total_)) {
      throw NumericError("CDF table total mass is not positive and finite");
    }
    // Keep only points where the normalized CDF strictly increases; in the
    // far tails increments fall below the resolution of a double.
    x_.push_back(xs[0]);
    cdf_.push_back(0.0);
    for (int i = 1; i < grid_points; ++i) {
      const double c = cumulative[i] / total_;
      if (c > cdf_.back()) {
        x_.push_back(xs[i]);
        cdf_.push_back(c);
      }
    }
    cdf_.back() = 1.0;
  }

  const std::vector<double>& x() const { return x_; }
  const std::vector<double>& cdf_values() const { return cdf_; }
  double lo() const { return x_.front(); }
  double hi() const { return x_.back(); }

  double density(double x) const {
    return std::exp(log_density_(x) - shift_) / total_;
  }

  double cdf(double x) const {
    if (x <= x_.front()) return 0.0;
    if (x >= x_.back()) return 1.0;
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const std::size_t k = static_cast<std::size_t>(it - x_.begin()) - 1;
    return std::min(1.0, cdf_[k] + cell_mass(x_[k], x) / total_);
  }

  /// Inverse CDF by bracketed Newton inside the table cell.
  double quantile(double p) const {
    if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("quantile needs p in [0, 1]");
    if (p <= 0.0) return x_.front();
    if (p >= 1.0) return x_.back();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), p);
    const std::size_t k = static_cast<std::size_t>(it - cdf_.begin()) - 1;
    double lo = x_[k];
    double hi = x_[std::min(k + 1, x_.size() - 1)];
    double x = lo + (hi - lo) * (p - cdf_[k]) /
                        std::max(cdf_[k + 1] - cdf_[k], 1e-300);
    for (int iter = 0; iter < 60; ++iter) {
      const double f = cdf_[k] + cell_mass(x_[k], x) / total_ - p;
      if (std::abs(f) < 1e-15) break;
      if (f > 0.0) {
        hi = x;
      } else {
        lo = x;
      }
      const double d = density(x);
      double next = d > 0.0 ? x - f / d : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - x) < 1e-15 * (1.0 + std::abs(x))) {
        x = next;
        break;
      }
      x = next;
    }
    return x;
  }

 private:
  double cell_mass(double a, double b) const {
    if (b <= a) return 0.0;
    static const GaussLegendreRule rule(16);
    const double half = 0.5 * (b - a);
    const double mid = a + half;
    double s = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      s += rule.weights[k] * std::exp(log_density_(mid + half * rule.nodes[k]) - shift_);
    }
    return s * half;
  }

  std::function<double(double)> log_density_;
  double shift_ = 0.0;
  double total_ = 1.0;
  std::vector<double> x_;
  std::vector<double> cdf_;
};

/// CDF table of the limit marginal pi over [-L, L].
inline DensityTable limit_cdf_table(const LimitState& limit, int grid_points = 8193) {
  if (!limit.mean_field_solved) throw StateError("limit_cdf_table needs a solved limit");
  const ModelSpec model = limit.model;
  const PsiContext ctx = limit.psi();
  return DensityTable([model, ctx](double x) { return eval_psi(model, ctx, x, 0); },
                      -limit.quadrature.half_width, limit.quadrature.half_width,
                      grid_points);
}

/// CDF table of the prior mu, density ∝ e^{U - yH}.
inline DensityTable prior_cdf_table(const ModelSpec& model, const QuadratureSpec& quad,
                                    int grid_points = 8193) {
  return DensityTable([model](double x) { return log_prior(model, x); },
                      -quad.half_width, quad.half_width, grid_points);
}

}  // namespace malascale

#endif  // MALASCALE_LIMIT_HPP_
