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

#ifndef MALASCALE_MODEL_HPP_
#define MALASCALE_MODEL_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <string_view>

#include "malascale/errors.hpp"

namespace malascale {

// The posterior over weights x_1..x_N is
//
//   pi_N(x) ∝ exp( sum_i U(x_i) - (1/2N) (sum_i H(x_i))^2 )
//
// with U(x) = y H(x) + log(prior density). A preset fixes H and the prior.
//
//   strict_hp    H = beta tanh x,  prior ∝ exp(-a sqrt(1+x^2))
//   gauss_prior  H = beta tanh x,  prior standard normal
//   iid_gauss    H = 0,            prior standard normal
enum class Family { kStrictHp, kGaussPrior, kIidGauss };

inline std::string_view family_name(Family f) {
  switch (f) {
    case Family::kStrictHp: return "strict_hp";
    case Family::kGaussPrior: return "gauss_prior";
    case Family::kIidGauss: return "iid_gauss";
  }
  return "unknown";
}

inline Family parse_family(std::string_view name) {
  if (name == "strict_hp") return Family::kStrictHp;
  if (name == "gauss_prior") return Family::kGaussPrior;
  if (name == "iid_gauss") return Family::kIidGauss;
  throw ArgumentError("unknown model family '" + std::string(name) +
                      "' (expected strict_hp, gauss_prior or iid_gauss)");
}

struct ModelSpec {
  Family family = Family::kStrictHp;
  double y = 0.5;
  double beta = 1.0;
  double a = 1.0;  // prior tail weight, strict_hp only

  static ModelSpec strict_hp(double y = 0.5, double beta = 1.0, double a = 1.0) {
    return {Family::kStrictHp, y, beta, a};
  }
  static ModelSpec gauss_prior(double y = 0.5, double beta = 1.0) {
    return {Family::kGaussPrior, y, beta, 1.0};
  }
  static ModelSpec iid_gauss() { return {Family::kIidGauss, 0.0, 0.0, 1.0}; }

  /// Whether H and U both have bounded derivatives of every order.
  /// The Gaussian prior makes U' unbounded.
  bool hp_satisfied() const { return family == Family::kStrictHp; }

  /// True when H vanishes identically, i.e. pi_N is a product measure.
  bool independent() const {
    return family == Family::kIidGauss || beta == 0.0;
  }

  void validate() const {
    if (!std::isfinite(y) || !std::isfinite(beta) || !std::isfinite(a)) {
      throw ArgumentError("model parameters must be finite");
    }
    if (family == Family::kStrictHp && !(a > 0.0)) {
      throw ArgumentError("strict_hp requires a > 0");
    }
  }
};

inline constexpr int kMaxOrder = 4;

/// Derivatives of order 0..4 at a point.
using Jet = std::array<double, kMaxOrder + 1>;

namespace detail {

inline void check_order(int order) {
  if (order < 0 || order > kMaxOrder) {
    throw ArgumentError("derivative order " + std::to_string(order) +
                        " outside 0..4");
  }
}

// d^k/dx^k tanh(x), k = 0..4, in terms of t = tanh x and s = sech^2 x.
inline Jet tanh_jet(double x) {
  const double t = std::tanh(x);
  const double s = 1.0 - t * t;
  return {t, s, -2.0 * t * s, s * (4.0 * t * t - 2.0 * s),
          8.0 * t * s * (2.0 * s - t * t)};
}

// d^k/dx^k sqrt(1 + x^2), k = 0..4.
inline Jet hyperbolic_jet(double x) {
  const double r2 = 1.0 + x * x;
  const double r = std::sqrt(r2);
  const double r3 = r2 * r;
  const double r5 = r3 * r2;
  const double r7 = r5 * r2;
  return {r, x / r, 1.0 / r3, -3.0 * x / r5, (12.0 * x * x - 3.0) / r7};
}

inline Jet quadratic_jet(double x) { return {0.5 * x * x, x, 1.0, 0.0, 0.0}; }

}  // namespace detail

/// H and its derivatives up to order 4 at x.
inline Jet H_jet(const ModelSpec& model, double x) {
  if (model.family == Family::kIidGauss) return {0.0, 0.0, 0.0, 0.0, 0.0};
  Jet j = detail::tanh_jet(x);
  for (double& v : j) v *= model.beta;
  return j;
}

/// U and its derivatives up to order 4 at x.
inline Jet U_jet(const ModelSpec& model, double x) {
  const Jet h = H_jet(model, x);
  const Jet prior = model.family == Family::kStrictHp
                        ? detail::hyperbolic_jet(x)
                        : detail::quadratic_jet(x);
  const double prior_scale = model.family == Family::kStrictHp ? model.a : 1.0;
  Jet u{};
  for (int k = 0; k <= kMaxOrder; ++k) {
    u[k] = model.y * h[k] - prior_scale * prior[k];
  }
  return u;
}

/// psi = U - m H, the log-density (up to a constant) of the limit marginal.
struct PsiContext {
  double m = 0.0;
};

inline Jet psi_jet(const ModelSpec& model, PsiContext ctx, double x) {
  const Jet h = H_jet(model, x);
  Jet u = U_jet(model, x);
  for (int k = 0; k <= kMaxOrder; ++k) u[k] -= ctx.m * h[k];
  return u;
}

inline double eval_H(const ModelSpec& model, double x, int order) {
  detail::check_order(order);
  return H_jet(model, x)[order];
}

inline double eval_U(const ModelSpec& model, double x, int order) {
  detail::check_order(order);
  return U_jet(model, x)[order];
}

inline double eval_psi(const ModelSpec& model, PsiContext ctx, double x,
                       int order) {
  detail::check_order(order);
  return psi_jet(model, ctx, x)[order];
}

/// Log density of the prior mu up to a constant: U - y H.
inline double log_prior(const ModelSpec& model, double x) {
  if (model.family == Family::kStrictHp) return -model.a * std::sqrt(1.0 + x * x);
  return -0.5 * x * x;
}

/// H, H', U, U' at one point. This is what a sampler step needs.
struct PointEval {
  double h;
  double dh;
  double u;
  double du;
};

inline PointEval eval_point(const ModelSpec& model, double x) {
  switch (model.family) {
    case Family::kIidGauss:
      return {0.0, 0.0, -0.5 * x * x, -x};
    case Family::kGaussPrior: {
      const double t = std::tanh(x);
      const double h = model.beta * t;
      const double dh = model.beta * (1.0 - t * t);
      return {h, dh, model.y * h - 0.5 * x * x, model.y * dh - x};
    }
    case Family::kStrictHp: {
      const double t = std::tanh(x);
      const double r = std::sqrt(1.0 + x * x);
      const double h = model.beta * t;
      const double dh = model.beta * (1.0 - t * t);
      return {h, dh, model.y * h - model.a * r, model.y * dh - model.a * x / r};
    }
  }
  return {0.0, 0.0, 0.0, 0.0};
}

/// H(b) - H(a) and U(b) - U(a) formed from b - a, so that nearby points do not
/// lose the difference to cancellation.
inline double delta_H(const ModelSpec& model, double a, double b) {
  if (model.family == Family::kIidGauss) return 0.0;
  const double d = b - a;
  if (std::abs(d) > 1.0) return model.beta * (std::tanh(b) - std::tanh(a));
  return model.beta * std::sinh(d) / (std::cosh(a) * std::cosh(b));
}

inline double delta_U(const ModelSpec& model, double a, double b) {
  const double d = b - a;
  const double y_part = model.family == Family::kIidGauss ? 0.0 : model.y * delta_H(model, a, b);
  if (model.family == Family::kStrictHp) {
    return y_part - model.a * d * (b + a) / (std::sqrt(1.0 + a * a) + std::sqrt(1.0 + b * b));
  }
  return y_part - 0.5 * d * (b + a);
}

/// Half-width of the truncated real line used for one-dimensional integrals:
/// exponential tails need a wider window than Gaussian ones.
inline double default_half_width(const ModelSpec& model) {
  if (model.family == Family::kStrictHp) return 40.0 / std::min(model.a, 1.0);
  return 12.0;
}

}  // namespace malascale

#endif  // MALASCALE_MODEL_HPP_
