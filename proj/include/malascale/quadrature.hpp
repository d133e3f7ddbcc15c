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

#ifndef MALASCALE_QUADRATURE_HPP_
#define MALASCALE_QUADRATURE_HPP_

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "malascale/errors.hpp"

namespace malascale {

/// Truncated real line [-half_width, half_width] split into equal panels,
/// each integrated with a fixed Gauss-Legendre rule.
struct QuadratureSpec {
  double half_width = 12.0;
  int panels = 256;
  int nodes_per_panel = 32;
  double abs_tol = 1e-12;

  void validate() const {
    if (!(half_width > 0.0) || !std::isfinite(half_width)) {
      throw ArgumentError("quadrature half_width must be positive and finite");
    }
    if (panels < 1) throw ArgumentError("quadrature panels must be >= 1");
    if (nodes_per_panel < 1 || nodes_per_panel > 256) {
      throw ArgumentError("quadrature nodes_per_panel must be in 1..256");
    }
    if (!(abs_tol > 0.0)) throw ArgumentError("quadrature abs_tol must be > 0");
  }

  QuadratureSpec with_panels(int p) const {
    QuadratureSpec q = *this;
    q.panels = p;
    return q;
  }
  QuadratureSpec with_half_width(double l) const {
    QuadratureSpec q = *this;
    q.half_width = l;
    return q;
  }
};

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendreRule(int n) : nodes(n), weights(n) {
    // Newton iteration on P_n from the Chebyshev-like initial guess; the
    // rule is symmetric so only half the roots are computed.
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
      double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p1 = 1.0;
        double p2 = 0.0;
        for (int j = 1; j <= n; ++j) {
          const double p3 = p2;
          p2 = p1;
          p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
        }
        dp = n * (z * p1 - p2) / (z * z - 1.0);
        const double dz = p1 / dp;
        z -= dz;
        if (std::abs(dz) < 1e-16) break;
      }
      // Recompute the derivative at the converged root for the weight.
      double p1 = 1.0;
      double p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      dp = n * (z * p1 - p2) / (z * z - 1.0);
      const double w = 2.0 / ((1.0 - z * z) * dp * dp);
      nodes[i] = -z;
      nodes[n - 1 - i] = z;
      weights[i] = w;
      weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) nodes[n / 2] = 0.0;
  }
};

/// All nodes and weights of a composite rule on an interval, precomputed so
/// that repeated integrals (fixed-point iterations, moment tables) reuse them.
class CompositeRule {
 public:
  CompositeRule(double lo, double hi, int panels, int nodes_per_panel) {
    if (!(hi > lo)) throw ArgumentError("composite rule needs hi > lo");
    const GaussLegendreRule base(nodes_per_panel);
    const double width = (hi - lo) / panels;
    nodes_.reserve(static_cast<std::size_t>(panels) * nodes_per_panel);
    weights_.reserve(nodes_.capacity());
    for (int p = 0; p < panels; ++p) {
      const double a = lo + p * width;
      const double mid = a + 0.5 * width;
      for (int k = 0; k < nodes_per_panel; ++k) {
        nodes_.push_back(mid + 0.5 * width * base.nodes[k]);
        weights_.push_back(0.5 * width * base.weights[k]);
      }
    }
  }

  explicit CompositeRule(const QuadratureSpec& q)
      : CompositeRule(-q.half_width, q.half_width, q.panels, q.nodes_per_panel) {}

  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return nodes_.size(); }

  template <class F>
  double integrate(F&& f) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const double v = f(nodes_[i]);
      if (!std::isfinite(v)) {
        std::ostringstream msg;
        msg << "integrand is not finite at node x = " << nodes_[i];
        throw NumericError(msg.str());
      }
      sum += weights_[i] * v;
    }
    return sum;
  }

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

/// Integral of f over [-L, L] with the composite rule described by `quad`.
template <class F>
double integrate(F&& f, const QuadratureSpec& quad) {
  quad.validate();
  return CompositeRule(quad).integrate(std::forward<F>(f));
}

/// Integral of f over [lo, hi] with `panels` panels of the same rule.
template <class F>
double integrate_interval(F&& f, double lo, double hi, int panels,
                          int nodes_per_panel) {
  return CompositeRule(lo, hi, panels, nodes_per_panel)
      .integrate(std::forward<F>(f));
}

}  // namespace malascale

#endif  // MALASCALE_QUADRATURE_HPP_
