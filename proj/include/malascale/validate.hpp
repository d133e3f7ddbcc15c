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

#ifndef MALASCALE_VALIDATE_HPP_
#define MALASCALE_VALIDATE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "malascale/diagnostics.hpp"
#include "malascale/limit.hpp"
#include "malascale/model.hpp"
#include "malascale/rng.hpp"
#include "malascale/sampler.hpp"

namespace malascale {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ValidateOptions {
  std::size_t pairs = 100000;  // detailed-balance pairs
  std::uint64_t seed = 1;
};

inline std::vector<ModelSpec> preset_models() {
  return {ModelSpec::strict_hp(), ModelSpec::gauss_prior(), ModelSpec::iid_gauss()};
}

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream o;
  o.precision(3);
  o << std::scientific << v;
  return o.str();
}

inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxy / sxx;
}

inline CheckResult check_derivatives() {
  double worst = 0.0;
  constexpr double step = 1e-4;
  for (const ModelSpec& m : preset_models()) {
    for (int i = 0; i < 200; ++i) {
      const double x = -5.0 + 10.0 * (i + 0.5) / 200.0;
      const Jet hp = H_jet(m, x + step);
      const Jet hm = H_jet(m, x - step);
      const Jet h0 = H_jet(m, x);
      const Jet up = U_jet(m, x + step);
      const Jet um = U_jet(m, x - step);
      const Jet u0 = U_jet(m, x);
      for (int k = 1; k <= kMaxOrder; ++k) {
        const double fd_h = (hp[k - 1] - hm[k - 1]) / (2.0 * step);
        const double fd_u = (up[k - 1] - um[k - 1]) / (2.0 * step);
        worst = std::max(worst, std::abs(fd_h - h0[k]) / std::max(1.0, std::abs(h0[k])));
        worst = std::max(worst, std::abs(fd_u - u0[k]) / std::max(1.0, std::abs(u0[k])));
      }
    }
  }
  return {"derivatives match central differences", worst < 1e-5, "max rel err " + fmt(worst)};
}

inline CheckResult check_quadrature_identities() {
  double worst = 0.0;
  for (const ModelSpec& m : preset_models()) {
    const LimitState s = solve_limit(m);
    const TauSquaredTerms t = tau_squared_terms(s);
    const double id2 = s.expect([&](double, const Jet& p) {
      return p[4] + 2.0 * p[1] * p[3] + p[2] * p[2] + p[1] * p[1] * p[2];
    });
    worst = std::max({worst, std::abs(t.ibp_factor), std::abs(id2), std::abs(t.term4()),
                      std::abs(t.term5())});
  }
  return {"integration-by-parts identities hold", worst < 1e-8, "max |identity| " + fmt(worst)};
}

inline CheckResult check_limit_state() {
  double worst_fp = 0.0;
  double worst_k = 0.0;
  double a_lo = 1.0;
  double a_hi = 0.0;
  for (const ModelSpec& m : preset_models()) {
    const LimitState s = solve_limit(m);
    const double resid = std::abs(
        s.m - s.expect([&](double x, const Jet&) { return eval_H(m, x, 0); }));
    worst_fp = std::max(worst_fp, resid);
    worst_k = std::max(worst_k,
                       std::abs(s.theta_star + k_prime(m, s.theta_star, s.quadrature) - m.y));
    a_lo = std::min(a_lo, s.a_star);
    a_hi = std::max(a_hi, s.a_star);
  }
  const bool ok = worst_fp < 1e-9 && worst_k < 1e-8 && a_lo >= 0.57 && a_hi <= 0.58;
  return {"mean-field fixed point and optimal acceptance", ok,
          "fixed-point resid " + fmt(worst_fp) + ", K' resid " + fmt(worst_k) + ", a_star in [" +
              std::to_string(a_lo) + ", " + std::to_string(a_hi) + "]"};
}

inline CheckResult check_iid_tau() {
  const LimitState s = solve_limit(ModelSpec::iid_gauss());
  const TauSquaredTerms t = tau_squared_terms(s);
  const double e1 = std::abs(s.tau_sq - 1.0 / 16.0);
  const double e2 = std::abs(t.independent_form() - s.tau_sq);
  return {"tau^2 = 1/16 for iid_gauss and independent-coordinates form agrees",
          e1 < 1e-8 && e2 < 1e-8, "|tau^2 - 1/16| " + fmt(e1) + ", |indep - tau^2| " + fmt(e2)};
}

inline CheckResult check_detailed_balance(std::size_t pairs, std::uint64_t seed) {
  Rng rng(seed, 101);
  double worst = 0.0;
  const std::vector<ModelSpec> models = preset_models();
  for (std::size_t k = 0; k < pairs; ++k) {
    const ModelSpec& m = models[k % models.size()];
    const int N = 1 + static_cast<int>(rng.next_u64() % 8);
    const double s2 = std::exp(-6.0 + 6.0 * rng.uniform());
    std::vector<double> x(N);
    for (double& v : x) v = 2.0 * rng.normal();
    const std::vector<double> d = grad_log_target(m, x);
    std::vector<double> y(N);
    for (int i = 0; i < N; ++i) y[i] = x[i] + std::sqrt(s2) * rng.normal() + 0.5 * s2 * d[i];
    const double lhs = log_target(m, x) + log_q(m, x, y, s2) +
                       std::min(0.0, log_accept_ratio(m, x, y, s2));
    const double rhs = log_target(m, y) + log_q(m, y, x, s2) +
                       std::min(0.0, log_accept_ratio(m, y, x, s2));
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return {"detailed balance on random pairs", worst < 1e-9,
          std::to_string(pairs) + " pairs, max |lhs - rhs| " + fmt(worst)};
}

inline CheckResult check_gradient(std::uint64_t seed) {
  Rng rng(seed, 102);
  const ModelSpec m = ModelSpec::strict_hp();
  double worst = 0.0;
  constexpr double step = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(16);
    for (double& v : x) v = rng.normal();
    for (std::size_t i = 0; i < x.size(); ++i) {
      std::vector<double> xp = x;
      std::vector<double> xm = x;
      xp[i] += step;
      xm[i] -= step;
      const double fd = (log_target(m, xp) - log_target(m, xm)) / (2.0 * step);
      const double g = grad_log_target(m, x, i);
      worst = std::max(worst, std::abs(fd - g) / std::max(1e-3, std::abs(g)));
    }
  }
  return {"gradient matches finite differences", worst < 1e-6, "max rel err " + fmt(worst)};
}

inline CheckResult check_log_target(std::uint64_t seed) {
  Rng rng(seed, 103);
  double worst = 0.0;
  for (const ModelSpec& m : preset_models()) {
    std::vector<double> x(64);
    for (double& v : x) v = rng.normal();
    double su = 0.0;
    double pair = 0.0;
    for (double xi : x) {
      su += eval_U(m, xi, 0);
      for (double xj : x) pair += eval_H(m, xi, 0) * eval_H(m, xj, 0);
    }
    worst = std::max(worst, std::abs(log_target(m, x) - (su - pair / (2.0 * 64.0))));
  }
  return {"log_target equals the double-sum form", worst < 1e-10, "max abs err " + fmt(worst)};
}

inline CheckResult check_taylor_order(std::uint64_t seed) {
  Rng rng(seed, 104);
  const ModelSpec m = ModelSpec::strict_hp();
  const LimitState s = solve_limit(m);
  const DensityTable table = limit_cdf_table(s);
  double lo = 1e9;
  double hi = -1e9;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> x(32);
    std::vector<double> w(32);
    for (double& v : x) v = table.quantile(rng.uniform());
    for (double& v : w) v = rng.normal();
    const std::vector<double> d = grad_log_target(m, x);
    std::vector<double> lx;
    std::vector<double> ly;
    for (int e = 10; e >= 4; --e) {
      const double sigma = std::ldexp(1.0, -e);
      std::vector<double> y(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = x[i] + sigma * w[i] + 0.5 * sigma * sigma * d[i];
      }
      lx.push_back(std::log(sigma));
      ly.push_back(std::log(std::abs(log_accept_ratio(m, x, y, sigma * sigma))));
    }
    const double slope = ls_slope(lx, ly);
    lo = std::min(lo, slope);
    hi = std::max(hi, slope);
  }
  return {"log-acceptance ratio is O(sigma^3)", lo >= 2.8 && hi <= 3.2,
          "slopes in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]"};
}

inline CheckResult check_g3(std::uint64_t seed) {
  Rng rng(seed, 105);
  const ModelSpec m = ModelSpec::strict_hp();
  const LimitState s = solve_limit(m);
  const DensityTable table = limit_cdf_table(s);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(256);
    std::vector<double> w(256);
    for (double& v : x) v = table.quantile(rng.uniform());
    for (double& v : w) v = rng.normal();
    const double g = g3(m, x, w);
    const TaylorRatio r = g3_taylor_ratio(m, x, w, std::ldexp(1.0, -12));
    worst = std::max(worst, std::abs(r.symmetric - g) / std::abs(g));
  }
  return {"g3 is the sigma^3 coefficient of G", worst < 1e-3, "max rel err " + fmt(worst)};
}

inline CheckResult check_cache(std::uint64_t seed) {
  const ModelSpec m = ModelSpec::strict_hp();
  const LimitState s = solve_limit(m);
  Rng rng(seed, 106);
  const int N = 64;
  Chain c(m, KernelConfig::make(KernelKind::kMala, s.ell_hat, N),
          init_state(m, s, N, rng, InitMode::kLimitMarginal), rng.split());
  // Stop off the refresh boundary so the cache has really been updated
  // incrementally.
  c.burn_in(100000 + 1234);
  double sh = 0.0;
  for (double v : c.state().x) sh += eval_H(m, v, 0);
  const double err = std::abs(sh - c.state().sum_H);
  return {"cached sum of H stays exact", err < 1e-9 * N, "abs drift " + fmt(err)};
}

}  // namespace detail

/// The library's invariant suite. Every check is cheap enough to run from the
/// command line.
inline std::vector<CheckResult> run_validation(const ValidateOptions& opt = {}) {
  using Fn = std::function<CheckResult()>;
  const std::vector<Fn> checks = {
      [] { return detail::check_derivatives(); },
      [] { return detail::check_quadrature_identities(); },
      [] { return detail::check_limit_state(); },
      [] { return detail::check_iid_tau(); },
      [&] { return detail::check_detailed_balance(opt.pairs, opt.seed); },
      [&] { return detail::check_gradient(opt.seed); },
      [&] { return detail::check_log_target(opt.seed); },
      [&] { return detail::check_taylor_order(opt.seed); },
      [&] { return detail::check_g3(opt.seed); },
      [&] { return detail::check_cache(opt.seed); },
  };
  std::vector<CheckResult> out;
  for (const Fn& f : checks) {
    try {
      out.push_back(f());
    } catch (const std::exception& e) {
      out.push_back({"(check raised)", false, e.what()});
    }
  }
  return out;
}

}  // namespace malascale

#endif  // MALASCALE_VALIDATE_HPP_
