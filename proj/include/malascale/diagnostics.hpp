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

#ifndef MALASCALE_DIAGNOSTICS_HPP_
#define MALASCALE_DIAGNOSTICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "malascale/errors.hpp"
#include "malascale/limit.hpp"
#include "malascale/model.hpp"
#include "malascale/normal.hpp"
#include "malascale/rng.hpp"
#include "malascale/sampler.hpp"

namespace malascale {

/// Fraction of accepted transitions. Works for any range whose elements have
/// an `accepted` member (ProposalRecord, TransitionSummary).
template <class Range>
double acceptance_rate(const Range& records) {
  std::size_t n = 0;
  std::size_t acc = 0;
  for (const auto& r : records) {
    ++n;
    if (r.accepted) ++acc;
  }
  if (n == 0) throw ArgumentError("acceptance_rate of an empty record set");
  return static_cast<double>(acc) / static_cast<double>(n);
}

/// Mean squared jump per transition, divided by N.
template <class Range>
double esjd_per_component(const Range& records, int N) {
  if (N < 1) throw ArgumentError("esjd_per_component needs N >= 1");
  std::size_t n = 0;
  double s = 0.0;
  for (const auto& r : records) {
    ++n;
    s += r.sq_jump;
  }
  if (n == 0) throw ArgumentError("esjd_per_component of an empty record set");
  return s / static_cast<double>(n) / static_cast<double>(N);
}

/// esjd * N^exponent; for MALA (exponent 1/3) this estimates v(ell).
inline double speed_estimate(double esjd, int N, double exponent) {
  if (N < 1) throw ArgumentError("speed_estimate needs N >= 1");
  return esjd * std::pow(static_cast<double>(N), exponent);
}

inline double esjd_per_component(const ChainStats& stats, int N) {
  if (stats.steps == 0) throw ArgumentError("esjd_per_component of an empty record set");
  return stats.mean_sq_jump() / static_cast<double>(N);
}

/// Integrated autocorrelation time 1 + 2 sum_k rho_k, truncated by Geyer's
/// initial positive sequence: pairs Gamma_j = rho_{2j} + rho_{2j+1} are summed
/// while positive. A constant series has no defined autocorrelation and is
/// rejected with ArgumentError.
inline double iact(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 100) throw ArgumentError("iact needs at least 100 values, got " + std::to_string(n));
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
  std::vector<double> c(series.begin(), series.end());
  for (double& v : c) v -= mean;
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += c[i] * c[i + lag];
    return s / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) throw ArgumentError("iact of a constant series is undefined");
  double tau = -1.0;  // 2 sum of pairs counts rho_0 twice
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    const double pair = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  return tau;
}

struct KSResult {
  double statistic = 0.0;
  std::size_t n = 0;
};

/// One-sample Kolmogorov-Smirnov distance sup_x |F_n(x) - F(x)|, evaluated on
/// both sides of every jump of the empirical CDF.
template <class Cdf>
KSResult ks_statistic(std::span<const double> sample, Cdf&& reference_cdf) {
  if (sample.empty()) throw ArgumentError("ks_statistic of an empty sample");
  std::vector<double> s(sample.begin(), sample.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = reference_cdf(s[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return {std::clamp(d, 0.0, 1.0), s.size()};
}

inline KSResult ks_to_normal(std::span<const double> sample) {
  return ks_statistic(sample, [](double z) { return normal_cdf(z); });
}

/// Leading sigma^3 coefficient of the log-acceptance ratio at x with noise W.
/// Empirical averages are over the coordinates of x, and psi_N uses the
/// empirical mean of H in place of m.
inline double g3(const ModelSpec& model, std::span<const double> x, std::span<const double> W) {
  if (x.size() != W.size() || x.empty()) {
    throw ArgumentError("g3: x and W must have the same nonzero length");
  }
  const std::size_t n = x.size();
  const double nd = static_cast<double>(n);
  std::vector<Jet> hj(n);
  std::vector<Jet> uj(n);
  double mean_h = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    hj[i] = H_jet(model, x[i]);
    uj[i] = U_jet(model, x[i]);
    mean_h += hj[i][0];
  }
  mean_h /= nd;
  double a = 0.0;     // E_N(3 psi'' psi' W + psi''' W^3)
  double h1w = 0.0;   // E_N(H' W)
  double h1p1 = 0.0;  // E_N(H' psi')
  double h2w2 = 0.0;  // E_N(H'' W^2)
  for (std::size_t i = 0; i < n; ++i) {
    const double p1 = uj[i][1] - mean_h * hj[i][1];
    const double p2 = uj[i][2] - mean_h * hj[i][2];
    const double p3 = uj[i][3] - mean_h * hj[i][3];
    const double w = W[i];
    a += 3.0 * p2 * p1 * w + p3 * w * w * w;
    h1w += hj[i][1] * w;
    h1p1 += hj[i][1] * p1;
    h2w2 += hj[i][2] * w * w;
  }
  a /= nd;
  h1w /= nd;
  h1p1 /= nd;
  h2w2 /= nd;
  return -(nd / 12.0) * (a - 3.0 * h1w * h1p1 - 3.0 * h2w2 * h1w);
}

/// G(sigma)/sigma^3 at fixed (x, W), both as it stands and averaged with the
/// reflected noise. G(sigma, -W) = G(-sigma, W), so the symmetric form
/// [G(sigma, W) - G(sigma, -W)] / (2 sigma^3) cancels the sigma^4 term and
/// approaches g3 with O(sigma^2) error instead of O(sigma).
struct TaylorRatio {
  double one_sided = 0.0;
  double symmetric = 0.0;
};

inline TaylorRatio g3_taylor_ratio(const ModelSpec& model, std::span<const double> x,
                                   std::span<const double> W, double sigma) {
  if (x.size() != W.size() || x.empty()) {
    throw ArgumentError("g3_taylor_ratio: x and W must have the same nonzero length");
  }
  const std::vector<double> d = grad_log_target(model, x);
  const double h = sigma * sigma;
  std::vector<double> yp(x.size());
  std::vector<double> ym(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    yp[i] = x[i] + sigma * W[i] + 0.5 * h * d[i];
    ym[i] = x[i] - sigma * W[i] + 0.5 * h * d[i];
  }
  const double gp = log_accept_ratio(model, x, yp, h);
  const double gm = log_accept_ratio(model, x, ym, h);
  const double s3 = sigma * h;
  return {gp / s3, (gp - gm) / (2.0 * s3)};
}

struct CLTReport {
  std::size_t n_draws = 0;
  double mean_std = 0.0;
  double var_std = 0.0;
  double ks_to_normal = 0.0;
  double predicted_mean_G = 0.0;
  double predicted_var_G = 0.0;
  double mean_G = 0.0;  // raw G, before standardization
  double var_G = 0.0;
  double acceptance = 0.0;  // mean of min(1, e^G) over the draws
};

/// Distribution of G over fresh noise W at the fixed configuration x, with
/// sigma^2 = ell^2 N^{-1/3}; standardized as S = G / (ell^3 tau) + ell^3 tau / 2.
inline CLTReport clt_check_G(const ModelSpec& model, const LimitState& limit,
                             std::span<const double> x, double ell, std::size_t n_draws,
                             Rng& rng) {
  if (!limit.tau_solved()) throw StateError("clt_check_G needs a solved tau > 0");
  if (n_draws < 2) throw ArgumentError("clt_check_G needs at least 2 draws");
  const int N = static_cast<int>(x.size());
  const KernelConfig cfg = KernelConfig::make(KernelKind::kMala, ell, N);
  const ChainState state = ChainState::from_point(model, std::vector<double>(x.begin(), x.end()));
  const double s = ell * ell * ell * limit.tau;
  ProposalRecord rec;
  rec.W.resize(x.size());
  std::vector<double> g(n_draws);
  std::vector<double> z(n_draws);
  double acc = 0.0;
  for (std::size_t k = 0; k < n_draws; ++k) {
    rng.fill_normal(rec.W);
    evaluate_mala_proposal(model, state, cfg.sigma_sq, rec);
    g[k] = rec.G;
    z[k] = rec.G / s + s / 2.0;
    acc += rec.G >= 0.0 ? 1.0 : std::exp(rec.G);
  }
  auto mean_var = [](const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double q = 0.0;
    for (double e : v) q += (e - m) * (e - m);
    return std::pair{m, q / static_cast<double>(v.size() - 1)};
  };
  CLTReport r;
  r.n_draws = n_draws;
  std::tie(r.mean_std, r.var_std) = mean_var(z);
  std::tie(r.mean_G, r.var_G) = mean_var(g);
  r.ks_to_normal = ks_to_normal(z).statistic;
  r.predicted_mean_G = -s * s / 2.0;
  r.predicted_var_G = s * s;
  r.acceptance = acc / static_cast<double>(n_draws);
  return r;
}

/// Snapshots of a running chain, `thin` transitions apart.
inline std::vector<std::vector<double>> collect_snapshots(Chain& chain, std::size_t count,
                                                          std::int64_t thin) {
  if (thin < 1) throw ArgumentError("snapshot thinning must be >= 1");
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    chain.burn_in(thin);
    out.push_back(chain.state().x);
  }
  return out;
}

struct ChaosReport {
  std::size_t n_snapshots = 0;
  KSResult marginal;         // coordinate 1 only, one value per snapshot
  KSResult pooled_marginal;  // all coordinates of every snapshot
  double corr12 = 0.0;       // sample correlation of (x_1, x_2) across snapshots
};

/// Compares the one-coordinate marginal of stationary snapshots with the
/// limit marginal pi. Coordinates are exchangeable under pi_N, so the pooled
/// empirical CDF estimates the same marginal as coordinate 1 alone, with far
/// less noise.
inline ChaosReport chaos_check(const LimitState& limit,
                               const std::vector<std::vector<double>>& snapshots, int k = 2) {
  if (k < 1 || k > 2) throw ArgumentError("chaos_check supports k in {1, 2}");
  if (snapshots.size() < 10) throw ArgumentError("chaos_check needs at least 10 snapshots");
  const std::size_t N = snapshots.front().size();
  if (N < static_cast<std::size_t>(k)) throw ArgumentError("chaos_check needs N >= k");
  const DensityTable table = limit_cdf_table(limit);
  auto cdf = [&](double v) { return table.cdf(v); };
  std::vector<double> first;
  std::vector<double> second;
  std::vector<double> pooled;
  first.reserve(snapshots.size());
  pooled.reserve(snapshots.size() * N);
  for (const auto& s : snapshots) {
    if (s.size() != N) throw ArgumentError("chaos_check snapshots differ in length");
    first.push_back(s[0]);
    if (k == 2) second.push_back(s[1]);
    pooled.insert(pooled.end(), s.begin(), s.end());
  }
  ChaosReport r;
  r.n_snapshots = snapshots.size();
  r.marginal = ks_statistic(first, cdf);
  r.pooled_marginal = ks_statistic(pooled, cdf);
  if (k == 2) {
    const double n = static_cast<double>(first.size());
    const double m1 = std::accumulate(first.begin(), first.end(), 0.0) / n;
    const double m2 = std::accumulate(second.begin(), second.end(), 0.0) / n;
    double s11 = 0.0;
    double s22 = 0.0;
    double s12 = 0.0;
    for (std::size_t i = 0; i < first.size(); ++i) {
      s11 += (first[i] - m1) * (first[i] - m1);
      s22 += (second[i] - m2) * (second[i] - m2);
      s12 += (first[i] - m1) * (second[i] - m2);
    }
    r.corr12 = (s11 > 0.0 && s22 > 0.0) ? s12 / std::sqrt(s11 * s22) : 0.0;
  }
  return r;
}

enum class TailFunction { kH, kHSquared, kUClipped };

inline TailFunction parse_tail_function(std::string_view name) {
  if (name == "H") return TailFunction::kH;
  if (name == "H2") return TailFunction::kHSquared;
  if (name == "U_clipped") return TailFunction::kUClipped;
  throw ArgumentError("unknown tail function '" + std::string(name) +
                      "' (expected H, H2 or U_clipped)");
}

/// U clipped to [-10, 10], which keeps it bounded for every preset.
inline double apply_tail_function(TailFunction g, const ModelSpec& model, double x) {
  switch (g) {
    case TailFunction::kH:
      return eval_H(model, x, 0);
    case TailFunction::kHSquared: {
      const double h = eval_H(model, x, 0);
      return h * h;
    }
    case TailFunction::kUClipped:
      return std::clamp(eval_U(model, x, 0), -10.0, 10.0);
  }
  return 0.0;
}

/// Fraction of snapshots with |E_N g(x) - pi(g)| >= lambda / sqrt(N).
inline double tail_frequency(const LimitState& limit,
                             const std::vector<std::vector<double>>& snapshots,
                             std::string_view g_name, double lambda) {
  const TailFunction g = parse_tail_function(g_name);
  if (snapshots.empty()) throw ArgumentError("tail_frequency needs snapshots");
  if (!(lambda >= 0.0)) throw ArgumentError("tail_frequency needs lambda >= 0");
  const ModelSpec& model = limit.model;
  const double target = limit.expect([&](double x, const Jet&) { return apply_tail_function(g, model, x); });
  std::size_t hits = 0;
  for (const auto& s : snapshots) {
    double mean = 0.0;
    for (double v : s) mean += apply_tail_function(g, model, v);
    mean /= static_cast<double>(s.size());
    if (std::abs(mean - target) >= lambda / std::sqrt(static_cast<double>(s.size()))) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(snapshots.size());
}

}  // namespace malascale

#endif  // MALASCALE_DIAGNOSTICS_HPP_
