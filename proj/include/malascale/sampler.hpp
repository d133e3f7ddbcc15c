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

#ifndef MALASCALE_SAMPLER_HPP_
#define MALASCALE_SAMPLER_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "malascale/errors.hpp"
#include "malascale/limit.hpp"
#include "malascale/model.hpp"
#include "malascale/rng.hpp"

namespace malascale {

enum class KernelKind { kMala, kRwm };

inline std::string_view kernel_name(KernelKind k) {
  return k == KernelKind::kMala ? "mala" : "rwm";
}

inline KernelKind parse_kernel(std::string_view name) {
  if (name == "mala") return KernelKind::kMala;
  if (name == "rwm") return KernelKind::kRwm;
  throw ArgumentError("unknown kernel '" + std::string(name) + "' (expected mala or rwm)");
}

/// Proposal variance sigma^2 = ell^2 N^{-exponent}; exponent 1/3 for MALA and
/// 1 for RWM.
inline double scaling_exponent(KernelKind kind) {
  return kind == KernelKind::kMala ? 1.0 / 3.0 : 1.0;
}

struct KernelConfig {
  KernelKind kind = KernelKind::kMala;
  double ell = 1.0;
  int N = 1;
  double scaling_exponent = 1.0 / 3.0;
  double sigma_sq = 1.0;

  static KernelConfig make(KernelKind kind, double ell, int N) {
    if (N < 1) throw ArgumentError("kernel needs N >= 1");
    if (!(ell >= 0.0) || !std::isfinite(ell)) {
      throw ArgumentError("kernel needs finite ell >= 0");
    }
    KernelConfig c;
    c.kind = kind;
    c.ell = ell;
    c.N = N;
    c.scaling_exponent = malascale::scaling_exponent(kind);
    c.sigma_sq = ell * ell * std::pow(static_cast<double>(N), -c.scaling_exponent);
    return c;
  }

  /// Config with a given proposal variance; ell is backed out from it.
  static KernelConfig from_sigma_sq(KernelKind kind, double sigma_sq, int N) {
    if (!(sigma_sq >= 0.0)) throw ArgumentError("kernel needs sigma_sq >= 0");
    const double e = malascale::scaling_exponent(kind);
    KernelConfig c = make(kind, std::sqrt(sigma_sq * std::pow(static_cast<double>(N), e)), N);
    c.sigma_sq = sigma_sq;
    return c;
  }
};

/// One configuration of the N-dimensional chain together with the per
/// coordinate evaluations of H, H', U, U' and their running sums.
struct ChainState {
  std::vector<double> x;
  std::vector<PointEval> eval;
  double sum_H = 0.0;
  double sum_U = 0.0;
  double log_target = 0.0;
  std::int64_t step_count = 0;

  int N() const { return static_cast<int>(x.size()); }

  static ChainState from_point(const ModelSpec& model, std::vector<double> x) {
    if (x.empty()) throw ArgumentError("chain state needs N >= 1");
    ChainState s;
    s.x = std::move(x);
    s.eval.resize(s.x.size());
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i])) throw NumericError("chain state has a non-finite coordinate");
      s.eval[i] = eval_point(model, s.x[i]);
    }
    s.resum();
    return s;
  }

  /// Recomputes the sums from the per-coordinate cache, discarding drift.
  void resum() {
    double sh = 0.0;
    double su = 0.0;
    for (const PointEval& e : eval) {
      sh += e.h;
      su += e.u;
    }
    sum_H = sh;
    sum_U = su;
    log_target = sum_U - sum_H * sum_H / (2.0 * N());
  }
};

/// The caches are re-summed from scratch this often.
inline constexpr std::int64_t kCacheRefreshInterval = 4096;

struct ProposalRecord {
  std::vector<double> W;
  std::vector<double> Y;
  double G = 0.0;
  bool accepted = false;
  double sq_jump = 0.0;
  std::vector<PointEval> eval_at_Y;  // scratch, reused across steps
};

/// What a diagnostic needs from a transition once the vectors are dropped.
struct TransitionSummary {
  bool accepted;
  double sq_jump;
  double G;
};

inline void check_finite(std::span<const double> v, const char* what) {
  for (double e : v) {
    if (!std::isfinite(e)) throw NumericError(std::string(what) + " has a non-finite entry");
  }
}

/// log pi_N(x) up to its normalizing constant. The double sum over H(x_i)H(x_j)
/// is the square of sum_i H(x_i), so this is O(N).
inline double log_target(const ModelSpec& model, std::span<const double> x) {
  if (x.empty()) throw ArgumentError("log_target needs N >= 1");
  check_finite(x, "log_target input");
  double sh = 0.0;
  double su = 0.0;
  for (double xi : x) {
    const PointEval e = eval_point(model, xi);
    sh += e.h;
    su += e.u;
  }
  return su - sh * sh / (2.0 * static_cast<double>(x.size()));
}

/// d/dx_i log pi_N(x) = U'(x_i) - H'(x_i) (1/N) sum_j H(x_j).
inline double grad_log_target(const ModelSpec& model, std::span<const double> x,
                              std::size_t i) {
  if (i >= x.size()) {
    throw ArgumentError("grad_log_target index " + std::to_string(i) +
                        " out of range for N = " + std::to_string(x.size()));
  }
  double sh = 0.0;
  for (double xi : x) sh += eval_H(model, xi, 0);
  const PointEval e = eval_point(model, x[i]);
  return e.du - e.dh * sh / static_cast<double>(x.size());
}

/// Full gradient, same formula per coordinate.
inline std::vector<double> grad_log_target(const ModelSpec& model, std::span<const double> x) {
  double sh = 0.0;
  std::vector<PointEval> ev(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    ev[i] = eval_point(model, x[i]);
    sh += ev[i].h;
  }
  std::vector<double> g(x.size());
  const double mean_h = sh / static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = ev[i].du - ev[i].dh * mean_h;
  return g;
}

/// Y_i = x_i + sigma W_i + (sigma^2/2) (U'(x_i) - H'(x_i) sum_H / N).
inline std::vector<double> propose_mala(const ChainState& state, const KernelConfig& cfg,
                                        std::span<const double> W) {
  if (cfg.kind != KernelKind::kMala) throw ArgumentError("propose_mala needs a mala kernel");
  if (static_cast<int>(W.size()) != state.N()) {
    throw ArgumentError("propose_mala: W has the wrong length");
  }
  const double h = cfg.sigma_sq;
  const double sigma = std::sqrt(h);
  const double mean_h = state.sum_H / state.N();
  std::vector<double> Y(W.size());
  for (std::size_t i = 0; i < W.size(); ++i) {
    const PointEval& e = state.eval[i];
    Y[i] = state.x[i] + sigma * W[i] + 0.5 * h * (e.du - e.dh * mean_h);
  }
  return Y;
}

inline std::vector<double> propose_mala(const ModelSpec& model, const ChainState& state,
                                        const KernelConfig& cfg, std::span<const double> W) {
  (void)model;  // the state already carries the model evaluations at x
  return propose_mala(state, cfg, W);
}

namespace detail {

// Sum over coordinates of log q(Y, x) - log q(x, Y) for the Langevin proposal,
// written without the 1/sigma^2 factor: with A = x - Y - (h/2) dY and
// B = Y - x - (h/2) dx, (B^2 - A^2)/(2h) = (dx + dY)(x - Y)/2 - (h/8)(dY^2 - dx^2).
inline double langevin_q_term(double x, double y, double dx, double dy, double h) {
  return 0.5 * (dx + dy) * (x - y) - 0.125 * h * (dy * dy - dx * dx);
}

}  // namespace detail

/// G = log[pi_N(Y) q(Y, x)] - log[pi_N(x) q(x, Y)] for the MALA proposal with
/// variance sigma_sq. The common Gaussian normalization cancels. Differences
/// of H and U are taken per coordinate from Y - x, which keeps G accurate
/// when it is itself tiny (small sigma); the sampler's step uses the cheaper
/// cached form.
inline double log_accept_ratio(const ModelSpec& model, std::span<const double> x,
                               std::span<const double> Y, double sigma_sq) {
  if (x.size() != Y.size() || x.empty()) {
    throw ArgumentError("log_accept_ratio: x and Y must have the same nonzero length");
  }
  if (!(sigma_sq >= 0.0)) throw ArgumentError("log_accept_ratio needs sigma_sq >= 0");
  const std::size_t n = x.size();
  std::vector<PointEval> ex(n);
  std::vector<PointEval> ey(n);
  double sx = 0.0;
  double sy = 0.0;
  double dh = 0.0;
  double du = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ex[i] = eval_point(model, x[i]);
    ey[i] = eval_point(model, Y[i]);
    sx += ex[i].h;
    sy += ey[i].h;
    dh += delta_H(model, x[i], Y[i]);
    du += delta_U(model, x[i], Y[i]);
  }
  const double nd = static_cast<double>(n);
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = ex[i].du - ex[i].dh * sx / nd;
    const double dy = ey[i].du - ey[i].dh * sy / nd;
    q += detail::langevin_q_term(x[i], Y[i], dx, dy, sigma_sq);
  }
  const double g = du - dh * (2.0 * sx + dh) / (2.0 * nd) + q;
  if (!std::isfinite(g)) throw NumericError("log-acceptance ratio is not finite");
  return g;
}

/// Unnormalized log density of the MALA proposal from `from` to `to`.
inline double log_q(const ModelSpec& model, std::span<const double> from,
                    std::span<const double> to, double sigma_sq) {
  if (from.size() != to.size()) throw ArgumentError("log_q: length mismatch");
  if (!(sigma_sq > 0.0)) throw ArgumentError("log_q needs sigma_sq > 0");
  const std::vector<double> d = grad_log_target(model, from);
  double s = 0.0;
  for (std::size_t i = 0; i < from.size(); ++i) {
    const double r = to[i] - from[i] - 0.5 * sigma_sq * d[i];
    s += r * r;
  }
  return -s / (2.0 * sigma_sq);
}

namespace detail {

inline void finish_step(ChainState& state, ProposalRecord& rec, double log_u, double sum_h_y,
                        double delta_u) {
  rec.accepted = log_u < rec.G;
  if (rec.accepted) {
    state.x.assign(rec.Y.begin(), rec.Y.end());
    state.eval.assign(rec.eval_at_Y.begin(), rec.eval_at_Y.end());
    state.sum_H = sum_h_y;
    state.sum_U += delta_u;
    state.log_target = state.sum_U - state.sum_H * state.sum_H / (2.0 * state.N());
  } else {
    rec.sq_jump = 0.0;
  }
  ++state.step_count;
  if (state.step_count % kCacheRefreshInterval == 0) state.resum();
}

inline void prepare_record(ProposalRecord& rec, std::size_t n) {
  rec.W.resize(n);
  rec.Y.resize(n);
  rec.eval_at_Y.resize(n);
}

}  // namespace detail

struct ProposalSums {
  double sum_H;
  double delta_U;
};

/// Fills rec.Y, rec.eval_at_Y, rec.G and rec.sq_jump for the Langevin proposal
/// from `state` with noise rec.W; does not touch the state. Returns the
/// proposal's sum of H and the change in sum of U.
inline ProposalSums evaluate_mala_proposal(const ModelSpec& model, const ChainState& state,
                                           double sigma_sq, ProposalRecord& rec) {
  const std::size_t n = state.x.size();
  if (rec.W.size() != n) throw ArgumentError("proposal noise W has the wrong length");
  rec.Y.resize(n);
  rec.eval_at_Y.resize(n);
  const double h = sigma_sq;
  const double sigma = std::sqrt(h);
  const double nd = static_cast<double>(n);
  const double sx = state.sum_H;
  const double mean_hx = sx / nd;

  double sy = 0.0;
  double delta_h = 0.0;
  double delta_u = 0.0;
  double jump = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const PointEval& ex = state.eval[i];
    const double dx = ex.du - ex.dh * mean_hx;
    const double yi = state.x[i] + sigma * rec.W[i] + 0.5 * h * dx;
    rec.Y[i] = yi;
    const PointEval ey = eval_point(model, yi);
    rec.eval_at_Y[i] = ey;
    sy += ey.h;
    delta_h += ey.h - ex.h;
    delta_u += ey.u - ex.u;
    const double step = yi - state.x[i];
    jump += step * step;
  }
  const double mean_hy = sy / nd;
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const PointEval& ex = state.eval[i];
    const PointEval& ey = rec.eval_at_Y[i];
    q += detail::langevin_q_term(state.x[i], rec.Y[i], ex.du - ex.dh * mean_hx,
                                 ey.du - ey.dh * mean_hy, h);
  }
  rec.G = delta_u - delta_h * (2.0 * sx + delta_h) / (2.0 * nd) + q;
  if (!std::isfinite(rec.G)) throw NumericError("log-acceptance ratio is not finite");
  rec.sq_jump = jump;
  return {sy, delta_u};
}

/// One Metropolis-adjusted Langevin transition, O(N).
inline void mala_step(const ModelSpec& model, ChainState& state, const KernelConfig& cfg,
                      Rng& rng, ProposalRecord& rec) {
  if (cfg.kind != KernelKind::kMala) throw ArgumentError("mala_step needs a mala kernel");
  detail::prepare_record(rec, state.x.size());
  rng.fill_normal(rec.W);
  const ProposalSums sums = evaluate_mala_proposal(model, state, cfg.sigma_sq, rec);
  detail::finish_step(state, rec, std::log(rng.uniform()), sums.sum_H, sums.delta_U);
}

/// One random-walk Metropolis transition, O(N).
inline void rwm_step(const ModelSpec& model, ChainState& state, const KernelConfig& cfg,
                     Rng& rng, ProposalRecord& rec) {
  if (cfg.kind != KernelKind::kRwm) throw ArgumentError("rwm_step needs an rwm kernel");
  const std::size_t n = state.x.size();
  detail::prepare_record(rec, n);
  rng.fill_normal(rec.W);
  const double sigma = std::sqrt(cfg.sigma_sq);
  const double nd = static_cast<double>(n);
  const double sx = state.sum_H;
  double sy = 0.0;
  double delta_h = 0.0;
  double delta_u = 0.0;
  double jump = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double step = sigma * rec.W[i];
    const double yi = state.x[i] + step;
    rec.Y[i] = yi;
    const PointEval ey = eval_point(model, yi);
    rec.eval_at_Y[i] = ey;
    sy += ey.h;
    delta_h += ey.h - state.eval[i].h;
    delta_u += ey.u - state.eval[i].u;
    jump += step * step;
  }
  rec.G = delta_u - delta_h * (2.0 * sx + delta_h) / (2.0 * nd);
  if (!std::isfinite(rec.G)) throw NumericError("log-acceptance ratio is not finite");
  rec.sq_jump = jump;
  detail::finish_step(state, rec, std::log(rng.uniform()), sy, delta_u);
}

inline void step(const ModelSpec& model, ChainState& state, const KernelConfig& cfg, Rng& rng,
                 ProposalRecord& rec) {
  if (cfg.kind == KernelKind::kMala) {
    mala_step(model, state, cfg, rng, rec);
  } else {
    rwm_step(model, state, cfg, rng, rec);
  }
}

enum class InitMode { kPrior, kLimitMarginal };

inline std::string_view init_mode_name(InitMode m) {
  return m == InitMode::kPrior ? "prior" : "limit_marginal";
}

inline InitMode parse_init_mode(std::string_view name) {
  if (name == "prior") return InitMode::kPrior;
  if (name == "limit_marginal") return InitMode::kLimitMarginal;
  throw ArgumentError("unknown init mode '" + std::string(name) +
                      "' (expected prior or limit_marginal)");
}

/// N i.i.d. draws from `table` by inverse CDF.
inline ChainState init_state_from_table(const ModelSpec& model, const DensityTable& table,
                                        int N, Rng& rng) {
  if (N < 1) throw ArgumentError("init_state needs N >= 1");
  std::vector<double> x(static_cast<std::size_t>(N));
  for (double& v : x) v = table.quantile(rng.uniform());
  return ChainState::from_point(model, std::move(x));
}

/// Starting configuration: i.i.d. draws from the prior mu or from the limit
/// marginal pi. The chain still needs a burn-in.
inline ChainState init_state(const ModelSpec& model, const LimitState* limit, int N, Rng& rng,
                             InitMode mode) {
  if (mode == InitMode::kLimitMarginal) {
    if (limit == nullptr || !limit->mean_field_solved) {
      throw StateError("limit_marginal initialization needs a solved limit state");
    }
    return init_state_from_table(model, limit_cdf_table(*limit), N, rng);
  }
  const QuadratureSpec quad = limit != nullptr ? limit->quadrature : default_quadrature(model);
  return init_state_from_table(model, prior_cdf_table(model, quad), N, rng);
}

inline ChainState init_state(const ModelSpec& model, const LimitState& limit, int N, Rng& rng,
                             InitMode mode) {
  return init_state(model, &limit, N, rng, mode);
}

/// Running acceptance / jump statistics of a chain segment.
struct ChainStats {
  std::int64_t steps = 0;
  std::int64_t accepted = 0;
  double sum_sq_jump = 0.0;
  double sum_log_target = 0.0;

  void add(const ProposalRecord& rec, double log_target) {
    ++steps;
    if (rec.accepted) ++accepted;
    sum_sq_jump += rec.sq_jump;
    sum_log_target += log_target;
  }
  double acceptance_rate() const {
    return steps > 0 ? static_cast<double>(accepted) / static_cast<double>(steps) : 0.0;
  }
  double mean_sq_jump() const { return steps > 0 ? sum_sq_jump / static_cast<double>(steps) : 0.0; }
  double mean_log_target() const {
    return steps > 0 ? sum_log_target / static_cast<double>(steps) : 0.0;
  }
};

/// A chain bundles the model, kernel, state and its own RNG stream.
class Chain {
 public:
  Chain(const ModelSpec& model, const KernelConfig& cfg, ChainState state, Rng rng)
      : model_(model), cfg_(cfg), state_(std::move(state)), rng_(std::move(rng)) {
    if (state_.N() != cfg_.N) throw ArgumentError("chain state N does not match kernel N");
  }

  const ProposalRecord& step() {
    malascale::step(model_, state_, cfg_, rng_, rec_);
    return rec_;
  }

  void burn_in(std::int64_t steps) {
    for (std::int64_t i = 0; i < steps; ++i) step();
  }

  ChainStats run(std::int64_t steps) {
    ChainStats s;
    for (std::int64_t i = 0; i < steps; ++i) {
      const ProposalRecord& r = step();
      s.add(r, state_.log_target);
    }
    return s;
  }

  const ChainState& state() const { return state_; }
  ChainState& state() { return state_; }
  const KernelConfig& config() const { return cfg_; }
  const ModelSpec& model() const { return model_; }
  Rng& rng() { return rng_; }

 private:
  ModelSpec model_;
  KernelConfig cfg_;
  ChainState state_;
  Rng rng_;
  ProposalRecord rec_;
};

/// Burn-in default: max(1e5, 100 N^{1/3}) steps.
inline std::int64_t default_burn_in(int N) {
  return std::max<std::int64_t>(100000, static_cast<std::int64_t>(100.0 * std::cbrt(N)));
}

}  // namespace malascale

#endif  // MALASCALE_SAMPLER_HPP_
