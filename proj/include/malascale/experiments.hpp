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

#ifndef MALASCALE_EXPERIMENTS_HPP_
#define MALASCALE_EXPERIMENTS_HPP_

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <thread>
#include <tuple>
#include <vector>

#include "malascale/diagnostics.hpp"
#include "malascale/errors.hpp"
#include "malascale/limit.hpp"
#include "malascale/model.hpp"
#include "malascale/rng.hpp"
#include "malascale/sampler.hpp"

namespace malascale {

/// Default measurement window: max(2e5, 200 N^{1/3}) transitions.
inline std::int64_t default_steps(int N) {
  return std::max<std::int64_t>(200000, static_cast<std::int64_t>(200.0 * std::cbrt(N)));
}

struct Cell {
  KernelKind kind = KernelKind::kMala;
  int N = 1;
  double ell = 1.0;
  std::uint64_t seed = 0;
};

inline bool operator<(const Cell& a, const Cell& b) {
  return std::tie(a.kind, a.N, a.ell, a.seed) < std::tie(b.kind, b.N, b.ell, b.seed);
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Canonical text of a cell; its hash is the cell's RNG stream id.
inline std::string cell_key(const Cell& c) {
  return std::string(kernel_name(c.kind)) + "|" + std::to_string(c.N) + "|" +
         format_double(c.ell) + "|" + std::to_string(c.seed);
}

inline std::uint64_t cell_stream_id(const Cell& c) { return fnv1a(cell_key(c)); }

struct ExperimentPlan {
  ModelSpec model;
  std::vector<KernelKind> kinds{KernelKind::kMala};
  std::vector<int> N_grid;
  std::vector<double> ell_grid;  // absolute ell values
  std::vector<std::uint64_t> seeds{1};
  std::optional<std::int64_t> burn_in;  // empty: default_burn_in(N)
  std::optional<std::int64_t> steps;    // empty: default_steps(N)
  std::uint64_t master_seed = 1;
  InitMode init = InitMode::kLimitMarginal;

  std::int64_t burn_in_for(int N) const { return burn_in ? *burn_in : default_burn_in(N); }
  std::int64_t steps_for(int N) const { return steps ? *steps : default_steps(N); }

  void validate() const {
    model.validate();
    if (kinds.empty()) throw ArgumentError("plan needs at least one kernel kind");
    if (N_grid.empty()) throw ArgumentError("plan needs a nonempty N grid");
    if (ell_grid.empty()) throw ArgumentError("plan needs a nonempty ell grid");
    if (seeds.empty()) throw ArgumentError("plan needs at least one seed");
    for (int n : N_grid) {
      if (n < 1) throw ArgumentError("plan N values must be >= 1");
    }
    for (double l : ell_grid) {
      if (!(l > 0.0) || !std::isfinite(l)) throw ArgumentError("plan ell values must be > 0");
    }
    if (burn_in && *burn_in < 0) throw ArgumentError("plan burn_in must be >= 0");
    if (steps && *steps < 0) throw ArgumentError("plan steps must be >= 0");
  }

  /// All cells in the canonical output order.
  std::vector<Cell> cells() const {
    std::vector<Cell> out;
    for (KernelKind k : kinds) {
      for (int n : N_grid) {
        for (double l : ell_grid) {
          for (std::uint64_t s : seeds) out.push_back({k, n, l, s});
        }
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end(),
                          [](const Cell& a, const Cell& b) { return !(a < b) && !(b < a); }),
              out.end());
    return out;
  }
};

/// Text that identifies a plan; equal plans give equal text.
inline std::string plan_canonical(const ExperimentPlan& p) {
  std::ostringstream o;
  o << "family=" << family_name(p.model.family) << ";y=" << format_double(p.model.y)
    << ";beta=" << format_double(p.model.beta) << ";a=" << format_double(p.model.a) << ";kinds=";
  for (KernelKind k : p.kinds) o << kernel_name(k) << ",";
  o << ";N=";
  for (int n : p.N_grid) o << n << ",";
  o << ";ell=";
  for (double l : p.ell_grid) o << format_double(l) << ",";
  o << ";seeds=";
  for (std::uint64_t s : p.seeds) o << s << ",";
  o << ";burn_in=" << (p.burn_in ? std::to_string(*p.burn_in) : "auto")
    << ";steps=" << (p.steps ? std::to_string(*p.steps) : "auto")
    << ";master_seed=" << p.master_seed << ";init=" << init_mode_name(p.init);
  return o.str();
}

inline std::string plan_hash(const ExperimentPlan& p) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(plan_canonical(p))));
  return buf;
}

/// Directory under `base` that holds every artifact of the plan.
inline std::filesystem::path run_directory(const std::filesystem::path& base,
                                           const ExperimentPlan& p) {
  return base / ("run-" + plan_hash(p));
}

struct ResultRow {
  KernelKind kind = KernelKind::kMala;
  int N = 0;
  double ell = 0.0;
  std::uint64_t seed = 0;
  double acc_rate = 0.0;
  double esjd = 0.0;
  double speed_estimate = 0.0;
  std::optional<double> predicted_acc;  // a(ell) for mala rows only
  double tau = 0.0;
  std::optional<double> runtime_ms;
  std::string error;

  bool ok() const { return error.empty(); }
  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

inline ResultRow run_cell(const ExperimentPlan& plan, const LimitState& limit, const Cell& cell) {
  ResultRow row;
  row.kind = cell.kind;
  row.N = cell.N;
  row.ell = cell.ell;
  row.seed = cell.seed;
  row.tau = limit.tau;
  if (cell.kind == KernelKind::kMala) row.predicted_acc = acceptance_limit(cell.ell, limit.tau);
  try {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(plan.master_seed, cell_stream_id(cell));
    ChainState st = init_state(plan.model, limit, cell.N, rng, plan.init);
    Chain chain(plan.model, KernelConfig::make(cell.kind, cell.ell, cell.N), std::move(st),
                rng.split());
    chain.burn_in(plan.burn_in_for(cell.N));
    const std::int64_t steps = plan.steps_for(cell.N);
    if (steps == 0) {
      row.error = "empty measurement window";
      return row;
    }
    const ChainStats stats = chain.run(steps);
    row.acc_rate = stats.acceptance_rate();
    row.esjd = esjd_per_component(stats, cell.N);
    row.speed_estimate = speed_estimate(row.esjd, cell.N, scaling_exponent(cell.kind));
    row.runtime_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

/// Worker count: MALA_SCALING_THREADS if set, else `requested` if positive,
/// else the hardware concurrency.
inline int resolve_threads(int requested = 0) {
  if (const char* env = std::getenv("MALA_SCALING_THREADS"); env != nullptr && *env != '\0') {
    int v = 0;
    const std::string_view s(env);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || v < 1) {
      throw ConfigError("MALA_SCALING_THREADS", "must be a positive integer, got '" +
                                                    std::string(s) + "'");
    }
    return v;
  }
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs `count` independent tasks on a bounded pool; task(i) must not throw.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& task) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, threads)), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) task(i);
    });
  }
}

/// One row per cell, sorted by (kind, N, ell, seed). Failing cells carry their
/// message in `error`; the sweep itself never aborts on them.
inline std::vector<ResultRow> run_scaling_sweep(const ExperimentPlan& plan, const LimitState& limit,
                                                int threads = 0) {
  plan.validate();
  const std::vector<Cell> cells = plan.cells();
  std::vector<ResultRow> rows(cells.size());
  parallel_for(cells.size(), resolve_threads(threads),
               [&](std::size_t i) { rows[i] = run_cell(plan, limit, cells[i]); });
  return rows;
}

inline std::vector<ResultRow> run_scaling_sweep(const ExperimentPlan& plan, int threads = 0) {
  return run_scaling_sweep(plan, solve_limit(plan.model), threads);
}

struct OptimalityResult {
  double ell_star_emp = 0.0;
  double acc_at_max = 0.0;
  std::vector<double> ell;
  std::vector<double> mean_speed;
  std::vector<double> mean_acc;
  std::vector<double> predicted_speed;
  bool unimodal = false;
  std::vector<ResultRow> rows;
};

/// At most one sign change in successive differences of the 3-point moving
/// average (end points kept as they are).
inline bool is_unimodal(const std::vector<double>& v) {
  if (v.size() < 3) return true;
  std::vector<double> s(v.size());
  s.front() = v.front();
  s.back() = v.back();
  for (std::size_t i = 1; i + 1 < v.size(); ++i) s[i] = (v[i - 1] + v[i] + v[i + 1]) / 3.0;
  int changes = 0;
  int prev = 0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    const double d = s[i] - s[i - 1];
    const int sign = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
    if (sign == 0) continue;
    if (prev != 0 && sign != prev) ++changes;
    prev = sign;
  }
  return changes <= 1;
}

/// Empirical argmax over the ell grid of the seed-averaged speed estimate of
/// `kind` chains, and the acceptance rate there.
inline OptimalityResult run_optimality_sweep(const ExperimentPlan& plan, const LimitState& limit,
                                             int threads = 0,
                                             KernelKind kind = KernelKind::kMala) {
  std::vector<double> grid = plan.ell_grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.size() < 7) {
    throw ArgumentError("optimality sweep needs at least 7 distinct ell values, got " +
                        std::to_string(grid.size()));
  }
  if (plan.N_grid.size() != 1) throw ArgumentError("optimality sweep needs exactly one N");
  ExperimentPlan p = plan;
  p.kinds = {kind};
  p.ell_grid = grid;
  OptimalityResult r;
  r.rows = run_scaling_sweep(p, limit, threads);
  for (const ResultRow& row : r.rows) {
    if (!row.ok()) throw NumericError("optimality cell failed: " + row.error);
  }
  for (double l : grid) {
    double s = 0.0;
    double a = 0.0;
    int n = 0;
    for (const ResultRow& row : r.rows) {
      if (row.ell == l) {
        s += row.speed_estimate;
        a += row.acc_rate;
        ++n;
      }
    }
    r.ell.push_back(l);
    r.mean_speed.push_back(s / n);
    r.mean_acc.push_back(a / n);
    r.predicted_speed.push_back(kind == KernelKind::kMala ? speed(l, limit.tau) : 0.0);
  }
  const std::size_t best = static_cast<std::size_t>(
      std::max_element(r.mean_speed.begin(), r.mean_speed.end()) - r.mean_speed.begin());
  r.ell_star_emp = r.ell[best];
  r.acc_at_max = r.mean_acc[best];
  r.unimodal = is_unimodal(r.mean_speed);
  return r;
}

struct VarianceFitOptions {
  double sigma_sq_lo = 1e-6;
  double sigma_sq_hi = 10.0;
  int iterations = 12;
  std::int64_t burn_in = 2000;
  int threads = 0;
};

struct VarianceFit {
  KernelKind kind = KernelKind::kMala;
  double beta = 0.0;
  double alpha = 0.0;
  std::vector<int> N;
  std::vector<double> sigma_sq_opt;
  std::vector<double> esjd_at_opt;
};

/// Least-squares slope and intercept of y = alpha - beta x.
inline std::pair<double, double> fit_decreasing_line(const std::vector<double>& x,
                                                     const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw ArgumentError("degenerate fit: log N has zero variance");
  const double slope = sxy / sxx;
  return {-slope, my - slope * mx};
}

/// ESJD-maximizing proposal variance at one N. The chain is burned in once
/// (MALA at ell_hat) and every trial sigma^2 restarts from that configuration
/// with the same random stream, so trials differ only through sigma^2.
inline std::pair<double, double> optimal_sigma_sq(KernelKind kind, const ModelSpec& model,
                                                  const LimitState& limit, int N,
                                                  std::int64_t steps, std::uint64_t master_seed,
                                                  const VarianceFitOptions& opt) {
  const Cell key{kind, N, 0.0, 0};
  Rng rng(master_seed, fnv1a("fit|" + cell_key(key)));
  ChainState start = init_state(model, limit, N, rng, InitMode::kLimitMarginal);
  {
    Chain warm(model, KernelConfig::make(KernelKind::kMala, limit.ell_hat, N), std::move(start),
               rng.split());
    warm.burn_in(opt.burn_in);
    start = warm.state();
  }
  const std::uint64_t trial_seed = rng.next_u64();
  auto esjd_at = [&](double log_s2) {
    Chain c(model, KernelConfig::from_sigma_sq(kind, std::exp(log_s2), N), start, Rng(trial_seed));
    return esjd_per_component(c.run(steps), N);
  };
  constexpr double kInvPhi = 0.6180339887498949;
  double a = std::log(opt.sigma_sq_lo);
  double b = std::log(opt.sigma_sq_hi);
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = esjd_at(c);
  double fd = esjd_at(d);
  for (int it = 0; it < opt.iterations; ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = esjd_at(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = esjd_at(d);
    }
  }
  const double best = 0.5 * (a + b);
  return {std::exp(best), std::max(fc, fd)};
}

/// Fits log sigma^2_opt = alpha - beta log N over N_grid.
inline VarianceFit fit_variance_exponent(KernelKind kind, const ModelSpec& model,
                                         const std::vector<int>& N_grid, std::int64_t steps,
                                         std::uint64_t master_seed,
                                         const VarianceFitOptions& opt = {}) {
  if (N_grid.size() < 2) throw ArgumentError("degenerate fit: need at least two values of N");
  if (steps < 1) throw ArgumentError("fit_variance_exponent needs steps >= 1");
  if (!(opt.sigma_sq_lo > 0.0 && opt.sigma_sq_hi > opt.sigma_sq_lo)) {
    throw ArgumentError("fit bracket needs 0 < lo < hi");
  }
  const LimitState limit = solve_limit(model);
  VarianceFit fit;
  fit.kind = kind;
  fit.N = N_grid;
  fit.sigma_sq_opt.resize(N_grid.size());
  fit.esjd_at_opt.resize(N_grid.size());
  std::vector<std::string> errors(N_grid.size());
  parallel_for(N_grid.size(), resolve_threads(opt.threads), [&](std::size_t i) {
    try {
      std::tie(fit.sigma_sq_opt[i], fit.esjd_at_opt[i]) =
          optimal_sigma_sq(kind, model, limit, N_grid[i], steps, master_seed, opt);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (const std::string& e : errors) {
    if (!e.empty()) throw NumericError("variance fit failed: " + e);
  }
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t i = 0; i < N_grid.size(); ++i) {
    lx.push_back(std::log(static_cast<double>(N_grid[i])));
    ly.push_back(std::log(fit.sigma_sq_opt[i]));
  }
  std::tie(fit.beta, fit.alpha) = fit_decreasing_line(lx, ly);
  return fit;
}

/// Burns in a MALA chain at ell_hat and returns the configuration.
inline ChainState burned_in_state(const ModelSpec& model, const LimitState& limit, int N,
                                  std::int64_t burn_in, Rng& rng) {
  Chain c(model, KernelConfig::make(KernelKind::kMala, limit.ell_hat, N),
          init_state(model, limit, N, rng, InitMode::kLimitMarginal), rng.split());
  c.burn_in(burn_in);
  return c.state();
}

/// Distribution of G over fresh noise at one burned-in configuration of size N.
inline CLTReport run_clt(const ModelSpec& model, const LimitState& limit, int N, double ell,
                         std::size_t n_draws, std::optional<std::int64_t> burn_in,
                         std::uint64_t seed) {
  Rng rng(seed, fnv1a("clt|" + std::to_string(N)));
  const ChainState x = burned_in_state(model, limit, N, burn_in.value_or(default_burn_in(N)), rng);
  Rng draws = rng.split();
  return clt_check_G(model, limit, x.x, ell, n_draws, draws);
}

struct ChaosRun {
  int N = 0;
  std::int64_t thin = 0;
  double iact_x1 = 0.0;
  double iact_mean_h = 0.0;
  std::vector<std::vector<double>> snapshots;
  ChaosReport report;
};

/// Stationary snapshots of a MALA chain at ell_hat and their comparison with
/// the limit marginal. Without an explicit thinning interval a pilot run of
/// 20000 transitions sets it to twice the larger IACT of x_1 and mean H.
inline ChaosRun run_chaos(const ModelSpec& model, const LimitState& limit, int N,
                          std::size_t n_snapshots, std::optional<std::int64_t> burn_in,
                          std::optional<std::int64_t> thin, std::uint64_t seed) {
  if (N < 2) throw ArgumentError("chaos experiment needs N >= 2");
  Rng rng(seed, fnv1a("chaos|" + std::to_string(N)));
  Chain c(model, KernelConfig::make(KernelKind::kMala, limit.ell_hat, N),
          init_state(model, limit, N, rng, InitMode::kLimitMarginal), rng.split());
  c.burn_in(burn_in.value_or(default_burn_in(N)));
  ChaosRun r;
  r.N = N;
  {
    std::vector<double> x1;
    std::vector<double> mh;
    constexpr int kPilot = 20000;
    for (int i = 0; i < kPilot; ++i) {
      c.step();
      x1.push_back(c.state().x[0]);
      mh.push_back(c.state().sum_H / N);
    }
    r.iact_x1 = iact(x1);
    // H is constant zero for iid_gauss, so mean H has no autocorrelation.
    r.iact_mean_h = model.independent() ? 1.0 : iact(mh);
  }
  r.thin = thin.value_or(std::max<std::int64_t>(
      10, static_cast<std::int64_t>(std::ceil(2.0 * std::max(r.iact_x1, r.iact_mean_h)))));
  r.snapshots = collect_snapshots(c, n_snapshots, r.thin);
  r.report = chaos_check(limit, r.snapshots);
  return r;
}

inline constexpr std::string_view kCsvHeader =
    "kind,N,ell,seed,acc_rate,esjd,speed_estimate,predicted_acc,tau,runtime_ms,error";

namespace detail {

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

template <class T>
T parse_number(const std::string& s, const char* column) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ArgumentError(std::string("CSV column '") + column + "' has invalid value '" + s + "'");
  }
  return v;
}

}  // namespace detail

/// CSV text of the rows. runtime_ms is written only when present, so that
/// plans rerun without timing give byte-identical files.
inline std::string to_csv(const std::vector<ResultRow>& rows) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const ResultRow& r : rows) {
    out += kernel_name(r.kind);
    out += ',' + std::to_string(r.N) + ',' + format_double(r.ell) + ',' + std::to_string(r.seed) +
           ',' + format_double(r.acc_rate) + ',' + format_double(r.esjd) + ',' +
           format_double(r.speed_estimate) + ',' +
           (r.predicted_acc ? format_double(*r.predicted_acc) : "") + ',' + format_double(r.tau) +
           ',' + (r.runtime_ms ? format_double(*r.runtime_ms) : "") + ',' +
           detail::csv_escape(r.error) + '\n';
  }
  return out;
}

inline std::vector<ResultRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw ArgumentError("CSV header does not match the result schema");
  }
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = detail::csv_split(line);
    if (f.size() != 11) {
      throw ArgumentError("CSV row has " + std::to_string(f.size()) + " fields, expected 11");
    }
    ResultRow r;
    r.kind = parse_kernel(f[0]);
    r.N = detail::parse_number<int>(f[1], "N");
    r.ell = detail::parse_number<double>(f[2], "ell");
    r.seed = detail::parse_number<std::uint64_t>(f[3], "seed");
    r.acc_rate = detail::parse_number<double>(f[4], "acc_rate");
    r.esjd = detail::parse_number<double>(f[5], "esjd");
    r.speed_estimate = detail::parse_number<double>(f[6], "speed_estimate");
    if (!f[7].empty()) r.predicted_acc = detail::parse_number<double>(f[7], "predicted_acc");
    r.tau = detail::parse_number<double>(f[8], "tau");
    if (!f[9].empty()) r.runtime_ms = detail::parse_number<double>(f[9], "runtime_ms");
    r.error = f[10];
    rows.push_back(std::move(r));
  }
  return rows;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  out.close();
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Writes rows as CSV; runtimes are dropped unless `with_runtime`.
inline void write_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path,
                      bool with_runtime = false) {
  if (with_runtime) {
    write_text_file(path, to_csv(rows));
    return;
  }
  std::vector<ResultRow> copy = rows;
  for (ResultRow& r : copy) r.runtime_ms.reset();
  write_text_file(path, to_csv(copy));
}

/// Per-cell wall time, kept apart from the deterministic results.
inline void write_timings(const std::vector<ResultRow>& rows, const std::filesystem::path& path) {
  std::string out = "kind,N,ell,seed,runtime_ms\n";
  for (const ResultRow& r : rows) {
    out += std::string(kernel_name(r.kind)) + ',' + std::to_string(r.N) + ',' +
           format_double(r.ell) + ',' + std::to_string(r.seed) + ',' +
           (r.runtime_ms ? format_double(*r.runtime_ms) : "") + '\n';
  }
  write_text_file(path, out);
}

/// Plain-text summary followed by whitespace-separated data blocks that
/// gnuplot can address with `index`: speed vs ell, acceptance vs ell, and
/// sigma^2_opt vs N when fits are given.
inline std::string format_report(const std::vector<ResultRow>& rows,
                                 const std::vector<VarianceFit>& fits = {}) {
  std::ostringstream o;
  o.precision(6);
  std::size_t failed = 0;
  for (const ResultRow& r : rows) failed += r.ok() ? 0 : 1;
  o << "# malascale report\n";
  o << "# rows: " << rows.size() << ", failed: " << failed << "\n";
  for (const ResultRow& r : rows) {
    if (!r.ok()) {
      o << "# failed cell " << kernel_name(r.kind) << " N=" << r.N << " ell=" << r.ell
        << " seed=" << r.seed << ": " << r.error << "\n";
    }
  }
  for (const VarianceFit& f : fits) {
    o << "# variance exponent (" << kernel_name(f.kind) << "): beta = " << f.beta
      << ", alpha = " << f.alpha << "\n";
  }

  // Seed-averaged curves per (kind, N).
  std::map<std::tuple<KernelKind, int, double>, std::tuple<double, double, double, int>> agg;
  for (const ResultRow& r : rows) {
    if (!r.ok()) continue;
    auto& [s, a, pa, n] = agg[{r.kind, r.N, r.ell}];
    s += r.speed_estimate;
    a += r.acc_rate;
    pa += r.predicted_acc.value_or(std::nan(""));
    ++n;
  }
  auto emit_block = [&](const char* title, const char* columns, bool speed_col) {
    const std::pair<KernelKind, int> none{KernelKind::kMala, -1};
    std::pair<KernelKind, int> current = none;
    bool any = false;
    for (const auto& [key, val] : agg) {
      const auto& [kind, N, ell] = key;
      if (std::pair{kind, N} != current) {
        if (any) o << "\n\n";
        any = true;
        current = {kind, N};
        o << "# " << title << " kind=" << kernel_name(kind) << " N=" << N << "\n# " << columns
          << "\n";
      }
      const auto& [s, a, pa, n] = val;
      if (speed_col) {
        o << ell << " " << s / n << "\n";
      } else {
        o << ell << " " << a / n << " " << pa / n << "\n";
      }
    }
    if (!any) o << "# " << title << ": no successful rows\n";
    o << "\n\n";
  };
  o << "\n\n";
  emit_block("speed_vs_ell", "ell mean_speed_estimate", true);
  emit_block("acc_vs_ell", "ell mean_acc_rate predicted_acc", false);
  if (fits.empty()) {
    o << "# sigma_sq_opt_vs_N: no variance fit in this run\n";
  }
  for (const VarianceFit& f : fits) {
    o << "# sigma_sq_opt_vs_N kind=" << kernel_name(f.kind) << "\n# N sigma_sq_opt esjd_at_opt\n";
    for (std::size_t i = 0; i < f.N.size(); ++i) {
      o << f.N[i] << " " << f.sigma_sq_opt[i] << " " << f.esjd_at_opt[i] << "\n";
    }
    o << "\n\n";
  }
  return o.str();
}

inline void write_report(const std::vector<ResultRow>& rows, const std::filesystem::path& path,
                         const std::vector<VarianceFit>& fits = {}) {
  write_text_file(path, format_report(rows, fits));
}

}  // namespace malascale

#endif  // MALASCALE_EXPERIMENTS_HPP_
