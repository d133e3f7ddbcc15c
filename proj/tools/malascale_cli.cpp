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

// malascale: experiment driver. One subcommand per experiment; every
// subcommand reads the same flat config and writes into a run directory.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "malascale/malascale.hpp"

namespace fs = std::filesystem;
using namespace malascale;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumeric = 2;

struct Flags {
  std::string config_path;
  std::optional<std::string> out, seed, threads, family, y, beta, a, N, ell, steps, burn_in;
  std::vector<std::string> sets;
};

// Which config key each generic flag sets, per subcommand. A missing entry
// means the flag has no meaning there.
const std::map<std::string, std::map<std::string, std::string>>& flag_targets() {
  static const std::map<std::string, std::map<std::string, std::string>> t = {
      {"limit", {}},
      {"sample",
       {{"N", "sample.N"}, {"ell", "sample.ell"}, {"steps", "sample.steps"},
        {"burn-in", "sample.burn_in"}}},
      {"scaling",
       {{"N", "plan.N_grid"}, {"ell", "plan.ell_grid"}, {"steps", "plan.steps"},
        {"burn-in", "plan.burn_in"}}},
      {"optimality",
       {{"N", "optimality.N"}, {"ell", "optimality.ell_grid"}, {"steps", "optimality.steps"},
        {"burn-in", "optimality.burn_in"}}},
      {"clt", {{"N", "clt.N_grid"}, {"ell", "clt.ell"}, {"burn-in", "clt.burn_in"}}},
      {"chaos", {{"N", "chaos.N_grid"}, {"burn-in", "chaos.burn_in"}}},
      {"validate", {}},
  };
  return t;
}

Config effective_config(const std::string& sub, const Flags& f) {
  Config c = f.config_path.empty() ? Config() : Config::load(f.config_path);
  auto put = [&](const std::optional<std::string>& v, const std::string& key) {
    if (v) c.set(key, *v);
  };
  put(f.out, "run.out");
  put(f.seed, "run.seed");
  put(f.threads, "run.threads");
  put(f.family, "model.family");
  put(f.y, "model.y");
  put(f.beta, "model.beta");
  put(f.a, "model.a");
  const auto& targets = flag_targets().at(sub);
  const std::pair<const char*, const std::optional<std::string>*> generic[] = {
      {"N", &f.N}, {"ell", &f.ell}, {"steps", &f.steps}, {"burn-in", &f.burn_in}};
  for (const auto& [name, value] : generic) {
    if (!*value) continue;
    const auto it = targets.find(name);
    if (it == targets.end()) {
      throw ConfigError(std::string("--") + name,
                        std::string("flag --") + name + " is not used by `" + sub + "`");
    }
    c.set(it->second, **value);
  }
  for (const std::string& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError(kv, "--set expects key=value");
    c.set(std::string(detail::trim(kv.substr(0, eq))), std::string(detail::trim(kv.substr(eq + 1))));
  }
  return c;
}

QuadratureSpec quadrature_from(const Config& c, const ModelSpec& m) {
  QuadratureSpec q = default_quadrature(m);
  if (!c.is_auto("quad.half_width")) q.half_width = c.get_double("quad.half_width");
  q.panels = static_cast<int>(c.get_int("quad.panels"));
  q.nodes_per_panel = static_cast<int>(c.get_int("quad.nodes_per_panel"));
  try {
    q.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError("quad", e.what());
  }
  return q;
}

fs::path prepare_run_dir(const Config& c, const std::string& name) {
  const fs::path dir = fs::path(c.get("run.out")) / name;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create run directory '" + dir.string() + "': " + ec.message());
  write_text_file(dir / "config.txt", c.dump());
  return dir;
}

std::string config_run_name(const std::string& sub, const Config& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(sub + "\n" + c.dump())));
  return sub + "-" + buf;
}

std::vector<double> ell_list(const Config& c, const std::string& key, const LimitState& limit,
                             bool relative) {
  std::vector<double> v = c.get_number_list<double>(key);
  if (relative) {
    for (double& l : v) l *= limit.ell_hat;
  }
  return v;
}

int cmd_limit(const Config& c) {
  const ModelSpec m = c.model();
  const LimitState s = solve_limit(m, quadrature_from(c, m));
  const TauSquaredTerms t = tau_squared_terms(s);
  std::printf("family        %s%s\n", std::string(family_name(m.family)).c_str(),
              m.hp_satisfied() ? "" : "  (regularity assumption not satisfied: U' unbounded or H = 0)");
  std::printf("m             %.12g\n", s.m);
  std::printf("theta_star    %.12g\n", s.theta_star);
  std::printf("tau_sq        %.12g\n", s.tau_sq);
  std::printf("tau           %.12g\n", s.tau);
  std::printf("ell_hat       %.12g\n", s.ell_hat);
  std::printf("a(ell_hat)    %.12g\n", s.a_star);
  std::printf("v(ell_hat)    %.12g\n", speed(s.ell_hat, s.tau));
  std::printf("term4, term5  %.3e %.3e\n", t.term4(), t.term5());
  if (m.independent()) {
    std::printf("independent form, psi''^3: %.12g   psi'''^3: %.12g\n", t.independent_form(),
                t.independent_form_third_cube());
  }
  const std::string header = "family,y,beta,a,m,theta_star,tau_sq,ell_hat,a_star\n";
  std::ostringstream row;
  row << family_name(m.family) << ',' << format_double(m.y) << ',' << format_double(m.beta) << ','
      << format_double(m.a) << ',' << format_double(s.m) << ',' << format_double(s.theta_star)
      << ',' << format_double(s.tau_sq) << ',' << format_double(s.ell_hat) << ','
      << format_double(s.a_star) << '\n';
  std::cout << header << row.str();
  const fs::path dir = prepare_run_dir(c, config_run_name("limit", c));
  write_text_file(dir / "limit.csv", header + row.str());
  return kExitOk;
}

int cmd_sample(const Config& c) {
  const ModelSpec m = c.model();
  const LimitState s = solve_limit(m, quadrature_from(c, m));
  KernelKind kind;
  InitMode init;
  try {
    kind = parse_kernel(c.get("sample.kernel"));
  } catch (const ArgumentError& e) {
    throw ConfigError("sample.kernel", e.what());
  }
  try {
    init = parse_init_mode(c.get("sample.init"));
  } catch (const ArgumentError& e) {
    throw ConfigError("sample.init", e.what());
  }
  const int N = static_cast<int>(c.get_int("sample.N"));
  if (N < 1) throw ConfigError("sample.N", "sample.N must be >= 1");
  const double ell = c.get_optional_double("sample.ell").value_or(s.ell_hat);
  const std::int64_t steps = c.get_optional_int("sample.steps").value_or(default_steps(N));
  const std::int64_t burn = c.get_optional_int("sample.burn_in").value_or(default_burn_in(N));
  const std::int64_t thin = c.get_int("sample.trace_thin");
  if (steps < 1) throw ConfigError("sample.steps", "sample.steps must be >= 1");
  if (burn < 0) throw ConfigError("sample.burn_in", "sample.burn_in must be >= 0");

  Rng rng(c.get_u64("run.seed"), fnv1a("sample"));
  Chain chain(m, KernelConfig::make(kind, ell, N), init_state(m, s, N, rng, init), rng.split());
  chain.burn_in(burn);
  ChainStats stats;
  std::vector<double> lt;
  lt.reserve(static_cast<std::size_t>(steps));
  std::string trace = "step,x1\n";
  for (std::int64_t i = 0; i < steps; ++i) {
    const ProposalRecord& r = chain.step();
    stats.add(r, chain.state().log_target);
    lt.push_back(chain.state().log_target);
    if (thin > 0 && i % thin == 0) {
      trace += std::to_string(i) + ',' + format_double(chain.state().x[0]) + '\n';
    }
  }
  const double esjd = esjd_per_component(stats, N);
  std::string iact_txt = "";
  if (lt.size() >= 100) {
    try {
      iact_txt = format_double(iact(lt));
    } catch (const ArgumentError&) {
    }
  }
  const std::string header =
      "family,kernel,N,ell,steps,acc_rate,esjd,speed_estimate,mean_log_target,iact_log_target\n";
  std::ostringstream row;
  row << family_name(m.family) << ',' << kernel_name(kind) << ',' << N << ','
      << format_double(ell) << ',' << steps << ',' << format_double(stats.acceptance_rate()) << ','
      << format_double(esjd) << ','
      << format_double(speed_estimate(esjd, N, scaling_exponent(kind))) << ','
      << format_double(stats.mean_log_target()) << ',' << iact_txt << '\n';
  std::cout << header << row.str();
  const fs::path dir = prepare_run_dir(c, config_run_name("sample", c));
  write_text_file(dir / "summary.csv", header + row.str());
  if (thin > 0) write_text_file(dir / "trace.csv", trace);
  return kExitOk;
}

ExperimentPlan plan_from(const Config& c, const LimitState& s) {
  ExperimentPlan p;
  p.model = s.model;
  p.kinds.clear();
  for (const std::string& k : c.get_list("plan.kinds")) {
    try {
      p.kinds.push_back(parse_kernel(k));
    } catch (const ArgumentError& e) {
      throw ConfigError("plan.kinds", e.what());
    }
  }
  p.N_grid = c.get_number_list<int>("plan.N_grid");
  const std::string units = c.get("plan.ell_units");
  if (units != "ell_hat" && units != "absolute") {
    throw ConfigError("plan.ell_units", "expected ell_hat or absolute, got '" + units + "'");
  }
  p.ell_grid = ell_list(c, "plan.ell_grid", s, units == "ell_hat");
  p.seeds = c.get_number_list<std::uint64_t>("plan.seeds");
  p.burn_in = c.get_optional_int("plan.burn_in");
  p.steps = c.get_optional_int("plan.steps");
  p.master_seed = c.get_u64("run.seed");
  try {
    p.init = parse_init_mode(c.get("plan.init"));
    p.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError("plan", e.what());
  }
  return p;
}

void print_rows(const std::vector<ResultRow>& rows) {
  std::vector<ResultRow> copy = rows;
  for (ResultRow& r : copy) r.runtime_ms.reset();
  std::cout << to_csv(copy);
}

int cmd_scaling(const Config& c) {
  const ModelSpec m = c.model();
  const LimitState s = solve_limit(m, quadrature_from(c, m));
  const ExperimentPlan plan = plan_from(c, s);
  const int threads = static_cast<int>(c.get_int("run.threads"));
  const std::vector<ResultRow> rows = run_scaling_sweep(plan, s, threads);
  print_rows(rows);
  std::vector<VarianceFit> fits;
  if (c.get_bool("fit.enabled")) {
    VarianceFitOptions o;
    o.sigma_sq_lo = c.get_double("fit.sigma_sq_lo");
    o.sigma_sq_hi = c.get_double("fit.sigma_sq_hi");
    o.iterations = static_cast<int>(c.get_int("fit.iterations"));
    o.burn_in = c.get_int("fit.burn_in");
    o.threads = threads;
    const std::vector<int> grid = c.get_number_list<int>("fit.N_grid");
    for (const std::string& k : c.get_list("fit.kinds")) {
      KernelKind kind;
      try {
        kind = parse_kernel(k);
      } catch (const ArgumentError& e) {
        throw ConfigError("fit.kinds", e.what());
      }
      fits.push_back(fit_variance_exponent(kind, m, grid, c.get_int("fit.steps"),
                                           plan.master_seed, o));
      std::printf("# variance exponent %s: beta = %.4f\n", k.c_str(), fits.back().beta);
    }
  }
  const fs::path dir = prepare_run_dir(c, "run-" + plan_hash(plan));
  write_csv(rows, dir / "results.csv", c.get_bool("plan.record_runtime"));
  write_timings(rows, dir / "timings.csv");
  write_report(rows, dir / "report.txt", fits);
  std::fprintf(stderr, "wrote %s\n", dir.string().c_str());
  return kExitOk;
}

int cmd_optimality(const Config& c) {
  const ModelSpec m = c.model();
  const LimitState s = solve_limit(m, quadrature_from(c, m));
  ExperimentPlan plan;
  plan.model = m;
  plan.kinds = {KernelKind::kMala};
  plan.N_grid = {static_cast<int>(c.get_int("optimality.N"))};
  plan.ell_grid = ell_list(c, "optimality.ell_grid", s, true);
  plan.seeds = c.get_number_list<std::uint64_t>("optimality.seeds");
  plan.burn_in = c.get_optional_int("optimality.burn_in");
  plan.steps = c.get_optional_int("optimality.steps");
  plan.master_seed = c.get_u64("run.seed");
  OptimalityResult r;
  try {
    r = run_optimality_sweep(plan, s, static_cast<int>(c.get_int("run.threads")));
  } catch (const ArgumentError& e) {
    throw ConfigError("optimality.ell_grid", e.what());
  }
  print_rows(r.rows);
  std::printf("# ell_hat = %.6g, ell_star_emp = %.6g (%.3g ell_hat), acc_at_max = %.4f, unimodal = %s\n",
              s.ell_hat, r.ell_star_emp, r.ell_star_emp / s.ell_hat, r.acc_at_max,
              r.unimodal ? "yes" : "no");
  const fs::path dir = prepare_run_dir(c, "run-" + plan_hash(plan));
  write_csv(r.rows, dir / "results.csv");
  write_timings(r.rows, dir / "timings.csv");
  std::string rep = format_report(r.rows);
  std::ostringstream extra;
  extra << "# optimality: ell_star_emp " << r.ell_star_emp << " acc_at_max " << r.acc_at_max
        << " unimodal " << (r.unimodal ? "yes" : "no") << "\n";
  write_text_file(dir / "report.txt", extra.str() + rep);
  return kExitOk;
}

int cmd_clt(const Config& c) {
  const ModelSpec m = c.model();
  const LimitState s = solve_limit(m, quadrature_from(c, m));
  const double ell = c.get_double("clt.ell");
  const auto n_draws = static_cast<std::size_t>(c.get_int("clt.n_draws"));
  std::string out = "family,N,ell,n_draws,mean_std,var_std,ks\n";
  for (int N : c.get_number_list<int>("clt.N_grid")) {
    const CLTReport r =
        run_clt(m, s, N, ell, n_draws, c.get_optional_int("clt.burn_in"), c.get_u64("run.seed"));
    out += std::string(family_name(m.family)) + ',' + std::to_string(N) + ',' + format_double(ell) +
           ',' + std::to_string(r.n_draws) + ',' + format_double(r.mean_std) + ',' +
           format_double(r.var_std) + ',' + format_double(r.ks_to_normal) + '\n';
  }
  std::cout << out;
  const fs::path dir = prepare_run_dir(c, config_run_name("clt", c));
  write_text_file(dir / "clt.csv", out);
  return kExitOk;
}

int cmd_chaos(const Config& c) {
  const ModelSpec m = c.model();
  const LimitState s = solve_limit(m, quadrature_from(c, m));
  std::string out = "family,N,n_snapshots,ks_marginal,corr12\n";
  std::string detail =
      "family,N,n_snapshots,thin,ks_marginal,ks_pooled,corr12,g,lambda,tail_frequency\n";
  for (int N : c.get_number_list<int>("chaos.N_grid")) {
    const ChaosRun r = run_chaos(m, s, N, static_cast<std::size_t>(c.get_int("chaos.n_snapshots")),
                                 c.get_optional_int("chaos.burn_in"),
                                 c.get_optional_int("chaos.thin"), c.get_u64("run.seed"));
    const std::string head = std::string(family_name(m.family)) + ',' + std::to_string(N) + ',' +
                             std::to_string(r.report.n_snapshots);
    out += head + ',' + format_double(r.report.marginal.statistic) + ',' +
           format_double(r.report.corr12) + '\n';
    for (const char* g : {"H", "H2", "U_clipped"}) {
      for (double lambda : {0.0, 0.5, 1.0, 2.0, 3.0, 1000.0}) {
        detail += head + ',' + std::to_string(r.thin) + ',' +
                  format_double(r.report.marginal.statistic) + ',' +
                  format_double(r.report.pooled_marginal.statistic) + ',' +
                  format_double(r.report.corr12) + ',' + g + ',' + format_double(lambda) + ',' +
                  format_double(tail_frequency(s, r.snapshots, g, lambda)) + '\n';
      }
    }
  }
  std::cout << out;
  const fs::path dir = prepare_run_dir(c, config_run_name("chaos", c));
  write_text_file(dir / "chaos.csv", out);
  write_text_file(dir / "chaos_detail.csv", detail);
  return kExitOk;
}

int cmd_validate(const Config& c) {
  ValidateOptions o;
  o.seed = c.get_u64("run.seed");
  o.pairs = static_cast<std::size_t>(c.get_int("validate.pairs"));
  bool all = true;
  for (const CheckResult& r : run_validation(o)) {
    std::printf("%s  %s  (%s)\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    all = all && r.passed;
  }
  return all ? kExitOk : kExitNumeric;
}

std::string keys_help() {
  std::string s = "Config keys (flat `section.key = value`; flags override the file):\n";
  for (const ConfigKey& k : config_keys()) {
    char line[256];
    std::snprintf(line, sizeof line, "  %-22s default %-32s %s\n", std::string(k.key).c_str(),
                  std::string(k.default_value).c_str(), std::string(k.help).c_str());
    s += line;
  }
  s += "\nExit codes: 0 success, 1 usage or config error, 2 numeric failure.\n";
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MALA / RWM optimal-scaling experiments for a mean-field posterior"};
  app.require_subcommand(1);
  app.footer(keys_help());
  Flags f;
  auto add_common = [&f](CLI::App* a) {
    a->add_option("--config", f.config_path, "config file");
    a->add_option("--out", f.out, "base output directory (run.out)");
    a->add_option("--seed", f.seed, "master seed (run.seed)");
    a->add_option("--threads", f.threads, "worker count (run.threads)");
    a->add_option("--model.family", f.family, "strict_hp | gauss_prior | iid_gauss");
    a->add_option("--model.y", f.y, "observed response");
    a->add_option("--model.beta", f.beta, "H amplitude");
    a->add_option("--model.a", f.a, "prior tail weight");
    a->add_option("--N", f.N, "dimension or comma list of dimensions");
    a->add_option("--ell", f.ell, "ell or comma list of ell");
    a->add_option("--steps", f.steps, "measured transitions");
    a->add_option("--burn-in", f.burn_in, "burn-in transitions");
    a->add_option("--set", f.sets, "override any key: --set section.key=value");
  };
  const std::vector<std::pair<std::string, std::string>> subs = {
      {"limit", "limiting quantities by quadrature"},
      {"sample", "run one chain and summarize it"},
      {"scaling", "sweep (kernel, N, ell, seed) cells"},
      {"optimality", "speed maximizer over an ell grid"},
      {"clt", "distribution of the log-acceptance ratio at a fixed configuration"},
      {"chaos", "coordinate marginals against the limit marginal"},
      {"validate", "run the invariant suite"},
  };
  std::string chosen;
  for (const auto& [name, help] : subs) {
    CLI::App* s = app.add_subcommand(name, help);
    s->footer(keys_help());
    add_common(s);
    s->callback([&chosen, n = name] { chosen = n; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    const Config c = effective_config(chosen, f);
    if (chosen == "limit") return cmd_limit(c);
    if (chosen == "sample") return cmd_sample(c);
    if (chosen == "scaling") return cmd_scaling(c);
    if (chosen == "optimality") return cmd_optimality(c);
    if (chosen == "clt") return cmd_clt(c);
    if (chosen == "chaos") return cmd_chaos(c);
    if (chosen == "validate") return cmd_validate(c);
    std::cerr << app.help();
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error [" << e.key() << "]: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ArgumentError& e) {
    std::cerr << "argument error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const StateError& e) {
    std::cerr << "state error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
