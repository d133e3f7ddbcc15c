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


#include <cstdlib>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "malascale/config.hpp"
#include "malascale/experiments.hpp"

namespace malascale {
namespace {

ModelSpec Iid() {
  ModelSpec m;
  m.family = Family::kIidGauss;
  m.y = 0.0;
  m.beta = 0.0;
  return m;
}

ExperimentPlan SmallPlan() {
  ExperimentPlan p;
  p.model = Iid();
  p.kinds = {KernelKind::kMala, KernelKind::kRwm};
  p.N_grid = {8, 32};
  p.ell_grid = {0.5, 1.0};
  p.seeds = {1, 2};
  p.burn_in = 50;
  p.steps = 400;
  p.master_seed = 11;
  return p;
}

std::vector<ResultRow> StripTimes(std::vector<ResultRow> rows) {
  for (ResultRow& r : rows) r.runtime_ms.reset();
  return rows;
}

class ScopedEnv {
 public:
  ScopedEnv(const char* name, const char* value) : name_(name) {
    if (const char* old = std::getenv(name)) old_ = old;
    if (value) {
      setenv(name, value, 1);
    } else {
      unsetenv(name);
    }
  }
  ~ScopedEnv() {
    if (old_) {
      setenv(name_, old_->c_str(), 1);
    } else {
      unsetenv(name_);
    }
  }

 private:
  const char* name_;
  std::optional<std::string> old_;
};

TEST(DefaultsTest, WindowFormulas) {
  EXPECT_EQ(default_steps(1), 200000);
  EXPECT_EQ(default_steps(1 << 30), 204800);
  EXPECT_EQ(default_burn_in(8), 100000);
}

TEST(PlanTest, CellsAreSortedAndUnique) {
  ExperimentPlan p = SmallPlan();
  p.seeds = {2, 1, 2};
  const std::vector<Cell> cells = p.cells();
  EXPECT_EQ(cells.size(), 2u * 2u * 2u * 2u);
  for (std::size_t i = 1; i < cells.size(); ++i) EXPECT_TRUE(cells[i - 1] < cells[i]);
  std::set<std::uint64_t> streams;
  for (const Cell& c : cells) streams.insert(cell_stream_id(c));
  EXPECT_EQ(streams.size(), cells.size());
}

TEST(PlanTest, ValidateRejectsBadPlans) {
  ExperimentPlan p = SmallPlan();
  p.N_grid = {};
  EXPECT_THROW(p.validate(), ArgumentError);
  p = SmallPlan();
  p.ell_grid = {0.0};
  EXPECT_THROW(p.validate(), ArgumentError);
  p = SmallPlan();
  p.steps = -1;
  EXPECT_THROW(p.validate(), ArgumentError);
  p = SmallPlan();
  p.seeds = {};
  EXPECT_THROW(p.validate(), ArgumentError);
}

TEST(PlanTest, HashIsStableAndSensitive) {
  const ExperimentPlan p = SmallPlan();
  const std::string h = plan_hash(p);
  EXPECT_EQ(h.size(), 16u);
  EXPECT_EQ(h, plan_hash(SmallPlan()));
  ExperimentPlan q = SmallPlan();
  q.master_seed = 12;
  EXPECT_NE(plan_hash(q), h);
  q = SmallPlan();
  q.ell_grid = {0.5, 1.0000001};
  EXPECT_NE(plan_hash(q), h);
  q = SmallPlan();
  q.steps.reset();
  EXPECT_NE(plan_hash(q), h);
  EXPECT_EQ(run_directory("out", p), std::filesystem::path("out") / ("run-" + h));
}

TEST(ThreadsTest, EnvironmentOverridesRequest) {
  {
    ScopedEnv env("MALA_SCALING_THREADS", nullptr);
    EXPECT_EQ(resolve_threads(3), 3);
    EXPECT_GE(resolve_threads(0), 1);
  }
  {
    ScopedEnv env("MALA_SCALING_THREADS", "5");
    EXPECT_EQ(resolve_threads(3), 5);
    EXPECT_EQ(resolve_threads(0), 5);
  }
  for (const char* bad : {"0", "-2", "two", "3x"}) {
    ScopedEnv env("MALA_SCALING_THREADS", bad);
    EXPECT_THROW(resolve_threads(1), ConfigError) << bad;
  }
}

TEST(RunCellTest, RwmHasNoPrediction) {
  const ExperimentPlan p = SmallPlan();
  const LimitState lim = solve_limit(p.model);
  const ResultRow mala = run_cell(p, lim, {KernelKind::kMala, 8, 1.0, 1});
  const ResultRow rwm = run_cell(p, lim, {KernelKind::kRwm, 8, 1.0, 1});
  ASSERT_TRUE(mala.ok()) << mala.error;
  ASSERT_TRUE(rwm.ok()) << rwm.error;
  ASSERT_TRUE(mala.predicted_acc.has_value());
  EXPECT_NEAR(*mala.predicted_acc, acceptance_limit(1.0, lim.tau), 1e-15);
  EXPECT_FALSE(rwm.predicted_acc.has_value());
  const std::string csv = to_csv({StripTimes({rwm})});
  const std::string line = csv.substr(csv.find('\n') + 1);
  EXPECT_NE(line.find(",," + format_double(rwm.tau) + ","), std::string::npos) << line;
}

TEST(RunCellTest, EmptyWindowIsAnErrorRow) {
  ExperimentPlan p = SmallPlan();
  p.steps = 0;
  const LimitState lim = solve_limit(p.model);
  const ResultRow r = run_cell(p, lim, {KernelKind::kMala, 8, 1.0, 1});
  EXPECT_FALSE(r.ok());
  EXPECT_EQ(r.error, "empty measurement window");
  const std::vector<ResultRow> rows = run_scaling_sweep(p, lim, 2);
  ASSERT_EQ(rows.size(), p.cells().size());
  for (const ResultRow& row : rows) EXPECT_EQ(row.error, "empty measurement window");
}

TEST(RunCellTest, SpeedEstimateMatchesEsjd) {
  const ExperimentPlan p = SmallPlan();
  const LimitState lim = solve_limit(p.model);
  const ResultRow m = run_cell(p, lim, {KernelKind::kMala, 32, 1.0, 2});
  const ResultRow r = run_cell(p, lim, {KernelKind::kRwm, 32, 1.0, 2});
  EXPECT_NEAR(m.speed_estimate, m.esjd * std::cbrt(32.0), 1e-12 * m.speed_estimate);
  EXPECT_NEAR(r.speed_estimate, r.esjd * 32.0, 1e-12 * r.speed_estimate);
  EXPECT_GT(m.acc_rate, 0.0);
  EXPECT_LE(m.acc_rate, 1.0);
}

TEST(SweepTest, RerunIsIdentical) {
  const ExperimentPlan p = SmallPlan();
  const LimitState lim = solve_limit(p.model);
  const std::vector<ResultRow> a = StripTimes(run_scaling_sweep(p, lim, 1));
  const std::vector<ResultRow> b = StripTimes(run_scaling_sweep(p, lim, 1));
  EXPECT_EQ(a, b);
  EXPECT_EQ(to_csv(a), to_csv(b));
}

TEST(SweepTest, ThreadCountDoesNotChangeResults) {
  ScopedEnv env("MALA_SCALING_THREADS", nullptr);
  const ExperimentPlan p = SmallPlan();
  const LimitState lim = solve_limit(p.model);
  const std::vector<ResultRow> one = StripTimes(run_scaling_sweep(p, lim, 1));
  const std::vector<ResultRow> four = StripTimes(run_scaling_sweep(p, lim, 4));
  EXPECT_EQ(one, four);
}

TEST(SweepTest, CellsAreIsolated) {
  const ExperimentPlan p = SmallPlan();
  const LimitState lim = solve_limit(p.model);
  const std::vector<ResultRow> rows = StripTimes(run_scaling_sweep(p, lim, 2));
  const std::vector<Cell> cells = p.cells();
  ASSERT_EQ(rows.size(), cells.size());
  for (std::size_t i = 0; i < cells.size(); i += 5) {
    ResultRow alone = run_cell(p, lim, cells[i]);
    alone.runtime_ms.reset();
    EXPECT_EQ(alone, rows[i]) << cell_key(cells[i]);
  }
  // Shrinking the plan around a cell leaves that cell's result unchanged.
  ExperimentPlan sub = p;
  sub.kinds = {cells.back().kind};
  sub.N_grid = {cells.back().N};
  sub.ell_grid = {cells.back().ell};
  sub.seeds = {cells.back().seed};
  EXPECT_EQ(StripTimes(run_scaling_sweep(sub, lim, 1)).front(), rows.back());
}

TEST(SweepTest, StatisticallyCorrectAtOptimum) {
  ExperimentPlan p;
  p.model = Iid();
  p.N_grid = {4096};
  const LimitState lim = solve_limit(p.model);
  p.ell_grid = {lim.ell_hat};
  p.seeds = {1, 2, 3};
  p.burn_in = 3000;
  p.steps = 20000;
  for (const ResultRow& r : run_scaling_sweep(p, lim, 0)) {
    ASSERT_TRUE(r.ok()) << r.error;
    EXPECT_NEAR(r.acc_rate, *r.predicted_acc, 0.03) << "seed " << r.seed;
  }
}

TEST(CsvTest, RoundTrip) {
  ResultRow a;
  a.kind = KernelKind::kMala;
  a.N = 1024;
  a.ell = 1.6503022;
  a.seed = 18446744073709551615ull;
  a.acc_rate = 0.57423;
  a.esjd = 1.0 / 3.0;
  a.speed_estimate = 3.4e-17;
  a.predicted_acc = 0.5742360001;
  a.tau = 0.25;
  a.runtime_ms = 12.5;
  ResultRow b;
  b.kind = KernelKind::kRwm;
  b.N = 8;
  b.ell = 0.1;
  b.tau = 0.25;
  b.error = "bad \"thing\", with comma";
  const std::vector<ResultRow> rows{a, b};
  EXPECT_EQ(parse_csv(to_csv(rows)), rows);
}

TEST(CsvTest, EmptyRowsGiveHeaderOnly) {
  EXPECT_EQ(to_csv({}), std::string(kCsvHeader) + "\n");
  EXPECT_TRUE(parse_csv(to_csv({})).empty());
  EXPECT_THROW(parse_csv("kind,N\n"), ArgumentError);
  EXPECT_THROW(parse_csv(std::string(kCsvHeader) + "\nmala,1,2\n"), ArgumentError);
}

TEST(CsvTest, WrittenFileOmitsRuntime) {
  const ExperimentPlan p = SmallPlan();
  const LimitState lim = solve_limit(p.model);
  const std::vector<ResultRow> rows = run_scaling_sweep(p, lim, 1);
  const std::filesystem::path dir = std::filesystem::temp_directory_path() / ("malascale-" + plan_hash(p));
  std::filesystem::create_directories(dir);
  write_csv(rows, dir / "a.csv");
  write_csv(run_scaling_sweep(p, lim, 3), dir / "b.csv");
  const std::string a = read_text_file(dir / "a.csv");
  EXPECT_EQ(a, read_text_file(dir / "b.csv"));
  for (const ResultRow& r : parse_csv(a)) EXPECT_FALSE(r.runtime_ms.has_value());
  std::filesystem::remove_all(dir);
}

TEST(ReportTest, ListsFailuresAndBlocks) {
  ExperimentPlan p = SmallPlan();
  const LimitState lim = solve_limit(p.model);
  std::vector<ResultRow> rows = run_scaling_sweep(p, lim, 1);
  rows[0].error = "boom";
  const std::string rep = format_report(rows);
  EXPECT_NE(rep.find("failed: 1"), std::string::npos);
  EXPECT_NE(rep.find("boom"), std::string::npos);
  EXPECT_NE(rep.find("# speed_vs_ell kind=mala N=8"), std::string::npos);
  EXPECT_NE(rep.find("# acc_vs_ell kind=rwm N=32"), std::string::npos);
  EXPECT_NE(rep.find("no variance fit"), std::string::npos);
}

TEST(UnimodalTest, Examples) {
  EXPECT_TRUE(is_unimodal({1, 2, 3, 2, 1}));
  EXPECT_TRUE(is_unimodal({1, 2, 3, 4}));
  EXPECT_TRUE(is_unimodal({4, 3, 2}));
  EXPECT_TRUE(is_unimodal({1, 1}));
  EXPECT_FALSE(is_unimodal({1, 5, 1, 1, 1, 5, 1}));
  EXPECT_FALSE(is_unimodal({5, 1, 1, 5, 5, 1, 1, 5, 5}));
}

TEST(OptimalityTest, GridAndNChecks) {
  ExperimentPlan p = SmallPlan();
  const LimitState lim = solve_limit(p.model);
  p.N_grid = {16};
  p.ell_grid = {0.5, 1, 1.5, 2, 2.5, 3};
  EXPECT_THROW(run_optimality_sweep(p, lim, 1), ArgumentError);
  p.ell_grid = {0.5, 1, 1.5, 2, 2.5, 3, 3, 3};
  EXPECT_THROW(run_optimality_sweep(p, lim, 1), ArgumentError);
  p.ell_grid = {0.5, 1, 1.5, 2, 2.5, 3, 3.5};
  p.N_grid = {16, 32};
  EXPECT_THROW(run_optimality_sweep(p, lim, 1), ArgumentError);
}

TEST(OptimalityTest, ArgmaxMatchesRows) {
  ExperimentPlan p = SmallPlan();
  const LimitState lim = solve_limit(p.model);
  p.N_grid = {64};
  p.ell_grid = {3.0, 0.3, 0.6, 1.0, 1.3, 1.6, 2.0, 2.5};
  p.steps = 2000;
  const OptimalityResult r = run_optimality_sweep(p, lim, 2);
  ASSERT_EQ(r.ell.size(), 8u);
  EXPECT_TRUE(std::is_sorted(r.ell.begin(), r.ell.end()));
  std::size_t best = 0;
  for (std::size_t i = 0; i < r.mean_speed.size(); ++i) {
    if (r.mean_speed[i] > r.mean_speed[best]) best = i;
  }
  EXPECT_EQ(r.ell_star_emp, r.ell[best]);
  EXPECT_EQ(r.acc_at_max, r.mean_acc[best]);
  for (std::size_t i = 0; i < r.ell.size(); ++i) {
    EXPECT_NEAR(r.predicted_speed[i], speed(r.ell[i], lim.tau), 1e-12);
  }
  for (const ResultRow& row : r.rows) EXPECT_EQ(row.kind, KernelKind::kMala);
}

TEST(FitTest, RecoversExactLine) {
  const std::vector<double> x{1, 2, 3, 4};
  std::vector<double> y;
  for (double v : x) y.push_back(0.7 - v / 3.0);
  const auto [beta, alpha] = fit_decreasing_line(x, y);
  EXPECT_NEAR(beta, 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(alpha, 0.7, 1e-14);
  EXPECT_THROW(fit_decreasing_line({2, 2, 2}, {1, 2, 3}), ArgumentError);
}

TEST(FitTest, DegenerateGridThrows) {
  EXPECT_THROW(fit_variance_exponent(KernelKind::kMala, Iid(), {64}, 100, 1), ArgumentError);
  EXPECT_THROW(fit_variance_exponent(KernelKind::kMala, Iid(), {64, 64}, 100, 1), ArgumentError);
  EXPECT_THROW(fit_variance_exponent(KernelKind::kMala, Iid(), {64, 128}, 0, 1), ArgumentError);
}

TEST(ConfigTest, ParsesCommentsAndWhitespace) {
  const Config c = Config::parse(
      "# comment\n\n  model.family = gauss_prior  \nmodel.y=0.25\nplan.N_grid = 16, 32 ,64\n");
  EXPECT_EQ(c.get("model.family"), "gauss_prior");
  EXPECT_EQ(c.get_double("model.y"), 0.25);
  EXPECT_EQ(c.get_number_list<int>("plan.N_grid"), (std::vector<int>{16, 32, 64}));
  EXPECT_EQ(c.get("quad.panels"), "256");
  EXPECT_TRUE(c.explicitly_set("model.y"));
  EXPECT_FALSE(c.explicitly_set("model.a"));
  EXPECT_TRUE(c.is_auto("sample.steps"));
  EXPECT_FALSE(c.get_optional_int("sample.steps").has_value());
  EXPECT_FALSE(c.get_bool("fit.enabled"));
}

TEST(ConfigTest, UnknownKeyIsNamed) {
  try {
    Config::parse("model.gamma = 2\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "model.gamma");
  }
  EXPECT_THROW(Config::parse("just words\n"), ConfigError);
  EXPECT_THROW(Config::parse("nodot = 1\n"), ConfigError);
}

TEST(ConfigTest, BadValueNamesKey) {
  const Config c = Config::parse("model.y = half\nfit.enabled = maybe\nplan.seeds = 1,x\n");
  try {
    c.model();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "model.y");
    EXPECT_NE(std::string(e.what()).find("model.y"), std::string::npos);
  }
  EXPECT_THROW(c.get_bool("fit.enabled"), ConfigError);
  EXPECT_THROW(c.get_number_list<std::uint64_t>("plan.seeds"), ConfigError);
  EXPECT_THROW(Config::parse("model.family = ising\n").model(), ConfigError);
  EXPECT_THROW(Config::parse("model.a = -1\n").model(), ConfigError);
}

TEST(ConfigTest, IidForcesZeroInteraction) {
  const ModelSpec m = Config::parse("model.family = iid_gauss\nmodel.y = 3\nmodel.beta = 2\n").model();
  EXPECT_EQ(m.family, Family::kIidGauss);
  EXPECT_EQ(m.y, 0.0);
  EXPECT_EQ(m.beta, 0.0);
}

TEST(ConfigTest, DumpListsEveryKey) {
  Config c;
  c.set("run.seed", "9");
  const std::string d = c.dump();
  for (const ConfigKey& k : config_keys()) {
    EXPECT_NE(d.find(std::string(k.key) + " = "), std::string::npos) << k.key;
  }
  EXPECT_NE(d.find("run.seed = 9\n"), std::string::npos);
  EXPECT_EQ(Config::parse(d).dump(), d);
}

TEST(ConfigTest, ShippedConfigsLoad) {
  const std::filesystem::path dir = std::filesystem::path(MALASCALE_SOURCE_DIR) / "configs";
  int n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".conf") continue;
    ++n;
    EXPECT_NO_THROW(Config::load(e.path()).model()) << e.path();
  }
  EXPECT_GE(n, 1);
  EXPECT_THROW(Config::load(dir / "missing.conf"), ConfigError);
}

}  // namespace
}  // namespace malascale
