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


#include <algorithm>
#include <chrono>
#include <numeric>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "malascale/diagnostics.hpp"
#include "malascale/sampler.hpp"
#include "oracle.hpp"

namespace malascale {
namespace {

std::vector<ModelSpec> Presets() {
  return {ModelSpec::strict_hp(), ModelSpec::gauss_prior(), ModelSpec::iid_gauss(),
          ModelSpec::strict_hp(-0.4, 2.5, 0.6)};
}

std::vector<double> RandomPoint(Rng& rng, int N, double scale = 1.5) {
  std::vector<double> x(N);
  for (double& v : x) v = scale * rng.normal();
  return x;
}

TEST(LogTargetTest, SmallCases) {
  EXPECT_EQ(log_target(ModelSpec::iid_gauss(), std::vector<double>{0.0, 0.0}), 0.0);
  for (const ModelSpec& m : Presets()) {
    const double t = 0.83;
    EXPECT_NEAR(log_target(m, std::vector<double>{t}),
                eval_U(m, t, 0) - 0.5 * eval_H(m, t, 0) * eval_H(m, t, 0), 1e-15);
  }
  EXPECT_THROW(log_target(ModelSpec::strict_hp(), std::vector<double>{}), ArgumentError);
  EXPECT_THROW(log_target(ModelSpec::strict_hp(), std::vector<double>{1.0, NAN}), NumericError);
}

TEST(LogTargetTest, MatchesPairwiseSum) {
  Rng rng(3, 1);
  for (const ModelSpec& m : Presets()) {
    for (int N : {2, 64, 300}) {
      const std::vector<double> x = RandomPoint(rng, N);
      const double ref = oracle::log_target(m, x);
      EXPECT_NEAR(log_target(m, x), ref, 1e-10 * std::max(1.0, std::abs(ref)));
      EXPECT_NEAR(ChainState::from_point(m, x).log_target, ref, 1e-10 * std::max(1.0, std::abs(ref)));
    }
  }
}

TEST(GradientTest, ClosedFormAndFiniteDifferences) {
  Rng rng(3, 2);
  {
    const ModelSpec m = ModelSpec::strict_hp();
    const std::vector<double> one{0.4};
    EXPECT_NEAR(grad_log_target(m, one, 0), eval_U(m, 0.4, 1) - eval_H(m, 0.4, 1) * eval_H(m, 0.4, 0),
                1e-15);
    const std::vector<double> x = RandomPoint(rng, 5);
    for (std::size_t i = 0; i < x.size(); ++i) {
      EXPECT_DOUBLE_EQ(grad_log_target(ModelSpec::iid_gauss(), x, i), -x[i]);
    }
    EXPECT_THROW(grad_log_target(m, x, 5), ArgumentError);
  }
  constexpr double kStep = 1e-5;
  for (const ModelSpec& m : Presets()) {
    const std::vector<double> x = RandomPoint(rng, 16);
    const std::vector<double> g = grad_log_target(m, x);
    const std::vector<double> ref = oracle::grad(m, x);
    for (std::size_t i = 0; i < x.size(); ++i) {
      EXPECT_NEAR(g[i], ref[i], 1e-13);
      EXPECT_DOUBLE_EQ(grad_log_target(m, x, i), g[i]);
      std::vector<double> xp = x;
      std::vector<double> xm = x;
      xp[i] += kStep;
      xm[i] -= kStep;
      const double fd = (log_target(m, xp) - log_target(m, xm)) / (2.0 * kStep);
      EXPECT_LE(std::abs(fd - g[i]), 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(ProposalTest, DegenerateSteps) {
  const ModelSpec m = ModelSpec::strict_hp();
  Rng rng(3, 3);
  const ChainState s = ChainState::from_point(m, RandomPoint(rng, 8));
  const std::vector<double> W = RandomPoint(rng, 8, 1.0);
  const std::vector<double> zero(8, 0.0);
  const KernelConfig still = KernelConfig::from_sigma_sq(KernelKind::kMala, 0.0, 8);
  EXPECT_EQ(propose_mala(s, still, W), s.x);
  const KernelConfig c = KernelConfig::make(KernelKind::kMala, 1.2, 8);
  const std::vector<double> drift = propose_mala(s, c, zero);
  for (int i = 0; i < 8; ++i) {
    EXPECT_NEAR(drift[i], s.x[i] + 0.5 * c.sigma_sq * grad_log_target(m, s.x, i), 1e-14);
  }
  EXPECT_THROW(propose_mala(s, c, std::vector<double>(3)), ArgumentError);
  EXPECT_THROW(propose_mala(s, KernelConfig::make(KernelKind::kRwm, 1.0, 8), W), ArgumentError);
}

TEST(ProposalTest, KernelVariance) {
  EXPECT_NEAR(KernelConfig::make(KernelKind::kMala, 2.0, 64).sigma_sq, 1.0, 1e-15);
  EXPECT_NEAR(KernelConfig::make(KernelKind::kRwm, 2.0, 64).sigma_sq, 4.0 / 64.0, 1e-15);
  EXPECT_THROW(KernelConfig::make(KernelKind::kMala, -1.0, 64), ArgumentError);
  EXPECT_THROW(KernelConfig::make(KernelKind::kMala, 1.0, 0), ArgumentError);
  EXPECT_NEAR(KernelConfig::from_sigma_sq(KernelKind::kMala, 0.25, 8).ell, std::sqrt(0.5), 1e-15);
}

TEST(AcceptRatioTest, IdentityAndAntisymmetry) {
  Rng rng(3, 4);
  for (const ModelSpec& m : Presets()) {
    const std::vector<double> x = RandomPoint(rng, 32);
    EXPECT_EQ(log_accept_ratio(m, x, x, 0.3), 0.0);
    for (int k = 0; k < 50; ++k) {
      const std::vector<double> a = RandomPoint(rng, 32);
      std::vector<double> b = a;
      for (double& v : b) v += 0.3 * rng.normal();
      const double h = 0.05 + rng.uniform();
      EXPECT_NEAR(log_accept_ratio(m, a, b, h), -log_accept_ratio(m, b, a, h), 1e-10);
    }
  }
  const std::vector<double> x(4, 0.0);
  EXPECT_THROW(log_accept_ratio(ModelSpec::strict_hp(), x, std::vector<double>(3), 0.1), ArgumentError);
}

TEST(AcceptRatioTest, MatchesIndependentDensities) {
  Rng rng(3, 5);
  for (const ModelSpec& m : Presets()) {
    for (int k = 0; k < 100; ++k) {
      const std::vector<double> x = RandomPoint(rng, 32);
      std::vector<double> y = x;
      for (double& v : y) v += 0.4 * rng.normal();
      const double h = 0.01 + rng.uniform();
      const double ref = oracle::log_target(m, y) + oracle::log_q(m, y, x, h) - oracle::log_target(m, x) -
                         oracle::log_q(m, x, y, h);
      EXPECT_NEAR(log_accept_ratio(m, x, y, h), ref, 1e-10 * std::max(1.0, std::abs(ref)));
      const double lq = log_q(m, x, y, h) - oracle::log_q(m, x, y, h);
      EXPECT_NEAR(lq, 0.0, 1e-10 * std::max(1.0, std::abs(oracle::log_q(m, x, y, h))));
    }
  }
}

TEST(AcceptRatioTest, StepUsesTheSameRatio) {
  Rng rng(3, 6);
  for (const ModelSpec& m : Presets()) {
    ChainState s = ChainState::from_point(m, RandomPoint(rng, 24));
    const KernelConfig c = KernelConfig::make(KernelKind::kMala, 1.7, 24);
    ProposalRecord rec;
    rec.W = RandomPoint(rng, 24, 1.0);
    evaluate_mala_proposal(m, s, c.sigma_sq, rec);
    EXPECT_EQ(rec.Y, propose_mala(s, c, rec.W));
    EXPECT_NEAR(rec.G, log_accept_ratio(m, s.x, rec.Y, c.sigma_sq), 1e-11);
    double sq = 0.0;
    for (int i = 0; i < 24; ++i) sq += (rec.Y[i] - s.x[i]) * (rec.Y[i] - s.x[i]);
    EXPECT_NEAR(rec.sq_jump, sq, 1e-12 * sq);
  }
}

TEST(DetailedBalanceTest, RandomPairs) {
  Rng rng(3, 7);
  const std::vector<ModelSpec> models = Presets();
  double worst = 0.0;
  for (int k = 0; k < 100000; ++k) {
    const ModelSpec& m = models[k % models.size()];
    const int N = 1 + static_cast<int>(rng.next_u64() % 8);
    const double h = std::exp(-6.0 + 6.0 * rng.uniform());
    const std::vector<double> x = RandomPoint(rng, N, 2.0);
    const std::vector<double> g = oracle::grad(m, x);
    std::vector<double> y(N);
    for (int i = 0; i < N; ++i) y[i] = x[i] + std::sqrt(h) * rng.normal() + 0.5 * h * g[i];
    const double lhs = oracle::log_target(m, x) + oracle::log_q(m, x, y, h) +
                       std::min(0.0, log_accept_ratio(m, x, y, h));
    const double rhs = oracle::log_target(m, y) + oracle::log_q(m, y, x, h) +
                       std::min(0.0, log_accept_ratio(m, y, x, h));
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(FactorizationTest, IidGaussRatioIsSumOfOneDimensionalRatios) {
  const ModelSpec m = ModelSpec::iid_gauss();
  Rng rng(3, 8);
  for (int k = 0; k < 20; ++k) {
    const std::vector<double> x = RandomPoint(rng, 50);
    std::vector<double> y = x;
    for (double& v : y) v += 0.5 * rng.normal();
    double sum = 0.0;
    for (int i = 0; i < 50; ++i) {
      sum += log_accept_ratio(m, std::vector<double>{x[i]}, std::vector<double>{y[i]}, 0.3);
    }
    EXPECT_NEAR(log_accept_ratio(m, x, y, 0.3), sum, 1e-10);
  }
}

// log|G(sigma)| against log sigma: the leading term is sigma^3 g3.
TEST(TaylorOrderTest, LogAcceptRatioIsThirdOrder) {
  const ModelSpec m = ModelSpec::strict_hp();
  Rng rng(3, 9);
  for (int trial = 0; trial < 10; ++trial) {
    const std::vector<double> x = RandomPoint(rng, 32, 1.0);
    const std::vector<double> W = RandomPoint(rng, 32, 1.0);
    if (std::abs(g3(m, x, W)) < 0.5) continue;
    const std::vector<double> g = grad_log_target(m, x);
    std::vector<double> lx;
    std::vector<double> ly;
    for (int e = 10; e >= 4; --e) {
      const double sigma = std::ldexp(1.0, -e);
      std::vector<double> y(32);
      for (int i = 0; i < 32; ++i) y[i] = x[i] + sigma * W[i] + 0.5 * sigma * sigma * g[i];
      lx.push_back(std::log(sigma));
      ly.push_back(std::log(std::abs(log_accept_ratio(m, x, y, sigma * sigma))));
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (ly[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    const double slope = sxy / sxx;
    EXPECT_GE(slope, 2.8);
    EXPECT_LE(slope, 3.2);
  }
}

TEST(ChainTest, CacheStaysConsistent) {
  for (const ModelSpec& m : {ModelSpec::strict_hp(), ModelSpec::gauss_prior()}) {
    Rng rng(3, 10);
    const int N = 64;
    Chain c(m, KernelConfig::make(KernelKind::kMala, 1.6, N), ChainState::from_point(m, RandomPoint(rng, N, 1.0)),
            rng.split());
    const ChainStats st = c.run(100000);
    EXPECT_GT(st.accepted, 10000);
    EXPECT_LT(st.accepted, 99000);
    const ChainState& s = c.state();
    double sh = 0.0;
    for (int i = 0; i < N; ++i) {
      sh += oracle::H(m, s.x[i]);
      const PointEval e = eval_point(m, s.x[i]);
      EXPECT_EQ(s.eval[i].h, e.h);
      EXPECT_EQ(s.eval[i].du, e.du);
    }
    EXPECT_NEAR(s.sum_H, sh, 1e-9 * N);
    EXPECT_NEAR(s.log_target, oracle::log_target(m, s.x), 1e-9 * N);
    EXPECT_EQ(s.step_count, 100000);
  }
}

TEST(ChainTest, RejectedStepLeavesStateUnchanged) {
  const ModelSpec m = ModelSpec::strict_hp();
  Rng rng(3, 11);
  // sigma^2 = 50 is rejected almost surely.
  ChainState s = ChainState::from_point(m, RandomPoint(rng, 32, 1.0));
  const KernelConfig c = KernelConfig::from_sigma_sq(KernelKind::kMala, 50.0, 32);
  ProposalRecord rec;
  int rejections = 0;
  for (int k = 0; k < 50; ++k) {
    const ChainState before = s;
    step(m, s, c, rng, rec);
    if (rec.accepted) continue;
    ++rejections;
    EXPECT_EQ(s.x, before.x);
    EXPECT_EQ(s.sum_H, before.sum_H);
    EXPECT_EQ(s.log_target, before.log_target);
    EXPECT_EQ(s.step_count, before.step_count + 1);
    EXPECT_EQ(rec.sq_jump, 0.0);
  }
  EXPECT_GT(rejections, 40);
}

TEST(ChainTest, TinyStepsAreAccepted) {
  for (KernelKind k : {KernelKind::kMala, KernelKind::kRwm}) {
    const ModelSpec m = ModelSpec::strict_hp();
    Rng rng(3, 12);
    Chain c(m, KernelConfig::from_sigma_sq(k, 1e-12, 16), ChainState::from_point(m, RandomPoint(rng, 16, 1.0)),
            rng.split());
    EXPECT_GT(c.run(10000).acceptance_rate(), 0.999);
    Chain still(m, KernelConfig::from_sigma_sq(k, 0.0, 16), ChainState::from_point(m, RandomPoint(rng, 16, 1.0)),
                rng.split());
    const std::vector<double> x0 = still.state().x;
    const ProposalRecord& r = still.step();
    EXPECT_TRUE(r.accepted);
    EXPECT_EQ(r.Y, x0);
  }
}

TEST(ChainTest, FixedSeedIsBitReproducible) {
  const ModelSpec m = ModelSpec::strict_hp();
  auto run = [&](KernelKind k) {
    Rng rng(42, 7);
    Chain c(m, KernelConfig::make(k, 1.0, 40), ChainState::from_point(m, RandomPoint(rng, 40, 1.0)), rng.split());
    c.run(3000);
    return c.state().x;
  };
  EXPECT_EQ(run(KernelKind::kMala), run(KernelKind::kMala));
  EXPECT_EQ(run(KernelKind::kRwm), run(KernelKind::kRwm));
  EXPECT_NE(run(KernelKind::kMala), run(KernelKind::kRwm));
}

TEST(ChainTest, RwmAcceptanceFallsWithStepSize) {
  const ModelSpec m = ModelSpec::strict_hp();
  const LimitState lim = solve_limit(m);
  double prev = 1.0;
  for (double ell : {0.5, 1.5, 3.0, 6.0}) {
    Rng rng(5, 1);
    Chain c(m, KernelConfig::make(KernelKind::kRwm, ell, 256), init_state(m, lim, 256, rng, InitMode::kLimitMarginal),
            rng.split());
    c.burn_in(1000);
    const double a = c.run(10000).acceptance_rate();
    EXPECT_LT(a, prev) << ell;
    prev = a;
  }
}

TEST(ChainTest, IidGaussAcceptanceAtOptimum) {
  const ModelSpec m = ModelSpec::iid_gauss();
  const LimitState lim = solve_limit(m);
  Rng rng(5, 2);
  Chain c(m, KernelConfig::make(KernelKind::kMala, lim.ell_hat, 1024),
          init_state(m, lim, 1024, rng, InitMode::kLimitMarginal), rng.split());
  c.burn_in(2000);
  EXPECT_NEAR(c.run(40000).acceptance_rate(), 0.574, 0.03);
}

TEST(ChainTest, WorkPerStepIsLinear) {
  const ModelSpec m = ModelSpec::strict_hp();
  auto median_step = [&](int N) {
    Rng rng(5, 3);
    Chain c(m, KernelConfig::make(KernelKind::kMala, 1.6, N), ChainState::from_point(m, RandomPoint(rng, N, 1.0)),
            rng.split());
    c.burn_in(5);
    std::vector<double> t;
    for (int k = 0; k < 41; ++k) {
      const auto t0 = std::chrono::steady_clock::now();
      for (int j = 0; j < 5; ++j) c.step();
      t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    std::nth_element(t.begin(), t.begin() + 20, t.end());
    return t[20];
  };
  const double small = median_step(1 << 12);
  const double large = median_step(1 << 16);
  EXPECT_LE(large, 20.0 * small) << "ratio " << large / small;
}

TEST(InitTest, IidGaussLimitMarginalMoments) {
  const ModelSpec m = ModelSpec::iid_gauss();
  const LimitState lim = solve_limit(m);
  Rng rng(5, 4);
  const ChainState s = init_state(m, lim, 10000, rng, InitMode::kLimitMarginal);
  double mean = 0.0;
  for (double v : s.x) mean += v;
  mean /= 10000.0;
  double var = 0.0;
  for (double v : s.x) var += (v - mean) * (v - mean);
  var /= 9999.0;
  EXPECT_LT(std::abs(mean), 4.0 / 100.0);
  EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(InitTest, StrictHpLimitMarginalKs) {
  const ModelSpec m = ModelSpec::strict_hp();
  const LimitState lim = solve_limit(m);
  Rng rng(5, 5);
  const ChainState s = init_state(m, lim, 10000, rng, InitMode::kLimitMarginal);
  const DensityTable t = limit_cdf_table(lim);
  EXPECT_LT(ks_statistic(s.x, [&](double v) { return t.cdf(v); }).statistic, 0.02);
}

TEST(InitTest, SeedAndModeContracts) {
  const ModelSpec m = ModelSpec::strict_hp();
  const LimitState lim = solve_limit(m);
  Rng a(9, 1);
  Rng b(9, 1);
  EXPECT_EQ(init_state(m, lim, 100, a, InitMode::kPrior).x, init_state(m, lim, 100, b, InitMode::kPrior).x);
  Rng c(9, 2);
  LimitState unsolved;
  EXPECT_THROW(init_state(m, unsolved, 10, c, InitMode::kLimitMarginal), StateError);
  EXPECT_THROW(init_state(m, nullptr, 10, c, InitMode::kLimitMarginal), StateError);
  EXPECT_NO_THROW(init_state(m, nullptr, 10, c, InitMode::kPrior));
  EXPECT_THROW(parse_init_mode("uniform"), ArgumentError);
  EXPECT_THROW(parse_kernel("hmc"), ArgumentError);
}

}  // namespace
}  // namespace malascale
