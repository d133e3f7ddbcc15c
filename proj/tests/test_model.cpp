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


#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "malascale/model.hpp"
#include "oracle.hpp"

namespace malascale {
namespace {

std::vector<ModelSpec> Presets() {
  return {ModelSpec::strict_hp(), ModelSpec::gauss_prior(), ModelSpec::iid_gauss(),
          ModelSpec::strict_hp(-0.3, 2.0, 0.5), ModelSpec::gauss_prior(1.5, 0.7)};
}

TEST(ModelTest, ValuesMatchClosedForms) {
  for (const ModelSpec& m : Presets()) {
    for (double x = -6.0; x <= 6.0; x += 0.37) {
      EXPECT_NEAR(eval_H(m, x, 0), oracle::H(m, x), 1e-14);
      EXPECT_NEAR(eval_H(m, x, 1), oracle::dH(m, x), 1e-14);
      EXPECT_NEAR(eval_U(m, x, 0), oracle::U(m, x), 1e-12);
      EXPECT_NEAR(eval_U(m, x, 1), oracle::dU(m, x), 1e-12);
      const PointEval e = eval_point(m, x);
      EXPECT_NEAR(e.h, oracle::H(m, x), 1e-14);
      EXPECT_NEAR(e.dh, oracle::dH(m, x), 1e-14);
      EXPECT_NEAR(e.u, oracle::U(m, x), 1e-12);
      EXPECT_NEAR(e.du, oracle::dU(m, x), 1e-12);
    }
  }
}

// Each derivative is the central difference of the one below it.
TEST(ModelTest, DerivativesMatchFiniteDifferences) {
  constexpr double kStep = 1e-4;
  for (const ModelSpec& m : Presets()) {
    const PsiContext ctx{0.2};
    for (int i = 0; i < 200; ++i) {
      const double x = -8.0 + 16.0 * i / 199.0;
      for (int k = 1; k <= kMaxOrder; ++k) {
        auto check = [&](auto f) {
          const double fd = (f(x + kStep, k - 1) - f(x - kStep, k - 1)) / (2.0 * kStep);
          const double v = f(x, k);
          EXPECT_LE(std::abs(fd - v), 1e-5 * std::max(1.0, std::abs(v)))
              << family_name(m.family) << " order " << k << " at x=" << x;
        };
        check([&](double t, int o) { return eval_H(m, t, o); });
        check([&](double t, int o) { return eval_U(m, t, o); });
        check([&](double t, int o) { return eval_psi(m, ctx, t, o); });
      }
    }
  }
}

TEST(ModelTest, ParityOfHAndPrior) {
  const ModelSpec m = ModelSpec::strict_hp(0.0, 1.3, 0.8);
  for (double x = 0.1; x < 5.0; x += 0.3) {
    EXPECT_DOUBLE_EQ(eval_H(m, -x, 0), -eval_H(m, x, 0));
    EXPECT_DOUBLE_EQ(eval_H(m, -x, 1), eval_H(m, x, 1));
    EXPECT_DOUBLE_EQ(eval_U(m, -x, 0), eval_U(m, x, 0));
    EXPECT_DOUBLE_EQ(log_prior(m, -x), log_prior(m, x));
  }
}

TEST(ModelTest, IidGaussHasNoInteraction) {
  const ModelSpec m = ModelSpec::iid_gauss();
  EXPECT_TRUE(m.independent());
  for (double x : {-3.0, 0.0, 0.5, 10.0}) {
    for (int k = 0; k <= kMaxOrder; ++k) EXPECT_EQ(eval_H(m, x, k), 0.0);
    EXPECT_DOUBLE_EQ(eval_U(m, x, 0), -0.5 * x * x);
    EXPECT_DOUBLE_EQ(eval_U(m, x, 2), -1.0);
    EXPECT_EQ(eval_U(m, x, 3), 0.0);
  }
}

TEST(ModelTest, StrictHpDerivativesAreBounded) {
  const ModelSpec m = ModelSpec::strict_hp();
  EXPECT_TRUE(m.hp_satisfied());
  EXPECT_FALSE(ModelSpec::gauss_prior().hp_satisfied());
  for (double x = -1e4; x <= 1e4; x += 7.3) {
    for (int k = 1; k <= kMaxOrder; ++k) {
      EXPECT_LE(std::abs(eval_H(m, x, k)), 10.0);
      EXPECT_LE(std::abs(eval_U(m, x, k)), 10.0);
    }
  }
  // Exponential tails: U ~ -a|x|.
  EXPECT_NEAR(eval_U(m, 1e6, 0) / 1e6, -m.a, 1e-6);
  EXPECT_NEAR(eval_U(m, -1e6, 1), m.a, 1e-9);
}

TEST(ModelTest, RejectsBadArguments) {
  const ModelSpec m = ModelSpec::strict_hp();
  EXPECT_THROW(eval_H(m, 0.0, 5), ArgumentError);
  EXPECT_THROW(eval_U(m, 0.0, -1), ArgumentError);
  EXPECT_THROW(ModelSpec::strict_hp(0.5, 1.0, 0.0).validate(), ArgumentError);
  EXPECT_THROW(ModelSpec::strict_hp(NAN).validate(), ArgumentError);
  EXPECT_NO_THROW(ModelSpec::gauss_prior(-2.0, 0.0).validate());
  EXPECT_THROW(parse_family("ising"), ArgumentError);
  for (Family f : {Family::kStrictHp, Family::kGaussPrior, Family::kIidGauss}) {
    EXPECT_EQ(parse_family(family_name(f)), f);
  }
}

TEST(ModelTest, BetaZeroIsIndependent) {
  EXPECT_TRUE(ModelSpec::strict_hp(0.5, 0.0).independent());
  EXPECT_FALSE(ModelSpec::strict_hp().independent());
}

}  // namespace
}  // namespace malascale
