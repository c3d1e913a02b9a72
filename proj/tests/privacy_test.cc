//
// Copyright 2026 The Truthful GLM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "tglm/privacy.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "boost/math/distributions/gamma.hpp"
#include "gtest/gtest.h"
#include "tglm/status.h"

namespace tglm {
namespace {

struct Moments {
  double mean_norm = 0.0;
  double mean_sq = 0.0;
  Eigen::VectorXd mean;
};

Moments Sample(int64_t d, double delta, double eps, int64_t draws,
               uint64_t seed) {
  RandomStream rng(seed);
  Moments m;
  m.mean = Eigen::VectorXd::Zero(d);
  for (int64_t i = 0; i < draws; ++i) {
    NoiseSample s = SampleNormExponential(d, delta, eps, rng);
    m.mean_norm += s.magnitude;
    m.mean_sq += s.magnitude * s.magnitude;
    m.mean += s.v;
  }
  m.mean_norm /= draws;
  m.mean_sq /= draws;
  m.mean /= draws;
  return m;
}

TEST(NoiseTest, MomentIdentitiesAtThreeSettings) {
  const struct {
    int64_t d;
    double delta, eps;
  } settings[] = {{5, 0.1, 0.5}, {3, 0.05, 0.2}, {10, 0.02, 1.0}};
  for (const auto& s : settings) {
    const int64_t draws = 200000;
    Moments m = Sample(s.d, s.delta, s.eps, draws, 41);
    const double scale = s.delta / s.eps;
    EXPECT_NEAR(m.mean_norm / (s.d * scale), 1.0, 0.02);
    EXPECT_NEAR(m.mean_sq / (s.d * (s.d + 1) * scale * scale), 1.0, 0.03);
    // Each coordinate has variance E||v||^2 / d.
    const double sigma = std::sqrt(m.mean_sq / s.d);
    for (int64_t j = 0; j < s.d; ++j) {
      EXPECT_LT(std::abs(m.mean(j)), 4.0 * sigma / std::sqrt(draws));
    }
  }
}

TEST(NoiseTest, MagnitudeMatchesVectorNorm) {
  RandomStream rng(3);
  for (int i = 0; i < 1000; ++i) {
    NoiseSample s = SampleNormExponential(4, 0.3, 0.7, rng);
    EXPECT_NEAR(s.magnitude, s.v.norm(), 1e-12);
    EXPECT_EQ(s.seed, 3u);
  }
}

TEST(NoiseTest, RadialLawMatchesGammaCdf) {
  const int64_t d = 4, draws = 100000;
  const double delta = 0.2, eps = 0.8;
  RandomStream rng(19);
  std::vector<double> r(draws);
  for (double& v : r) v = SampleNormExponential(d, delta, eps, rng).magnitude;
  std::sort(r.begin(), r.end());
  boost::math::gamma_distribution<double> law(d, delta / eps);
  double ks = 0.0;
  for (int64_t i = 0; i < draws; ++i) {
    const double f = boost::math::cdf(law, r[i]);
    ks = std::max({ks, std::abs(f - static_cast<double>(i) / draws),
                   std::abs(f - static_cast<double>(i + 1) / draws)});
  }
  EXPECT_LT(ks, 0.01);
}

TEST(NoiseTest, DirectionIsIsotropic) {
  RandomStream rng(23);
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (int i = 0; i < 100000; ++i) {
    NoiseSample s = SampleNormExponential(3, 1.0, 1.0, rng);
    sum += s.v / s.magnitude;
  }
  EXPECT_LT((sum / 100000.0).norm(), 0.02);
}

TEST(NoiseTest, HalvingEpsilonDoublesMeanNorm) {
  Moments a = Sample(3, 0.1, 0.4, 100000, 5);
  Moments b = Sample(3, 0.1, 0.2, 100000, 6);
  EXPECT_NEAR(b.mean_norm / a.mean_norm, 2.0, 0.04);
}

TEST(PrivatizeTest, DeterministicAndScaled) {
  PrivacyParams p{0.5, 1e-12, 1.0, 0.0, 0.0};
  Eigen::VectorXd theta = Eigen::Vector2d(0.3, -0.1);
  RandomStream a(7), b(7);
  PrivateRelease ra = Privatize(theta, p, Release::kFull, a);
  PrivateRelease rb = Privatize(theta, p, Release::kFull, b);
  EXPECT_EQ(ra.theta, rb.theta);
  EXPECT_LT((ra.theta - theta).norm(), 1e-9);
  RandomStream c(7);
  PrivateRelease half = Privatize(theta, p, Release::kHalf1, c);
  EXPECT_GT(half.noise.magnitude, 1e-6);
  EXPECT_EQ(ReleaseName(Release::kHalf0), "half0");
}

TEST(AccountTest, Composition) {
  PrivacyParams p{0.1, 1.0, 1.0, 1e-3, 2e-3};
  PrivacyAccount acc = ComposeAccount(p);
  EXPECT_DOUBLE_EQ(acc.epsilon_total, 0.2);
  EXPECT_DOUBLE_EQ(acc.gamma_total, 5e-3);
  p.gamma_n = p.gamma_half = 0.0;
  EXPECT_EQ(ComposeAccount(p).gamma_total, 0.0);
  p.epsilon = 0.35;
  EXPECT_DOUBLE_EQ(ComposeAccount(p).epsilon_total, 0.7);
  p.epsilon = 0.0;
  EXPECT_FALSE(ValidatePrivacyParams(p).ok());
  p.epsilon = 1.0;
  p.gamma_n = 1.5;
  EXPECT_FALSE(ValidatePrivacyParams(p).ok());
}

TEST(WilsonTest, KnownValues) {
  auto [lo, hi] = WilsonInterval(50, 100, 1.96);
  EXPECT_NEAR(lo, 0.4038, 1e-4);
  EXPECT_NEAR(hi, 0.5962, 1e-4);
  EXPECT_EQ(WilsonInterval(0, 100, 1.96).first, 0.0);
}

// Mean of the responses plus norm-exponential noise: sensitivity 1/n under a
// single replacement with |y| <= 1.
MechanismSampler MeanMechanism(double noise_delta, double eps) {
  return [=](const Dataset& data, RandomStream& rng)
             -> absl::StatusOr<Eigen::VectorXd> {
    Eigen::VectorXd mean = Eigen::VectorXd::Constant(1, data.y.mean());
    return mean + SampleNormExponential(1, noise_delta, eps, rng).v;
  };
}

Dataset Responses(std::vector<double> y) {
  Dataset data{Eigen::MatrixXd::Ones(y.size(), 1), Eigen::VectorXd(y.size())};
  for (size_t i = 0; i < y.size(); ++i) data.y(i) = y[i];
  return data;
}

TEST(PrivacyRatioTest, IdenticalDatasetsPass) {
  Dataset d = Responses({0.1, 0.5, -0.3, 1.0});
  PrivacyRatioOptions opts;
  opts.trials = 20000;
  opts.bins = 40;
  opts.log_bound = 0.0;
  PrivacyRatioReport r =
      *EmpiricalPrivacyRatio(MeanMechanism(0.5, 0.5), d, d, opts, 1);
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.occupied, 40);
  EXPECT_NE(r.note.find("falsification"), std::string::npos);
}

TEST(PrivacyRatioTest, CalibratedPassesAndCorruptedFails) {
  Dataset d = Responses({1.0, 0.0, 0.0, 0.0});
  Dataset dp = Responses({-1.0, 0.0, 0.0, 0.0});
  const double eps = 0.5, sensitivity = 0.5;
  PrivacyRatioOptions opts;
  opts.trials = 40000;
  opts.bins = 50;
  opts.log_bound = 2 * eps;
  EXPECT_TRUE(EmpiricalPrivacyRatio(MeanMechanism(sensitivity, eps), d, dp,
                                    opts, 2)
                  ->passed);
  EXPECT_FALSE(EmpiricalPrivacyRatio(MeanMechanism(sensitivity / 10, eps), d,
                                     dp, opts, 2)
                   ->passed);
}

TEST(PrivacyRatioTest, SparseGridIsInsufficientMass) {
  Dataset d = Responses({0.0, 0.0});
  PrivacyRatioOptions opts;
  opts.trials = 100;
  opts.bins = 50;
  EXPECT_EQ(KindOf(EmpiricalPrivacyRatio(MeanMechanism(1.0, 1.0), d, d, opts, 3)
                       .status()),
            ErrorKind::kInsufficientMass);
}

}  // namespace
}  // namespace tglm
