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

#include "tglm/estimators.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "Eigen/Dense"
#include "gtest/gtest.h"
#include "tglm/status.h"

namespace tglm {
namespace {

// Independent least-squares oracle: column-pivoted QR on X itself.
Eigen::VectorXd OracleLeastSquares(const Eigen::MatrixXd& X,
                                   const Eigen::VectorXd& z) {
  return X.colPivHouseholderQr().solve(z);
}

Dataset RandomLinear(std::mt19937_64& rng, int n, int d) {
  std::normal_distribution<double> g(0.0, 1.0);
  Dataset data{Eigen::MatrixXd(n, d), Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) data.X(i, j) = g(rng);
  Eigen::VectorXd theta(d);
  for (int j = 0; j < d; ++j) theta(j) = g(rng);
  for (int i = 0; i < n; ++i) data.y(i) = data.X.row(i).dot(theta) + g(rng);
  return data;
}

EstimatorSettings Wide(Regime regime = Regime::kSubGaussian) {
  EstimatorSettings s;
  s.tau1 = 1e9;
  s.tau2 = 1e9;
  s.tau_theta = 1.0;
  s.regime = regime;
  return s;
}

double RelErr(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

const LinkBundle kLinear = MakeLinkBundle(*ModelKind::LinearGaussian(1.0));

TEST(GlmEstimateTest, IdentityDesign) {
  Dataset data{Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(1.0, 2.0)};
  EstimatorSettings s = Wide();
  s.tau2 = 10.0;
  Eigen::VectorXd theta = *GlmEstimate(data, kLinear, s);
  EXPECT_NEAR(theta(0), 1.0, 1e-15);
  EXPECT_NEAR(theta(1), 2.0, 1e-15);
}

TEST(GlmEstimateTest, MatchesNormalEquationsOracle) {
  std::mt19937_64 rng(2024);
  for (int rep = 0; rep < 50; ++rep) {
    const int d = 1 + rep % 5;
    Dataset data = RandomLinear(rng, 200, d);
    Eigen::VectorXd theta = *GlmEstimate(data, kLinear, Wide());
    EXPECT_LT(RelErr(theta, OracleLeastSquares(data.X, data.y)), 1e-10);
  }
}

TEST(GlmEstimateTest, PoissonAllZeroResponses) {
  std::mt19937_64 rng(8);
  Dataset data = RandomLinear(rng, 10000, 3);
  data.y.setZero();
  EstimatorSettings s = Wide();
  s.tau2 = 5.0;
  s.polytope = PolytopeSpec::Interval(ExtendedReal::Finite(std::pow(1e4, -0.25)),
                                      ExtendedReal::PositiveInfinity());
  Eigen::VectorXd theta =
      *GlmEstimate(data, MakeLinkBundle(ModelKind::Poisson()), s);
  Eigen::VectorXd z = Eigen::VectorXd::Constant(10000, std::log(0.1));
  EXPECT_NEAR(z(0), -2.302585, 1e-6);
  EXPECT_LT(RelErr(theta, OracleLeastSquares(data.X, z)), 1e-10);
}

TEST(GlmEstimateTest, LogisticOutsideDomainIsDomainError) {
  Dataset data{Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(1.0, -1.0)};
  EstimatorSettings s = Wide();
  s.tau2 = 1.0;
  s.polytope = PolytopeSpec::Interval(ExtendedReal::Finite(-1.0),
                                      ExtendedReal::Finite(1.0));
  EXPECT_EQ(KindOf(GlmEstimate(data, MakeLinkBundle(ModelKind::Logistic()), s)
                       .status()),
            ErrorKind::kDomainError);
}

TEST(GlmEstimateTest, SingularGram) {
  Eigen::MatrixXd X(4, 2);
  X << 1, 2, 2, 4, 3, 6, 4, 8;
  Dataset data{X, Eigen::Vector4d(1, 2, 3, 4)};
  EXPECT_EQ(KindOf(GlmEstimate(data, kLinear, Wide()).status()),
            ErrorKind::kSingularGram);
  EXPECT_EQ(KindOf(HeavyEstimate(data, Wide(Regime::kHeavyTailed)).status()),
            ErrorKind::kSingularGram);
}

TEST(GlmEstimateTest, WrongRegimeRejected) {
  Dataset data{Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(1.0, 2.0)};
  EXPECT_FALSE(GlmEstimate(data, kLinear, Wide(Regime::kHeavyTailed)).ok());
  EXPECT_FALSE(HeavyEstimate(data, Wide()).ok());
}

TEST(GlmEstimateTest, PermutationInvariance) {
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 10; ++rep) {
    Dataset data = RandomLinear(rng, 300, 3);
    std::vector<int> perm(300);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Dataset shuffled = data;
    for (int i = 0; i < 300; ++i) {
      shuffled.X.row(i) = data.X.row(perm[i]);
      shuffled.y(i) = data.y(perm[i]);
    }
    EstimatorSettings s = Wide();
    s.tau2 = 1.5;
    EXPECT_LT(RelErr(*GlmEstimate(shuffled, kLinear, s),
                     *GlmEstimate(data, kLinear, s)),
              1e-12);
    EstimatorSettings h = Wide(Regime::kHeavyTailed);
    h.tau1 = 1.2;
    h.tau2 = 1.5;
    EXPECT_LT(RelErr(*HeavyEstimate(shuffled, h), *HeavyEstimate(data, h)),
              1e-12);
  }
}

TEST(GlmEstimateTest, ClippingConvergesMonotonically) {
  std::mt19937_64 rng(9);
  Dataset data = RandomLinear(rng, 200, 2);
  const double ymax = data.y.cwiseAbs().maxCoeff();
  const Eigen::VectorXd unclipped = *GlmEstimate(data, kLinear, Wide());
  double prev = HUGE_VAL;
  for (int k = 1; k <= 40; ++k) {
    EstimatorSettings s = Wide();
    s.tau2 = ymax * k / 40.0;
    const double err = (*GlmEstimate(data, kLinear, s) - unclipped).norm();
    EXPECT_LE(err, prev + 1e-9) << "tau2=" << s.tau2;
    prev = err;
  }
  EXPECT_LT(prev, 1e-12);
}

TEST(GlmEstimateTest, ScaleConsistency) {
  std::mt19937_64 rng(10);
  Dataset data = RandomLinear(rng, 200, 4);
  Dataset scaled = data;
  scaled.y *= 3.5;
  EXPECT_LT(RelErr(*GlmEstimate(scaled, kLinear, Wide()),
                   3.5 * *GlmEstimate(data, kLinear, Wide())),
            1e-10);
  EXPECT_LT(RelErr(*HeavyEstimate(scaled, Wide(Regime::kHeavyTailed)),
                   3.5 * *HeavyEstimate(data, Wide(Regime::kHeavyTailed))),
            1e-10);
}

TEST(L4ShrinkTest, Examples) {
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(4);
  Eigen::VectorXd s = L4Shrink(ones, 1.0);
  // ||(1,1,1,1)||_4 = 4^{1/4} = sqrt(2).
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(s(j), std::sqrt(0.5), 1e-15);
  Eigen::VectorXd small = Eigen::Vector3d(0.1, -0.2, 0.3);
  EXPECT_EQ(L4Shrink(small, 1.0), small);
  EXPECT_EQ(L4Shrink(Eigen::VectorXd::Zero(3), 1.0), Eigen::VectorXd::Zero(3));
}

TEST(L4ShrinkTest, ContractHoldsForRandomVectors) {
  std::mt19937_64 rng(12);
  std::student_t_distribution<double> t(2.5);
  std::uniform_real_distribution<double> tau(0.01, 5.0);
  for (int rep = 0; rep < 2000; ++rep) {
    Eigen::VectorXd x(1 + rep % 6);
    for (int j = 0; j < x.size(); ++j) x(j) = t(rng);
    if (x.norm() == 0.0) continue;
    const double tau1 = tau(rng);
    Eigen::VectorXd s = L4Shrink(x, tau1);
    EXPECT_LE(std::pow(s.array().pow(4).sum(), 0.25), tau1 + 1e-12);
    EXPECT_GE(s.dot(x) / (s.norm() * x.norm()), 1.0 - 1e-12);
  }
}

TEST(HeavyEstimateTest, IdentityWhenThresholdsInactive) {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 10; ++rep) {
    Dataset data = RandomLinear(rng, 200, 3);
    EXPECT_LT(RelErr(*HeavyEstimate(data, Wide(Regime::kHeavyTailed)),
                     OracleLeastSquares(data.X, data.y)),
              1e-10);
  }
  Dataset id{Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(1.0, 2.0)};
  EstimatorSettings s = Wide(Regime::kHeavyTailed);
  s.tau1 = 2.0;
  s.tau2 = 10.0;
  Eigen::VectorXd theta = *HeavyEstimate(id, s);
  EXPECT_NEAR(theta(0), 1.0, 1e-15);
  EXPECT_NEAR(theta(1), 2.0, 1e-15);
}

TEST(HeavyEstimateTest, OutlierMatchesExplicitlyShrunkOracle) {
  std::mt19937_64 rng(14);
  Dataset data = RandomLinear(rng, 200, 3);
  data.X.row(17) << 400.0, -250.0, 90.0;
  EstimatorSettings s = Wide(Regime::kHeavyTailed);
  s.tau1 = 2.5;
  s.tau2 = 3.0;
  Eigen::MatrixXd shrunk = data.X;
  for (int i = 0; i < shrunk.rows(); ++i) {
    const double n4 = std::pow(shrunk.row(i).array().pow(4).sum(), 0.25);
    if (n4 > s.tau1) shrunk.row(i) *= s.tau1 / n4;
  }
  Eigen::VectorXd z = data.y.cwiseMax(-3.0).cwiseMin(3.0);
  EXPECT_LT(RelErr(*HeavyEstimate(data, s), OracleLeastSquares(shrunk, z)),
            1e-10);
}

TEST(ProjectBallTest, Examples) {
  Eigen::VectorXd inside = Eigen::Vector2d(0.3, 0.4);
  EXPECT_EQ(ProjectBall(inside, 1.0), inside);
  Eigen::VectorXd p = ProjectBall(Eigen::Vector2d(3.0, 4.0), 1.0);
  EXPECT_NEAR(p(0), 0.6, 1e-15);
  EXPECT_NEAR(p(1), 0.8, 1e-15);
}

TEST(ProjectBallTest, NonExpansive) {
  std::mt19937_64 rng(15);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int rep = 0; rep < 1000; ++rep) {
    Eigen::VectorXd w(3), v(3);
    for (int j = 0; j < 3; ++j) {
      w(j) = g(rng);
      v(j) = g(rng);
    }
    EXPECT_LE((ProjectBall(w, 1.0) - ProjectBall(v, 1.0)).norm(),
              (w - v).norm() + 1e-15);
    EXPECT_LE(ProjectBall(w, 1.0).norm(), 1.0 + 1e-15);
  }
}

TEST(SensitivityBoundTest, SubGaussianFormula) {
  SensitivityBound b = *SensitivityBoundSubGaussian(10000, 4, 1.0, 1.0);
  EXPECT_NEAR(b.delta_n, std::sqrt(4 * std::log(1e4) / 1e4), 1e-15);
  EXPECT_NEAR(b.delta_n, 0.0607, 5e-5);
  EXPECT_DOUBLE_EQ(b.Recompute(), b.delta_n);
  EXPECT_DOUBLE_EQ(SensitivityBoundSubGaussian(10000, 4, 2.0, 1.0)->delta_n,
                   2.0 * b.delta_n);
  double prev = HUGE_VAL;
  for (int64_t n = 3; n < 5000; n += 7) {
    const double v = SensitivityBoundSubGaussian(n, 3, 1.0, 1.0)->delta_n;
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_FALSE(SensitivityBoundSubGaussian(1, 3, 1.0, 1.0).ok());
}

TEST(SensitivityBoundTest, HeavyFormula) {
  SensitivityBound b = *SensitivityBoundHeavy(10000, 1, 1.0);
  EXPECT_NEAR(b.delta_n, std::pow(std::log(1e4) / 1e4, 0.125), 1e-15);
  EXPECT_NEAR(b.delta_n, 0.417, 5e-4);
  EXPECT_NEAR(SensitivityBoundHeavy(10000, 16, 1.0)->delta_n / b.delta_n, 8.0,
              1e-12);
  double prev = HUGE_VAL;
  for (int64_t n = 3; n < 5000; n += 7) {
    const double v = SensitivityBoundHeavy(n, 2, 1.0)->delta_n;
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(EmpiricalSensitivityTest, IdenticalPopulationGivesZero) {
  Dataset constant{Eigen::MatrixXd(4, 1), Eigen::VectorXd::Constant(4, 2.0)};
  constant.X.setConstant(1.5);
  ReplacementSampler same = [](RandomStream&) {
    return std::make_pair(Eigen::VectorXd::Constant(1, 1.5), 2.0);
  };
  EXPECT_EQ(*EmpiricalSensitivity(constant, kLinear, Wide(), same, 50, 1), 0.0);
}

TEST(EmpiricalSensitivityTest, MatchesExhaustiveEnumeration) {
  Dataset data{Eigen::MatrixXd(3, 1), Eigen::Vector3d(1.0, -0.5, 2.0)};
  data.X << 1.0, 2.0, 0.5;
  const double values[3][2] = {{1.0, 3.0}, {0.2, -1.0}, {1.5, 0.0}};
  ReplacementSampler sampler = [&](RandomStream& rng) {
    std::uniform_int_distribution<int> pick(0, 2);
    const int k = pick(rng);
    return std::make_pair(Eigen::VectorXd::Constant(1, values[k][0]),
                          values[k][1]);
  };
  EstimatorSettings s = Wide();
  const double theta0 = (*GlmEstimate(data, kLinear, s))(0);
  double exhaustive = 0.0;
  for (int row = 0; row < 3; ++row) {
    for (const auto& v : values) {
      Dataset nb = data;
      nb.X(row, 0) = v[0];
      nb.y(row) = v[1];
      const double sxx = nb.X.col(0).squaredNorm();
      const double sxy = nb.X.col(0).dot(nb.y);
      exhaustive = std::max(exhaustive, std::abs(sxy / sxx - theta0));
    }
  }
  EXPECT_NEAR(*EmpiricalSensitivity(data, kLinear, s, sampler, 500, 4),
              exhaustive, 1e-12);
}

TEST(EmpiricalSensitivityTest, DeterministicGivenSeed) {
  std::mt19937_64 rng(16);
  Dataset data = RandomLinear(rng, 100, 2);
  ReplacementSampler sampler = [](RandomStream& r) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::VectorXd x(2);
    x << g(r), g(r);
    return std::make_pair(x, g(r));
  };
  EXPECT_EQ(*EmpiricalSensitivity(data, kLinear, Wide(), sampler, 20, 99),
            *EmpiricalSensitivity(data, kLinear, Wide(), sampler, 20, 99));
  EXPECT_FALSE(EmpiricalSensitivity(data, kLinear, Wide(), sampler, 0, 99).ok());
}

TEST(DatasetTest, Validation) {
  Dataset bad{Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(1.0, 0.5)};
  EXPECT_FALSE(ValidateDataset(bad, ModelKind::Logistic()).ok());
  EXPECT_FALSE(ValidateDataset(bad, ModelKind::Poisson()).ok());
  EXPECT_TRUE(ValidateDataset(bad, *ModelKind::LinearGaussian(1.0)).ok());
  Dataset wide{Eigen::MatrixXd::Identity(1, 2), Eigen::VectorXd::Ones(1)};
  EXPECT_FALSE(ValidateDataset(wide, *ModelKind::LinearGaussian(1.0)).ok());
  EXPECT_FALSE(
      ValidateSettings(Wide(Regime::kHeavyTailed), ModelKind::Poisson()).ok());
}

}  // namespace
}  // namespace tglm
