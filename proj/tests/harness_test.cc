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

#include "tglm/harness.h"

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "absl/strings/str_split.h"
#include "gtest/gtest.h"
#include "tglm/io.h"
#include "tglm/status.h"

namespace tglm {
namespace {

ExperimentConfig SmallLinear() {
  ExperimentConfig c;
  c.population.d = 2;
  c.population.model = *ModelKind::LinearGaussian(0.5);
  c.schedule = ScheduleReference{};
  c.sweep = {200, 400, 800};
  c.repeats = 3;
  c.master_seed = 11;
  c.metrics = {Metric::kAccuracy, Metric::kBudget, Metric::kRationality};
  return c;
}

TEST(FitRateTest, ExactPowerLaw) {
  std::vector<double> xs = {10, 100, 1000, 10000}, ys;
  for (double x : xs) ys.push_back(std::pow(x, -0.5));
  absl::StatusOr<RateFit> fit = FitRate(xs, ys);
  ASSERT_TRUE(fit.ok());
  EXPECT_NEAR(fit->slope, -0.5, 1e-10);
  EXPECT_NEAR(fit->ci_low, -0.5, 1e-8);
  EXPECT_NEAR(fit->ci_high, -0.5, 1e-8);
  EXPECT_EQ(fit->points, 4);
}

TEST(FitRateTest, ConstantAndRejections) {
  absl::StatusOr<RateFit> flat = FitRate({1, 2, 4}, {3, 3, 3});
  ASSERT_TRUE(flat.ok());
  EXPECT_NEAR(flat->slope, 0.0, 1e-15);
  EXPECT_FALSE(FitRate({1, 2, 4}, {3, 0, 3}).ok());
  EXPECT_FALSE(FitRate({1, 2, 4}, {3, -1, 3}).ok());
  EXPECT_FALSE(FitRate({1, 2}, {3, 3}).ok());
}

TEST(FitRateTest, IntervalCoversNoisySlope) {
  // ln y = -0.3 ln x + small deterministic wiggle.
  std::vector<double> xs, ys;
  for (int k = 0; k < 6; ++k) {
    xs.push_back(std::pow(4.0, k + 3));
    ys.push_back(std::pow(xs.back(), -0.3) * std::exp(0.05 * ((k % 2) - 0.5)));
  }
  RateFit fit = *FitRate(xs, ys);
  EXPECT_LT(fit.ci_low, -0.3);
  EXPECT_GT(fit.ci_high, -0.3);
}

TEST(HarnessTest, SingleCellHasOneRow) {
  ExperimentConfig c = SmallLinear();
  c.sweep = {200};
  c.repeats = 1;
  absl::StatusOr<ExperimentReport> r = RunExperiment(c);
  ASSERT_TRUE(r.ok()) << r.status();
  ASSERT_EQ(r->rows.size(), 1u);
  EXPECT_FALSE(r->rows[0].failed) << r->rows[0].error;
  EXPECT_EQ(r->rows[0].n, 200);
}

TEST(HarnessTest, DeterministicAcrossRunsAndThreads) {
  ExperimentConfig c = SmallLinear();
  c.metrics.push_back(Metric::kDeviationGain);
  c.metrics.push_back(Metric::kSensitivity);
  c.deviation_trials = 5;
  c.sensitivity_trials = 5;
  const std::string a = ReportToCsv(*RunExperiment(c, 1));
  const std::string b = ReportToCsv(*RunExperiment(c, 1));
  const std::string d = ReportToCsv(*RunExperiment(c, 4));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, d);
  c.master_seed = 12;
  EXPECT_NE(a, ReportToCsv(*RunExperiment(c, 1)));
}

TEST(HarnessTest, RowInvariants) {
  ExperimentConfig c = SmallLinear();
  ExperimentReport r = *RunExperiment(c, 2);
  ASSERT_EQ(r.rows.size(), 9u);
  for (size_t k = 0; k < r.rows.size(); ++k) {
    const ExperimentRow& row = r.rows[k];
    EXPECT_EQ(row.n, c.sweep[k / 3]);
    EXPECT_EQ(row.repeat, static_cast<int64_t>(k % 3));
    ASSERT_FALSE(row.failed) << row.error;
    EXPECT_LE(row.budget, row.budget_bound);
    EXPECT_LE(row.theta_norm, c.population.tau_theta + 1e-12);
    EXPECT_EQ(row.rationality_frac, 1.0);
    EXPECT_TRUE(std::isnan(row.eta_hat));
    EXPECT_EQ(row.model, "linear");
    EXPECT_EQ(row.regime, "subgaussian");
  }
  ASSERT_EQ(r.slopes.size(), 2u);
  EXPECT_EQ(r.slopes[0].metric, "mse");
  EXPECT_EQ(r.slopes[0].fit.points, 3);
}

TEST(HarnessTest, PairedSweepSharesStreamsAcrossN) {
  ExperimentConfig c = SmallLinear();
  ExperimentReport paired = *RunExperiment(c);
  EXPECT_EQ(paired.rows[0].seed, paired.rows[3].seed);
  EXPECT_NE(paired.rows[0].seed, paired.rows[1].seed);
  c.paired_sweep = false;
  ExperimentReport independent = *RunExperiment(c);
  EXPECT_NE(independent.rows[0].seed, independent.rows[3].seed);
  EXPECT_EQ(independent.rows[0].seed, DeriveSeed(11, {200, 0, 0}));
}

TEST(HarnessTest, FailedCellsAreRecorded) {
  // Halves of 2 or 3 agents cannot fit 4 coefficients.
  ExperimentConfig c = SmallLinear();
  c.population.d = 4;
  c.sweep = {4, 5, 6};
  absl::StatusOr<ExperimentReport> r = RunExperiment(c);
  ASSERT_TRUE(r.ok()) << r.status();
  ASSERT_EQ(r->rows.size(), 9u);
  for (const ExperimentRow& row : r->rows) {
    EXPECT_TRUE(row.failed);
    EXPECT_NE(row.error.find("PartitionTooSmall"), std::string::npos)
        << row.error;
  }
  EXPECT_TRUE(r->slopes.empty());
  EXPECT_NE(r->note.find("9 of 9 cells failed"), std::string::npos);
  const std::string csv = ReportToCsv(*r);
  EXPECT_NE(csv.find(",nan,"), std::string::npos);
}

TEST(HarnessTest, InvalidConfigsRejected) {
  ExperimentConfig c = SmallLinear();
  c.repeats = 0;
  EXPECT_FALSE(RunExperiment(c).ok());
  c = SmallLinear();
  c.sweep = {400, 200};
  EXPECT_FALSE(RunExperiment(c).ok());
  c = SmallLinear();
  c.format = "xml";
  EXPECT_FALSE(RunExperiment(c).ok());
}

TEST(HarnessTest, CalibratedC0IsUsedAndFlagged) {
  ExperimentConfig c = SmallLinear();
  c.calibrate_c0 = true;
  c.pilot_trials = 50;
  ExperimentReport r = *RunExperiment(c);
  EXPECT_TRUE(r.calibrated);
  EXPECT_GT(r.C0, 0.0);
  EXPECT_LT(r.C0, 1.0);
  EXPECT_NE(r.note.find("calibrated"), std::string::npos);
  absl::StatusOr<C0Choice> choice = ChooseC0(c);
  ASSERT_TRUE(choice.ok());
  EXPECT_EQ(choice->C0, r.C0);
  MechanismParams p = *ResolveParams(c, 400, *choice);
  EXPECT_EQ(p.C0, r.C0);
  EXPECT_TRUE(p.calibrated);
}

TEST(HarnessTest, MeanByN) {
  ExperimentReport r;
  for (int64_t n : {10, 20}) {
    for (int k = 0; k < 2; ++k) {
      ExperimentRow row;
      row.n = n;
      row.mse = n + k;
      row.failed = n == 20 && k == 1;
      r.rows.push_back(row);
    }
  }
  auto m = MeanByN(r, &ExperimentRow::mse);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].second, 10.5);
  EXPECT_EQ(m[1].second, 20.0);
}

TEST(DeviationTest, TruthfulDeviationIsExactlyZero) {
  ExperimentConfig c = SmallLinear();
  absl::StatusOr<DeviationGainEstimate> eta =
      EstimateDeviationGain(c, 300, MisreportRule::Truthful(), 100, 5);
  ASSERT_TRUE(eta.ok()) << eta.status();
  EXPECT_EQ(eta->eta_hat, 0.0);
  EXPECT_EQ(eta->std_error, 0.0);
  EXPECT_EQ(eta->trials, 100);
}

TEST(DeviationTest, ZeroPaymentScaleLeavesOnlyPrivacyTerm) {
  ExperimentConfig c = SmallLinear();
  c.schedule->constants.a2 = 0.0;
  DeviationGainEstimate eta =
      *EstimateDeviationGain(c, 300, MisreportRule::SignFlip(), 100, 5);
  EXPECT_NEAR(eta.payment_component, 0.0, 1e-15);
  EXPECT_GT(eta.privacy_component, 0.0);
  EXPECT_DOUBLE_EQ(eta.eta_hat, eta.privacy_component);
}

TEST(DeviationTest, CounterfactualPaymentMatchesRerun) {
  for (const char* model : {"linear", "logistic", "poisson"}) {
    ExperimentConfig c = SmallLinear();
    c.population.model = *ModelKind::FromName(model, 0.5);
    c.mechanism.posterior_samples = 2000;
    const std::vector<MisreportRule> family =
        DeviationFamily(c.population.model);
    auto fast = EstimateDeviationGains(c, 200, family, 20, 3);
    c.rerun_deviant_arm = true;
    auto slow = EstimateDeviationGains(c, 200, family, 20, 3);
    ASSERT_TRUE(fast.ok() && slow.ok()) << model;
    for (size_t k = 0; k < family.size(); ++k) {
      EXPECT_EQ((*fast)[k].eta_hat, (*slow)[k].eta_hat) << model << " " << k;
      EXPECT_EQ((*fast)[k].std_error, (*slow)[k].std_error);
    }
  }
}

TEST(DeviationTest, MaxPicksLargestCandidate) {
  ExperimentConfig c = SmallLinear();
  const std::vector<MisreportRule> family = DeviationFamily(c.population.model);
  auto all = *EstimateDeviationGains(c, 200, family, 20, 9);
  DeviationGainEstimate best =
      *EstimateMaxDeviationGain(c, 200, family, 20, 9);
  for (const auto& e : all) EXPECT_LE(e.eta_hat, best.eta_hat);
  EXPECT_FALSE(EstimateMaxDeviationGain(c, 200, {}, 20, 9).ok());
}

TEST(PrivacyCheckTest, NeighborsDifferInFirstRowOnly) {
  ExperimentConfig c = SmallLinear();
  c.population.d = 1;
  auto pair = *NeighborPair(c, 50, 4);
  EXPECT_EQ(pair.first.X.bottomRows(49), pair.second.X.bottomRows(49));
  EXPECT_EQ(pair.first.y.tail(49), pair.second.y.tail(49));
  EXPECT_NE(pair.first.y(0), pair.second.y(0));
  MechanismParams p = *ResolveParams(c, 50);
  EXPECT_NEAR(std::abs(pair.second.X(0, 0)), p.settings.tau1, 1e-12);
  EXPECT_NEAR(std::abs(pair.second.y(0)), p.settings.tau2, 1e-12);
}

TEST(PrivacyCheckTest, HonestNoisePassesCorruptedScaleFails) {
  ExperimentConfig c;
  c.population.d = 1;
  c.population.model = *ModelKind::LinearGaussian(0.5);
  c.mechanism.epsilon = 0.5;
  c.mechanism.settings.tau1 = 3.0;
  c.mechanism.settings.tau2 = 3.0;
  // Wide enough that the ball projection leaves no point masses.
  c.population.tau_theta = 1.0;
  c.mechanism.settings.tau_theta = 50.0;
  c.sweep = {60};
  auto pair = *NeighborPair(c, 60, 2);
  PrivacyRatioOptions opts;
  opts.trials = 20000;
  opts.bins = 20;
  opts.log_bound = 2 * 0.5;
  PrivacyRatioReport honest = *MechanismPrivacyCheck(c, pair.first,
                                                     pair.second, opts, 8);
  EXPECT_TRUE(honest.passed) << honest.fraction_consistent;
  c.mechanism.noise_multiplier = 0.05;
  PrivacyRatioReport broken = *MechanismPrivacyCheck(c, pair.first,
                                                     pair.second, opts, 8);
  EXPECT_FALSE(broken.passed) << broken.fraction_consistent;
}

}  // namespace
}  // namespace tglm
