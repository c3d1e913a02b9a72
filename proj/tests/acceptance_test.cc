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

// Acceptance suite: one PASS/FAIL line per criterion at fixed tolerances and
// seeds. Exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "Eigen/Dense"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "tglm/estimators.h"
#include "tglm/harness.h"
#include "tglm/links.h"
#include "tglm/mechanism.h"
#include "tglm/population.h"
#include "tglm/privacy.h"
#include "tglm/random.h"

namespace tglm {
namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome()> run;
};

int Threads() {
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string Err(const absl::Status& s) {
  return absl::StrCat("error: ", s.message());
}

// Budget rows collected by the sweeps of criteria 5 and 7 for criterion 8.
struct BudgetLedger {
  int64_t rows = 0;
  int64_t within = 0;
  std::vector<std::pair<int64_t, double>> linear_schedule_means;
  bool have_schedule_sweep = false;
};
BudgetLedger& Budgets() {
  static BudgetLedger ledger;
  return ledger;
}

void RecordBudgets(const ExperimentReport& report) {
  for (const ExperimentRow& row : report.rows) {
    ++Budgets().rows;
    Budgets().within += !row.failed && row.budget <= row.budget_bound;
  }
}

ExperimentConfig LinearScheduleConfig() {
  ExperimentConfig c;
  c.population.d = 3;
  c.population.covariates = CovariateSpec::Isotropic(1.0);
  c.population.model = *ModelKind::LinearGaussian(0.5);
  c.population.tau_theta = 2.0;
  c.schedule = ScheduleReference{};
  c.schedule->delta = 0.3;
  c.calibrate_c0 = true;
  c.pilot_trials = 200;
  c.sweep = {500, 2000, 8000, 32000};
  c.repeats = 20;
  c.metrics = {Metric::kAccuracy, Metric::kBudget};
  c.master_seed = 2026;
  return c;
}

// Student t covariates with five degrees of freedom; epsilon is held at 1
// so the sweep traces the estimator's own rate.
ExperimentConfig HeavyConfig() {
  ExperimentConfig c = LinearScheduleConfig();
  c.population.covariates = CovariateSpec::StudentT(5.0, Eigen::MatrixXd());
  c.population.tau_theta = 1.0;
  c.mechanism.settings.regime = Regime::kHeavyTailed;
  c.schedule->delta = 0.12;
  c.schedule->epsilon = 1.0;
  return c;
}

ExperimentConfig GlmPresetConfig(const char* model) {
  ExperimentConfig c;
  c.population.d = 3;
  c.population.model = *ModelKind::FromName(model, 0.5);
  c.population.tau_theta = 1.0;
  c.schedule = ScheduleReference{};
  c.schedule->delta = 0.3;
  c.mechanism.posterior_samples = 10000;
  return c;
}

Outcome NoiseMoments() {
  struct Case {
    int64_t d;
    double delta, epsilon;
  };
  const Case cases[] = {{3, 0.05, 0.2}, {5, 0.1, 0.5}, {10, 0.02, 1.0}};
  constexpr int64_t kSamples = 1000000;
  Outcome out{true, ""};
  for (const Case& c : cases) {
    RandomStream rng(DeriveSeed(101, {static_cast<uint64_t>(c.d)}));
    double m1 = 0.0, m2 = 0.0;
    for (int64_t s = 0; s < kSamples; ++s) {
      const double r = SampleNormExponential(c.d, c.delta, c.epsilon, rng).magnitude;
      m1 += r;
      m2 += r * r;
    }
    m1 /= kSamples;
    m2 /= kSamples;
    const double scale = c.delta / c.epsilon;
    const double e1 = std::abs(m1 / (c.d * scale) - 1.0);
    const double e2 = std::abs(m2 / (c.d * (c.d + 1) * scale * scale) - 1.0);
    out.passed &= e1 <= 0.02 && e2 <= 0.03;
    absl::StrAppendFormat(&out.detail, "d=%d rel.err E|v| %.4f E|v|^2 %.4f; ",
                          c.d, e1, e2);
  }
  return out;
}

Outcome OracleEquivalence() {
  const LinkBundle bundle(*ModelKind::LinearGaussian(1.0));
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const int64_t n = 200, d = 1 + k % 5;
    RandomStream rng(DeriveSeed(202, {static_cast<uint64_t>(k)}));
    std::normal_distribution<double> normal;
    Dataset data{Eigen::MatrixXd(n, d), Eigen::VectorXd(n)};
    for (int64_t i = 0; i < n; ++i) {
      for (int64_t j = 0; j < d; ++j) data.X(i, j) = normal(rng);
      data.y(i) = 3.0 * normal(rng);
    }
    EstimatorSettings s;
    s.polytope = PolytopeSpec::RealLine();
    s.tau2 = data.y.cwiseAbs().maxCoeff() + 1.0;
    absl::StatusOr<Eigen::VectorXd> got = GlmEstimate(data, bundle, s);
    if (!got.ok()) return {false, Err(got.status())};
    const Eigen::MatrixXd gram = data.X.transpose() * data.X;
    const Eigen::VectorXd oracle =
        gram.ldlt().solve(data.X.transpose() * data.y);
    worst = std::max(worst, (*got - oracle).norm() / oracle.norm());
  }
  return {worst <= 1e-10,
          absl::StrFormat("max relative error %.3g over 50 instances", worst)};
}

Outcome BrierOptimality() {
  constexpr int64_t kGrid = 10000;
  const double step = 1.0 / kGrid;
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double p = k / 99.0;
    double best_q = 0.0, best = -INFINITY;
    for (int64_t g = 0; g <= kGrid; ++g) {
      const double q = g * step;
      const double b = BrierPayment(0.5, 2.0, p, q);
      if (b > best) {
        best = b;
        best_q = q;
      }
    }
    worst = std::max(worst, std::abs(best_q - p));
  }
  return {worst <= step / 2 + 1e-12,
          absl::StrFormat("max |argmax q - p| = %.3g (grid step %.0e)", worst,
                          step)};
}

// Empirical one-replacement sensitivity on 100 fresh instances against the
// bound with C0 calibrated by an independent pilot.
Outcome SensitivityCase(ExperimentConfig config, const char* label,
                        std::string* detail) {
  constexpr int64_t kN = 2000;
  config.sweep = {kN};
  absl::StatusOr<C0Choice> c0 = ChooseC0(config);
  if (!c0.ok()) return {false, Err(c0.status())};
  absl::StatusOr<SensitivityBound> bound = FormulaSensitivity(config, kN, *c0);
  if (!bound.ok()) return {false, Err(bound.status())};
  absl::StatusOr<MechanismParams> params = ResolveParams(config, kN, *c0);
  if (!params.ok()) return {false, Err(params.status())};
  PopulationSpec spec = config.population;
  spec.n = kN;
  const LinkBundle bundle(spec.model);
  int covered = 0;
  double worst = 0.0;
  for (uint64_t k = 0; k < 100; ++k) {
    absl::StatusOr<Population> pop =
        GeneratePopulation(spec, DeriveSeed(404, {k}));
    if (!pop.ok()) return {false, Err(pop.status())};
    absl::StatusOr<double> emp = EmpiricalSensitivity(
        pop->TrueData(), bundle, params->settings,
        MakeReplacementSampler(spec, pop->theta_star), 200,
        DeriveSeed(404, {k, 1}));
    if (!emp.ok()) return {false, Err(emp.status())};
    covered += *emp <= bound->delta_n;
    worst = std::max(worst, *emp / bound->delta_n);
  }
  absl::StrAppendFormat(detail, "%s %d/100 (C0 %.4g, max ratio %.3f); ",
                        label, covered, c0->C0, worst);
  return {covered >= 99, ""};
}

Outcome SensitivityDominance() {
  Outcome out;
  const bool sub = SensitivityCase(LinearScheduleConfig(), "subgaussian",
                                   &out.detail).passed;
  const bool heavy =
      SensitivityCase(HeavyConfig(), "heavy", &out.detail).passed;
  out.passed = sub && heavy;
  return out;
}

bool StrictlyDecreasing(const std::vector<std::pair<int64_t, double>>& m) {
  for (size_t k = 1; k < m.size(); ++k) {
    if (!(m[k].second < m[k - 1].second)) return false;
  }
  return !m.empty();
}

std::string Means(const std::vector<std::pair<int64_t, double>>& m) {
  std::string s;
  for (const auto& [n, v] : m) absl::StrAppendFormat(&s, "%d:%.4g ", n, v);
  return s;
}

const SlopeSummary* FindSlope(const ExperimentReport& r, const char* metric) {
  for (const SlopeSummary& s : r.slopes) {
    if (s.metric == metric) return &s;
  }
  return nullptr;
}

Outcome AccuracyRate() {
  absl::StatusOr<ExperimentReport> lin =
      RunExperiment(LinearScheduleConfig(), Threads());
  if (!lin.ok()) return {false, Err(lin.status())};
  RecordBudgets(*lin);
  Budgets().linear_schedule_means = MeanByN(*lin, &ExperimentRow::budget);
  Budgets().have_schedule_sweep = true;
  const auto lin_mse = MeanByN(*lin, &ExperimentRow::mse);
  const SlopeSummary* lin_slope = FindSlope(*lin, "mse");

  absl::StatusOr<ExperimentReport> heavy =
      RunExperiment(HeavyConfig(), Threads());
  if (!heavy.ok()) return {false, Err(heavy.status())};
  RecordBudgets(*heavy);
  const SlopeSummary* heavy_slope = FindSlope(*heavy, "mse");
  if (lin_slope == nullptr || heavy_slope == nullptr) {
    return {false, "rate fit missing"};
  }
  const bool lin_ok = StrictlyDecreasing(lin_mse) &&
                      lin_slope->fit.points == 4 && lin_slope->fit.slope < -0.15;
  const bool heavy_ok = heavy_slope->fit.points == 4 &&
                        heavy_slope->fit.slope >= -0.45 &&
                        heavy_slope->fit.slope <= -0.10;
  return {lin_ok && heavy_ok,
          absl::StrFormat("linear mse %sslope %.3f (< -0.15); heavy slope "
                          "%.3f (in [-0.45, -0.10])",
                          Means(lin_mse), lin_slope->fit.slope,
                          heavy_slope->fit.slope)};
}

Outcome TruthfulnessTrend() {
  Outcome out{true, ""};
  for (const char* model : {"linear", "logistic", "poisson"}) {
    const ExperimentConfig c = GlmPresetConfig(model);
    const std::vector<MisreportRule> family =
        DeviationFamily(c.population.model);
    int wins = 0;
    for (uint64_t k = 0; k < 100; ++k) {
      // Same seed at both sizes: the small population is a prefix of the
      // large one.
      const uint64_t seed = DeriveSeed(7, {k});
      absl::StatusOr<DeviationGainEstimate> small =
          EstimateMaxDeviationGain(c, 400, family, 100, seed);
      absl::StatusOr<DeviationGainEstimate> large =
          EstimateMaxDeviationGain(c, 3200, family, 100, seed);
      if (!small.ok()) return {false, Err(small.status())};
      if (!large.ok()) return {false, Err(large.status())};
      wins += large->eta_hat < small->eta_hat;
    }
    out.passed &= wins >= 90;
    absl::StrAppendFormat(&out.detail, "%s %d/100; ", model, wins);
  }
  return out;
}

Outcome Rationality() {
  Outcome out{true, ""};
  for (const char* model : {"linear", "logistic", "poisson"}) {
    ExperimentConfig c = GlmPresetConfig(model);
    c.sweep = {1000};
    c.repeats = 100;
    c.metrics = {Metric::kRationality, Metric::kBudget};
    c.master_seed = 707;
    absl::StatusOr<ExperimentReport> r = RunExperiment(c, Threads());
    if (!r.ok()) return {false, Err(r.status())};
    RecordBudgets(*r);
    int full = 0;
    for (const ExperimentRow& row : r->rows) {
      full += !row.failed && row.rationality_frac == 1.0;
    }
    out.passed &= full >= 99;
    absl::StrAppendFormat(&out.detail, "%s %d/100; ", model, full);
  }
  return out;
}

Outcome BudgetBoundCheck() {
  const BudgetLedger& b = Budgets();
  if (!b.have_schedule_sweep || b.rows == 0) {
    return {false, "no budget rows recorded"};
  }
  const bool decreasing = StrictlyDecreasing(b.linear_schedule_means);
  return {b.within == b.rows && decreasing,
          absl::StrFormat("%d/%d runs within n(a1 + a2(M + M^2)); linear "
                          "schedule mean budget %s",
                          b.within, b.rows, Means(b.linear_schedule_means))};
}

Outcome PrivacyFalsification() {
  ExperimentConfig c;
  c.population.d = 1;
  c.population.model = *ModelKind::LinearGaussian(0.5);
  c.population.theta_star = Eigen::VectorXd::Constant(1, 0.5);
  // A radius the release never reaches, so the histogram has no atoms.
  c.population.tau_theta = 50.0;
  c.mechanism.settings.tau_theta = 50.0;
  c.mechanism.settings.tau1 = 3.0;
  c.mechanism.settings.tau2 = 3.0;
  c.mechanism.epsilon = 0.5;
  c.mechanism.gamma_n = 0.01;
  c.mechanism.gamma_half = 0.02;
  constexpr int64_t kN = 60;
  c.sweep = {kN};
  absl::StatusOr<std::pair<Dataset, Dataset>> pair = NeighborPair(c, kN, 909);
  if (!pair.ok()) return {false, Err(pair.status())};
  PrivacyRatioOptions opts;
  opts.trials = 100000;
  opts.bins = 100;
  opts.log_bound = 2.0 * c.mechanism.epsilon;
  absl::StatusOr<PrivacyRatioReport> honest =
      MechanismPrivacyCheck(c, pair->first, pair->second, opts, 910);
  if (!honest.ok()) return {false, Err(honest.status())};
  c.mechanism.noise_multiplier = 0.05;
  absl::StatusOr<PrivacyRatioReport> broken =
      MechanismPrivacyCheck(c, pair->first, pair->second, opts, 910);
  if (!broken.ok()) return {false, Err(broken.status())};
  return {honest->passed && !broken->passed,
          absl::StrFormat("honest %d/%d bins consistent (max |log ratio| "
                          "%.3f); corrupted scale %d/%d (%s)",
                          honest->consistent, honest->occupied,
                          honest->max_abs_log_ratio, broken->consistent,
                          broken->occupied,
                          broken->passed ? "not detected" : "refuted")};
}

Outcome ThresholdBound() {
  const double alphas[] = {0.01, 0.05, 0.1, 0.2};
  const double betas[] = {0.01, 0.05, 0.1, 0.2, 0.3};
  const double lambdas[] = {0.5, 1.0, 2.0, 4.0};
  int ok = 0, total = 0;
  double worst = 0.0;
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 5; ++b) {
      const double lambda = lambdas[(a + b) % 4];
      RandomStream rng(DeriveSeed(1010, {static_cast<uint64_t>(a),
                                         static_cast<uint64_t>(b)}));
      absl::StatusOr<TauEstimate> mc =
          TauAlphaBetaMonteCarlo(alphas[a], betas[b], lambda, 500, 2000, rng);
      absl::StatusOr<double> bound =
          TauAlphaBetaBound(alphas[a], betas[b], lambda);
      if (!mc.ok()) return {false, Err(mc.status())};
      if (!bound.ok()) return {false, Err(bound.status())};
      ++total;
      ok += mc->tau <= *bound;
      worst = std::max(worst, mc->tau / *bound);
    }
  }
  return {ok == 20 && total == 20,
          absl::StrFormat("%d/%d triples below the bound (max ratio %.3f)", ok,
                          total, worst)};
}

// With arguments, runs only the listed criterion ids.
int Main(int argc, char** argv) {
  std::set<int> only;
  for (int k = 1; k < argc; ++k) only.insert(std::atoi(argv[k]));
  const std::vector<Criterion> criteria = {
      {1, "noise moments", 30, NoiseMoments},
      {2, "oracle equivalence", 5, OracleEquivalence},
      {3, "Brier optimality", 1, BrierOptimality},
      {4, "sensitivity dominance", 300, SensitivityDominance},
      {5, "accuracy rate shape", 600, AccuracyRate},
      {6, "truthfulness trend", 600, TruthfulnessTrend},
      {7, "rationality", 120, Rationality},
      // Runs on the sweeps already made for criteria 5 and 7.
      {8, "budget bound", 600, BudgetBoundCheck},
      {9, "privacy falsification", 300, PrivacyFalsification},
      {10, "threshold bound", 60, ThresholdBound},
  };
  int failures = 0, ran = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out = c.run();
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
    const bool in_time = secs <= c.limit_seconds;
    const bool passed = out.passed && in_time;
    failures += !passed;
    while (!out.detail.empty() &&
           (out.detail.back() == ' ' || out.detail.back() == ';')) {
      out.detail.pop_back();
    }
    std::printf("%s criterion %d (%s): %s [%.1f s, limit %.0f s%s]\n",
                passed ? "PASS" : "FAIL", c.id, c.name, out.detail.c_str(),
                secs, c.limit_seconds, in_time ? "" : ", exceeded");
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", ran - failures, ran);
  return failures == 0 ? 0 : 1;
}

}  // namespace
}  // namespace tglm

int main(int argc, char** argv) { return tglm::Main(argc, argv); }
