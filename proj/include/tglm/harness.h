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

// Experiment runner: sweeps over n with repeats, the deviation-gain study,
// log-log rate fits and the tabular report.

#ifndef TGLM_HARNESS_H_
#define TGLM_HARNESS_H_

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "json.hpp"
#include "tglm/estimators.h"
#include "tglm/mechanism.h"
#include "tglm/population.h"
#include "tglm/privacy.h"

namespace tglm {

enum class Metric {
  kAccuracy,
  kSensitivity,
  kDeviationGain,
  kRationality,
  kBudget,
  kPrivacyRatio,
};

absl::string_view MetricName(Metric metric);
absl::StatusOr<Metric> ParseMetric(absl::string_view name);

// Mechanism knobs taken from CorollarySchedule at every n of the sweep.
struct ScheduleReference {
  double delta = 0.3;
  double c = 1.0;
  // See ScheduleInputs::epsilon.
  std::optional<double> epsilon;
  ScheduleConstants constants;
};

struct ExperimentConfig {
  // population.n is replaced by each sweep value.
  PopulationSpec population;
  // When set, overrides the fixed knobs in `mechanism` at every n.
  std::optional<ScheduleReference> schedule;
  // Fixed knobs; seed is ignored (cells derive their own).
  MechanismParams mechanism;
  // Replaces C0 by a pilot calibration at the smallest n of the sweep: the
  // pilot draws pilot_populations independent populations (each with its
  // own theta*) and pilot_trials replacements in each; a hundred draws put
  // the pilot max near the 99th percentile of the per-instance values.
  bool calibrate_c0 = false;
  int64_t pilot_trials = 200;
  int64_t pilot_populations = 100;
  // Report of agents above the participation threshold.
  MisreportRule fallback = MisreportRule::SignFlip();
  // Candidate deviations of the tagged agent; eta_hat is the largest paired
  // mean gain among them.
  std::vector<MisreportRule> deviants = {MisreportRule::SignFlip()};
  int64_t deviation_trials = 100;
  // Runs the mechanism a second time for each deviant arm instead of
  // evaluating the counterfactual payment; slower, same numbers.
  bool rerun_deviant_arm = false;
  int64_t sensitivity_trials = 200;
  int64_t privacy_trials = 10000;
  std::vector<int64_t> sweep;
  int64_t repeats = 1;
  // Common random numbers across the sweep: repeat r draws its population,
  // strategy and mechanism streams from a seed keyed on (master_seed, r,
  // arm) only, so populations at different n are prefixes of one another
  // and share noise directions. Off: every (n, repeat) cell is independent.
  bool paired_sweep = true;
  std::vector<Metric> metrics = {Metric::kAccuracy, Metric::kBudget,
                                 Metric::kRationality};
  std::string out_dir;
  std::string format = "csv";
  uint64_t master_seed = 0;
};

// repeats >= 1, sweep strictly increasing with every n >= 4, population and
// fixed mechanism knobs valid, format in {csv, json}.
absl::Status ValidateExperimentConfig(const ExperimentConfig& config);

bool Requested(const ExperimentConfig& config, Metric metric);

// C0 in force for the whole sweep: the configured (or schedule) constant, or
// the pilot calibration at the smallest n when calibrate_c0 is set.
struct C0Choice {
  double C0 = 1.0;
  bool calibrated = false;
  // Largest observed one-replacement change over all pilot populations;
  // NaN if none ran.
  double pilot_max = 0.0;
};
absl::StatusOr<C0Choice> ChooseC0(const ExperimentConfig& config);

// Knobs in force at size n (schedule or fixed). Without `c0` the configured
// constant is used as is.
absl::StatusOr<MechanismParams> ResolveParams(
    const ExperimentConfig& config, int64_t n,
    const std::optional<C0Choice>& c0 = std::nullopt);

// Full-data sensitivity bound in force at size n under the chosen C0.
absl::StatusOr<SensitivityBound> FormulaSensitivity(
    const ExperimentConfig& config, int64_t n, const C0Choice& c0);

// One (n, repeat) cell. Metrics that were not requested are NaN.
struct ExperimentRow {
  int64_t n = 0;
  int64_t repeat = 0;
  std::string model;
  std::string regime;
  // ||theta_bar_full - theta_star||^2.
  double mse = 0.0;
  double budget = 0.0;
  double budget_bound = 0.0;
  double truthful_frac = 0.0;
  double rationality_frac = 0.0;
  double eta_hat = 0.0;
  double delta_empirical = 0.0;
  double epsilon_total = 0.0;
  double gamma_total = 0.0;
  double theta_norm = 0.0;
  uint64_t seed = 0;
  bool failed = false;
  std::string error;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  // Normal-theory 95% interval on the slope (t quantile, n - 2 dof).
  double ci_low = 0.0;
  double ci_high = 0.0;
  int64_t points = 0;
};

// OLS of ln y on ln x. Needs >= 3 points and strictly positive values.
absl::StatusOr<RateFit> FitRate(const std::vector<double>& xs,
                                const std::vector<double>& ys);

struct SlopeSummary {
  std::string metric;
  RateFit fit;
  // Sweep points without a successful repeat are left out of the fit.
  int64_t missing_points = 0;
};

struct ExperimentReport {
  nlohmann::json config;
  std::vector<ExperimentRow> rows;
  std::vector<SlopeSummary> slopes;
  double C0 = 1.0;
  bool calibrated = false;
  std::optional<PrivacyRatioReport> privacy;
  std::string note;
};

// (n, mean of a row field over the successful repeats at n) in row order;
// NaN when every repeat at n failed.
std::vector<std::pair<int64_t, double>> MeanByN(const ExperimentReport& report,
                                                double ExperimentRow::*field);

// Runs every (n, repeat) cell on `threads` workers. Cell seeds are
// DeriveSeed(master_seed, {n, repeat, arm}), or DeriveSeed(master_seed,
// {kPaired, repeat, arm}) under paired_sweep; the seed column records the
// one used, which reproduces the cell on its own. The merge is ordered by
// (n, repeat), so the report does not depend on the thread count. A cell
// that hits a numerical error is kept and marked failed; only an invalid
// config (or a failed C0 pilot) fails the whole run.
absl::StatusOr<ExperimentReport> RunExperiment(const ExperimentConfig& config,
                                               int threads = 1);

struct DeviationGainEstimate {
  double eta_hat = 0.0;
  double std_error = 0.0;
  // Means of the two parts of eta_hat.
  double payment_component = 0.0;
  double privacy_component = 0.0;
  MisreportRule deviant_rule;
  int64_t trials = 0;
};

// Paired study for the tagged agent (index 0). Trial t draws a population of
// size n from DeriveSeed(seed, {t}), lets everyone apply the threshold
// strategy, then runs the mechanism twice on the same streams: once with the
// agent truthful and once with its report replaced by `rule`. The per-trial
// gain is the payment difference plus the privacy cost the agent saves by
// lying, bounded above by c_0 F(2 epsilon, gamma_n + 2 gamma_half) and
// charged only when the two reports differ. Population seeds do not involve
// n, so calls with different n and the same seed are paired as well (the
// smaller population is a prefix of the larger one).
absl::StatusOr<DeviationGainEstimate> EstimateDeviationGain(
    const ExperimentConfig& config, int64_t n, const MisreportRule& rule,
    int64_t trials, uint64_t seed,
    const std::optional<C0Choice>& c0 = std::nullopt);

// Same trials, several candidate deviations; entry k belongs to rules[k].
absl::StatusOr<std::vector<DeviationGainEstimate>> EstimateDeviationGains(
    const ExperimentConfig& config, int64_t n,
    const std::vector<MisreportRule>& rules, int64_t trials, uint64_t seed,
    const std::optional<C0Choice>& c0 = std::nullopt);

// The entry of EstimateDeviationGains with the largest eta_hat (first on
// ties): a plug-in estimate of the supremum gain over the candidate family.
absl::StatusOr<DeviationGainEstimate> EstimateMaxDeviationGain(
    const ExperimentConfig& config, int64_t n,
    const std::vector<MisreportRule>& rules, int64_t trials, uint64_t seed,
    const std::optional<C0Choice>& c0 = std::nullopt);

// Candidate deviations per family: sign flip, constant reports across the
// response range and additive noise (logistic responses admit only the
// flip).
std::vector<MisreportRule> DeviationFamily(const ModelKind& model);

// Neighboring pair for the privacy check at size n: a generated population
// and a copy whose first row is replaced by an extreme one (covariate of
// norm tau1 along the original, response -sign(y_0) tau2), the kind of
// neighbor that drives the sensitivity bound.
absl::StatusOr<std::pair<Dataset, Dataset>> NeighborPair(
    const ExperimentConfig& config, int64_t n, uint64_t seed);

// Runs the ratio check on the mechanism's full release for the pair.
absl::StatusOr<PrivacyRatioReport> MechanismPrivacyCheck(
    const ExperimentConfig& config, const Dataset& d, const Dataset& d_prime,
    const PrivacyRatioOptions& options, uint64_t seed,
    const std::optional<C0Choice>& c0 = std::nullopt);

}  // namespace tglm

#endif  // TGLM_HARNESS_H_
