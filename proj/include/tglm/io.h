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

// File formats: the JSON experiment config, report tables, dataset CSV with
// the population sidecar, mechanism outcomes, payments and the noise audit.

#ifndef TGLM_IO_H_
#define TGLM_IO_H_

#include <string>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "json.hpp"
#include "tglm/estimators.h"
#include "tglm/harness.h"
#include "tglm/links.h"
#include "tglm/mechanism.h"
#include "tglm/population.h"

namespace tglm {

// Report columns, in order.
inline constexpr absl::string_view kReportColumns[] = {
    "n",           "repeat",          "model",         "regime",
    "mse",         "budget",          "truthful_frac", "rationality_frac",
    "eta_hat",     "delta_empirical", "epsilon_total", "gamma_total",
    "seed"};

// Finite values as numbers, NaN as null, infinities as "inf" / "-inf".
nlohmann::json DoubleToJson(double value);
absl::StatusOr<double> DoubleFromJson(const nlohmann::json& j);

nlohmann::json PolytopeToJson(const PolytopeSpec& spec);
absl::StatusOr<PolytopeSpec> PolytopeFromJson(const nlohmann::json& j);

nlohmann::json MisreportRuleToJson(const MisreportRule& rule);
absl::StatusOr<MisreportRule> MisreportRuleFromJson(const nlohmann::json& j);

// Config keys (all optional except sweep):
//   model, noise_std, polytope {lower, upper}, population {...},
//   mechanism {...}, schedule {delta, c, epsilon, constants {...}},
//   calibrate_c0, pilot_trials, pilot_populations, fallback,
//   deviants ([rules] or "family"),
//   rerun_deviant_arm, deviation_trials, sensitivity_trials,
//   privacy_trials, sweep, repeats, paired_sweep, metrics,
//   output {dir, format},
//   master_seed.
// Unknown keys are rejected so typos do not silently fall back to defaults.
// Every knob of a resolved parameterization, including the estimator
// settings (response set, thresholds, radius).
nlohmann::json MechanismParamsToJson(const MechanismParams& params);

nlohmann::json PrivacyReportToJson(const PrivacyRatioReport& report);
nlohmann::json DeviationGainToJson(const DeviationGainEstimate& estimate);

nlohmann::json ConfigToJson(const ExperimentConfig& config);
absl::StatusOr<ExperimentConfig> ConfigFromJson(const nlohmann::json& j);
// Config files may carry // and /* */ comments.
absl::StatusOr<ExperimentConfig> LoadConfig(const std::string& path);

nlohmann::json ReportToJson(const ExperimentReport& report);
absl::StatusOr<ExperimentReport> ReportFromJson(const nlohmann::json& j);

// Header plus one line per row; doubles in shortest round-trip form, "nan"
// for metrics that were not measured or cells that failed.
std::string ReportToCsv(const ExperimentReport& report);

// Writes <dir>/report.csv or <dir>/report.json and returns the path.
absl::StatusOr<std::string> EmitReport(const ExperimentReport& report,
                                       absl::string_view format,
                                       const std::string& dir);

absl::Status WriteFile(const std::string& path, absl::string_view contents);
absl::StatusOr<std::string> ReadFile(const std::string& path);

// Header x1..xd,y.
std::string DatasetToCsv(const Dataset& data);
absl::StatusOr<Dataset> DatasetFromCsv(absl::string_view text);

// <path> gets the dataset CSV, <path>.json the sidecar
// {theta_star, lambda, model, noise_std, seed, costs}.
absl::Status WritePopulation(const Population& population,
                             const std::string& path);
absl::StatusOr<Population> ReadPopulation(const std::string& path);

nlohmann::json OutcomeToJson(const MechanismOutcome& outcome);

// agent_index,group,payment,cost,utility with utility = payment -
// cost * unit_cost.
std::string PaymentsToCsv(const MechanismOutcome& outcome,
                          const Eigen::VectorXd& costs, double unit_cost);

enum class ReportMode {
  kResearch,
  // Noise values are privacy-sensitive; audit logging is refused.
  kRelease,
};

// Appends one JSON line {which, seed, magnitude} per release.
absl::Status AppendNoiseAudit(const MechanismOutcome& outcome,
                              const std::string& path, ReportMode mode);

}  // namespace tglm

#endif  // TGLM_IO_H_
