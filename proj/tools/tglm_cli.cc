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

// Command-line front end: simulate, deviate, sensitivity, privacy-check and
// schedule. Exit codes: 0 success, 1 I/O failure, 2 config error, 3
// numerical failure in every cell.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "json.hpp"
#include "tglm/harness.h"
#include "tglm/io.h"
#include "tglm/mechanism.h"
#include "tglm/status.h"

namespace tglm {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct CommonFlags {
  std::string config;
  std::optional<uint64_t> seed;
  int threads = 1;
  std::string out;
  std::string format;
};

int Fail(const absl::Status& status, int code) {
  std::cerr << "error: " << status.message() << "\n";
  return code;
}

// Config errors map to 2, I/O to 1, anything numerical to 3.
int ExitFor(const absl::Status& status) {
  switch (KindOf(status)) {
    case ErrorKind::kInvalidArgument:
      return Fail(status, kExitConfig);
    case ErrorKind::kIo:
      return Fail(status, kExitIo);
    default:
      return Fail(status, kExitNumerical);
  }
}

absl::StatusOr<ExperimentConfig> LoadWithOverrides(const CommonFlags& flags) {
  if (flags.config.empty()) {
    return MakeError(ErrorKind::kInvalidArgument, "--config is required");
  }
  absl::StatusOr<ExperimentConfig> config = LoadConfig(flags.config);
  if (!config.ok()) return config;
  if (flags.seed.has_value()) config->master_seed = *flags.seed;
  if (!flags.out.empty()) config->out_dir = flags.out;
  if (!flags.format.empty()) config->format = flags.format;
  if (absl::Status s = ValidateExperimentConfig(*config); !s.ok()) return s;
  return config;
}

// Writes `contents` to <out_dir>/<stem>.<format>, or to stdout without a
// directory.
int Emit(const ExperimentConfig& config, const std::string& stem,
         const std::string& csv, const nlohmann::json& json) {
  const std::string body =
      config.format == "json" ? json.dump(2) + "\n" : csv;
  if (config.out_dir.empty()) {
    std::cout << body;
    return kExitOk;
  }
  const std::string path =
      absl::StrCat(config.out_dir, "/", stem, ".", config.format);
  if (absl::Status s = WriteFile(path, body); !s.ok()) return ExitFor(s);
  std::cout << path << "\n";
  return kExitOk;
}

std::string RuleLabel(const MisreportRule& rule) {
  switch (rule.kind) {
    case MisreportKind::kConstant:
      return absl::StrCat("constant:", rule.value);
    case MisreportKind::kSignFlip:
      return "sign_flip";
    case MisreportKind::kAdditiveNoise:
      return absl::StrCat("additive_noise:", rule.scale);
    case MisreportKind::kWorstOfGrid:
      return "worst_of_grid";
    case MisreportKind::kTruthful:
      return "truthful";
  }
  return "unknown";
}

int Simulate(const CommonFlags& flags) {
  absl::StatusOr<ExperimentConfig> config = LoadWithOverrides(flags);
  if (!config.ok()) return Fail(config.status(), kExitConfig);
  absl::StatusOr<ExperimentReport> report =
      RunExperiment(*config, flags.threads);
  if (!report.ok()) return ExitFor(report.status());
  if (config->out_dir.empty()) {
    std::cout << (config->format == "json"
                      ? ReportToJson(*report).dump(2) + "\n"
                      : ReportToCsv(*report));
  } else {
    absl::StatusOr<std::string> path =
        EmitReport(*report, config->format, config->out_dir);
    if (!path.ok()) return ExitFor(path.status());
    std::cout << *path << "\n";
  }
  for (const SlopeSummary& s : report->slopes) {
    std::cerr << absl::StrFormat(
        "slope %s: %.4f [%.4f, %.4f] over %d points\n", s.metric, s.fit.slope,
        s.fit.ci_low, s.fit.ci_high, s.fit.points);
  }
  std::cerr << report->note << "\n";
  bool all_failed = !report->rows.empty();
  for (const ExperimentRow& row : report->rows) all_failed &= row.failed;
  return all_failed ? kExitNumerical : kExitOk;
}

int Deviate(const CommonFlags& flags, std::optional<int64_t> n,
            std::optional<int64_t> trials) {
  absl::StatusOr<ExperimentConfig> config = LoadWithOverrides(flags);
  if (!config.ok()) return Fail(config.status(), kExitConfig);
  const std::vector<int64_t> sizes =
      n.has_value() ? std::vector<int64_t>{*n} : config->sweep;
  absl::StatusOr<C0Choice> c0 = ChooseC0(*config);
  if (!c0.ok()) return ExitFor(c0.status());
  std::string csv =
      "n,rule,eta_hat,std_error,payment_component,privacy_component,trials,"
      "is_max\n";
  nlohmann::json json = nlohmann::json::array();
  for (int64_t size : sizes) {
    // The same seed at every n keeps the studies paired across sizes.
    absl::StatusOr<std::vector<DeviationGainEstimate>> all =
        EstimateDeviationGains(*config, size, config->deviants,
                               trials.value_or(config->deviation_trials),
                               config->master_seed, *c0);
    if (!all.ok()) return ExitFor(all.status());
    size_t best = 0;
    for (size_t k = 1; k < all->size(); ++k) {
      if ((*all)[k].eta_hat > (*all)[best].eta_hat) best = k;
    }
    for (size_t k = 0; k < all->size(); ++k) {
      const DeviationGainEstimate& e = (*all)[k];
      absl::StrAppendFormat(&csv, "%d,%s,%.17g,%.17g,%.17g,%.17g,%d,%d\n",
                            size, RuleLabel(e.deviant_rule), e.eta_hat,
                            e.std_error, e.payment_component,
                            e.privacy_component, e.trials, k == best);
      nlohmann::json j = DeviationGainToJson(e);
      j["n"] = size;
      j["is_max"] = k == best;
      json.push_back(j);
    }
  }
  return Emit(*config, "deviation", csv, json);
}

int Sensitivity(const CommonFlags& flags) {
  absl::StatusOr<ExperimentConfig> config = LoadWithOverrides(flags);
  if (!config.ok()) return Fail(config.status(), kExitConfig);
  config->metrics = {Metric::kSensitivity};
  absl::StatusOr<ExperimentReport> report =
      RunExperiment(*config, flags.threads);
  if (!report.ok()) return ExitFor(report.status());
  const C0Choice c0{report->C0, report->calibrated, 0.0};
  std::string csv = "n,repeat,delta_empirical,delta_formula,C0,calibrated\n";
  nlohmann::json json = nlohmann::json::array();
  bool all_failed = !report->rows.empty();
  for (const ExperimentRow& row : report->rows) {
    all_failed &= row.failed;
    absl::StatusOr<SensitivityBound> bound =
        FormulaSensitivity(*config, row.n, c0);
    if (!bound.ok()) return ExitFor(bound.status());
    absl::StrAppendFormat(&csv, "%d,%d,%s,%.17g,%.17g,%d\n", row.n,
                          row.repeat,
                          row.failed ? std::string("nan")
                                     : absl::StrFormat("%.17g",
                                                       row.delta_empirical),
                          bound->delta_n, c0.C0, c0.calibrated);
    json.push_back({{"n", row.n},
                    {"repeat", row.repeat},
                    {"delta_empirical", DoubleToJson(row.delta_empirical)},
                    {"delta_formula", bound->delta_n},
                    {"C0", c0.C0},
                    {"calibrated", c0.calibrated}});
  }
  if (all_failed) {
    std::cerr << "error: every cell failed\n";
    return kExitNumerical;
  }
  return Emit(*config, "sensitivity", csv, json);
}

int PrivacyCheck(const CommonFlags& flags, std::optional<int64_t> n,
                 std::optional<int64_t> trials, int64_t bins) {
  absl::StatusOr<ExperimentConfig> config = LoadWithOverrides(flags);
  if (!config.ok()) return Fail(config.status(), kExitConfig);
  if (!n.has_value() && config->sweep.empty()) {
    return Fail(MakeError(ErrorKind::kInvalidArgument,
                          "privacy-check needs --n or a non-empty sweep"),
                kExitConfig);
  }
  const int64_t size = n.value_or(config->sweep.front());
  absl::StatusOr<C0Choice> c0 = ChooseC0(*config);
  if (!c0.ok()) return ExitFor(c0.status());
  absl::StatusOr<MechanismParams> params = ResolveParams(*config, size, *c0);
  if (!params.ok()) return ExitFor(params.status());
  absl::StatusOr<std::pair<Dataset, Dataset>> pair =
      NeighborPair(*config, size, config->master_seed);
  if (!pair.ok()) return ExitFor(pair.status());
  PrivacyRatioOptions opts;
  opts.trials = trials.value_or(config->privacy_trials);
  opts.bins = bins;
  opts.log_bound = 2.0 * params->epsilon;
  absl::StatusOr<PrivacyRatioReport> report = MechanismPrivacyCheck(
      *config, pair->first, pair->second, opts, config->master_seed, *c0);
  if (!report.ok()) return ExitFor(report.status());
  std::cerr << absl::StrFormat(
      "%s: %d of %d occupied bins within log ratio %.4g (max observed "
      "%.4g)\n",
      report->passed ? "passed" : "refuted", report->consistent,
      report->occupied, opts.log_bound, report->max_abs_log_ratio);
  std::string csv =
      "bin,count_d,count_d_prime,log_ratio,log_ratio_lo,log_ratio_hi,"
      "occupied,consistent\n";
  for (size_t k = 0; k < report->bins.size(); ++k) {
    const PrivacyRatioBin& b = report->bins[k];
    absl::StrAppendFormat(&csv, "%d,%d,%d,%.17g,%.17g,%.17g,%d,%d\n", k,
                          b.count_d, b.count_d_prime, b.log_ratio,
                          b.log_ratio_lo, b.log_ratio_hi, b.occupied,
                          b.consistent);
  }
  return Emit(*config, "privacy", csv, PrivacyReportToJson(*report));
}

struct ScheduleFlags {
  std::string model = "linear";
  std::string regime = "subgaussian";
  int64_t n = 1000;
  int64_t d = 1;
  double delta = 0.3;
  double c = 1.0;
  double noise_std = 1.0;
  double lambda = 1.0;
  double sigma = 1.0;
  double tau_theta = 1.0;
  std::optional<double> epsilon;
};

int Schedule(const CommonFlags& flags, const ScheduleFlags& sf) {
  ScheduleInputs in;
  if (!flags.config.empty()) {
    absl::StatusOr<ExperimentConfig> config = LoadWithOverrides(flags);
    if (!config.ok()) return Fail(config.status(), kExitConfig);
    if (!config->schedule.has_value()) {
      return Fail(MakeError(ErrorKind::kInvalidArgument,
                            "config has no schedule section"),
                  kExitConfig);
    }
    absl::StatusOr<MechanismParams> p = ResolveParams(*config, sf.n);
    if (!p.ok()) return ExitFor(p.status());
    std::cout << MechanismParamsToJson(*p).dump(2) << "\n";
    return kExitOk;
  }
  absl::StatusOr<ModelKind> model = ModelKind::FromName(sf.model, sf.noise_std);
  if (!model.ok()) return Fail(model.status(), kExitConfig);
  absl::StatusOr<Regime> regime = ParseRegime(sf.regime);
  if (!regime.ok()) return Fail(regime.status(), kExitConfig);
  in.model = *model;
  in.regime = *regime;
  in.n = sf.n;
  in.d = sf.d;
  in.delta = sf.delta;
  in.c = sf.c;
  in.lambda = sf.lambda;
  in.sigma = sf.sigma;
  in.tau_theta = sf.tau_theta;
  in.epsilon = sf.epsilon;
  absl::StatusOr<MechanismParams> p = CorollarySchedule(in);
  if (!p.ok()) return ExitFor(p.status());
  std::cout << MechanismParamsToJson(*p).dump(2) << "\n";
  return kExitOk;
}

void AddCommon(CLI::App* cmd, CommonFlags& flags, bool config_required) {
  CLI::Option* config =
      cmd->add_option("--config", flags.config, "JSON experiment config");
  if (config_required) config->required();
  cmd->add_option("--seed", flags.seed, "Overrides master_seed");
  cmd->add_option("--threads", flags.threads, "Worker threads")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--out", flags.out, "Output directory (stdout if unset)");
  cmd->add_option("--format", flags.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
}

int Main(int argc, char** argv) {
  CLI::App app{"Truthful private GLM mechanism simulator"};
  app.require_subcommand(1);
  CommonFlags flags;
  std::optional<int64_t> n, trials;
  int64_t bins = 100;
  ScheduleFlags sf;

  CLI::App* simulate =
      app.add_subcommand("simulate", "Run an experiment sweep");
  AddCommon(simulate, flags, true);

  CLI::App* deviate =
      app.add_subcommand("deviate", "Deviation-gain study for agent 0");
  AddCommon(deviate, flags, true);
  deviate->add_option("--n", n, "Population size (default: every sweep n)");
  deviate->add_option("--trials", trials, "Paired trials per n");

  CLI::App* sensitivity = app.add_subcommand(
      "sensitivity", "Empirical one-replacement sensitivity vs the bound");
  AddCommon(sensitivity, flags, true);

  CLI::App* privacy =
      app.add_subcommand("privacy-check", "Histogram ratio falsification test");
  AddCommon(privacy, flags, true);
  privacy->add_option("--n", n, "Population size (default: smallest sweep n)");
  privacy->add_option("--trials", trials, "Mechanism runs per dataset");
  privacy->add_option("--bins", bins, "Histogram cells");

  CLI::App* schedule = app.add_subcommand(
      "schedule", "Print the parameterization for a model at size n");
  AddCommon(schedule, flags, false);
  schedule->add_option("--model", sf.model, "linear, logistic or poisson");
  schedule->add_option("--regime", sf.regime, "subgaussian or heavy");
  schedule->add_option("--n", sf.n, "Population size");
  schedule->add_option("--d", sf.d, "Dimension");
  schedule->add_option("--delta", sf.delta, "Schedule exponent");
  schedule->add_option("--c", sf.c, "beta = n^-c");
  schedule->add_option("--noise-std", sf.noise_std, "Linear noise level");
  schedule->add_option("--lambda", sf.lambda, "Cost rate");
  schedule->add_option("--sigma", sf.sigma, "Covariate scale");
  schedule->add_option("--tau-theta", sf.tau_theta, "Parameter radius");
  schedule->add_option("--epsilon", sf.epsilon, "Fixed privacy budget");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*simulate) return Simulate(flags);
  if (*deviate) return Deviate(flags, n, trials);
  if (*sensitivity) return Sensitivity(flags);
  if (*privacy) return PrivacyCheck(flags, n, trials, bins);
  return Schedule(flags, sf);
}

}  // namespace
}  // namespace tglm

int main(int argc, char** argv) { return tglm::Main(argc, argv); }
