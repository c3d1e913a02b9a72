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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>
#include <utility>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "boost/math/distributions/students_t.hpp"
#include "tglm/io.h"
#include "tglm/status.h"

namespace tglm {
namespace {

constexpr uint64_t kPopulationTag = 1;
constexpr uint64_t kStrategyTag = 2;
constexpr uint64_t kMechanismTag = 3;
constexpr uint64_t kDeviantTag = 4;
constexpr uint64_t kPilotTag = 0x70696c6f74ULL;
constexpr uint64_t kPrivacyTag = 0x7072697679ULL;
constexpr uint64_t kPairedTag = 0x706169726564ULL;

// Arms of a cell.
constexpr uint64_t kRunArm = 0;
constexpr uint64_t kDeviationArm = 1;
constexpr uint64_t kSensitivityArm = 2;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

constexpr struct {
  Metric metric;
  absl::string_view name;
} kMetricNames[] = {
    {Metric::kAccuracy, "accuracy"},
    {Metric::kSensitivity, "sensitivity"},
    {Metric::kDeviationGain, "deviation_gain"},
    {Metric::kRationality, "rationality"},
    {Metric::kBudget, "budget"},
    {Metric::kPrivacyRatio, "privacy_ratio"},
};

absl::StatusOr<double> KappaA1(const LinkBundle& bundle,
                               const EstimatorSettings& s) {
  if (s.regime == Regime::kHeavyTailed) return 0.0;
  absl::StatusOr<LinkConstants> c =
      ComputeLinkConstants(bundle, s.polytope, s.tau1, s.tau2, s.tau_theta);
  if (!c.ok()) return c.status();
  return c->kappa_A1;
}

PopulationSpec SpecAt(const ExperimentConfig& config, int64_t n) {
  PopulationSpec spec = config.population;
  spec.n = n;
  return spec;
}

ExperimentRow RunCell(const ExperimentConfig& config, const C0Choice& c0,
                      int64_t n, int64_t repeat) {
  ExperimentRow row;
  row.n = n;
  row.repeat = repeat;
  row.model = std::string(config.population.model.name());
  row.mse = row.budget = row.budget_bound = row.truthful_frac =
      row.rationality_frac = row.eta_hat = row.delta_empirical =
          row.epsilon_total = row.gamma_total = row.theta_norm = kNaN;
  const uint64_t un = static_cast<uint64_t>(n);
  const uint64_t ur = static_cast<uint64_t>(repeat);
  auto cell_seed = [&](uint64_t arm) {
    return config.paired_sweep
               ? DeriveSeed(config.master_seed, {kPairedTag, ur, arm})
               : DeriveSeed(config.master_seed, {un, ur, arm});
  };
  row.seed = cell_seed(kRunArm);
  auto fail = [&row](const absl::Status& s) {
    row.failed = true;
    row.error = std::string(s.message());
    return row;
  };

  absl::StatusOr<MechanismParams> params = ResolveParams(config, n, c0);
  if (!params.ok()) return fail(params.status());
  row.regime = std::string(RegimeName(params->settings.regime));
  const PopulationSpec spec = SpecAt(config, n);
  absl::StatusOr<Population> pop =
      GeneratePopulation(spec, DeriveSeed(row.seed, {kPopulationTag}));
  if (!pop.ok()) return fail(pop.status());
  RandomStream strategy_rng(DeriveSeed(row.seed, {kStrategyTag}));
  const Dataset reported = ApplyStrategy(
      *pop, StrategyProfile::Threshold(params->tau_threshold, config.fallback),
      strategy_rng);
  params->seed = DeriveSeed(row.seed, {kMechanismTag});
  const LinkBundle bundle(spec.model);
  absl::StatusOr<MechanismOutcome> out =
      RunMechanism(reported, bundle, *params);
  if (!out.ok()) return fail(out.status());

  row.epsilon_total = out->account.epsilon_total;
  row.gamma_total = out->account.gamma_total;
  row.truthful_frac = TruthfulFraction(*pop, reported);
  row.theta_norm = out->theta_bar_full.norm();
  if (Requested(config, Metric::kAccuracy)) {
    row.mse = (out->theta_bar_full - pop->theta_star).squaredNorm();
  }
  if (Requested(config, Metric::kBudget)) {
    absl::StatusOr<double> m = PredictionBound(bundle, *params, spec.d);
    if (!m.ok()) return fail(m.status());
    row.budget = out->budget;
    row.budget_bound = BudgetBound(n, params->a1, params->a2, *m);
  }
  if (Requested(config, Metric::kRationality)) {
    row.rationality_frac = RationalityCheck(
        *out, pop->costs, params->cost_function, params->tau_threshold);
  }
  if (Requested(config, Metric::kDeviationGain)) {
    absl::StatusOr<DeviationGainEstimate> eta = EstimateMaxDeviationGain(
        config, n, config.deviants, config.deviation_trials,
        cell_seed(kDeviationArm), c0);
    if (!eta.ok()) return fail(eta.status());
    row.eta_hat = eta->eta_hat;
  }
  if (Requested(config, Metric::kSensitivity)) {
    absl::StatusOr<double> emp = EmpiricalSensitivity(
        reported, bundle, params->settings,
        MakeReplacementSampler(spec, pop->theta_star),
        config.sensitivity_trials, cell_seed(kSensitivityArm));
    if (!emp.ok()) return fail(emp.status());
    row.delta_empirical = *emp;
  }
  return row;
}

}  // namespace

absl::string_view MetricName(Metric metric) {
  for (const auto& m : kMetricNames) {
    if (m.metric == metric) return m.name;
  }
  return "unknown";
}

absl::StatusOr<Metric> ParseMetric(absl::string_view name) {
  for (const auto& m : kMetricNames) {
    if (m.name == name) return m.metric;
  }
  return MakeError(ErrorKind::kInvalidArgument,
                   absl::StrCat("unknown metric '", name, "'"));
}

bool Requested(const ExperimentConfig& config, Metric metric) {
  return std::find(config.metrics.begin(), config.metrics.end(), metric) !=
         config.metrics.end();
}

absl::Status ValidateExperimentConfig(const ExperimentConfig& config) {
  if (config.repeats < 1) {
    return MakeError(ErrorKind::kInvalidArgument, "repeats must be >= 1");
  }
  for (size_t k = 0; k < config.sweep.size(); ++k) {
    if (config.sweep[k] < 4) {
      return MakeError(ErrorKind::kInvalidArgument,
                       absl::StrCat("sweep value ", config.sweep[k], " < 4"));
    }
    if (k > 0 && config.sweep[k] <= config.sweep[k - 1]) {
      return MakeError(ErrorKind::kInvalidArgument,
                       "sweep must be strictly increasing");
    }
  }
  if (config.format != "csv" && config.format != "json") {
    return MakeError(ErrorKind::kInvalidArgument,
                     absl::StrCat("format must be csv or json, got '",
                                  config.format, "'"));
  }
  if (config.deviation_trials < 1 || config.sensitivity_trials < 1 ||
      config.pilot_trials < 1 || config.pilot_populations < 1 ||
      config.privacy_trials < 1) {
    return MakeError(ErrorKind::kInvalidArgument,
                     "trial counts must be positive");
  }
  PopulationSpec probe = config.population;
  probe.n = std::max<int64_t>(probe.n, 2 * probe.d);
  if (absl::Status s = ValidatePopulationSpec(probe); !s.ok()) return s;
  if (!config.schedule.has_value()) {
    if (absl::Status s =
            ValidateMechanismParams(config.mechanism, config.population.model);
        !s.ok()) {
      return s;
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<MechanismParams> ResolveParams(
    const ExperimentConfig& config, int64_t n,
    const std::optional<C0Choice>& c0) {
  MechanismParams params;
  if (config.schedule.has_value()) {
    ScheduleInputs in;
    in.model = config.population.model;
    in.regime = config.mechanism.settings.regime;
    in.n = n;
    in.d = config.population.d;
    in.delta = config.schedule->delta;
    in.c = config.schedule->c;
    in.lambda = config.population.lambda;
    in.sigma = config.population.covariates.sigma;
    in.tau_theta = config.population.tau_theta;
    in.epsilon = config.schedule->epsilon;
    in.constants = config.schedule->constants;
    absl::StatusOr<MechanismParams> p = CorollarySchedule(in);
    if (!p.ok()) return p.status();
    params = *std::move(p);
    params.payment_mode = config.mechanism.payment_mode;
    params.posterior_samples = config.mechanism.posterior_samples;
    params.noise_multiplier = config.mechanism.noise_multiplier;
  } else {
    params = config.mechanism;
  }
  if (c0.has_value()) {
    params.C0 = c0->C0;
    params.calibrated = c0->calibrated;
  }
  return params;
}

absl::StatusOr<C0Choice> ChooseC0(const ExperimentConfig& config) {
  C0Choice choice;
  choice.pilot_max = kNaN;
  choice.C0 = config.schedule.has_value() ? config.schedule->constants.C0
                                          : config.mechanism.C0;
  if (!config.calibrate_c0 || config.sweep.empty()) return choice;
  const int64_t n0 = config.sweep.front();
  absl::StatusOr<MechanismParams> params = ResolveParams(config, n0);
  if (!params.ok()) return params.status();
  const PopulationSpec spec = SpecAt(config, n0);
  const uint64_t seed = DeriveSeed(config.master_seed, {kPilotTag});
  const LinkBundle bundle(spec.model);
  double pilot_max = 0.0;
  for (int64_t k = 0; k < config.pilot_populations; ++k) {
    const uint64_t pilot_seed = DeriveSeed(seed, {static_cast<uint64_t>(k)});
    absl::StatusOr<Population> pop =
        GeneratePopulation(spec, DeriveSeed(pilot_seed, {kPopulationTag}));
    if (!pop.ok()) return pop.status();
    absl::StatusOr<double> emp = EmpiricalSensitivity(
        pop->TrueData(), bundle, params->settings,
        MakeReplacementSampler(spec, pop->theta_star), config.pilot_trials,
        DeriveSeed(pilot_seed, {kSensitivityArm}));
    if (!emp.ok()) return emp.status();
    pilot_max = std::max(pilot_max, *emp);
  }
  absl::StatusOr<double> kappa = KappaA1(bundle, params->settings);
  if (!kappa.ok()) return kappa.status();
  const double shape =
      SensitivityShape(params->settings.regime, n0, spec.d, *kappa);
  if (!(pilot_max > 0.0) || !(shape > 0.0)) {
    return MakeError(ErrorKind::kNonConvergence,
                     absl::StrFormat("C0 pilot degenerate: max change %g, "
                                     "shape %g",
                                     pilot_max, shape));
  }
  choice.pilot_max = pilot_max;
  choice.C0 = CalibrateC0(pilot_max, shape);
  choice.calibrated = true;
  return choice;
}

absl::StatusOr<SensitivityBound> FormulaSensitivity(
    const ExperimentConfig& config, int64_t n, const C0Choice& c0) {
  absl::StatusOr<MechanismParams> params = ResolveParams(config, n, c0);
  if (!params.ok()) return params.status();
  const int64_t d = config.population.d;
  absl::StatusOr<SensitivityBound> bound;
  if (params->settings.regime == Regime::kHeavyTailed) {
    bound = SensitivityBoundHeavy(n, d, params->C0);
  } else {
    absl::StatusOr<double> kappa =
        KappaA1(LinkBundle(config.population.model), params->settings);
    if (!kappa.ok()) return kappa.status();
    bound = SensitivityBoundSubGaussian(n, d, *kappa, params->C0);
  }
  if (bound.ok()) bound->calibrated = params->calibrated;
  return bound;
}

absl::StatusOr<RateFit> FitRate(const std::vector<double>& xs,
                                const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 3) {
    return MakeError(ErrorKind::kInvalidArgument,
                     "rate fit needs >= 3 aligned points");
  }
  const int64_t m = static_cast<int64_t>(xs.size());
  Eigen::VectorXd lx(m), ly(m);
  for (int64_t k = 0; k < m; ++k) {
    if (!(xs[k] > 0.0) || !(ys[k] > 0.0) || !std::isfinite(ys[k])) {
      return MakeError(ErrorKind::kInvalidArgument,
                       absl::StrFormat("rate fit needs positive values, got "
                                       "(%g, %g)",
                                       xs[k], ys[k]));
    }
    lx(k) = std::log(xs[k]);
    ly(k) = std::log(ys[k]);
  }
  const double mx = lx.mean(), my = ly.mean();
  const double sxx = (lx.array() - mx).square().sum();
  if (!(sxx > 0.0)) {
    return MakeError(ErrorKind::kInvalidArgument,
                     "rate fit needs distinct x values");
  }
  RateFit fit;
  fit.points = m;
  fit.slope = ((lx.array() - mx) * (ly.array() - my)).sum() / sxx;
  fit.intercept = my - fit.slope * mx;
  const double rss =
      (ly.array() - fit.intercept - fit.slope * lx.array()).square().sum();
  const double se = std::sqrt(rss / static_cast<double>(m - 2) / sxx);
  const boost::math::students_t t(static_cast<double>(m - 2));
  const double q = boost::math::quantile(boost::math::complement(t, 0.025));
  fit.ci_low = fit.slope - q * se;
  fit.ci_high = fit.slope + q * se;
  return fit;
}

std::vector<std::pair<int64_t, double>> MeanByN(const ExperimentReport& report,
                                                double ExperimentRow::*field) {
  std::vector<std::pair<int64_t, double>> out;
  size_t k = 0;
  while (k < report.rows.size()) {
    const int64_t n = report.rows[k].n;
    double sum = 0.0;
    int64_t count = 0;
    for (; k < report.rows.size() && report.rows[k].n == n; ++k) {
      const ExperimentRow& row = report.rows[k];
      if (row.failed || std::isnan(row.*field)) continue;
      sum += row.*field;
      ++count;
    }
    out.emplace_back(n, count > 0 ? sum / static_cast<double>(count) : kNaN);
  }
  return out;
}

absl::StatusOr<ExperimentReport> RunExperiment(const ExperimentConfig& config,
                                               int threads) {
  if (absl::Status s = ValidateExperimentConfig(config); !s.ok()) return s;
  absl::StatusOr<C0Choice> c0 = ChooseC0(config);
  if (!c0.ok()) return c0.status();

  ExperimentReport report;
  report.config = ConfigToJson(config);
  report.C0 = c0->C0;
  report.calibrated = c0->calibrated;

  const int64_t cells =
      static_cast<int64_t>(config.sweep.size()) * config.repeats;
  report.rows.resize(cells);
  std::atomic<int64_t> next{0};
  auto worker = [&]() {
    for (int64_t k = next++; k < cells; k = next++) {
      report.rows[k] = RunCell(config, *c0, config.sweep[k / config.repeats],
                               k % config.repeats);
    }
  };
  const int workers =
      static_cast<int>(std::clamp<int64_t>(threads, 1, std::max<int64_t>(cells, 1)));
  std::vector<std::thread> pool;
  for (int t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  const struct {
    Metric metric;
    absl::string_view name;
    double ExperimentRow::*field;
  } fits[] = {{Metric::kAccuracy, "mse", &ExperimentRow::mse},
              {Metric::kBudget, "budget", &ExperimentRow::budget},
              {Metric::kSensitivity, "delta_empirical",
               &ExperimentRow::delta_empirical}};
  for (const auto& f : fits) {
    if (!Requested(config, f.metric)) continue;
    std::vector<double> xs, ys;
    int64_t missing = 0;
    for (const auto& [n, mean] : MeanByN(report, f.field)) {
      if (std::isfinite(mean) && mean > 0.0) {
        xs.push_back(static_cast<double>(n));
        ys.push_back(mean);
      } else {
        ++missing;
      }
    }
    absl::StatusOr<RateFit> fit = FitRate(xs, ys);
    if (!fit.ok()) continue;
    report.slopes.push_back(SlopeSummary{std::string(f.name), *fit, missing});
  }

  if (Requested(config, Metric::kPrivacyRatio) && !config.sweep.empty()) {
    const int64_t n0 = config.sweep.front();
    const uint64_t seed = DeriveSeed(config.master_seed, {kPrivacyTag});
    absl::StatusOr<std::pair<Dataset, Dataset>> pair =
        NeighborPair(config, n0, seed);
    absl::StatusOr<MechanismParams> params = ResolveParams(config, n0, *c0);
    absl::Status status = pair.ok() ? params.status() : pair.status();
    if (status.ok()) {
      PrivacyRatioOptions opts;
      opts.trials = config.privacy_trials;
      opts.log_bound = 2.0 * params->epsilon;
      absl::StatusOr<PrivacyRatioReport> check = MechanismPrivacyCheck(
          config, pair->first, pair->second, opts, seed, *c0);
      if (check.ok()) {
        report.privacy = *std::move(check);
      } else {
        status = check.status();
      }
    }
    if (!status.ok()) {
      absl::StrAppend(&report.note, "Privacy check not run: ",
                      status.message(), ". ");
    }
  }

  int64_t failed = 0;
  for (const ExperimentRow& row : report.rows) failed += row.failed;
  absl::StrAppend(
      &report.note,
      "Rate-fit intervals are normal-theory approximations over per-n means "
      "and the schedule constants are configurable defaults, so only slope "
      "shapes are meaningful. Agents above the participation threshold are "
      "paid by the same formula. ",
      report.calibrated
          ? absl::StrFormat("C0 = %.6g was calibrated by a pilot at n = %d; "
                            "the resulting noise carries no formal privacy "
                            "guarantee. ",
                            report.C0, config.sweep.front())
          : std::string(),
      absl::StrFormat("%d of %d cells failed.", failed, cells));
  return report;
}

absl::StatusOr<std::vector<DeviationGainEstimate>> EstimateDeviationGains(
    const ExperimentConfig& config, int64_t n,
    const std::vector<MisreportRule>& rules, int64_t trials, uint64_t seed,
    const std::optional<C0Choice>& c0) {
  if (trials < 2) {
    return MakeError(ErrorKind::kInvalidArgument,
                     "deviation study needs at least 2 trials");
  }
  absl::StatusOr<MechanismParams> base = ResolveParams(config, n, c0);
  if (!base.ok()) return base.status();
  const PopulationSpec spec = SpecAt(config, n);
  const LinkBundle bundle(spec.model);
  const size_t k_rules = rules.size();
  std::vector<double> sum(k_rules, 0.0), sum_sq(k_rules, 0.0),
      pay(k_rules, 0.0), priv(k_rules, 0.0);

  for (int64_t t = 0; t < trials; ++t) {
    const uint64_t s = DeriveSeed(seed, {static_cast<uint64_t>(t)});
    absl::StatusOr<Population> pop =
        GeneratePopulation(spec, DeriveSeed(s, {kPopulationTag}));
    if (!pop.ok()) return pop.status();
    RandomStream strategy_rng(DeriveSeed(s, {kStrategyTag}));
    Dataset reported = ApplyStrategy(
        *pop, StrategyProfile::Threshold(base->tau_threshold, config.fallback),
        strategy_rng);
    const double truth = pop->y_true(0);
    reported.y(0) = truth;
    MechanismParams params = *base;
    params.seed = DeriveSeed(s, {kMechanismTag});
    absl::StatusOr<Mechanism> honest =
        Mechanism::Create(reported, bundle, params);
    if (!honest.ok()) return honest.status();
    absl::StatusOr<Mechanism::Payment> honest_pay = honest->PaymentFor(0);
    if (!honest_pay.ok()) return honest_pay.status();
    const PrivacyAccount account = ComposeAccount(honest->privacy());
    const double saved = pop->costs(0) *
                         params.cost_function(account.epsilon_total,
                                              account.gamma_total);
    for (size_t k = 0; k < k_rules; ++k) {
      RandomStream deviant_rng(DeriveSeed(s, {kDeviantTag, k}));
      const double lie = MisreportValue(rules[k], spec.model, truth, deviant_rng);
      double payment_gain = 0.0, privacy_gain = 0.0;
      if (lie != truth) {
        absl::StatusOr<Mechanism::Payment> p;
        if (config.rerun_deviant_arm) {
          Dataset deviant = reported;
          deviant.y(0) = lie;
          absl::StatusOr<Mechanism> mech =
              Mechanism::Create(deviant, bundle, params);
          if (!mech.ok()) return mech.status();
          p = mech->PaymentFor(0);
        } else {
          p = honest->PaymentFor(0, lie);
        }
        if (!p.ok()) return p.status();
        payment_gain = p->payment - honest_pay->payment;
        privacy_gain = saved;
      }
      const double gain = payment_gain + privacy_gain;
      sum[k] += gain;
      sum_sq[k] += gain * gain;
      pay[k] += payment_gain;
      priv[k] += privacy_gain;
    }
  }

  std::vector<DeviationGainEstimate> out(k_rules);
  const double tt = static_cast<double>(trials);
  for (size_t k = 0; k < k_rules; ++k) {
    const double mean = sum[k] / tt;
    const double var = std::max(0.0, (sum_sq[k] - tt * mean * mean) / (tt - 1));
    out[k].eta_hat = mean;
    out[k].std_error = std::sqrt(var / tt);
    out[k].payment_component = pay[k] / tt;
    out[k].privacy_component = priv[k] / tt;
    out[k].deviant_rule = rules[k];
    out[k].trials = trials;
  }
  return out;
}

absl::StatusOr<DeviationGainEstimate> EstimateDeviationGain(
    const ExperimentConfig& config, int64_t n, const MisreportRule& rule,
    int64_t trials, uint64_t seed, const std::optional<C0Choice>& c0) {
  absl::StatusOr<std::vector<DeviationGainEstimate>> all =
      EstimateDeviationGains(config, n, {rule}, trials, seed, c0);
  if (!all.ok()) return all.status();
  return all->front();
}

absl::StatusOr<DeviationGainEstimate> EstimateMaxDeviationGain(
    const ExperimentConfig& config, int64_t n,
    const std::vector<MisreportRule>& rules, int64_t trials, uint64_t seed,
    const std::optional<C0Choice>& c0) {
  if (rules.empty()) {
    return MakeError(ErrorKind::kInvalidArgument, "no candidate deviations");
  }
  absl::StatusOr<std::vector<DeviationGainEstimate>> all =
      EstimateDeviationGains(config, n, rules, trials, seed, c0);
  if (!all.ok()) return all.status();
  return *std::max_element(all->begin(), all->end(),
                           [](const DeviationGainEstimate& a,
                              const DeviationGainEstimate& b) {
                             return a.eta_hat < b.eta_hat;
                           });
}

std::vector<MisreportRule> DeviationFamily(const ModelKind& model) {
  switch (model.family()) {
    case ModelFamily::kLogistic:
      return {MisreportRule::SignFlip()};
    case ModelFamily::kPoisson:
      return {MisreportRule::Constant(0), MisreportRule::Constant(1),
              MisreportRule::Constant(2), MisreportRule::Constant(3),
              MisreportRule::Constant(5), MisreportRule::AdditiveNoise(1.0)};
    case ModelFamily::kLinearGaussian:
      break;
  }
  return {MisreportRule::SignFlip(), MisreportRule::Constant(0),
          MisreportRule::Constant(-1), MisreportRule::Constant(1),
          MisreportRule::AdditiveNoise(1.0)};
}

absl::StatusOr<std::pair<Dataset, Dataset>> NeighborPair(
    const ExperimentConfig& config, int64_t n, uint64_t seed) {
  absl::StatusOr<MechanismParams> params = ResolveParams(config, n);
  if (!params.ok()) return params.status();
  absl::StatusOr<Population> pop =
      GeneratePopulation(SpecAt(config, n), DeriveSeed(seed, {kPopulationTag}));
  if (!pop.ok()) return pop.status();
  Dataset d = pop->TrueData();
  Dataset d_prime = d;
  const EstimatorSettings& s = params->settings;
  Eigen::VectorXd x = d.X.row(0).transpose();
  if (x.norm() == 0.0) x = Eigen::VectorXd::Ones(x.size());
  double radius = s.tau1;
  if (s.regime == Regime::kHeavyTailed) {
    // tau1 bounds the l4 norm there; put the row on that boundary.
    radius = s.tau1 * x.norm() / std::sqrt(std::sqrt(x.array().pow(4).sum()));
  }
  d_prime.X.row(0) = (x * (radius / x.norm())).transpose();
  const double sign = d.y(0) >= 0.0 ? -1.0 : 1.0;
  d_prime.y(0) =
      CoerceResponse(pop->model, sign * s.tau2, d.y(0));
  return std::make_pair(std::move(d), std::move(d_prime));
}

absl::StatusOr<PrivacyRatioReport> MechanismPrivacyCheck(
    const ExperimentConfig& config, const Dataset& d, const Dataset& d_prime,
    const PrivacyRatioOptions& options, uint64_t seed,
    const std::optional<C0Choice>& c0) {
  absl::StatusOr<MechanismParams> params = ResolveParams(config, d.n(), c0);
  if (!params.ok()) return params.status();
  const LinkBundle bundle(config.population.model);
  const MechanismParams base = *params;
  MechanismSampler sampler =
      [&](const Dataset& data,
          RandomStream& rng) -> absl::StatusOr<Eigen::VectorXd> {
    MechanismParams p = base;
    p.seed = rng();
    absl::StatusOr<Mechanism> mech = Mechanism::Create(data, bundle, p);
    if (!mech.ok()) return mech.status();
    return mech->theta_bar(Release::kFull);
  };
  return EmpiricalPrivacyRatio(sampler, d, d_prime, options, seed);
}

}  // namespace tglm
