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

#include "tglm/io.h"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>
#include <system_error>
#include <utility>
#include <vector>

#include "absl/strings/ascii.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "tglm/status.h"

namespace tglm {
namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

absl::Status ConfigError(absl::string_view msg) {
  return MakeError(ErrorKind::kInvalidArgument, msg);
}

std::string FormatDouble(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

// Rejects keys of `j` outside `allowed`.
absl::Status CheckKeys(const json& j, absl::string_view where,
                       std::initializer_list<absl::string_view> allowed) {
  if (!j.is_object()) {
    return ConfigError(absl::StrCat(where, " must be a JSON object"));
  }
  for (const auto& item : j.items()) {
    bool ok = false;
    for (absl::string_view a : allowed) ok |= item.key() == a;
    if (!ok) {
      return ConfigError(
          absl::StrCat("unknown key '", item.key(), "' in ", where));
    }
  }
  return absl::OkStatus();
}

template <typename T>
void Read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json VectorToJson(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int64_t i = 0; i < v.size(); ++i) a.push_back(DoubleToJson(v(i)));
  return a;
}

absl::StatusOr<Eigen::VectorXd> VectorFromJson(const json& j) {
  if (!j.is_array()) return ConfigError("expected a JSON array of numbers");
  Eigen::VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    absl::StatusOr<double> d = DoubleFromJson(j[i]);
    if (!d.ok()) return d.status();
    v(i) = *d;
  }
  return v;
}

json MatrixToJson(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (int64_t r = 0; r < m.rows(); ++r) {
    a.push_back(VectorToJson(m.row(r).transpose()));
  }
  return a;
}

absl::StatusOr<Eigen::MatrixXd> MatrixFromJson(const json& j) {
  if (!j.is_array()) return ConfigError("matrix must be an array of rows");
  if (j.empty()) return Eigen::MatrixXd();
  Eigen::MatrixXd m(j.size(), j[0].size());
  for (size_t r = 0; r < j.size(); ++r) {
    absl::StatusOr<Eigen::VectorXd> row = VectorFromJson(j[r]);
    if (!row.ok()) return row.status();
    if (row->size() != m.cols()) return ConfigError("ragged matrix rows");
    m.row(r) = row->transpose();
  }
  return m;
}

absl::string_view CovariateKindName(CovariateKind kind) {
  switch (kind) {
    case CovariateKind::kSubGaussianIsotropic:
      return "isotropic";
    case CovariateKind::kSubGaussianCov:
      return "gaussian";
    case CovariateKind::kStudentT:
      return "student_t";
  }
  return "isotropic";
}

json PopulationToJson(const PopulationSpec& p) {
  json j;
  j["d"] = p.d;
  json cov;
  cov["kind"] = std::string(CovariateKindName(p.covariates.kind));
  cov["sigma"] = p.covariates.sigma;
  cov["dof"] = p.covariates.dof;
  cov["Sigma"] = MatrixToJson(p.covariates.Sigma);
  j["covariates"] = cov;
  if (p.theta_star.has_value()) j["theta_star"] = VectorToJson(*p.theta_star);
  j["tau_theta"] = p.tau_theta;
  j["lambda"] = p.lambda;
  j["cost_correlated"] = p.cost_correlated;
  if (p.response_noise_std.has_value()) {
    j["response_noise_std"] = *p.response_noise_std;
  }
  return j;
}

absl::Status PopulationFromJson(const json& j, PopulationSpec& p) {
  if (absl::Status s = CheckKeys(j, "population",
                                 {"d", "covariates", "theta_star", "tau_theta",
                                  "lambda", "cost_correlated",
                                  "response_noise_std"});
      !s.ok()) {
    return s;
  }
  Read(j, "d", p.d);
  Read(j, "tau_theta", p.tau_theta);
  Read(j, "lambda", p.lambda);
  Read(j, "cost_correlated", p.cost_correlated);
  if (j.contains("response_noise_std")) {
    p.response_noise_std = j.at("response_noise_std").get<double>();
  }
  if (j.contains("theta_star")) {
    absl::StatusOr<Eigen::VectorXd> t = VectorFromJson(j.at("theta_star"));
    if (!t.ok()) return t.status();
    p.theta_star = *t;
  }
  if (j.contains("covariates")) {
    const json& c = j.at("covariates");
    if (absl::Status s =
            CheckKeys(c, "covariates", {"kind", "sigma", "dof", "Sigma"});
        !s.ok()) {
      return s;
    }
    const std::string kind = c.value("kind", "isotropic");
    if (kind == "isotropic") {
      p.covariates.kind = CovariateKind::kSubGaussianIsotropic;
    } else if (kind == "gaussian") {
      p.covariates.kind = CovariateKind::kSubGaussianCov;
    } else if (kind == "student_t") {
      p.covariates.kind = CovariateKind::kStudentT;
    } else {
      return ConfigError(absl::StrCat("unknown covariate kind '", kind, "'"));
    }
    Read(c, "sigma", p.covariates.sigma);
    Read(c, "dof", p.covariates.dof);
    if (c.contains("Sigma")) {
      absl::StatusOr<Eigen::MatrixXd> m = MatrixFromJson(c.at("Sigma"));
      if (!m.ok()) return m.status();
      p.covariates.Sigma = *m;
    }
  }
  return absl::OkStatus();
}

json CostFunctionToJson(const CostFunctionSpec& f) {
  return json{{"exponent", f.exponent},
              {"gamma_power", f.gamma_power},
              {"scale", f.scale}};
}

json ConstantsToJson(const ScheduleConstants& k) {
  return json{{"tau1", k.tau1},
              {"tau2", k.tau2},
              {"alpha", k.alpha},
              {"beta", k.beta},
              {"a2", k.a2},
              {"covariate_radius", k.covariate_radius},
              {"gamma_scale", k.gamma_scale},
              {"C0", k.C0}};
}

json MechanismToJson(const MechanismParams& m) {
  const EstimatorSettings& s = m.settings;
  json j{{"regime", std::string(RegimeName(s.regime))},
         {"tau1", s.tau1},
         {"tau2", s.tau2},
         {"condition_cap", s.condition_cap},
         {"epsilon", m.epsilon},
         {"gamma_n", m.gamma_n},
         {"gamma_half", m.gamma_half},
         {"C0", m.C0},
         {"noise_multiplier", m.noise_multiplier},
         {"a1", m.a1},
         {"a2", m.a2},
         {"payment_mode", std::string(PaymentModeName(m.payment_mode))},
         {"alpha", m.alpha},
         {"beta", m.beta},
         {"tau_threshold", m.tau_threshold},
         {"cost_function", CostFunctionToJson(m.cost_function)},
         {"posterior_samples", m.posterior_samples}};
  return j;
}

absl::Status MechanismFromJson(const json& j, MechanismParams& m) {
  if (absl::Status s = CheckKeys(
          j, "mechanism",
          {"regime", "tau1", "tau2", "condition_cap", "epsilon", "gamma_n",
           "gamma_half", "C0", "noise_multiplier", "a1", "a2", "payment_mode",
           "alpha", "beta", "tau_threshold", "cost_function",
           "posterior_samples"});
      !s.ok()) {
    return s;
  }
  EstimatorSettings& s = m.settings;
  if (j.contains("regime")) {
    absl::StatusOr<Regime> r = ParseRegime(j.at("regime").get<std::string>());
    if (!r.ok()) return r.status();
    s.regime = *r;
  }
  Read(j, "tau1", s.tau1);
  Read(j, "tau2", s.tau2);
  Read(j, "condition_cap", s.condition_cap);
  Read(j, "epsilon", m.epsilon);
  Read(j, "gamma_n", m.gamma_n);
  Read(j, "gamma_half", m.gamma_half);
  Read(j, "C0", m.C0);
  Read(j, "noise_multiplier", m.noise_multiplier);
  Read(j, "a1", m.a1);
  Read(j, "a2", m.a2);
  Read(j, "alpha", m.alpha);
  Read(j, "beta", m.beta);
  Read(j, "tau_threshold", m.tau_threshold);
  Read(j, "posterior_samples", m.posterior_samples);
  if (j.contains("payment_mode")) {
    const std::string mode = j.at("payment_mode").get<std::string>();
    if (mode == "raw") {
      m.payment_mode = PaymentMode::kRaw;
    } else if (mode == "nonnegative") {
      m.payment_mode = PaymentMode::kNonNegative;
    } else {
      return ConfigError(absl::StrCat("unknown payment_mode '", mode, "'"));
    }
  }
  if (j.contains("cost_function")) {
    const json& f = j.at("cost_function");
    if (absl::Status st = CheckKeys(f, "cost_function",
                                    {"exponent", "gamma_power", "scale"});
        !st.ok()) {
      return st;
    }
    Read(f, "exponent", m.cost_function.exponent);
    Read(f, "gamma_power", m.cost_function.gamma_power);
    Read(f, "scale", m.cost_function.scale);
  }
  return absl::OkStatus();
}

absl::Status ScheduleFromJson(const json& j, ScheduleReference& r) {
  if (absl::Status s =
          CheckKeys(j, "schedule", {"delta", "c", "epsilon", "constants"});
      !s.ok()) {
    return s;
  }
  Read(j, "delta", r.delta);
  Read(j, "c", r.c);
  if (j.contains("epsilon")) r.epsilon = j.at("epsilon").get<double>();
  if (j.contains("constants")) {
    const json& k = j.at("constants");
    if (absl::Status s = CheckKeys(k, "schedule.constants",
                                   {"tau1", "tau2", "alpha", "beta", "a2",
                                    "covariate_radius", "gamma_scale", "C0"});
        !s.ok()) {
      return s;
    }
    ScheduleConstants& c = r.constants;
    Read(k, "tau1", c.tau1);
    Read(k, "tau2", c.tau2);
    Read(k, "alpha", c.alpha);
    Read(k, "beta", c.beta);
    Read(k, "a2", c.a2);
    Read(k, "covariate_radius", c.covariate_radius);
    Read(k, "gamma_scale", c.gamma_scale);
    Read(k, "C0", c.C0);
  }
  return absl::OkStatus();
}

absl::StatusOr<ExperimentConfig> ConfigFromJsonImpl(const json& j) {
  if (absl::Status s = CheckKeys(
          j, "config",
          {"model", "noise_std", "polytope", "population", "mechanism",
           "schedule", "calibrate_c0", "pilot_trials", "pilot_populations",
           "fallback", "deviants", "rerun_deviant_arm", "deviation_trials",
           "sensitivity_trials", "privacy_trials", "sweep", "repeats",
           "paired_sweep", "metrics", "output", "master_seed"});
      !s.ok()) {
    return s;
  }
  ExperimentConfig c;
  absl::StatusOr<ModelKind> model = ModelKind::FromName(
      j.value("model", std::string("linear")), j.value("noise_std", 1.0));
  if (!model.ok()) return model.status();
  c.population.model = *model;
  if (j.contains("population")) {
    if (absl::Status s = PopulationFromJson(j.at("population"), c.population);
        !s.ok()) {
      return s;
    }
  }
  if (j.contains("mechanism")) {
    if (absl::Status s = MechanismFromJson(j.at("mechanism"), c.mechanism);
        !s.ok()) {
      return s;
    }
  }
  c.mechanism.settings.tau_theta = c.population.tau_theta;
  if (j.contains("polytope")) {
    absl::StatusOr<PolytopeSpec> p = PolytopeFromJson(j.at("polytope"));
    if (!p.ok()) return p.status();
    c.mechanism.settings.polytope = *p;
  }
  if (j.contains("schedule")) {
    ScheduleReference r;
    if (absl::Status s = ScheduleFromJson(j.at("schedule"), r); !s.ok()) {
      return s;
    }
    c.schedule = r;
  }
  Read(j, "calibrate_c0", c.calibrate_c0);
  Read(j, "pilot_trials", c.pilot_trials);
  Read(j, "pilot_populations", c.pilot_populations);
  Read(j, "deviation_trials", c.deviation_trials);
  Read(j, "sensitivity_trials", c.sensitivity_trials);
  Read(j, "privacy_trials", c.privacy_trials);
  Read(j, "repeats", c.repeats);
  Read(j, "paired_sweep", c.paired_sweep);
  Read(j, "master_seed", c.master_seed);
  Read(j, "rerun_deviant_arm", c.rerun_deviant_arm);
  if (j.contains("fallback")) {
    absl::StatusOr<MisreportRule> r = MisreportRuleFromJson(j.at("fallback"));
    if (!r.ok()) return r.status();
    c.fallback = *r;
  }
  if (j.contains("deviants")) {
    const json& d = j.at("deviants");
    if (d.is_string() && d.get<std::string>() == "family") {
      c.deviants = DeviationFamily(c.population.model);
    } else if (d.is_array()) {
      c.deviants.clear();
      for (const json& rule : d) {
        absl::StatusOr<MisreportRule> r = MisreportRuleFromJson(rule);
        if (!r.ok()) return r.status();
        c.deviants.push_back(*r);
      }
    } else {
      return ConfigError("deviants must be an array of rules or \"family\"");
    }
  }
  if (!j.contains("sweep")) return ConfigError("config needs a sweep");
  c.sweep = j.at("sweep").get<std::vector<int64_t>>();
  if (j.contains("metrics")) {
    c.metrics.clear();
    for (const json& m : j.at("metrics")) {
      absl::StatusOr<Metric> metric = ParseMetric(m.get<std::string>());
      if (!metric.ok()) return metric.status();
      c.metrics.push_back(*metric);
    }
  }
  if (j.contains("output")) {
    const json& o = j.at("output");
    if (absl::Status s = CheckKeys(o, "output", {"dir", "format"}); !s.ok()) {
      return s;
    }
    Read(o, "dir", c.out_dir);
    Read(o, "format", c.format);
  }
  if (absl::Status s = ValidateExperimentConfig(c); !s.ok()) return s;
  return c;
}

json RowToJson(const ExperimentRow& r) {
  return json{{"n", r.n},
              {"repeat", r.repeat},
              {"model", r.model},
              {"regime", r.regime},
              {"mse", DoubleToJson(r.mse)},
              {"budget", DoubleToJson(r.budget)},
              {"budget_bound", DoubleToJson(r.budget_bound)},
              {"truthful_frac", DoubleToJson(r.truthful_frac)},
              {"rationality_frac", DoubleToJson(r.rationality_frac)},
              {"eta_hat", DoubleToJson(r.eta_hat)},
              {"delta_empirical", DoubleToJson(r.delta_empirical)},
              {"epsilon_total", DoubleToJson(r.epsilon_total)},
              {"gamma_total", DoubleToJson(r.gamma_total)},
              {"theta_norm", DoubleToJson(r.theta_norm)},
              {"seed", r.seed},
              {"failed", r.failed},
              {"error", r.error}};
}

absl::StatusOr<ExperimentRow> RowFromJson(const json& j) {
  ExperimentRow r;
  r.n = j.at("n").get<int64_t>();
  r.repeat = j.at("repeat").get<int64_t>();
  r.model = j.at("model").get<std::string>();
  r.regime = j.at("regime").get<std::string>();
  r.seed = j.at("seed").get<uint64_t>();
  r.failed = j.at("failed").get<bool>();
  r.error = j.at("error").get<std::string>();
  const std::pair<const char*, double ExperimentRow::*> fields[] = {
      {"mse", &ExperimentRow::mse},
      {"budget", &ExperimentRow::budget},
      {"budget_bound", &ExperimentRow::budget_bound},
      {"truthful_frac", &ExperimentRow::truthful_frac},
      {"rationality_frac", &ExperimentRow::rationality_frac},
      {"eta_hat", &ExperimentRow::eta_hat},
      {"delta_empirical", &ExperimentRow::delta_empirical},
      {"epsilon_total", &ExperimentRow::epsilon_total},
      {"gamma_total", &ExperimentRow::gamma_total},
      {"theta_norm", &ExperimentRow::theta_norm}};
  for (const auto& [key, field] : fields) {
    absl::StatusOr<double> v = DoubleFromJson(j.at(key));
    if (!v.ok()) return v.status();
    r.*field = *v;
  }
  return r;
}

json PrivacyToJson(const PrivacyRatioReport& p) {
  json bins = json::array();
  for (const PrivacyRatioBin& b : p.bins) {
    bins.push_back(json{{"count_d", b.count_d},
                        {"count_d_prime", b.count_d_prime},
                        {"log_ratio", DoubleToJson(b.log_ratio)},
                        {"log_ratio_lo", DoubleToJson(b.log_ratio_lo)},
                        {"log_ratio_hi", DoubleToJson(b.log_ratio_hi)},
                        {"occupied", b.occupied},
                        {"consistent", b.consistent}});
  }
  return json{{"bins", bins},
              {"occupied", p.occupied},
              {"consistent", p.consistent},
              {"fraction_consistent", DoubleToJson(p.fraction_consistent)},
              {"max_abs_log_ratio", DoubleToJson(p.max_abs_log_ratio)},
              {"passed", p.passed},
              {"note", p.note}};
}

absl::StatusOr<PrivacyRatioReport> PrivacyFromJson(const json& j) {
  PrivacyRatioReport p;
  for (const json& b : j.at("bins")) {
    PrivacyRatioBin bin;
    bin.count_d = b.at("count_d").get<int64_t>();
    bin.count_d_prime = b.at("count_d_prime").get<int64_t>();
    for (const auto& [key, field] :
         {std::pair{"log_ratio", &PrivacyRatioBin::log_ratio},
          std::pair{"log_ratio_lo", &PrivacyRatioBin::log_ratio_lo},
          std::pair{"log_ratio_hi", &PrivacyRatioBin::log_ratio_hi}}) {
      absl::StatusOr<double> v = DoubleFromJson(b.at(key));
      if (!v.ok()) return v.status();
      bin.*field = *v;
    }
    bin.occupied = b.at("occupied").get<bool>();
    bin.consistent = b.at("consistent").get<bool>();
    p.bins.push_back(bin);
  }
  p.occupied = j.at("occupied").get<int64_t>();
  p.consistent = j.at("consistent").get<int64_t>();
  absl::StatusOr<double> f = DoubleFromJson(j.at("fraction_consistent"));
  absl::StatusOr<double> m = DoubleFromJson(j.at("max_abs_log_ratio"));
  if (!f.ok()) return f.status();
  if (!m.ok()) return m.status();
  p.fraction_consistent = *f;
  p.max_abs_log_ratio = *m;
  p.passed = j.at("passed").get<bool>();
  p.note = j.at("note").get<std::string>();
  return p;
}

}  // namespace

json DoubleToJson(double value) {
  if (std::isnan(value)) return nullptr;
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  return value;
}

absl::StatusOr<double> DoubleFromJson(const json& j) {
  if (j.is_null()) return kNaN;
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    absl::StatusOr<ExtendedReal> e = ExtendedReal::Parse(j.get<std::string>());
    if (!e.ok()) return e.status();
    return e->value();
  }
  return ConfigError(absl::StrCat("expected a number, got ", j.dump()));
}

json PolytopeToJson(const PolytopeSpec& spec) {
  auto bound = [](const ExtendedReal& e) -> json {
    if (e.is_finite()) return e.value();
    return e.ToString();
  };
  return json{{"lower", bound(spec.lower)}, {"upper", bound(spec.upper)}};
}

absl::StatusOr<PolytopeSpec> PolytopeFromJson(const json& j) {
  if (absl::Status s = CheckKeys(j, "polytope", {"lower", "upper"}); !s.ok()) {
    return s;
  }
  PolytopeSpec spec;
  for (const auto& [key, field] :
       {std::pair{"lower", &PolytopeSpec::lower},
        std::pair{"upper", &PolytopeSpec::upper}}) {
    if (!j.contains(key)) continue;
    const json& v = j.at(key);
    absl::StatusOr<ExtendedReal> e =
        v.is_string() ? ExtendedReal::Parse(v.get<std::string>())
        : v.is_number()
            ? ExtendedReal::FromDouble(v.get<double>())
            : absl::StatusOr<ExtendedReal>(ConfigError(
                  absl::StrCat("polytope.", key, " must be a number or "
                               "\"inf\"/\"-inf\"")));
    if (!e.ok()) return e.status();
    spec.*field = *e;
  }
  return spec;
}

json MisreportRuleToJson(const MisreportRule& rule) {
  switch (rule.kind) {
    case MisreportKind::kConstant:
      return json{{"kind", "constant"}, {"value", rule.value}};
    case MisreportKind::kSignFlip:
      return json{{"kind", "sign_flip"}};
    case MisreportKind::kAdditiveNoise:
      return json{{"kind", "additive_noise"}, {"scale", rule.scale}};
    case MisreportKind::kWorstOfGrid:
      return json{{"kind", "worst_of_grid"}, {"grid", rule.grid}};
    case MisreportKind::kTruthful:
      return json{{"kind", "truthful"}};
  }
  return json();
}

absl::StatusOr<MisreportRule> MisreportRuleFromJson(const json& j) {
  try {
    if (absl::Status s = CheckKeys(j, "misreport rule",
                                   {"kind", "value", "scale", "grid"});
        !s.ok()) {
      return s;
    }
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") {
      return MisreportRule::Constant(j.value("value", 0.0));
    }
    if (kind == "sign_flip") return MisreportRule::SignFlip();
    if (kind == "additive_noise") {
      return MisreportRule::AdditiveNoise(j.value("scale", 1.0));
    }
    if (kind == "worst_of_grid") {
      return MisreportRule::WorstOfGrid(
          j.value("grid", std::vector<double>{}));
    }
    if (kind == "truthful") return MisreportRule::Truthful();
    return ConfigError(absl::StrCat("unknown misreport kind '", kind, "'"));
  } catch (const json::exception& e) {
    return ConfigError(absl::StrCat("bad misreport rule: ", e.what()));
  }
}

json MechanismParamsToJson(const MechanismParams& params) {
  json j = MechanismToJson(params);
  j["tau_theta"] = params.settings.tau_theta;
  j["polytope"] = PolytopeToJson(params.settings.polytope);
  j["calibrated"] = params.calibrated;
  j["schedule_delta"] = params.schedule_delta.has_value()
                            ? DoubleToJson(*params.schedule_delta)
                            : json();
  return j;
}

json PrivacyReportToJson(const PrivacyRatioReport& report) {
  return PrivacyToJson(report);
}

json DeviationGainToJson(const DeviationGainEstimate& e) {
  return json{{"eta_hat", DoubleToJson(e.eta_hat)},
              {"std_error", DoubleToJson(e.std_error)},
              {"payment_component", DoubleToJson(e.payment_component)},
              {"privacy_component", DoubleToJson(e.privacy_component)},
              {"deviant_rule", MisreportRuleToJson(e.deviant_rule)},
              {"trials", e.trials}};
}

json ConfigToJson(const ExperimentConfig& c) {
  json j;
  j["model"] = std::string(c.population.model.name());
  j["noise_std"] = c.population.model.noise_std();
  j["polytope"] = PolytopeToJson(c.mechanism.settings.polytope);
  j["population"] = PopulationToJson(c.population);
  j["mechanism"] = MechanismToJson(c.mechanism);
  if (c.schedule.has_value()) {
    j["schedule"] = json{{"delta", c.schedule->delta},
                         {"c", c.schedule->c},
                         {"constants", ConstantsToJson(c.schedule->constants)}};
    if (c.schedule->epsilon.has_value()) {
      j["schedule"]["epsilon"] = *c.schedule->epsilon;
    }
  }
  j["calibrate_c0"] = c.calibrate_c0;
  j["pilot_trials"] = c.pilot_trials;
  j["pilot_populations"] = c.pilot_populations;
  j["fallback"] = MisreportRuleToJson(c.fallback);
  json deviants = json::array();
  for (const MisreportRule& r : c.deviants) {
    deviants.push_back(MisreportRuleToJson(r));
  }
  j["deviants"] = deviants;
  j["rerun_deviant_arm"] = c.rerun_deviant_arm;
  j["deviation_trials"] = c.deviation_trials;
  j["sensitivity_trials"] = c.sensitivity_trials;
  j["privacy_trials"] = c.privacy_trials;
  j["sweep"] = c.sweep;
  j["repeats"] = c.repeats;
  j["paired_sweep"] = c.paired_sweep;
  json metrics = json::array();
  for (Metric m : c.metrics) metrics.push_back(std::string(MetricName(m)));
  j["metrics"] = metrics;
  j["output"] = json{{"dir", c.out_dir}, {"format", c.format}};
  j["master_seed"] = c.master_seed;
  return j;
}

absl::StatusOr<ExperimentConfig> ConfigFromJson(const json& j) {
  try {
    return ConfigFromJsonImpl(j);
  } catch (const json::exception& e) {
    return ConfigError(absl::StrCat("malformed config: ", e.what()));
  }
}

absl::StatusOr<ExperimentConfig> LoadConfig(const std::string& path) {
  absl::StatusOr<std::string> text = ReadFile(path);
  if (!text.ok()) return text.status();
  json j = json::parse(*text, nullptr, /*allow_exceptions=*/false,
                       /*ignore_comments=*/true);
  if (j.is_discarded()) {
    return ConfigError(absl::StrCat(path, ": not valid JSON"));
  }
  absl::StatusOr<ExperimentConfig> c = ConfigFromJson(j);
  if (!c.ok()) {
    return MakeError(ErrorKind::kInvalidArgument,
                     absl::StrCat(path, ": ", c.status().message()));
  }
  return c;
}

json ReportToJson(const ExperimentReport& report) {
  json rows = json::array();
  for (const ExperimentRow& r : report.rows) rows.push_back(RowToJson(r));
  json slopes = json::array();
  for (const SlopeSummary& s : report.slopes) {
    slopes.push_back(json{{"metric", s.metric},
                          {"slope", DoubleToJson(s.fit.slope)},
                          {"intercept", DoubleToJson(s.fit.intercept)},
                          {"ci_low", DoubleToJson(s.fit.ci_low)},
                          {"ci_high", DoubleToJson(s.fit.ci_high)},
                          {"points", s.fit.points},
                          {"missing_points", s.missing_points}});
  }
  json j{{"columns", std::vector<std::string>(std::begin(kReportColumns),
                                              std::end(kReportColumns))},
         {"config", report.config},
         {"rows", rows},
         {"slopes", slopes},
         {"C0", DoubleToJson(report.C0)},
         {"calibrated", report.calibrated},
         {"note", report.note}};
  if (report.privacy.has_value()) j["privacy"] = PrivacyToJson(*report.privacy);
  return j;
}

absl::StatusOr<ExperimentReport> ReportFromJson(const json& j) {
  try {
    ExperimentReport report;
    report.config = j.at("config");
    for (const json& r : j.at("rows")) {
      absl::StatusOr<ExperimentRow> row = RowFromJson(r);
      if (!row.ok()) return row.status();
      report.rows.push_back(*std::move(row));
    }
    for (const json& s : j.at("slopes")) {
      SlopeSummary summary;
      summary.metric = s.at("metric").get<std::string>();
      for (const auto& [key, field] :
           {std::pair{"slope", &RateFit::slope},
            std::pair{"intercept", &RateFit::intercept},
            std::pair{"ci_low", &RateFit::ci_low},
            std::pair{"ci_high", &RateFit::ci_high}}) {
        absl::StatusOr<double> v = DoubleFromJson(s.at(key));
        if (!v.ok()) return v.status();
        summary.fit.*field = *v;
      }
      summary.fit.points = s.at("points").get<int64_t>();
      summary.missing_points = s.at("missing_points").get<int64_t>();
      report.slopes.push_back(summary);
    }
    absl::StatusOr<double> c0 = DoubleFromJson(j.at("C0"));
    if (!c0.ok()) return c0.status();
    report.C0 = *c0;
    report.calibrated = j.at("calibrated").get<bool>();
    report.note = j.at("note").get<std::string>();
    if (j.contains("privacy")) {
      absl::StatusOr<PrivacyRatioReport> p = PrivacyFromJson(j.at("privacy"));
      if (!p.ok()) return p.status();
      report.privacy = *std::move(p);
    }
    return report;
  } catch (const json::exception& e) {
    return ConfigError(absl::StrCat("malformed report: ", e.what()));
  }
}

std::string ReportToCsv(const ExperimentReport& report) {
  std::string out = absl::StrJoin(kReportColumns, ",");
  out += '\n';
  for (const ExperimentRow& r : report.rows) {
    const double metric_fields[] = {r.mse,           r.budget,
                                    r.truthful_frac, r.rationality_frac,
                                    r.eta_hat,       r.delta_empirical,
                                    r.epsilon_total, r.gamma_total};
    absl::StrAppend(&out, r.n, ",", r.repeat, ",", r.model, ",", r.regime);
    for (double v : metric_fields) {
      absl::StrAppend(&out, ",", FormatDouble(r.failed ? kNaN : v));
    }
    absl::StrAppend(&out, ",", r.seed, "\n");
  }
  return out;
}

absl::Status WriteFile(const std::string& path, absl::string_view contents) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    return MakeError(ErrorKind::kIo,
                     absl::StrCat("cannot open ", path, " for writing"));
  }
  f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!f) {
    return MakeError(ErrorKind::kIo, absl::StrCat("write failed: ", path));
  }
  return absl::OkStatus();
}

absl::StatusOr<std::string> ReadFile(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    return MakeError(ErrorKind::kIo, absl::StrCat("cannot open ", path));
  }
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

absl::StatusOr<std::string> EmitReport(const ExperimentReport& report,
                                       absl::string_view format,
                                       const std::string& dir) {
  if (format != "csv" && format != "json") {
    return ConfigError(absl::StrCat("unknown report format '", format, "'"));
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    return MakeError(ErrorKind::kIo,
                     absl::StrCat("cannot create ", dir, ": ", ec.message()));
  }
  const std::string path =
      (std::filesystem::path(dir) / absl::StrCat("report.", format)).string();
  const std::string body = format == "csv"
                               ? ReportToCsv(report)
                               : ReportToJson(report).dump(2) + "\n";
  if (absl::Status s = WriteFile(path, body); !s.ok()) return s;
  return path;
}

std::string DatasetToCsv(const Dataset& data) {
  std::string out;
  for (int64_t j = 0; j < data.d(); ++j) absl::StrAppend(&out, "x", j + 1, ",");
  out += "y\n";
  for (int64_t i = 0; i < data.n(); ++i) {
    for (int64_t j = 0; j < data.d(); ++j) {
      absl::StrAppend(&out, FormatDouble(data.X(i, j)), ",");
    }
    absl::StrAppend(&out, FormatDouble(data.y(i)), "\n");
  }
  return out;
}

absl::StatusOr<Dataset> DatasetFromCsv(absl::string_view text) {
  std::vector<absl::string_view> lines =
      absl::StrSplit(text, '\n', absl::SkipWhitespace());
  if (lines.empty()) return ConfigError("dataset CSV is empty");
  std::vector<absl::string_view> header = absl::StrSplit(lines[0], ',');
  const int64_t d = static_cast<int64_t>(header.size()) - 1;
  if (d < 1) return ConfigError("dataset CSV needs columns x1..xd,y");
  for (int64_t j = 0; j < d; ++j) {
    if (absl::StripAsciiWhitespace(header[j]) != absl::StrCat("x", j + 1)) {
      return ConfigError(absl::StrCat("dataset CSV column ", j + 1,
                                      " must be named x", j + 1));
    }
  }
  if (absl::StripAsciiWhitespace(header.back()) != "y") {
    return ConfigError("dataset CSV last column must be y");
  }
  const int64_t n = static_cast<int64_t>(lines.size()) - 1;
  Dataset data{Eigen::MatrixXd(n, d), Eigen::VectorXd(n)};
  for (int64_t i = 0; i < n; ++i) {
    std::vector<absl::string_view> cells = absl::StrSplit(lines[i + 1], ',');
    if (static_cast<int64_t>(cells.size()) != d + 1) {
      return ConfigError(
          absl::StrCat("dataset CSV line ", i + 2, " has ", cells.size(),
                       " fields, expected ", d + 1));
    }
    for (int64_t j = 0; j <= d; ++j) {
      double v;
      if (!absl::SimpleAtod(absl::StripAsciiWhitespace(cells[j]), &v)) {
        return ConfigError(absl::StrCat("dataset CSV line ", i + 2,
                                        ": bad number '", cells[j], "'"));
      }
      if (j < d) {
        data.X(i, j) = v;
      } else {
        data.y(i) = v;
      }
    }
  }
  return data;
}

absl::Status WritePopulation(const Population& population,
                             const std::string& path) {
  if (absl::Status s = WriteFile(path, DatasetToCsv(population.TrueData()));
      !s.ok()) {
    return s;
  }
  json side{{"theta_star", VectorToJson(population.theta_star)},
            {"lambda", population.lambda},
            {"model", std::string(population.model.name())},
            {"noise_std", population.model.noise_std()},
            {"seed", population.seed},
            {"costs", VectorToJson(population.costs)}};
  return WriteFile(path + ".json", side.dump(2) + "\n");
}

absl::StatusOr<Population> ReadPopulation(const std::string& path) {
  absl::StatusOr<std::string> csv = ReadFile(path);
  if (!csv.ok()) return csv.status();
  absl::StatusOr<Dataset> data = DatasetFromCsv(*csv);
  if (!data.ok()) return data.status();
  absl::StatusOr<std::string> side_text = ReadFile(path + ".json");
  if (!side_text.ok()) return side_text.status();
  json side = json::parse(*side_text, nullptr, false);
  if (side.is_discarded()) {
    return ConfigError(absl::StrCat(path, ".json: not valid JSON"));
  }
  try {
    Population pop;
    pop.X = data->X;
    pop.y_true = data->y;
    absl::StatusOr<ModelKind> model =
        ModelKind::FromName(side.at("model").get<std::string>(),
                            side.value("noise_std", 1.0));
    if (!model.ok()) return model.status();
    pop.model = *model;
    pop.lambda = side.at("lambda").get<double>();
    pop.seed = side.at("seed").get<uint64_t>();
    absl::StatusOr<Eigen::VectorXd> theta = VectorFromJson(side.at("theta_star"));
    absl::StatusOr<Eigen::VectorXd> costs = VectorFromJson(side.at("costs"));
    if (!theta.ok()) return theta.status();
    if (!costs.ok()) return costs.status();
    if (theta->size() != pop.d() || costs->size() != pop.n()) {
      return ConfigError(absl::StrCat(path, ": sidecar does not match CSV"));
    }
    pop.theta_star = *theta;
    pop.costs = *costs;
    return pop;
  } catch (const json::exception& e) {
    return ConfigError(absl::StrCat(path, ".json: ", e.what()));
  }
}

json OutcomeToJson(const MechanismOutcome& o) {
  json groups = json::array();
  for (uint8_t g : o.group) groups.push_back(g);
  json noise = json::array();
  for (const NoiseSample& s : o.noise) {
    noise.push_back(json{{"seed", s.seed}, {"magnitude", s.magnitude}});
  }
  return json{{"theta_bar_full", VectorToJson(o.theta_bar_full)},
              {"theta_bar_g0", VectorToJson(o.theta_bar_g0)},
              {"theta_bar_g1", VectorToJson(o.theta_bar_g1)},
              {"payments", VectorToJson(o.payments)},
              {"group", groups},
              {"budget", DoubleToJson(o.budget)},
              {"account",
               json{{"epsilon_total", o.account.epsilon_total},
                    {"gamma_total", o.account.gamma_total}}},
              {"privacy",
               json{{"epsilon", o.privacy.epsilon},
                    {"delta_n", o.privacy.delta_n},
                    {"delta_half", o.privacy.delta_half},
                    {"gamma_n", o.privacy.gamma_n},
                    {"gamma_half", o.privacy.gamma_half}}},
              {"noise_refs", noise},
              {"payment_mode", std::string(PaymentModeName(o.payment_mode))},
              {"calibrated", o.calibrated}};
}

std::string PaymentsToCsv(const MechanismOutcome& outcome,
                          const Eigen::VectorXd& costs, double unit_cost) {
  std::string out = "agent_index,group,payment,cost,utility\n";
  for (int64_t i = 0; i < outcome.payments.size(); ++i) {
    const double cost = i < costs.size() ? costs(i) : kNaN;
    absl::StrAppend(&out, i, ",", static_cast<int>(outcome.group[i]), ",",
                    FormatDouble(outcome.payments(i)), ",", FormatDouble(cost),
                    ",", FormatDouble(outcome.payments(i) - cost * unit_cost),
                    "\n");
  }
  return out;
}

absl::Status AppendNoiseAudit(const MechanismOutcome& outcome,
                              const std::string& path, ReportMode mode) {
  if (mode == ReportMode::kRelease) {
    return MakeError(ErrorKind::kInvalidArgument,
                     "noise audit logging is disabled in release mode");
  }
  std::ofstream f(path, std::ios::app);
  if (!f) {
    return MakeError(ErrorKind::kIo,
                     absl::StrCat("cannot open ", path, " for appending"));
  }
  const Release order[] = {Release::kFull, Release::kHalf0, Release::kHalf1};
  for (size_t k = 0; k < outcome.noise.size() && k < 3; ++k) {
    f << json{{"which", std::string(ReleaseName(order[k]))},
              {"seed", outcome.noise[k].seed},
              {"magnitude", outcome.noise[k].magnitude}}
             .dump()
      << '\n';
  }
  if (!f) {
    return MakeError(ErrorKind::kIo, absl::StrCat("write failed: ", path));
  }
  return absl::OkStatus();
}

}  // namespace tglm
