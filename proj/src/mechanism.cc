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

#include "tglm/mechanism.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <utility>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "tglm/population.h"
#include "tglm/status.h"

namespace tglm {
namespace {

// Stream tags, one per random stage.
constexpr uint64_t kPartitionTag = 0x7061727469ULL;
constexpr uint64_t kNoiseTag = 0x6e6f697365ULL;
constexpr uint64_t kPriorTag = 0x7072696f72ULL;

constexpr double kMinEffectiveSamples = 50.0;

int ReleaseIndex(Release which) {
  switch (which) {
    case Release::kFull:
      return 0;
    case Release::kHalf0:
      return 1;
    case Release::kHalf1:
      return 2;
  }
  return 0;
}

Dataset Subset(const Dataset& data, const std::vector<int64_t>& rows) {
  Dataset out{Eigen::MatrixXd(rows.size(), data.d()),
              Eigen::VectorXd(rows.size())};
  for (size_t k = 0; k < rows.size(); ++k) {
    out.X.row(k) = data.X.row(rows[k]);
    out.y(k) = data.y(rows[k]);
  }
  return out;
}

absl::Status CheckDelta(double delta, double lo, double hi,
                        absl::string_view what) {
  if (!(delta > lo && delta < hi)) {
    return MakeError(ErrorKind::kInvalidArgument,
                     absl::StrFormat("delta = %g outside the %s schedule "
                                     "interval (%g, %g)",
                                     delta, what, lo, hi));
  }
  return absl::OkStatus();
}

}  // namespace

CostFunctionSpec CostFunctionSpec::Quartic() { return {4.0, 1.0, 1.0}; }
CostFunctionSpec CostFunctionSpec::Ninth() { return {9.0, 1.0, 1.0}; }
CostFunctionSpec CostFunctionSpec::Square() { return {2.0, 0.0, 1.0}; }
CostFunctionSpec CostFunctionSpec::Power(double p) { return {p, 1.0, 1.0}; }
CostFunctionSpec CostFunctionSpec::Zero() { return {4.0, 1.0, 0.0}; }

double CostFunctionSpec::operator()(double epsilon, double gamma) const {
  if (scale == 0.0) return 0.0;
  return scale * std::pow(1.0 + gamma, gamma_power) * std::pow(epsilon, exponent);
}

absl::string_view PaymentModeName(PaymentMode mode) {
  return mode == PaymentMode::kRaw ? "raw" : "nonnegative";
}

double BrierPayment(double a1, double a2, double p, double q) {
  return a1 - a2 * (p - 2.0 * p * q + q * q);
}

absl::Status ValidateMechanismParams(const MechanismParams& params,
                                     const ModelKind& model) {
  if (absl::Status s = ValidateSettings(params.settings, model); !s.ok()) {
    return s;
  }
  if (!(params.epsilon > 0.0) || !(params.C0 > 0.0) ||
      !(params.noise_multiplier > 0.0)) {
    return MakeError(ErrorKind::kInvalidArgument,
                     "epsilon, C0 and noise_multiplier must be positive");
  }
  if (!(params.gamma_n >= 0.0 && params.gamma_n <= 1.0) ||
      !(params.gamma_half >= 0.0 && params.gamma_half <= 1.0)) {
    return MakeError(ErrorKind::kInvalidArgument, "gamma must lie in [0, 1]");
  }
  if (!(params.alpha > 0.0 && params.alpha < 1.0) ||
      !(params.beta > 0.0 && params.beta < 1.0)) {
    return MakeError(ErrorKind::kInvalidArgument,
                     "alpha and beta must lie in (0, 1)");
  }
  if (!(params.a1 >= 0.0) || !(params.a2 >= 0.0)) {
    return MakeError(ErrorKind::kInvalidArgument,
                     "payment scales a1, a2 must be nonnegative");
  }
  if (model.family() != ModelFamily::kLinearGaussian &&
      params.posterior_samples < 1000) {
    return MakeError(ErrorKind::kInvalidArgument,
                     "importance sampling needs posterior_samples >= 1000");
  }
  return absl::OkStatus();
}

absl::StatusOr<double> PredictionBound(const LinkBundle& bundle,
                                       const MechanismParams& params,
                                       int64_t d) {
  const EstimatorSettings& s = params.settings;
  if (s.regime == Regime::kHeavyTailed) {
    return std::pow(static_cast<double>(d), 0.25) * s.tau1 * s.tau_theta;
  }
  absl::StatusOr<LinkConstants> c =
      ComputeLinkConstants(bundle, s.polytope, s.tau1, s.tau2, s.tau_theta);
  if (!c.ok()) return c.status();
  return c->M_A;
}

double RationalityFloor(double a2, double prediction_bound, double tau,
                        double privacy_cost) {
  const double m = prediction_bound;
  return a2 * (m + 3.0 * m * m) + tau * privacy_cost;
}

double BudgetBound(int64_t n, double a1, double a2, double prediction_bound) {
  const double m = prediction_bound;
  return static_cast<double>(n) * (a1 + a2 * (m + m * m));
}

double StableSum(const Eigen::VectorXd& values) {
  std::vector<double> v(values.data(), values.data() + values.size());
  std::sort(v.begin(), v.end());
  double sum = 0.0, comp = 0.0;
  for (double x : v) {
    const double t = sum + x;
    comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

PriorBank DrawPriorBank(const PriorSpec& prior, int64_t samples,
                        RandomStream& rng) {
  PriorBank bank;
  bank.thetas.resize(samples, prior.d);
  for (int64_t s = 0; s < samples; ++s) {
    bank.thetas.row(s) =
        SampleTruncatedPrior(prior.d, prior.tau_theta, rng).transpose();
  }
  return bank;
}

absl::StatusOr<Eigen::VectorXd> PosteriorMean(const PriorSpec& prior,
                                              const Eigen::VectorXd& x,
                                              double y_hat,
                                              const ModelKind& model,
                                              const PriorBank* bank) {
  if (model.family() == ModelFamily::kLinearGaussian) {
    // (x x^T / s^2 + I / s0)^-1 x y / s^2 = s0 x y / (s^2 + s0 ||x||^2).
    const double s0 =
        prior.tau_theta * prior.tau_theta / static_cast<double>(prior.d);
    const double phi = model.scale();
    return ProjectBall(x * (s0 * y_hat / (phi + s0 * x.squaredNorm())),
                       prior.tau_theta);
  }
  if (bank == nullptr || bank->thetas.rows() == 0) {
    return MakeError(ErrorKind::kInvalidArgument,
                     "importance sampling needs a prior bank");
  }
  // Log-likelihood y a - A(a) per prior draw, in array form so the
  // transcendental calls vectorize.
  const Eigen::ArrayXd a = (bank->thetas * x).array();
  Eigen::ArrayXd logw;
  if (model.family() == ModelFamily::kLogistic) {
    const Eigen::ArrayXd abs_a = a.abs();
    logw = y_hat * a - abs_a - (-2.0 * abs_a).exp().log1p();
  } else {
    logw = y_hat * a - a.exp();
  }
  const Eigen::VectorXd w = (logw - logw.maxCoeff()).exp().matrix();
  const double sum = w.sum();
  const double ess = sum * sum / w.squaredNorm();
  if (!(ess >= kMinEffectiveSamples)) {
    return MakeError(ErrorKind::kDegenerateWeights,
                     absl::StrFormat("effective sample size %.1f < %g for "
                                     "report %g",
                                     ess, kMinEffectiveSamples, y_hat));
  }
  return bank->thetas.transpose() * w / sum;
}

absl::StatusOr<Eigen::VectorXd> PosteriorMean(const PriorSpec& prior,
                                              const Eigen::VectorXd& x,
                                              double y_hat,
                                              const ModelKind& model,
                                              int64_t samples,
                                              RandomStream& rng) {
  if (model.family() == ModelFamily::kLinearGaussian) {
    return PosteriorMean(prior, x, y_hat, model, nullptr);
  }
  if (samples < 1000) {
    return MakeError(ErrorKind::kInvalidArgument,
                     "importance sampling needs samples >= 1000");
  }
  PriorBank bank = DrawPriorBank(prior, samples, rng);
  return PosteriorMean(prior, x, y_hat, model, &bank);
}

absl::StatusOr<Mechanism> Mechanism::Create(const Dataset& reported,
                                            const LinkBundle& bundle,
                                            const MechanismParams& params) {
  const ModelKind& model = bundle.model();
  if (absl::Status s = ValidateMechanismParams(params, model); !s.ok()) return s;
  if (absl::Status s = ValidateDataset(reported, model); !s.ok()) return s;
  const int64_t n = reported.n();
  const int64_t d = reported.d();
  const int64_t half = n / 2;
  if (half < d || n - half < d) {
    return MakeError(ErrorKind::kPartitionTooSmall,
                     absl::StrCat("n = ", n, " cannot be halved into groups of "
                                  "at least d = ", d, " rows"));
  }
  const EstimatorSettings& settings = params.settings;

  Mechanism m(reported, bundle, params);

  // Step 2: Fisher-Yates shuffle, first floor(n/2) positions form group 0.
  std::vector<int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  RandomStream part_rng(DeriveSeed(params.seed, {kPartitionTag}));
  for (int64_t i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int64_t> pick(0, i);
    std::swap(order[i], order[pick(part_rng)]);
  }
  m.group_.assign(n, 1);
  std::vector<int64_t> rows[2];
  for (int64_t k = 0; k < n; ++k) {
    if (k < half) m.group_[order[k]] = 0;
  }
  for (int64_t i = 0; i < n; ++i) rows[m.group_[i]].push_back(i);

  // Step 3: the three non-private estimators.
  absl::StatusOr<Eigen::VectorXd> hats[3] = {
      Estimate(reported, bundle, settings),
      Estimate(Subset(reported, rows[0]), bundle, settings),
      Estimate(Subset(reported, rows[1]), bundle, settings)};
  for (const auto& h : hats) {
    if (!h.ok()) return h.status();
  }

  // Step 4: sensitivities at n and floor(n/2).
  double shape_n, shape_half;
  if (settings.regime == Regime::kHeavyTailed) {
    shape_n = SensitivityShape(settings.regime, n, d, 0.0);
    shape_half = SensitivityShape(settings.regime, half, d, 0.0);
  } else {
    absl::StatusOr<LinkConstants> c = ComputeLinkConstants(
        bundle, settings.polytope, settings.tau1, settings.tau2,
        settings.tau_theta);
    if (!c.ok()) return c.status();
    shape_n = SensitivityShape(settings.regime, n, d, c->kappa_A1);
    shape_half = SensitivityShape(settings.regime, half, d, c->kappa_A1);
  }
  m.privacy_.epsilon = params.epsilon;
  m.privacy_.delta_n = params.C0 * shape_n;
  m.privacy_.delta_half = params.C0 * shape_half;
  m.privacy_.gamma_n = params.gamma_n;
  m.privacy_.gamma_half = params.gamma_half;
  if (absl::Status s = ValidatePrivacyParams(m.privacy_); !s.ok()) return s;

  // Steps 5-7: independent noise per release, then ball projection.
  PrivacyParams noisy = m.privacy_;
  noisy.delta_n *= params.noise_multiplier;
  noisy.delta_half *= params.noise_multiplier;
  const Release order_of_release[3] = {Release::kFull, Release::kHalf0,
                                       Release::kHalf1};
  for (int k = 0; k < 3; ++k) {
    RandomStream noise_rng(
        DeriveSeed(params.seed, {kNoiseTag, static_cast<uint64_t>(k)}));
    PrivateRelease r = Privatize(*hats[k], noisy, order_of_release[k], noise_rng);
    m.theta_bar_[k] = ProjectBall(r.theta, settings.tau_theta);
    m.noise_.push_back(std::move(r.noise));
  }

  m.payment_X_ = settings.regime == Regime::kHeavyTailed
                     ? L4ShrinkRows(reported.X, settings.tau1)
                     : reported.X;
  if (model.family() != ModelFamily::kLinearGaussian) {
    RandomStream prior_rng(DeriveSeed(params.seed, {kPriorTag}));
    m.bank_ = DrawPriorBank(PriorSpec{d, settings.tau_theta},
                            params.posterior_samples, prior_rng);
  }
  return m;
}

const Eigen::VectorXd& Mechanism::theta_bar(Release which) const {
  return theta_bar_[ReleaseIndex(which)];
}

absl::StatusOr<Mechanism::Payment> Mechanism::PaymentFor(int64_t i) const {
  return PaymentFor(i, data_.y(i));
}

absl::StatusOr<Mechanism::Payment> Mechanism::PaymentFor(int64_t i,
                                                         double y_hat) const {
  const Eigen::VectorXd x = data_.X.row(i).transpose();
  absl::StatusOr<Eigen::VectorXd> post =
      PosteriorMean(PriorSpec{data_.d(), params_.settings.tau_theta}, x, y_hat,
                    bundle_.model(), &bank_);
  if (!post.ok()) return post.status();
  const Eigen::VectorXd& peer = theta_bar_[group_[i] == 0 ? 2 : 1];
  Payment out;
  if (params_.settings.regime == Regime::kHeavyTailed) {
    const Eigen::VectorXd xt = payment_X_.row(i).transpose();
    out.p = xt.dot(peer);
    out.q = xt.dot(*post);
  } else {
    out.p = bundle_.APrime(x.dot(peer));
    out.q = bundle_.APrime(x.dot(*post));
  }
  out.payment = BrierPayment(params_.a1, params_.a2, out.p, out.q);
  if (params_.payment_mode == PaymentMode::kNonNegative) {
    out.payment = std::max(0.0, out.payment);
  }
  return out;
}

absl::StatusOr<MechanismOutcome> Mechanism::Finish() const {
  MechanismOutcome out;
  out.theta_bar_full = theta_bar_[0];
  out.theta_bar_g0 = theta_bar_[1];
  out.theta_bar_g1 = theta_bar_[2];
  out.group = group_;
  const int64_t n = data_.n();
  out.payments.resize(n);
  out.p.resize(n);
  out.q.resize(n);
  for (int64_t i = 0; i < n; ++i) {
    absl::StatusOr<Payment> pay = PaymentFor(i);
    if (!pay.ok()) return pay.status();
    out.payments(i) = pay->payment;
    out.p(i) = pay->p;
    out.q(i) = pay->q;
  }
  out.budget = StableSum(out.payments);
  out.privacy = privacy_;
  out.account = ComposeAccount(privacy_);
  out.noise = noise_;
  out.payment_mode = params_.payment_mode;
  out.calibrated = params_.calibrated;
  return out;
}

absl::StatusOr<MechanismOutcome> RunMechanism(const Dataset& reported,
                                              const LinkBundle& bundle,
                                              const MechanismParams& params) {
  absl::StatusOr<Mechanism> m = Mechanism::Create(reported, bundle, params);
  if (!m.ok()) return m.status();
  return m->Finish();
}

double RationalityCheck(const MechanismOutcome& outcome,
                        const Eigen::VectorXd& costs,
                        const CostFunctionSpec& F, double tau) {
  const double unit =
      F(outcome.account.epsilon_total, outcome.account.gamma_total);
  int64_t eligible = 0, rational = 0;
  for (int64_t i = 0; i < costs.size(); ++i) {
    if (costs(i) > tau) continue;
    ++eligible;
    if (outcome.payments(i) - costs(i) * unit >= 0.0) ++rational;
  }
  return eligible == 0 ? 1.0
                       : static_cast<double>(rational) /
                             static_cast<double>(eligible);
}

absl::StatusOr<MechanismParams> CorollarySchedule(const ScheduleInputs& in) {
  const ScheduleConstants& k = in.constants;
  if (in.n < 4 || in.d < 1) {
    return MakeError(ErrorKind::kInvalidArgument,
                     absl::StrCat("schedule needs n >= 4 and d >= 1, got n=",
                                  in.n, " d=", in.d));
  }
  if (!(in.c > 0.0) || !(in.lambda > 0.0) || !(in.sigma > 0.0) ||
      !(in.tau_theta > 0.0)) {
    return MakeError(ErrorKind::kInvalidArgument,
                     "c, lambda, sigma and tau_theta must be positive");
  }
  const double n = static_cast<double>(in.n);
  const double ln = std::log(n);
  const double delta = in.delta;
  MechanismParams p;
  p.schedule_delta = delta;
  p.C0 = k.C0;
  p.settings.tau_theta = in.tau_theta;
  p.settings.regime = in.regime;
  p.beta = k.beta * std::pow(n, -in.c);
  p.gamma_n = std::min(1.0, k.gamma_scale / n);
  p.gamma_half = std::min(1.0, k.gamma_scale / std::floor(n / 2.0));
  p.cost_function = CostFunctionSpec::Quartic();

  if (in.regime == Regime::kHeavyTailed) {
    if (in.model.family() != ModelFamily::kLinearGaussian) {
      return MakeError(ErrorKind::kInvalidArgument,
                       "the heavy-tailed schedule is defined for the linear "
                       "model only");
    }
    if (absl::Status s = CheckDelta(delta, 1.0 / 9.0, 1.0 / 8.0, "heavy");
        !s.ok()) {
      return s;
    }
    p.settings.polytope = PolytopeSpec::RealLine();
    p.settings.tau1 = k.tau1 * std::pow(n / ln, 0.25);
    p.settings.tau2 = k.tau2 * std::pow(n / ln, 0.125);
    p.epsilon = std::pow(n, -delta);
    p.alpha = k.alpha * std::pow(n, -1.0 + delta);
    p.a2 = k.a2 * std::pow(n, -0.5 - 9.0 * delta);
    p.cost_function = CostFunctionSpec::Ninth();
  } else {
    const double upper =
        in.model.family() == ModelFamily::kLogistic ? 0.5 : 1.0 / 3.0;
    if (absl::Status s = CheckDelta(delta, 0.25, upper, in.model.name());
        !s.ok()) {
      return s;
    }
    absl::StatusOr<PolytopeSpec> poly = PresetPolytope(in.model, in.n, delta);
    if (!poly.ok()) return poly.status();
    p.settings.polytope = *poly;
    p.settings.tau1 = k.covariate_radius * in.sigma * std::sqrt(ln);
    p.alpha = k.alpha * std::pow(n, -3.0 * delta);
    switch (in.model.family()) {
      case ModelFamily::kLinearGaussian:
        p.epsilon = std::pow(n, -delta);
        p.settings.tau2 = k.tau2 * std::pow(n, (1.0 - 3.0 * delta) / 2.0);
        p.a2 = k.a2 * std::pow(n, -4.0 * delta);
        break;
      case ModelFamily::kLogistic:
        p.epsilon = std::pow(n, -delta);
        p.settings.tau2 = k.tau2;
        p.a2 = k.a2 * std::pow(n, -4.0 * delta);
        break;
      case ModelFamily::kPoisson:
        p.epsilon = std::pow(n, -3.0 * delta);
        p.settings.tau2 = k.tau2 * std::pow(n, 0.25);
        p.a2 = k.a2 * std::pow(n, -6.0 * delta);
        break;
    }
  }
  if (in.epsilon.has_value()) {
    if (!(*in.epsilon > 0.0)) {
      return MakeError(ErrorKind::kInvalidArgument,
                       "fixed epsilon must be positive");
    }
    p.epsilon = *in.epsilon;
  }
  if (!(p.alpha < 1.0) || !(p.beta < 1.0)) {
    return MakeError(ErrorKind::kInvalidArgument,
                     absl::StrFormat("schedule gives alpha = %g, beta = %g; "
                                     "both must be below 1",
                                     p.alpha, p.beta));
  }
  absl::StatusOr<double> tau = TauAlphaBetaBound(p.alpha, p.beta, in.lambda);
  if (!tau.ok()) return tau.status();
  p.tau_threshold = *tau;
  absl::StatusOr<double> m = PredictionBound(LinkBundle(in.model), p, in.d);
  if (!m.ok()) return m.status();
  const PrivacyAccount account = ComposeAccount(
      PrivacyParams{p.epsilon, 1.0, 1.0, p.gamma_n, p.gamma_half});
  p.a1 = RationalityFloor(
      p.a2, *m, p.tau_threshold,
      p.cost_function(account.epsilon_total, account.gamma_total));
  return p;
}

}  // namespace tglm
