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

// End-to-end truthful private estimation: random halving, three estimators,
// norm-exponential noise, ball projection and peer-prediction payments, plus
// the rationality and budget diagnostics and the per-model parameter
// schedules.

#ifndef TGLM_MECHANISM_H_
#define TGLM_MECHANISM_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "Eigen/Core"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "tglm/estimators.h"
#include "tglm/links.h"
#include "tglm/privacy.h"
#include "tglm/random.h"

namespace tglm {

// Upper bound F(epsilon, gamma) on the per-unit privacy cost:
// scale * (1 + gamma)^{gamma_power} * epsilon^{exponent}.
struct CostFunctionSpec {
  double exponent = 4.0;
  // 1 for the (1 + gamma) forms, 0 for the gamma-free epsilon^2 form.
  double gamma_power = 1.0;
  double scale = 1.0;

  static CostFunctionSpec Quartic();
  static CostFunctionSpec Ninth();
  static CostFunctionSpec Square();
  static CostFunctionSpec Power(double p);
  static CostFunctionSpec Zero();

  double operator()(double epsilon, double gamma) const;
};

enum class PaymentMode {
  // a1 - a2 (p - 2pq + q^2) as is.
  kRaw,
  // max(0, raw).
  kNonNegative,
};

absl::string_view PaymentModeName(PaymentMode mode);

// a1 - a2 (p - 2pq + q^2).
double BrierPayment(double a1, double a2, double p, double q);

struct MechanismParams {
  EstimatorSettings settings;
  double epsilon = 1.0;
  // Failure probabilities of the full- and half-data sensitivity bounds.
  double gamma_n = 0.0;
  double gamma_half = 0.0;
  // Sensitivity constant; calibrated marks a data-fitted C0.
  double C0 = 1.0;
  bool calibrated = false;
  // Multiplies both noise scales. Anything but 1 breaks the privacy
  // guarantee; exists for negative controls.
  double noise_multiplier = 1.0;
  double a1 = 0.0;
  double a2 = 1.0;
  PaymentMode payment_mode = PaymentMode::kRaw;
  double alpha = 0.05;
  double beta = 0.05;
  // Threshold tau_{alpha,beta} agents play against.
  double tau_threshold = 0.0;
  CostFunctionSpec cost_function;
  std::optional<double> schedule_delta;
  int64_t posterior_samples = 10000;
  uint64_t seed = 0;
};

absl::Status ValidateMechanismParams(const MechanismParams& params,
                                     const ModelKind& model);

// Largest |A'(<x, theta>)| the payments can see: M_A for the GLM regime and
// d^{1/4} tau1 tau_theta for the heavy-tailed regime.
absl::StatusOr<double> PredictionBound(const LinkBundle& bundle,
                                       const MechanismParams& params,
                                       int64_t d);

// a2 (M + 3 M^2) + tau F(2 epsilon, gamma_n + 2 gamma_half).
double RationalityFloor(double a2, double prediction_bound, double tau,
                        double privacy_cost);

// n (a1 + a2 (M + M^2)).
double BudgetBound(int64_t n, double a1, double a2, double prediction_bound);

// Order-independent sum: sorted values, compensated accumulation.
double StableSum(const Eigen::VectorXd& values);

// Prior over theta shared by the generator and the payment rule.
struct PriorSpec {
  int64_t d = 1;
  double tau_theta = 1.0;
};

// Draws of the truncated prior reused for every agent's importance sampler.
struct PriorBank {
  Eigen::MatrixXd thetas;  // samples x d
};

PriorBank DrawPriorBank(const PriorSpec& prior, int64_t samples,
                        RandomStream& rng);

// E[theta | (x, y_hat)]. Linear: conjugate Gaussian closed form with
// Sigma_0 = (tau_theta^2 / d) I, ball-projected. Logistic and Poisson:
// self-normalized importance sampling over the prior bank; DegenerateWeights
// when the effective sample size drops below 50.
absl::StatusOr<Eigen::VectorXd> PosteriorMean(const PriorSpec& prior,
                                              const Eigen::VectorXd& x,
                                              double y_hat,
                                              const ModelKind& model,
                                              const PriorBank* bank);

// Convenience overload that draws its own bank (samples >= 1000).
absl::StatusOr<Eigen::VectorXd> PosteriorMean(const PriorSpec& prior,
                                              const Eigen::VectorXd& x,
                                              double y_hat,
                                              const ModelKind& model,
                                              int64_t samples,
                                              RandomStream& rng);

struct MechanismOutcome {
  Eigen::VectorXd theta_bar_full;
  Eigen::VectorXd theta_bar_g0;
  Eigen::VectorXd theta_bar_g1;
  Eigen::VectorXd payments;
  // Group (0 or 1) of each agent.
  std::vector<uint8_t> group;
  // Predictions fed to the scoring rule.
  Eigen::VectorXd p;
  Eigen::VectorXd q;
  double budget = 0.0;
  PrivacyParams privacy;
  PrivacyAccount account;
  // Noise draws in release order: full, half0, half1.
  std::vector<NoiseSample> noise;
  PaymentMode payment_mode = PaymentMode::kRaw;
  bool calibrated = false;
};

// Mechanism with the estimator releases done and payments pending. Seeds:
// partition, noise and prior bank draw from streams derived from
// params.seed, so two runs that differ only in one agent's report share every
// random choice.
class Mechanism {
 public:
  // Steps 1-7: partition, estimators, sensitivities, noise, projection.
  static absl::StatusOr<Mechanism> Create(const Dataset& reported,
                                          const LinkBundle& bundle,
                                          const MechanismParams& params);

  int64_t n() const { return data_.n(); }
  uint8_t group(int64_t i) const { return group_[i]; }
  const Eigen::VectorXd& theta_bar(Release which) const;
  const PrivacyParams& privacy() const { return privacy_; }

  struct Payment {
    double payment = 0.0;
    double p = 0.0;
    double q = 0.0;
  };
  // Step 8 for one agent; depends only on (x_i, y_hat_i) and the opposite
  // group's release.
  absl::StatusOr<Payment> PaymentFor(int64_t i) const;
  // Payment agent i would receive had it reported y_hat. The opposite
  // group's release does not see agent i's report, so this equals a full
  // rerun on the modified dataset with the same seed, bit for bit.
  absl::StatusOr<Payment> PaymentFor(int64_t i, double y_hat) const;

  absl::StatusOr<MechanismOutcome> Finish() const;

 private:
  Mechanism(Dataset data, LinkBundle bundle, MechanismParams params)
      : data_(std::move(data)), bundle_(bundle), params_(std::move(params)) {}

  Dataset data_;
  // Shrunk covariates in the heavy-tailed regime, else a copy of X.
  Eigen::MatrixXd payment_X_;
  LinkBundle bundle_;
  MechanismParams params_;
  std::vector<uint8_t> group_;
  Eigen::VectorXd theta_bar_[3];
  std::vector<NoiseSample> noise_;
  PrivacyParams privacy_;
  PriorBank bank_;
};

// Create + Finish.
absl::StatusOr<MechanismOutcome> RunMechanism(const Dataset& reported,
                                              const LinkBundle& bundle,
                                              const MechanismParams& params);

// Fraction of agents with cost <= tau whose payment minus
// cost * F(account) is nonnegative; 1 when no agent qualifies.
double RationalityCheck(const MechanismOutcome& outcome,
                        const Eigen::VectorXd& costs,
                        const CostFunctionSpec& F, double tau);

// Theta(.) constants of a schedule; every one defaults to 1.
struct ScheduleConstants {
  double tau1 = 1.0;
  double tau2 = 1.0;
  double alpha = 1.0;
  double beta = 1.0;
  double a2 = 1.0;
  // Sub-Gaussian covariate radius: tau1 = covariate_radius * sigma sqrt(ln n).
  double covariate_radius = 2.0;
  // gamma_n = gamma_scale / n.
  double gamma_scale = 1.0;
  double C0 = 1.0;
};

struct ScheduleInputs {
  ModelKind model;
  Regime regime = Regime::kSubGaussian;
  int64_t n = 1000;
  int64_t d = 1;
  double delta = 0.3;
  // beta = n^{-c}.
  double c = 1.0;
  double lambda = 1.0;
  // Covariate scale sigma of the sub-Gaussian population.
  double sigma = 1.0;
  double tau_theta = 1.0;
  // Holds epsilon fixed instead of letting it decay with n; the other knobs
  // (thresholds, alpha, a2, a1 floor) follow the schedule. Used to trace the
  // accuracy rate of the estimator itself at constant privacy.
  std::optional<double> epsilon;
  ScheduleConstants constants;
};

// Every knob of the mechanism for the given model at size n: response set,
// thresholds, epsilon, alpha, beta, a2, F, tau_{alpha,beta} (closed-form
// bound) and a1 at the rationality floor. Rejects delta outside the model's
// interval.
absl::StatusOr<MechanismParams> CorollarySchedule(const ScheduleInputs& in);

}  // namespace tglm

#endif  // TGLM_MECHANISM_H_
