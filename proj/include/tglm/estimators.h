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

// Closed-form non-private estimators for the sub-Gaussian GLM and the
// heavy-tailed linear regimes, the projections they rely on, and the
// sensitivity bounds that scale the privacy noise.

#ifndef TGLM_ESTIMATORS_H_
#define TGLM_ESTIMATORS_H_

#include <cstdint>
#include <functional>
#include <utility>

#include "Eigen/Core"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "tglm/links.h"
#include "tglm/random.h"

namespace tglm {

// Rows of X are covariates; y holds the (possibly misreported) responses.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;

  int64_t n() const { return X.rows(); }
  int64_t d() const { return X.cols(); }
};

// n >= d >= 1, finite entries, and responses inside the model's response set
// ({-1, +1} for logistic, nonnegative integers for Poisson).
absl::Status ValidateDataset(const Dataset& data, const ModelKind& model);

enum class Regime { kSubGaussian, kHeavyTailed };

absl::string_view RegimeName(Regime regime);
absl::StatusOr<Regime> ParseRegime(absl::string_view name);

struct EstimatorSettings {
  // l4 covariate threshold; only used by the heavy-tailed regime.
  double tau1 = 1.0;
  double tau2 = 1.0;
  double tau_theta = 1.0;
  PolytopeSpec polytope;
  Regime regime = Regime::kSubGaussian;
  // Largest accepted condition number of the Gram matrix.
  double condition_cap = 1e12;
};

// Heavy-tailed estimation is only defined for the linear model.
absl::Status ValidateSettings(const EstimatorSettings& settings,
                              const ModelKind& model);

// X^T X and X^T z accumulated with a fixed pairwise reduction tree over rows,
// so the rounding pattern depends only on n and never on thread count.
Eigen::MatrixXd PairwiseGram(const Eigen::MatrixXd& X);
Eigen::VectorXd PairwiseCrossProduct(const Eigen::MatrixXd& X,
                                     const Eigen::VectorXd& z);

// (X^T X)^-1 X^T z through a symmetric eigendecomposition. SingularGram when
// the smallest eigenvalue is nonpositive or the condition number exceeds cap.
absl::StatusOr<Eigen::VectorXd> SolveLeastSquares(const Eigen::MatrixXd& X,
                                                  const Eigen::VectorXd& z,
                                                  double condition_cap);

// (X^T X)^-1 X^T (A')^-1(Pi_Mbar(clip(y, tau2))).
absl::StatusOr<Eigen::VectorXd> GlmEstimate(const Dataset& data,
                                            const LinkBundle& bundle,
                                            const EstimatorSettings& settings);

// min(||x||_4, tau1) x / ||x||_4, with 0 mapped to 0.
Eigen::VectorXd L4Shrink(const Eigen::VectorXd& x, double tau1);
Eigen::MatrixXd L4ShrinkRows(const Eigen::MatrixXd& X, double tau1);

// Least squares on l4-shrunk covariates and clipped responses.
absl::StatusOr<Eigen::VectorXd> HeavyEstimate(const Dataset& data,
                                              const EstimatorSettings& settings);

// Dispatches on settings.regime.
absl::StatusOr<Eigen::VectorXd> Estimate(const Dataset& data,
                                         const LinkBundle& bundle,
                                         const EstimatorSettings& settings);

// Euclidean projection onto the ball of radius tau_theta.
Eigen::VectorXd ProjectBall(const Eigen::VectorXd& theta, double tau_theta);

struct SensitivityBound {
  double delta_n = 0.0;
  Regime regime = Regime::kSubGaussian;
  double C0 = 1.0;
  // Unused (zero) in the heavy-tailed regime.
  double kappa_A1 = 0.0;
  int64_t n = 0;
  int64_t d = 0;
  // C0 was fitted to data, which voids the privacy accounting.
  bool calibrated = false;

  // Re-evaluates the formula at the stored constants.
  double Recompute() const;
};

// Delta_n = C0 kappa_A1 sqrt(d ln n / n).
absl::StatusOr<SensitivityBound> SensitivityBoundSubGaussian(int64_t n,
                                                             int64_t d,
                                                             double kappa_A1,
                                                             double C0);
// Delta_n = C0 d^{3/4} (ln n / n)^{1/8}.
absl::StatusOr<SensitivityBound> SensitivityBoundHeavy(int64_t n, int64_t d,
                                                       double C0);

// The bound with C0 = 1 for the given regime.
double SensitivityShape(Regime regime, int64_t n, int64_t d, double kappa_A1);

// C0 = 1.5 * pilot_max / shape: the calibrated mode.
double CalibrateC0(double pilot_max, double shape);

// Draws one fresh (x, y) pair from the population that produced the data.
using ReplacementSampler =
    std::function<std::pair<Eigen::VectorXd, double>(RandomStream&)>;

// Largest ||theta_hat(D) - theta_hat(D')|| over `trials` random single-row
// replacements. Trial t uses the stream DeriveSeed(seed, {t}) to pick the row
// and the replacement, so the result does not depend on evaluation order.
absl::StatusOr<double> EmpiricalSensitivity(const Dataset& data,
                                            const LinkBundle& bundle,
                                            const EstimatorSettings& settings,
                                            const ReplacementSampler& sampler,
                                            int64_t trials, uint64_t seed);

}  // namespace tglm

#endif  // TGLM_ESTIMATORS_H_
