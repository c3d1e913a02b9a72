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

#include "tglm/estimators.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "Eigen/Eigenvalues"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "tglm/status.h"

namespace tglm {
namespace {

// Rows per leaf of the pairwise reduction tree.
constexpr int64_t kLeafRows = 16;

void GramRange(const Eigen::MatrixXd& X, int64_t lo, int64_t hi,
               Eigen::MatrixXd* out) {
  const int64_t d = X.cols();
  if (hi - lo <= kLeafRows) {
    out->setZero(d, d);
    for (int64_t i = lo; i < hi; ++i) {
      out->noalias() += X.row(i).transpose() * X.row(i);
    }
    return;
  }
  const int64_t mid = lo + (hi - lo) / 2;
  Eigen::MatrixXd right;
  GramRange(X, lo, mid, out);
  GramRange(X, mid, hi, &right);
  *out += right;
}

void CrossRange(const Eigen::MatrixXd& X, const Eigen::VectorXd& z, int64_t lo,
                int64_t hi, Eigen::VectorXd* out) {
  if (hi - lo <= kLeafRows) {
    out->setZero(X.cols());
    for (int64_t i = lo; i < hi; ++i) *out += z(i) * X.row(i).transpose();
    return;
  }
  const int64_t mid = lo + (hi - lo) / 2;
  Eigen::VectorXd right;
  CrossRange(X, z, lo, mid, out);
  CrossRange(X, z, mid, hi, &right);
  *out += right;
}

bool AllFinite(const Eigen::MatrixXd& m) { return m.allFinite(); }

}  // namespace

absl::Status ValidateDataset(const Dataset& data, const ModelKind& model) {
  if (data.d() < 1 || data.n() < data.d()) {
    return MakeError(ErrorKind::kInvalidArgument,
                     absl::StrCat("dataset needs n >= d >= 1, got n=", data.n(),
                                  " d=", data.d()));
  }
  if (data.y.size() != data.n()) {
    return MakeError(ErrorKind::kInvalidArgument,
                     "response vector length differs from row count");
  }
  if (!AllFinite(data.X) || !data.y.allFinite()) {
    return MakeError(ErrorKind::kInvalidArgument, "dataset has non-finite entries");
  }
  for (int64_t i = 0; i < data.n(); ++i) {
    const double y = data.y(i);
    if (model.family() == ModelFamily::kLogistic && y != 1.0 && y != -1.0) {
      return MakeError(ErrorKind::kInvalidArgument,
                       absl::StrCat("logistic response ", y, " at row ", i,
                                    " is not +/-1"));
    }
    if (model.family() == ModelFamily::kPoisson &&
        (y < 0.0 || y != std::floor(y))) {
      return MakeError(ErrorKind::kInvalidArgument,
                       absl::StrCat("Poisson response ", y, " at row ", i,
                                    " is not a nonnegative integer"));
    }
  }
  return absl::OkStatus();
}

absl::string_view RegimeName(Regime regime) {
  return regime == Regime::kSubGaussian ? "subgaussian" : "heavy";
}

absl::StatusOr<Regime> ParseRegime(absl::string_view name) {
  if (name == "subgaussian") return Regime::kSubGaussian;
  if (name == "heavy") return Regime::kHeavyTailed;
  return MakeError(ErrorKind::kInvalidArgument,
                   absl::StrCat("unknown regime '", name,
                                "' (expected subgaussian or heavy)"));
}

absl::Status ValidateSettings(const EstimatorSettings& settings,
                              const ModelKind& model) {
  if (!(settings.tau1 > 0.0) || !(settings.tau2 > 0.0) ||
      !(settings.tau_theta > 0.0)) {
    return MakeError(ErrorKind::kInvalidArgument,
                     "tau1, tau2 and tau_theta must be positive");
  }
  if (!(settings.condition_cap > 1.0)) {
    return MakeError(ErrorKind::kInvalidArgument,
                     "condition_cap must exceed 1");
  }
  if (settings.regime == Regime::kHeavyTailed &&
      model.family() != ModelFamily::kLinearGaussian) {
    return MakeError(ErrorKind::kInvalidArgument,
                     "the heavy-tailed regime is defined for the linear model "
                     "only");
  }
  return ValidatePolytope(settings.polytope, model);
}

Eigen::MatrixXd PairwiseGram(const Eigen::MatrixXd& X) {
  Eigen::MatrixXd g;
  GramRange(X, 0, X.rows(), &g);
  return g;
}

Eigen::VectorXd PairwiseCrossProduct(const Eigen::MatrixXd& X,
                                     const Eigen::VectorXd& z) {
  Eigen::VectorXd b;
  CrossRange(X, z, 0, X.rows(), &b);
  return b;
}

absl::StatusOr<Eigen::VectorXd> SolveLeastSquares(const Eigen::MatrixXd& X,
                                                  const Eigen::VectorXd& z,
                                                  double condition_cap) {
  const Eigen::MatrixXd gram = PairwiseGram(X);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) {
    return MakeError(ErrorKind::kSingularGram,
                     "eigendecomposition of the Gram matrix failed");
  }
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double lo = lambda.minCoeff();
  const double hi = lambda.maxCoeff();
  if (!(lo > 0.0) || hi / lo > condition_cap) {
    return MakeError(
        ErrorKind::kSingularGram,
        absl::StrFormat("Gram matrix condition number %g exceeds cap %g "
                        "(n=%d, d=%d)",
                        lo > 0.0 ? hi / lo : HUGE_VAL, condition_cap, X.rows(),
                        X.cols()));
  }
  const Eigen::VectorXd rhs = eig.eigenvectors().transpose() *
                              PairwiseCrossProduct(X, z);
  return eig.eigenvectors() * rhs.cwiseQuotient(lambda);
}

absl::StatusOr<Eigen::VectorXd> GlmEstimate(const Dataset& data,
                                            const LinkBundle& bundle,
                                            const EstimatorSettings& settings) {
  if (settings.regime != Regime::kSubGaussian) {
    return MakeError(ErrorKind::kInvalidArgument,
                     "GlmEstimate requires the sub-Gaussian regime");
  }
  Eigen::VectorXd z(data.n());
  for (int64_t i = 0; i < data.n(); ++i) {
    const double mu = ProjectPolytope(ClipResponse(data.y(i), settings.tau2),
                                      settings.polytope);
    absl::StatusOr<double> a = bundle.APrimeInv(mu);
    if (!a.ok()) return a.status();
    z(i) = *a;
  }
  return SolveLeastSquares(data.X, z, settings.condition_cap);
}

Eigen::VectorXd L4Shrink(const Eigen::VectorXd& x, double tau1) {
  const double norm4 = std::sqrt(std::sqrt(x.array().square().square().sum()));
  if (norm4 <= tau1 || norm4 == 0.0) return x;
  return x * (tau1 / norm4);
}

Eigen::MatrixXd L4ShrinkRows(const Eigen::MatrixXd& X, double tau1) {
  Eigen::MatrixXd out(X.rows(), X.cols());
  for (int64_t i = 0; i < X.rows(); ++i) {
    out.row(i) = L4Shrink(X.row(i).transpose(), tau1).transpose();
  }
  return out;
}

absl::StatusOr<Eigen::VectorXd> HeavyEstimate(const Dataset& data,
                                              const EstimatorSettings& settings) {
  if (settings.regime != Regime::kHeavyTailed) {
    return MakeError(ErrorKind::kInvalidArgument,
                     "HeavyEstimate requires the heavy-tailed regime");
  }
  Eigen::VectorXd z(data.n());
  for (int64_t i = 0; i < data.n(); ++i) {
    z(i) = ClipResponse(data.y(i), settings.tau2);
  }
  return SolveLeastSquares(L4ShrinkRows(data.X, settings.tau1), z,
                           settings.condition_cap);
}

absl::StatusOr<Eigen::VectorXd> Estimate(const Dataset& data,
                                         const LinkBundle& bundle,
                                         const EstimatorSettings& settings) {
  if (settings.regime == Regime::kHeavyTailed) {
    return HeavyEstimate(data, settings);
  }
  return GlmEstimate(data, bundle, settings);
}

Eigen::VectorXd ProjectBall(const Eigen::VectorXd& theta, double tau_theta) {
  const double norm = theta.norm();
  if (norm <= tau_theta) return theta;
  return theta * (tau_theta / norm);
}

double SensitivityBound::Recompute() const {
  return C0 * SensitivityShape(regime, n, d, kappa_A1);
}

double SensitivityShape(Regime regime, int64_t n, int64_t d, double kappa_A1) {
  const double nn = static_cast<double>(n);
  const double dd = static_cast<double>(d);
  if (regime == Regime::kHeavyTailed) {
    return std::pow(dd, 0.75) * std::pow(std::log(nn) / nn, 0.125);
  }
  return kappa_A1 * std::sqrt(dd * std::log(nn) / nn);
}

absl::StatusOr<SensitivityBound> SensitivityBoundSubGaussian(int64_t n,
                                                             int64_t d,
                                                             double kappa_A1,
                                                             double C0) {
  if (n < 2 || d < 1 || !(C0 > 0.0) || !(kappa_A1 >= 0.0)) {
    return MakeError(ErrorKind::kInvalidArgument,
                     absl::StrCat("sensitivity bound needs n >= 2, d >= 1, "
                                  "C0 > 0; got n=", n, " d=", d, " C0=", C0));
  }
  SensitivityBound b;
  b.regime = Regime::kSubGaussian;
  b.C0 = C0;
  b.kappa_A1 = kappa_A1;
  b.n = n;
  b.d = d;
  b.delta_n = b.Recompute();
  return b;
}

absl::StatusOr<SensitivityBound> SensitivityBoundHeavy(int64_t n, int64_t d,
                                                       double C0) {
  if (n < 2 || d < 1 || !(C0 > 0.0)) {
    return MakeError(ErrorKind::kInvalidArgument,
                     absl::StrCat("sensitivity bound needs n >= 2, d >= 1, "
                                  "C0 > 0; got n=", n, " d=", d, " C0=", C0));
  }
  SensitivityBound b;
  b.regime = Regime::kHeavyTailed;
  b.C0 = C0;
  b.n = n;
  b.d = d;
  b.delta_n = b.Recompute();
  return b;
}

double CalibrateC0(double pilot_max, double shape) {
  return 1.5 * pilot_max / shape;
}

absl::StatusOr<double> EmpiricalSensitivity(const Dataset& data,
                                            const LinkBundle& bundle,
                                            const EstimatorSettings& settings,
                                            const ReplacementSampler& sampler,
                                            int64_t trials, uint64_t seed) {
  if (trials < 1) {
    return MakeError(ErrorKind::kInvalidArgument, "trials must be >= 1");
  }
  absl::StatusOr<Eigen::VectorXd> base = Estimate(data, bundle, settings);
  if (!base.ok()) return base.status();
  Dataset neighbor = data;
  double worst = 0.0;
  for (int64_t t = 0; t < trials; ++t) {
    RandomStream rng(DeriveSeed(seed, {static_cast<uint64_t>(t)}));
    std::uniform_int_distribution<int64_t> pick(0, data.n() - 1);
    const int64_t row = pick(rng);
    auto [x, y] = sampler(rng);
    neighbor.X.row(row) = x.transpose();
    neighbor.y(row) = y;
    absl::StatusOr<Eigen::VectorXd> moved = Estimate(neighbor, bundle, settings);
    if (!moved.ok()) return moved.status();
    worst = std::max(worst, (*moved - *base).norm());
    neighbor.X.row(row) = data.X.row(row);
    neighbor.y(row) = data.y(row);
  }
  return worst;
}

}  // namespace tglm
