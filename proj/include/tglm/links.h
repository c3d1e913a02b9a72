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

// Link-function algebra for the three supported GLM families, the closed
// response sets used to make the inverse link well defined, and the per-model
// constants that parameterize the sensitivity, accuracy, rationality and
// budget bounds.

#ifndef TGLM_LINKS_H_
#define TGLM_LINKS_H_

#include <cstdint>
#include <string>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"

namespace tglm {

enum class ModelFamily { kLinearGaussian, kLogistic, kPoisson };

// GLM family together with its known scale parameter phi.
class ModelKind {
 public:
  // Linear model with unit noise.
  ModelKind() : family_(ModelFamily::kLinearGaussian), noise_std_(1.0) {}

  // Gaussian linear regression y = <x, theta> + N(0, noise_std^2).
  static absl::StatusOr<ModelKind> LinearGaussian(double noise_std);
  // Responses in {-1, +1} with P(y = 1) = e^a / (e^a + e^-a).
  static ModelKind Logistic();
  // Count responses with mean e^a.
  static ModelKind Poisson();

  // Parses "linear" | "logistic" | "poisson". noise_std is only consulted for
  // the linear family.
  static absl::StatusOr<ModelKind> FromName(absl::string_view name,
                                            double noise_std = 1.0);

  ModelFamily family() const { return family_; }
  // Zero for the non-Gaussian families.
  double noise_std() const { return noise_std_; }
  // phi: noise_std^2 for the linear family, 1 otherwise.
  double scale() const;
  absl::string_view name() const;

  friend bool operator==(const ModelKind& a, const ModelKind& b) {
    return a.family_ == b.family_ && a.noise_std_ == b.noise_std_;
  }

 private:
  ModelKind(ModelFamily family, double noise_std)
      : family_(family), noise_std_(noise_std) {}

  ModelFamily family_;
  double noise_std_;
};

// A real number or an explicit +/- infinity marker. Infinite bounds are never
// stored as sentinel floats.
class ExtendedReal {
 public:
  enum class Kind : uint8_t { kNegativeInfinity, kFinite, kPositiveInfinity };

  static ExtendedReal Finite(double value) {
    return ExtendedReal(Kind::kFinite, value);
  }
  static ExtendedReal PositiveInfinity() {
    return ExtendedReal(Kind::kPositiveInfinity, 0.0);
  }
  static ExtendedReal NegativeInfinity() {
    return ExtendedReal(Kind::kNegativeInfinity, 0.0);
  }
  // Maps IEEE infinities onto the markers. NaN is rejected.
  static absl::StatusOr<ExtendedReal> FromDouble(double value);
  // Accepts "inf", "+inf", "-inf" or a decimal literal.
  static absl::StatusOr<ExtendedReal> Parse(absl::string_view text);

  Kind kind() const { return kind_; }
  bool is_finite() const { return kind_ == Kind::kFinite; }
  // Arithmetic view; infinite markers become IEEE infinities.
  double value() const;
  // "inf", "-inf", or the shortest round-tripping decimal.
  std::string ToString() const;

  friend bool operator==(const ExtendedReal& a, const ExtendedReal& b) {
    return a.kind_ == b.kind_ && (a.kind_ != Kind::kFinite || a.value_ == b.value_);
  }

 private:
  ExtendedReal(Kind kind, double value) : kind_(kind), value_(value) {}

  Kind kind_;
  double value_;
};

// Closed interval [lower, upper] inside the closure of the interior of the
// response moment polytope.
struct PolytopeSpec {
  ExtendedReal lower = ExtendedReal::NegativeInfinity();
  ExtendedReal upper = ExtendedReal::PositiveInfinity();

  static PolytopeSpec RealLine() { return PolytopeSpec{}; }
  static PolytopeSpec Interval(ExtendedReal lower, ExtendedReal upper) {
    return PolytopeSpec{lower, upper};
  }

  friend bool operator==(const PolytopeSpec& a, const PolytopeSpec& b) {
    return a.lower == b.lower && a.upper == b.upper;
  }
};

// Checks lower <= upper and that the interval lies in [-1, 1] (logistic) or
// [0, inf) (Poisson).
absl::Status ValidatePolytope(const PolytopeSpec& spec, const ModelKind& model);

// The closed-form quintuple (A, A', A'', (A')^-1, [(A')^-1]') for one family.
class LinkBundle {
 public:
  explicit LinkBundle(ModelKind model) : model_(model) {}

  const ModelKind& model() const { return model_; }

  double A(double a) const;
  double APrime(double a) const;
  double ASecond(double a) const;
  // DomainError outside the image of A' (|mu| >= 1 for logistic, mu <= 0 for
  // Poisson).
  absl::StatusOr<double> APrimeInv(double mu) const;
  absl::StatusOr<double> APrimeInvDeriv(double mu) const;

 private:
  ModelKind model_;
};

LinkBundle MakeLinkBundle(const ModelKind& model);

// sgn(y) * min(|y|, tau2).
double ClipResponse(double y, double tau2);

// Nearest point of [spec.lower, spec.upper] to y.
double ProjectPolytope(double y, const PolytopeSpec& spec);

// Response sets used by the corollary schedules:
//   linear   -> (-inf, inf)
//   logistic -> [-1 + 2 n^-delta, 1 - 2 n^-delta]
//   Poisson  -> [n^-delta, inf)
// delta must lie in (1/4, 1/3) for linear/Poisson and (1/4, 1/2) for logistic.
absl::StatusOr<PolytopeSpec> PresetPolytope(const ModelKind& model, int64_t n,
                                            double delta);

struct LinkConstants {
  // max |[(A')^-1]'| over A'([-tau_theta tau1, tau_theta tau1]) and M-bar.
  double kappa_A0 = 0.0;
  // max |(A')^-1| over M-bar intersected with [-tau2, tau2].
  double kappa_A1 = 0.0;
  // max |A''| over [-tau_theta tau1, tau_theta tau1].
  double kappa_A2 = 0.0;
  // max |A'| over [-tau_theta tau1, tau_theta tau1].
  double M_A = 0.0;
  // max distance from a clipped response to M-bar.
  double eps_Mbar = 0.0;
  double tau1 = 0.0;
  double tau2 = 0.0;
  double tau_theta = 0.0;
};

// Evaluates the constants by endpoint analysis: on the supported families
// every function involved is monotone or unimodal on the relevant intervals,
// so the maxima are attained at interval endpoints (or at 0 for the logistic
// A''). An infinite constant, e.g. kappa_A0 when M-bar touches a pole of
// [(A')^-1]', is reported as DomainError.
absl::StatusOr<LinkConstants> ComputeLinkConstants(const LinkBundle& bundle,
                                                   const PolytopeSpec& spec,
                                                   double tau1, double tau2,
                                                   double tau_theta);

}  // namespace tglm

#endif  // TGLM_LINKS_H_
