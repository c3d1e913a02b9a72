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

#include "tglm/links.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <string>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "tglm/status.h"

namespace tglm {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double Sign(double y) { return (y > 0.0) - (y < 0.0); }

// Distance from y to the interval.
double DistanceTo(double y, const PolytopeSpec& spec) {
  return std::abs(y - ProjectPolytope(y, spec));
}

}  // namespace

absl::StatusOr<ModelKind> ModelKind::LinearGaussian(double noise_std) {
  if (!(noise_std > 0.0) || !std::isfinite(noise_std)) {
    return MakeError(ErrorKind::kInvalidArgument,
                     absl::StrCat("noise_std must be positive and finite, got ",
                                  noise_std));
  }
  return ModelKind(ModelFamily::kLinearGaussian, noise_std);
}

ModelKind ModelKind::Logistic() { return ModelKind(ModelFamily::kLogistic, 0.0); }

ModelKind ModelKind::Poisson() { return ModelKind(ModelFamily::kPoisson, 0.0); }

absl::StatusOr<ModelKind> ModelKind::FromName(absl::string_view name,
                                              double noise_std) {
  if (name == "linear") return LinearGaussian(noise_std);
  if (name == "logistic") return Logistic();
  if (name == "poisson") return Poisson();
  return MakeError(ErrorKind::kInvalidArgument,
                   absl::StrCat("unknown model '", name,
                                "' (expected linear, logistic or poisson)"));
}

double ModelKind::scale() const {
  return family_ == ModelFamily::kLinearGaussian ? noise_std_ * noise_std_
                                                 : 1.0;
}

absl::string_view ModelKind::name() const {
  switch (family_) {
    case ModelFamily::kLinearGaussian:
      return "linear";
    case ModelFamily::kLogistic:
      return "logistic";
    case ModelFamily::kPoisson:
      return "poisson";
  }
  return "unknown";
}

absl::StatusOr<ExtendedReal> ExtendedReal::FromDouble(double value) {
  if (std::isnan(value)) {
    return MakeError(ErrorKind::kInvalidArgument, "NaN is not an extended real");
  }
  if (value == kInf) return PositiveInfinity();
  if (value == -kInf) return NegativeInfinity();
  return Finite(value);
}

absl::StatusOr<ExtendedReal> ExtendedReal::Parse(absl::string_view text) {
  if (text == "inf" || text == "+inf") return PositiveInfinity();
  if (text == "-inf") return NegativeInfinity();
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() ||
      !std::isfinite(value)) {
    return MakeError(ErrorKind::kInvalidArgument,
                     absl::StrCat("cannot parse extended real '", text, "'"));
  }
  return Finite(value);
}

double ExtendedReal::value() const {
  switch (kind_) {
    case Kind::kNegativeInfinity:
      return -kInf;
    case Kind::kPositiveInfinity:
      return kInf;
    case Kind::kFinite:
      return value_;
  }
  return value_;
}

std::string ExtendedReal::ToString() const {
  switch (kind_) {
    case Kind::kNegativeInfinity:
      return "-inf";
    case Kind::kPositiveInfinity:
      return "inf";
    case Kind::kFinite:
      break;
  }
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value_);
  return std::string(buf, ptr);
}

absl::Status ValidatePolytope(const PolytopeSpec& spec, const ModelKind& model) {
  const double lo = spec.lower.value();
  const double hi = spec.upper.value();
  if (spec.lower.kind() == ExtendedReal::Kind::kPositiveInfinity ||
      spec.upper.kind() == ExtendedReal::Kind::kNegativeInfinity || lo > hi) {
    return MakeError(ErrorKind::kInvalidArgument,
                     absl::StrCat("polytope [", spec.lower.ToString(), ", ",
                                  spec.upper.ToString(), "] is empty"));
  }
  switch (model.family()) {
    case ModelFamily::kLinearGaussian:
      return absl::OkStatus();
    case ModelFamily::kLogistic:
      if (lo < -1.0 || hi > 1.0) {
        return MakeError(ErrorKind::kInvalidArgument,
                         "logistic polytope must lie inside [-1, 1]");
      }
      return absl::OkStatus();
    case ModelFamily::kPoisson:
      if (lo < 0.0) {
        return MakeError(ErrorKind::kInvalidArgument,
                         "Poisson polytope must lie inside [0, inf)");
      }
      return absl::OkStatus();
  }
  return absl::OkStatus();
}

double LinkBundle::A(double a) const {
  switch (model_.family()) {
    case ModelFamily::kLinearGaussian:
      return 0.5 * a * a;
    case ModelFamily::kLogistic:
      // log(e^-a + e^a) without overflow.
      return std::abs(a) + std::log1p(std::exp(-2.0 * std::abs(a)));
    case ModelFamily::kPoisson:
      return std::exp(a);
  }
  return 0.0;
}

double LinkBundle::APrime(double a) const {
  switch (model_.family()) {
    case ModelFamily::kLinearGaussian:
      return a;
    case ModelFamily::kLogistic:
      // (e^{2a} - 1) / (e^{2a} + 1).
      return std::tanh(a);
    case ModelFamily::kPoisson:
      return std::exp(a);
  }
  return 0.0;
}

double LinkBundle::ASecond(double a) const {
  switch (model_.family()) {
    case ModelFamily::kLinearGaussian:
      return 1.0;
    case ModelFamily::kLogistic: {
      // 4 / (e^a + e^-a)^2 = sech^2(a).
      const double c = std::cosh(a);
      return 1.0 / (c * c);
    }
    case ModelFamily::kPoisson:
      return std::exp(a);
  }
  return 0.0;
}

absl::StatusOr<double> LinkBundle::APrimeInv(double mu) const {
  switch (model_.family()) {
    case ModelFamily::kLinearGaussian:
      return mu;
    case ModelFamily::kLogistic:
      if (!(std::abs(mu) < 1.0)) {
        return MakeError(ErrorKind::kDomainError,
                         absl::StrCat("logistic inverse link undefined at ", mu));
      }
      return std::atanh(mu);
    case ModelFamily::kPoisson:
      if (!(mu > 0.0)) {
        return MakeError(ErrorKind::kDomainError,
                         absl::StrCat("Poisson inverse link undefined at ", mu));
      }
      return std::log(mu);
  }
  return mu;
}

absl::StatusOr<double> LinkBundle::APrimeInvDeriv(double mu) const {
  switch (model_.family()) {
    case ModelFamily::kLinearGaussian:
      return 1.0;
    case ModelFamily::kLogistic:
      if (!(std::abs(mu) < 1.0)) {
        return MakeError(ErrorKind::kDomainError,
                         absl::StrCat("1/(1-a^2) has a pole at ", mu));
      }
      return 1.0 / (1.0 - mu * mu);
    case ModelFamily::kPoisson:
      if (!(mu > 0.0)) {
        return MakeError(ErrorKind::kDomainError,
                         absl::StrCat("1/a undefined at ", mu));
      }
      return 1.0 / mu;
  }
  return 1.0;
}

LinkBundle MakeLinkBundle(const ModelKind& model) { return LinkBundle(model); }

double ClipResponse(double y, double tau2) {
  return Sign(y) * std::min(std::abs(y), tau2);
}

double ProjectPolytope(double y, const PolytopeSpec& spec) {
  return std::clamp(y, spec.lower.value(), spec.upper.value());
}

absl::StatusOr<PolytopeSpec> PresetPolytope(const ModelKind& model, int64_t n,
                                            double delta) {
  if (n < 2) {
    return MakeError(ErrorKind::kInvalidArgument,
                     absl::StrCat("preset polytope needs n >= 2, got ", n));
  }
  const double upper_delta =
      model.family() == ModelFamily::kLogistic ? 0.5 : 1.0 / 3.0;
  if (!(delta > 0.25 && delta < upper_delta)) {
    return MakeError(
        ErrorKind::kInvalidArgument,
        absl::StrFormat("delta = %g outside the %s schedule interval (1/4, %g)",
                        delta, model.name(), upper_delta));
  }
  const double shrink = std::pow(static_cast<double>(n), -delta);
  switch (model.family()) {
    case ModelFamily::kLinearGaussian:
      return PolytopeSpec::RealLine();
    case ModelFamily::kLogistic:
      return PolytopeSpec::Interval(ExtendedReal::Finite(-1.0 + 2.0 * shrink),
                                    ExtendedReal::Finite(1.0 - 2.0 * shrink));
    case ModelFamily::kPoisson:
      return PolytopeSpec::Interval(ExtendedReal::Finite(shrink),
                                    ExtendedReal::PositiveInfinity());
  }
  return PolytopeSpec::RealLine();
}

absl::StatusOr<LinkConstants> ComputeLinkConstants(const LinkBundle& bundle,
                                                   const PolytopeSpec& spec,
                                                   double tau1, double tau2,
                                                   double tau_theta) {
  if (!(tau1 > 0.0) || !(tau2 > 0.0) || !(tau_theta > 0.0)) {
    return MakeError(ErrorKind::kInvalidArgument,
                     "tau1, tau2 and tau_theta must be positive");
  }
  const ModelKind& model = bundle.model();
  if (absl::Status s = ValidatePolytope(spec, model); !s.ok()) return s;

  LinkConstants out;
  out.tau1 = tau1;
  out.tau2 = tau2;
  out.tau_theta = tau_theta;

  const double lo = spec.lower.value();
  const double hi = spec.upper.value();
  const double a_max = tau_theta * tau1;

  // M-bar intersected with the clipping window.
  const double window_lo = std::max(lo, -tau2);
  const double window_hi = std::min(hi, tau2);
  if (window_lo > window_hi) {
    return MakeError(ErrorKind::kInvalidArgument,
                     "polytope does not meet the clipping window [-tau2, tau2]");
  }

  // Extreme values of the clipped response set; the distance to an interval
  // is convex so its maximum over the set sits at one of them.
  double response_lo = -tau2;
  double response_hi = tau2;

  switch (model.family()) {
    case ModelFamily::kLinearGaussian:
      out.kappa_A0 = 1.0;
      out.kappa_A1 = std::max(std::abs(window_lo), std::abs(window_hi));
      out.kappa_A2 = 1.0;
      out.M_A = a_max;
      break;
    case ModelFamily::kLogistic: {
      // |[(A')^-1]'| = 1/(1 - a^2) grows with |a|. On A'([-a_max, a_max]) its
      // maximum is cosh^2(a_max).
      const double c = std::cosh(a_max);
      const double bound_abs = std::max(std::abs(lo), std::abs(hi));
      const double polytope_part =
          bound_abs < 1.0 ? 1.0 / (1.0 - bound_abs * bound_abs) : kInf;
      out.kappa_A0 = std::max(c * c, polytope_part);
      const double w = std::max(std::abs(window_lo), std::abs(window_hi));
      out.kappa_A1 = w < 1.0 ? std::atanh(w) : kInf;
      out.kappa_A2 = bundle.ASecond(0.0);
      out.M_A = std::tanh(a_max);
      response_lo = -std::min(1.0, tau2);
      response_hi = std::min(1.0, tau2);
      break;
    }
    case ModelFamily::kPoisson:
      out.kappa_A0 = std::max(std::exp(a_max), lo > 0.0 ? 1.0 / lo : kInf);
      out.kappa_A1 = window_lo > 0.0
                         ? std::max(std::abs(std::log(window_lo)),
                                    std::abs(std::log(window_hi)))
                         : kInf;
      out.kappa_A2 = std::exp(a_max);
      out.M_A = std::exp(a_max);
      response_lo = 0.0;
      break;
  }
  out.eps_Mbar = std::max(DistanceTo(response_lo, spec),
                          DistanceTo(response_hi, spec));

  const double fields[] = {out.kappa_A0, out.kappa_A1, out.kappa_A2, out.M_A,
                           out.eps_Mbar};
  for (double v : fields) {
    if (!std::isfinite(v)) {
      return MakeError(
          ErrorKind::kDomainError,
          absl::StrCat("link constant is infinite for polytope [",
                       spec.lower.ToString(), ", ", spec.upper.ToString(),
                       "] under the ", model.name(), " model"));
    }
  }
  return out;
}

}  // namespace tglm
