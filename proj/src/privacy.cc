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

#include "tglm/privacy.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <utility>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "tglm/status.h"

namespace tglm {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

constexpr char kFalsificationNote[] =
    "falsification test only: passing does not certify differential privacy";

// Interior quantile edges (bins - 1 of them) of the pooled values.
std::vector<double> QuantileEdges(std::vector<double> pooled, int64_t bins) {
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> edges;
  for (int64_t b = 1; b < bins; ++b) {
    const size_t idx = static_cast<size_t>(
        static_cast<double>(b) * pooled.size() / static_cast<double>(bins));
    edges.push_back(pooled[std::min(idx, pooled.size() - 1)]);
  }
  return edges;
}

int64_t BinOf(double v, const std::vector<double>& edges) {
  return std::upper_bound(edges.begin(), edges.end(), v) - edges.begin();
}

}  // namespace

absl::Status ValidatePrivacyParams(const PrivacyParams& params) {
  if (!(params.epsilon > 0.0) || !std::isfinite(params.epsilon)) {
    return MakeError(ErrorKind::kInvalidArgument,
                     absl::StrCat("epsilon must be positive, got ", params.epsilon));
  }
  if (!(params.delta_n > 0.0) || !(params.delta_half > 0.0)) {
    return MakeError(ErrorKind::kInvalidArgument,
                     "sensitivities delta_n and delta_half must be positive");
  }
  for (double g : {params.gamma_n, params.gamma_half}) {
    if (!(g >= 0.0 && g <= 1.0)) {
      return MakeError(ErrorKind::kInvalidArgument,
                       absl::StrCat("gamma must lie in [0, 1], got ", g));
    }
  }
  return absl::OkStatus();
}

PrivacyAccount ComposeAccount(const PrivacyParams& params) {
  return PrivacyAccount{2.0 * params.epsilon,
                        params.gamma_n + 2.0 * params.gamma_half};
}

NoiseSample SampleNormExponential(int64_t d, double delta, double epsilon,
                                  RandomStream& rng) {
  NoiseSample out;
  out.seed = rng.seed();
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd u(d);
  double norm = 0.0;
  do {
    for (int64_t j = 0; j < d; ++j) u(j) = gauss(rng);
    norm = u.norm();
  } while (norm == 0.0);
  std::gamma_distribution<double> radius(static_cast<double>(d),
                                         delta / epsilon);
  const double r = radius(rng);
  out.v = u * (r / norm);
  out.magnitude = out.v.norm();
  return out;
}

absl::string_view ReleaseName(Release which) {
  switch (which) {
    case Release::kFull:
      return "full";
    case Release::kHalf0:
      return "half0";
    case Release::kHalf1:
      return "half1";
  }
  return "unknown";
}

PrivateRelease Privatize(const Eigen::VectorXd& theta_hat,
                         const PrivacyParams& params, Release which,
                         RandomStream& rng) {
  const double delta =
      which == Release::kFull ? params.delta_n : params.delta_half;
  PrivateRelease out;
  out.noise = SampleNormExponential(theta_hat.size(), delta, params.epsilon, rng);
  out.theta = theta_hat + out.noise.v;
  return out;
}

std::pair<double, double> WilsonInterval(int64_t successes, int64_t trials,
                                         double z) {
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half =
      z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

absl::StatusOr<PrivacyRatioReport> EmpiricalPrivacyRatio(
    const MechanismSampler& sampler, const Dataset& d, const Dataset& d_prime,
    const PrivacyRatioOptions& opts, uint64_t seed) {
  if (d.d() != d_prime.d() || d.d() < 1 || d.d() > 2) {
    return MakeError(ErrorKind::kInvalidArgument,
                     "privacy ratio check supports matching d in {1, 2}");
  }
  if (opts.trials < 1 || opts.bins < 2) {
    return MakeError(ErrorKind::kInvalidArgument,
                     "privacy ratio check needs trials >= 1 and bins >= 2");
  }
  const int64_t dim = d.d();
  std::vector<Eigen::VectorXd> outputs[2];
  const Dataset* sides[2] = {&d, &d_prime};
  for (uint64_t side = 0; side < 2; ++side) {
    outputs[side].reserve(opts.trials);
    for (int64_t t = 0; t < opts.trials; ++t) {
      RandomStream rng(DeriveSeed(seed, {side, static_cast<uint64_t>(t)}));
      absl::StatusOr<Eigen::VectorXd> out = sampler(*sides[side], rng);
      if (!out.ok()) return out.status();
      if (out->size() != dim) {
        return MakeError(ErrorKind::kInvalidArgument,
                         "mechanism output dimension differs from d");
      }
      outputs[side].push_back(*std::move(out));
    }
  }

  const int64_t per_axis =
      dim == 1 ? opts.bins
               : std::max<int64_t>(2, static_cast<int64_t>(
                                          std::sqrt(static_cast<double>(opts.bins))));
  std::vector<std::vector<double>> edges(dim);
  for (int64_t j = 0; j < dim; ++j) {
    std::vector<double> pooled;
    pooled.reserve(2 * opts.trials);
    for (const auto& side : outputs)
      for (const Eigen::VectorXd& v : side) pooled.push_back(v(j));
    edges[j] = QuantileEdges(std::move(pooled), per_axis);
  }
  const int64_t cells = dim == 1 ? per_axis : per_axis * per_axis;

  PrivacyRatioReport report;
  report.note = kFalsificationNote;
  report.bins.resize(cells);
  for (int side = 0; side < 2; ++side) {
    for (const Eigen::VectorXd& v : outputs[side]) {
      int64_t cell = BinOf(v(0), edges[0]);
      if (dim == 2) cell = cell * per_axis + BinOf(v(1), edges[1]);
      (side == 0 ? report.bins[cell].count_d : report.bins[cell].count_d_prime)++;
    }
  }

  int64_t sparse = 0;
  for (PrivacyRatioBin& bin : report.bins) {
    const int64_t pooled = bin.count_d + bin.count_d_prime;
    if (pooled < opts.min_count) {
      ++sparse;
      continue;
    }
    bin.occupied = true;
    ++report.occupied;
    const auto [lo_d, hi_d] = WilsonInterval(bin.count_d, opts.trials, opts.z);
    const auto [lo_p, hi_p] =
        WilsonInterval(bin.count_d_prime, opts.trials, opts.z);
    bin.log_ratio_lo = lo_d > 0.0 ? std::log(lo_d / hi_p) : -kInf;
    bin.log_ratio_hi = lo_p > 0.0 ? std::log(hi_d / lo_p) : kInf;
    bin.log_ratio = std::log(static_cast<double>(bin.count_d)) -
                    std::log(static_cast<double>(bin.count_d_prime));
    bin.consistent =
        bin.log_ratio_lo <= opts.log_bound && bin.log_ratio_hi >= -opts.log_bound;
    if (bin.consistent) ++report.consistent;
    report.max_abs_log_ratio =
        std::max(report.max_abs_log_ratio, std::abs(bin.log_ratio));
  }
  if (static_cast<double>(sparse) >
      opts.max_sparse_fraction * static_cast<double>(cells)) {
    return MakeError(
        ErrorKind::kInsufficientMass,
        absl::StrFormat("%d of %d histogram bins have fewer than %d samples",
                        sparse, cells, opts.min_count));
  }
  report.fraction_consistent =
      report.occupied > 0 ? static_cast<double>(report.consistent) /
                                static_cast<double>(report.occupied)
                          : 0.0;
  report.passed =
      report.occupied > 0 && report.fraction_consistent >= opts.pass_fraction;
  return report;
}

}  // namespace tglm
