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

// Norm-exponential output perturbation, the (epsilon, gamma) account of the
// three released estimators, and a sampling-based falsification check of the
// privacy ratio.

#ifndef TGLM_PRIVACY_H_
#define TGLM_PRIVACY_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "Eigen/Core"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "tglm/estimators.h"
#include "tglm/random.h"

namespace tglm {

struct PrivacyParams {
  // Per-release budget.
  double epsilon = 1.0;
  // Sensitivities of the full-data and half-data estimators.
  double delta_n = 1.0;
  double delta_half = 1.0;
  // Probabilities that the sensitivity bounds fail.
  double gamma_n = 0.0;
  double gamma_half = 0.0;
};

absl::Status ValidatePrivacyParams(const PrivacyParams& params);

struct PrivacyAccount {
  double epsilon_total = 0.0;
  double gamma_total = 0.0;
};

// (2 epsilon, gamma_n + 2 gamma_half): the halves compose in parallel, the
// full release sequentially with them.
PrivacyAccount ComposeAccount(const PrivacyParams& params);

struct NoiseSample {
  Eigen::VectorXd v;
  // ||v||_2.
  double magnitude = 0.0;
  // Seed of the stream the draw came from.
  uint64_t seed = 0;
};

// v = r u with r ~ Gamma(d, delta / epsilon) and u uniform on the unit
// sphere (a normalized standard Gaussian; all-zero draws are redrawn). This
// is the density proportional to exp(-epsilon ||v||_2 / delta).
NoiseSample SampleNormExponential(int64_t d, double delta, double epsilon,
                                  RandomStream& rng);

enum class Release { kFull, kHalf0, kHalf1 };

absl::string_view ReleaseName(Release which);

struct PrivateRelease {
  Eigen::VectorXd theta;
  NoiseSample noise;
};

// theta_hat + v, scaled by delta_n for kFull and delta_half for the halves.
PrivateRelease Privatize(const Eigen::VectorXd& theta_hat,
                         const PrivacyParams& params, Release which,
                         RandomStream& rng);

// One public output of the mechanism on the given data.
using MechanismSampler =
    std::function<absl::StatusOr<Eigen::VectorXd>(const Dataset&, RandomStream&)>;

struct PrivacyRatioOptions {
  int64_t trials = 100000;
  // Histogram cells; for d = 2 the grid has floor(sqrt(bins))^2 cells.
  int64_t bins = 100;
  // Bound on |log P(bin | D) - log P(bin | D')|, e.g. 2 epsilon.
  double log_bound = 1.0;
  // Wilson interval z-score.
  double z = 3.29;
  int64_t min_count = 50;
  // Minimum fraction of occupied bins that must be consistent with the bound.
  double pass_fraction = 0.99;
  // Bins whose pooled count is below min_count may not exceed this fraction.
  double max_sparse_fraction = 0.2;
};

struct PrivacyRatioBin {
  int64_t count_d = 0;
  int64_t count_d_prime = 0;
  // log(count_d / count_d_prime); +/-inf when one side is empty.
  double log_ratio = 0.0;
  // Log-ratio interval implied by the two Wilson intervals.
  double log_ratio_lo = 0.0;
  double log_ratio_hi = 0.0;
  bool occupied = false;
  bool consistent = false;
};

struct PrivacyRatioReport {
  std::vector<PrivacyRatioBin> bins;
  int64_t occupied = 0;
  int64_t consistent = 0;
  double fraction_consistent = 0.0;
  double max_abs_log_ratio = 0.0;
  bool passed = false;
  // Always states that this is a falsification test; sampling can refute
  // but never certify differential privacy.
  std::string note;
};

// Runs `sampler` opts.trials times on each dataset (stream
// DeriveSeed(seed, {side, trial})), bins the pooled outputs on quantile edges
// and checks every bin with >= min_count pooled samples against log_bound
// with Wilson slack. Only d <= 2 is supported. InsufficientMass when more
// than max_sparse_fraction of the bins are sparse.
absl::StatusOr<PrivacyRatioReport> EmpiricalPrivacyRatio(
    const MechanismSampler& sampler, const Dataset& d, const Dataset& d_prime,
    const PrivacyRatioOptions& opts, uint64_t seed);

// Wilson score interval for a binomial proportion.
std::pair<double, double> WilsonInterval(int64_t successes, int64_t trials,
                                         double z);

}  // namespace tglm

#endif  // TGLM_PRIVACY_H_
