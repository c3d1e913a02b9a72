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

// Synthetic agent populations: covariates, GLM responses and privacy costs,
// reporting strategies, and the participation threshold tau_{alpha,beta}.

#ifndef TGLM_POPULATION_H_
#define TGLM_POPULATION_H_

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "Eigen/Core"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "tglm/estimators.h"
#include "tglm/links.h"
#include "tglm/random.h"

namespace tglm {

enum class CovariateKind {
  // N(0, sigma^2 / d I).
  kSubGaussianIsotropic,
  // N(0, Sigma).
  kSubGaussianCov,
  // Multivariate Student t with scale Sigma; dof > 4 keeps fourth moments.
  kStudentT,
};

struct CovariateSpec {
  CovariateKind kind = CovariateKind::kSubGaussianIsotropic;
  double sigma = 1.0;
  // Used by kSubGaussianCov and kStudentT; identity when empty.
  Eigen::MatrixXd Sigma;
  double dof = 5.0;

  static CovariateSpec Isotropic(double sigma);
  static CovariateSpec Gaussian(Eigen::MatrixXd Sigma);
  static CovariateSpec StudentT(double dof, Eigen::MatrixXd Sigma);
};

struct PopulationSpec {
  int64_t n = 100;
  int64_t d = 1;
  CovariateSpec covariates;
  // Drawn from the truncated prior when absent.
  std::optional<Eigen::VectorXd> theta_star;
  double tau_theta = 1.0;
  // Exponential(lambda) privacy costs.
  double lambda = 1.0;
  // Halves the cost rate of agents whose response exceeds the median.
  bool cost_correlated = false;
  ModelKind model;
  // Overrides the linear noise level; may be 0 for noiseless responses.
  std::optional<double> response_noise_std;
};

absl::Status ValidatePopulationSpec(const PopulationSpec& spec);

struct AgentRecord {
  Eigen::VectorXd x;
  double y_true = 0.0;
  double cost = 0.0;
  double reported = 0.0;
};

struct Population {
  Eigen::VectorXd theta_star;
  Eigen::MatrixXd X;
  Eigen::VectorXd y_true;
  Eigen::VectorXd costs;
  ModelKind model;
  double lambda = 1.0;
  uint64_t seed = 0;

  int64_t n() const { return X.rows(); }
  int64_t d() const { return X.cols(); }
  // reported is set to y_true.
  AgentRecord Agent(int64_t i) const;
  Dataset TrueData() const { return Dataset{X, y_true}; }
};

// theta ~ N(0, (tau_theta^2 / d) I) conditioned on ||theta||_2 <= tau_theta,
// by rejection.
Eigen::VectorXd SampleTruncatedPrior(int64_t d, double tau_theta,
                                     RandomStream& rng);

Eigen::VectorXd SampleCovariate(const CovariateSpec& spec, int64_t d,
                                RandomStream& rng);

// One response with mean A'(a) under the model; noise_std overrides the
// linear model's own noise level.
double SampleResponse(const ModelKind& model, double a, double noise_std,
                      RandomStream& rng);

// Agent i draws from DeriveSeed(seed, {tag, i}), so populations do not depend
// on how generation is chunked.
absl::StatusOr<Population> GeneratePopulation(const PopulationSpec& spec,
                                              uint64_t seed);

// A fresh (x, y) from the same population, for replacement experiments.
ReplacementSampler MakeReplacementSampler(const PopulationSpec& spec,
                                          const Eigen::VectorXd& theta_star);

Eigen::VectorXd SampleCosts(double lambda, int64_t n, RandomStream& rng);

enum class MisreportKind {
  kConstant,
  kSignFlip,
  kAdditiveNoise,
  kWorstOfGrid,
  // Reports y_true; the null deviation.
  kTruthful,
};

struct MisreportRule {
  MisreportKind kind = MisreportKind::kConstant;
  double value = 0.0;
  double scale = 1.0;
  std::vector<double> grid;

  static MisreportRule Constant(double value);
  static MisreportRule SignFlip();
  static MisreportRule AdditiveNoise(double scale);
  static MisreportRule WorstOfGrid(std::vector<double> grid);
  static MisreportRule Truthful();

  friend bool operator==(const MisreportRule& a, const MisreportRule& b) {
    return a.kind == b.kind && a.value == b.value && a.scale == b.scale &&
           a.grid == b.grid;
  }
};

enum class StrategyKind { kTruthful, kThreshold, kMisreport };

struct StrategyProfile {
  StrategyKind kind = StrategyKind::kTruthful;
  // Threshold: agents with cost <= tau report truthfully.
  double tau = 0.0;
  MisreportRule fallback;

  static StrategyProfile Truthful();
  static StrategyProfile Threshold(double tau,
                                   MisreportRule fallback = MisreportRule());
  static StrategyProfile Misreport(MisreportRule rule);
};

// Maps an arbitrary real onto the response set: logistic takes the sign (a
// zero becomes -y_true, i.e. a flip), Poisson rounds and clamps at 0.
double CoerceResponse(const ModelKind& model, double value, double y_true);

// The rule's report for an agent whose true response is y_true, coerced.
// WorstOfGrid picks the grid value farthest from y_true (first on ties).
double MisreportValue(const MisreportRule& rule, const ModelKind& model,
                      double y_true, RandomStream& rng);

// Reported dataset; covariates are copied unchanged. Randomized rules draw
// from rng in agent order.
Dataset ApplyStrategy(const Population& population,
                      const StrategyProfile& profile, RandomStream& rng);

// Fraction of agents in `reported` whose response equals the truth.
double TruthfulFraction(const Population& population, const Dataset& reported);

// ln(1 / (alpha beta)) / lambda.
absl::StatusOr<double> TauAlphaBetaBound(double alpha, double beta,
                                         double lambda);

struct TauEstimate {
  // Smallest tau with P(at least ceil((1 - alpha) n) costs <= tau) >= 1 - beta.
  double tau1 = 0.0;
  // ln(1 / alpha) / lambda.
  double tau2 = 0.0;
  double tau = 0.0;
  int iterations = 0;
};

// tau1 by bisection on the Monte-Carlo probability, with the same `trials`
// cost vectors reused at every step. NonConvergence when the bracket cannot
// be established or narrowed within 60 iterations.
absl::StatusOr<TauEstimate> TauAlphaBetaMonteCarlo(double alpha, double beta,
                                                   double lambda, int64_t n,
                                                   int64_t trials,
                                                   RandomStream& rng);

}  // namespace tglm

#endif  // TGLM_POPULATION_H_
