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

#include "tglm/population.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <utility>

#include "Eigen/Cholesky"
#include "absl/strings/str_cat.h"
#include "tglm/status.h"

namespace tglm {
namespace {

// Stream tags for the pieces of a population.
constexpr uint64_t kThetaTag = 0x7468657461ULL;
constexpr uint64_t kAgentTag = 0x6167656e74ULL;
constexpr uint64_t kCostTag = 0x636f7374ULL;

constexpr int kMaxIterations = 60;

Eigen::MatrixXd ScaleOrIdentity(const Eigen::MatrixXd& Sigma, int64_t d) {
  return Sigma.size() == 0 ? Eigen::MatrixXd::Identity(d, d) : Sigma;
}

}  // namespace

CovariateSpec CovariateSpec::Isotropic(double sigma) {
  CovariateSpec s;
  s.kind = CovariateKind::kSubGaussianIsotropic;
  s.sigma = sigma;
  return s;
}

CovariateSpec CovariateSpec::Gaussian(Eigen::MatrixXd Sigma) {
  CovariateSpec s;
  s.kind = CovariateKind::kSubGaussianCov;
  s.Sigma = std::move(Sigma);
  return s;
}

CovariateSpec CovariateSpec::StudentT(double dof, Eigen::MatrixXd Sigma) {
  CovariateSpec s;
  s.kind = CovariateKind::kStudentT;
  s.dof = dof;
  s.Sigma = std::move(Sigma);
  return s;
}

absl::Status ValidatePopulationSpec(const PopulationSpec& spec) {
  if (spec.d < 1 || spec.n < 1) {
    return MakeError(ErrorKind::kInvalidArgument,
                     absl::StrCat("population needs n, d >= 1, got n=", spec.n,
                                  " d=", spec.d));
  }
  if (!(spec.tau_theta > 0.0) || !(spec.lambda > 0.0)) {
    return MakeError(ErrorKind::kInvalidArgument,
                     "tau_theta and lambda must be positive");
  }
  const CovariateSpec& c = spec.covariates;
  if (c.kind == CovariateKind::kSubGaussianIsotropic && !(c.sigma > 0.0)) {
    return MakeError(ErrorKind::kInvalidArgument, "sigma must be positive");
  }
  if (c.kind == CovariateKind::kStudentT && !(c.dof > 4.0)) {
    return MakeError(ErrorKind::kInvalidArgument,
                     absl::StrCat("Student t covariates need dof > 4 for finite "
                                  "fourth moments, got ", c.dof));
  }
  if (c.kind != CovariateKind::kSubGaussianIsotropic && c.Sigma.size() != 0) {
    if (c.Sigma.rows() != spec.d || c.Sigma.cols() != spec.d) {
      return MakeError(ErrorKind::kInvalidArgument, "Sigma must be d x d");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(c.Sigma);
    if (llt.info() != Eigen::Success || !c.Sigma.isApprox(c.Sigma.transpose())) {
      return MakeError(ErrorKind::kInvalidArgument,
                       "Sigma must be symmetric positive definite");
    }
  }
  if (spec.theta_star.has_value()) {
    if (spec.theta_star->size() != spec.d) {
      return MakeError(ErrorKind::kInvalidArgument, "theta_star must have d entries");
    }
    if (spec.theta_star->norm() > spec.tau_theta) {
      return MakeError(ErrorKind::kInvalidArgument,
                       absl::StrCat("||theta_star|| = ", spec.theta_star->norm(),
                                    " exceeds tau_theta = ", spec.tau_theta));
    }
  }
  if (spec.response_noise_std.has_value() && !(*spec.response_noise_std >= 0.0)) {
    return MakeError(ErrorKind::kInvalidArgument,
                     "response noise level must be nonnegative");
  }
  return absl::OkStatus();
}

AgentRecord Population::Agent(int64_t i) const {
  return AgentRecord{X.row(i).transpose(), y_true(i), costs(i), y_true(i)};
}

Eigen::VectorXd SampleTruncatedPrior(int64_t d, double tau_theta,
                                     RandomStream& rng) {
  std::normal_distribution<double> g(0.0, tau_theta / std::sqrt(double(d)));
  Eigen::VectorXd theta(d);
  do {
    for (int64_t j = 0; j < d; ++j) theta(j) = g(rng);
  } while (theta.norm() > tau_theta);
  return theta;
}

Eigen::VectorXd SampleCovariate(const CovariateSpec& spec, int64_t d,
                                RandomStream& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXd z(d);
  for (int64_t j = 0; j < d; ++j) z(j) = g(rng);
  switch (spec.kind) {
    case CovariateKind::kSubGaussianIsotropic:
      return z * (spec.sigma / std::sqrt(static_cast<double>(d)));
    case CovariateKind::kSubGaussianCov:
      return ScaleOrIdentity(spec.Sigma, d).llt().matrixL() * z;
    case CovariateKind::kStudentT: {
      std::chi_squared_distribution<double> w(spec.dof);
      const double mix = std::sqrt(spec.dof / w(rng));
      return (ScaleOrIdentity(spec.Sigma, d).llt().matrixL() * z) * mix;
    }
  }
  return z;
}

double SampleResponse(const ModelKind& model, double a, double noise_std,
                      RandomStream& rng) {
  switch (model.family()) {
    case ModelFamily::kLinearGaussian: {
      std::normal_distribution<double> g(0.0, 1.0);
      return a + noise_std * g(rng);
    }
    case ModelFamily::kLogistic: {
      // P(y = 1) = e^a / (e^a + e^-a).
      std::bernoulli_distribution up(1.0 / (1.0 + std::exp(-2.0 * a)));
      return up(rng) ? 1.0 : -1.0;
    }
    case ModelFamily::kPoisson: {
      std::poisson_distribution<int64_t> k(std::exp(a));
      return static_cast<double>(k(rng));
    }
  }
  return a;
}

absl::StatusOr<Population> GeneratePopulation(const PopulationSpec& spec,
                                              uint64_t seed) {
  if (absl::Status s = ValidatePopulationSpec(spec); !s.ok()) return s;
  Population pop;
  pop.model = spec.model;
  pop.lambda = spec.lambda;
  pop.seed = seed;
  if (spec.theta_star.has_value()) {
    pop.theta_star = *spec.theta_star;
  } else {
    RandomStream rng(DeriveSeed(seed, {kThetaTag}));
    pop.theta_star = SampleTruncatedPrior(spec.d, spec.tau_theta, rng);
  }
  const double noise_std =
      spec.response_noise_std.value_or(spec.model.noise_std());
  pop.X.resize(spec.n, spec.d);
  pop.y_true.resize(spec.n);
  for (int64_t i = 0; i < spec.n; ++i) {
    RandomStream rng(DeriveSeed(seed, {kAgentTag, static_cast<uint64_t>(i)}));
    const Eigen::VectorXd x = SampleCovariate(spec.covariates, spec.d, rng);
    pop.X.row(i) = x.transpose();
    pop.y_true(i) =
        SampleResponse(spec.model, x.dot(pop.theta_star), noise_std, rng);
  }
  double median = 0.0;
  if (spec.cost_correlated) {
    std::vector<double> sorted(pop.y_true.data(),
                               pop.y_true.data() + pop.y_true.size());
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2,
                     sorted.end());
    median = sorted[sorted.size() / 2];
  }
  pop.costs.resize(spec.n);
  for (int64_t i = 0; i < spec.n; ++i) {
    RandomStream rng(DeriveSeed(seed, {kCostTag, static_cast<uint64_t>(i)}));
    const double rate = spec.cost_correlated && pop.y_true(i) > median
                            ? spec.lambda / 2.0
                            : spec.lambda;
    pop.costs(i) = std::exponential_distribution<double>(rate)(rng);
  }
  return pop;
}

ReplacementSampler MakeReplacementSampler(const PopulationSpec& spec,
                                          const Eigen::VectorXd& theta_star) {
  const double noise_std =
      spec.response_noise_std.value_or(spec.model.noise_std());
  return [spec, theta_star, noise_std](RandomStream& rng) {
    Eigen::VectorXd x = SampleCovariate(spec.covariates, spec.d, rng);
    const double y = SampleResponse(spec.model, x.dot(theta_star), noise_std, rng);
    return std::make_pair(std::move(x), y);
  };
}

Eigen::VectorXd SampleCosts(double lambda, int64_t n, RandomStream& rng) {
  std::exponential_distribution<double> e(lambda);
  Eigen::VectorXd c(n);
  for (int64_t i = 0; i < n; ++i) c(i) = e(rng);
  return c;
}

MisreportRule MisreportRule::Constant(double value) {
  MisreportRule r;
  r.kind = MisreportKind::kConstant;
  r.value = value;
  return r;
}

MisreportRule MisreportRule::SignFlip() {
  MisreportRule r;
  r.kind = MisreportKind::kSignFlip;
  return r;
}

MisreportRule MisreportRule::AdditiveNoise(double scale) {
  MisreportRule r;
  r.kind = MisreportKind::kAdditiveNoise;
  r.scale = scale;
  return r;
}

MisreportRule MisreportRule::WorstOfGrid(std::vector<double> grid) {
  MisreportRule r;
  r.kind = MisreportKind::kWorstOfGrid;
  r.grid = std::move(grid);
  return r;
}

MisreportRule MisreportRule::Truthful() {
  MisreportRule r;
  r.kind = MisreportKind::kTruthful;
  return r;
}

StrategyProfile StrategyProfile::Truthful() { return StrategyProfile(); }

StrategyProfile StrategyProfile::Threshold(double tau, MisreportRule fallback) {
  StrategyProfile p;
  p.kind = StrategyKind::kThreshold;
  p.tau = tau;
  p.fallback = std::move(fallback);
  return p;
}

StrategyProfile StrategyProfile::Misreport(MisreportRule rule) {
  StrategyProfile p;
  p.kind = StrategyKind::kMisreport;
  p.fallback = std::move(rule);
  return p;
}

double CoerceResponse(const ModelKind& model, double value, double y_true) {
  switch (model.family()) {
    case ModelFamily::kLinearGaussian:
      return value;
    case ModelFamily::kLogistic:
      if (value > 0.0) return 1.0;
      if (value < 0.0) return -1.0;
      return -y_true;
    case ModelFamily::kPoisson:
      return std::max(0.0, std::round(value));
  }
  return value;
}

double MisreportValue(const MisreportRule& rule, const ModelKind& model,
                      double y_true, RandomStream& rng) {
  double raw = rule.value;
  switch (rule.kind) {
    case MisreportKind::kConstant:
      break;
    case MisreportKind::kSignFlip:
      raw = -y_true;
      break;
    case MisreportKind::kAdditiveNoise: {
      std::normal_distribution<double> g(0.0, rule.scale);
      raw = y_true + g(rng);
      break;
    }
    case MisreportKind::kTruthful:
      return y_true;
    case MisreportKind::kWorstOfGrid: {
      double best = -1.0;
      raw = y_true;
      for (double v : rule.grid) {
        const double c = CoerceResponse(model, v, y_true);
        if (std::abs(c - y_true) > best) {
          best = std::abs(c - y_true);
          raw = c;
        }
      }
      break;
    }
  }
  return CoerceResponse(model, raw, y_true);
}

Dataset ApplyStrategy(const Population& population,
                      const StrategyProfile& profile, RandomStream& rng) {
  Dataset out{population.X, population.y_true};
  if (profile.kind == StrategyKind::kTruthful) return out;
  for (int64_t i = 0; i < population.n(); ++i) {
    const bool truthful = profile.kind == StrategyKind::kThreshold &&
                          population.costs(i) <= profile.tau;
    if (!truthful) {
      out.y(i) = MisreportValue(profile.fallback, population.model,
                                population.y_true(i), rng);
    }
  }
  return out;
}

double TruthfulFraction(const Population& population, const Dataset& reported) {
  if (population.n() == 0) return 1.0;
  return static_cast<double>((reported.y.array() == population.y_true.array())
                                 .count()) /
         static_cast<double>(population.n());
}

absl::StatusOr<double> TauAlphaBetaBound(double alpha, double beta,
                                         double lambda) {
  if (!(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta <= 1.0) ||
      !(lambda > 0.0)) {
    return MakeError(ErrorKind::kInvalidArgument,
                     absl::StrCat("need alpha in (0,1), beta in (0,1], lambda > 0;"
                                  " got ", alpha, ", ", beta, ", ", lambda));
  }
  return std::log(1.0 / (alpha * beta)) / lambda;
}

absl::StatusOr<TauEstimate> TauAlphaBetaMonteCarlo(double alpha, double beta,
                                                   double lambda, int64_t n,
                                                   int64_t trials,
                                                   RandomStream& rng) {
  if (absl::StatusOr<double> b = TauAlphaBetaBound(alpha, beta, lambda);
      !b.ok()) {
    return b.status();
  }
  if (trials < 100 || n < 1) {
    return MakeError(ErrorKind::kInvalidArgument,
                     absl::StrCat("need trials >= 100 and n >= 1, got ", trials,
                                  ", ", n));
  }
  // The event "at least k of n costs are <= tau" is "k-th smallest <= tau".
  const int64_t k = std::clamp<int64_t>(
      static_cast<int64_t>(std::ceil((1.0 - alpha) * static_cast<double>(n))),
      1, n);
  std::vector<double> order_stat(trials);
  std::vector<double> costs(n);
  std::exponential_distribution<double> e(lambda);
  for (int64_t t = 0; t < trials; ++t) {
    for (double& c : costs) c = e(rng);
    std::nth_element(costs.begin(), costs.begin() + (k - 1), costs.end());
    order_stat[t] = costs[k - 1];
  }
  std::sort(order_stat.begin(), order_stat.end());
  const double target = 1.0 - beta;
  auto prob = [&](double tau) {
    return static_cast<double>(std::upper_bound(order_stat.begin(),
                                                order_stat.end(), tau) -
                               order_stat.begin()) /
           static_cast<double>(trials);
  };

  TauEstimate est;
  double lo = 0.0;
  double hi = 1.0 / lambda;
  int it = 0;
  while (prob(hi) < target) {
    lo = hi;
    hi *= 2.0;
    if (++it > kMaxIterations) {
      return MakeError(ErrorKind::kNonConvergence,
                       "could not bracket tau within 60 doublings");
    }
  }
  if (target <= 0.0) hi = 0.0;
  it = 0;
  while (hi - lo > 1e-12 * hi) {
    if (++it > kMaxIterations) {
      return MakeError(ErrorKind::kNonConvergence,
                       "bisection for tau did not converge in 60 iterations");
    }
    const double mid = 0.5 * (lo + hi);
    (prob(mid) >= target ? hi : lo) = mid;
  }
  est.iterations = it;
  est.tau1 = hi;
  est.tau2 = std::log(1.0 / alpha) / lambda;
  est.tau = std::max(est.tau1, est.tau2);
  return est;
}

}  // namespace tglm
