#include "verbgen/cmaes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "verbgen/error.hpp"
#include "verbgen/seed.hpp"

namespace verbgen {

void CmaConfig::validate() const {
  if (dimension < 1) throw Error(ErrorCode::InvalidArgument, "CMA-ES dimension must be >= 1");
  if (population < 2) throw Error(ErrorCode::InvalidArgument, "CMA-ES population must be >= 2");
  if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) throw Error(ErrorCode::InvalidArgument, "sigma0 must be positive");
  if (max_generations < 0) throw Error(ErrorCode::InvalidArgument, "max_generations must be >= 0");
  const auto d = static_cast<std::size_t>(dimension);
  if (!initial_mean.empty() && initial_mean.size() != d)
    throw Error(ErrorCode::InvalidArgument, "initial mean has the wrong dimension");
  if ((!lower.empty() && lower.size() != d) || (!upper.empty() && upper.size() != d))
    throw Error(ErrorCode::InvalidArgument, "bounds have the wrong dimension");
  for (std::size_t i = 0; i < d; ++i) {
    const double lo = lower.empty() ? -std::numeric_limits<double>::infinity() : lower[i];
    const double hi = upper.empty() ? std::numeric_limits<double>::infinity() : upper[i];
    if (!(lo <= hi)) throw Error(ErrorCode::InvalidArgument, "lower bound exceeds upper bound");
  }
}

namespace {

void decompose(CmaState& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.C);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::DecompositionFailure, "eigen-solver did not converge");
  const Eigen::VectorXd ev = eig.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (!(ev[i] > 0.0) || !std::isfinite(ev[i]))
      throw Error(ErrorCode::DecompositionFailure, "covariance is not positive definite");
  s.B = eig.eigenvectors();
  s.D = ev.cwiseSqrt();
}

void clip(const CmaConfig& c, Eigen::VectorXd& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!c.lower.empty()) x[i] = std::max(x[i], c.lower[static_cast<std::size_t>(i)]);
    if (!c.upper.empty()) x[i] = std::min(x[i], c.upper[static_cast<std::size_t>(i)]);
  }
}

}  // namespace

CmaState cma_init(const CmaConfig& config) {
  config.validate();
  CmaState s;
  s.config = config;
  const int n = config.dimension;
  const double nd = n;
  s.mean = Eigen::VectorXd::Zero(n);
  if (!config.initial_mean.empty()) s.mean = Eigen::Map<const Eigen::VectorXd>(config.initial_mean.data(), n);
  clip(config, s.mean);
  s.sigma = config.sigma0;
  s.C = Eigen::MatrixXd::Identity(n, n);
  s.B = Eigen::MatrixXd::Identity(n, n);
  s.D = Eigen::VectorXd::Ones(n);
  s.p_sigma = Eigen::VectorXd::Zero(n);
  s.p_c = Eigen::VectorXd::Zero(n);

  const int lambda = config.population;
  s.mu = lambda / 2;
  s.weights.resize(s.mu);
  for (int i = 0; i < s.mu; ++i) s.weights[i] = std::log((lambda + 1) / 2.0) - std::log(i + 1.0);
  s.weights /= s.weights.sum();
  s.mu_eff = 1.0 / s.weights.squaredNorm();

  s.c_c = (4.0 + s.mu_eff / nd) / (nd + 4.0 + 2.0 * s.mu_eff / nd);
  s.c_sigma = (s.mu_eff + 2.0) / (nd + s.mu_eff + 5.0);
  s.c_1 = 2.0 / ((nd + 1.3) * (nd + 1.3) + s.mu_eff);
  s.c_mu = std::min(1.0 - s.c_1, 2.0 * (s.mu_eff - 2.0 + 1.0 / s.mu_eff) / ((nd + 2.0) * (nd + 2.0) + s.mu_eff));
  s.d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((s.mu_eff - 1.0) / (nd + 1.0)) - 1.0) + s.c_sigma;
  s.chi_n = std::sqrt(nd) * (1.0 - 1.0 / (4.0 * nd) + 1.0 / (21.0 * nd * nd));

  s.rng.seed(mix_seed(config.seed));
  return s;
}

std::vector<Eigen::VectorXd> cma_ask(CmaState& s) {
  const int n = s.config.dimension;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::VectorXd> out(static_cast<std::size_t>(s.config.population));
  Eigen::VectorXd z(n);
  for (auto& x : out) {
    for (int i = 0; i < n; ++i) z[i] = normal(s.rng);
    x = s.mean + s.sigma * (s.B * s.D.cwiseProduct(z));
    clip(s.config, x);
  }
  return out;
}

void cma_tell(CmaState& s, const std::vector<Eigen::VectorXd>& candidates, const std::vector<double>& fitness) {
  const int n = s.config.dimension;
  const auto lambda = static_cast<std::size_t>(s.config.population);
  if (candidates.size() != lambda || fitness.size() != lambda)
    throw Error(ErrorCode::InvalidArgument, "expected " + std::to_string(lambda) + " candidates and fitnesses");
  for (std::size_t i = 0; i < lambda; ++i) {
    if (candidates[i].size() != n) throw Error(ErrorCode::DimensionMismatch, "candidate has the wrong dimension");
    if (!std::isfinite(fitness[i]))
      throw Error(ErrorCode::NonFinite, "fitness of candidate " + std::to_string(i) + " is not finite");
  }

  std::vector<std::size_t> order(lambda);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fitness[a] < fitness[b]; });

  const Eigen::VectorXd old_mean = s.mean;
  Eigen::MatrixXd Y(n, s.mu);
  for (int i = 0; i < s.mu; ++i) Y.col(i) = (candidates[order[static_cast<std::size_t>(i)]] - old_mean) / s.sigma;
  const Eigen::VectorXd y_w = Y * s.weights;
  s.mean = old_mean + s.sigma * y_w;

  // C^{-1/2} y_w = B D^{-1} B^T y_w
  const Eigen::VectorXd c_inv_sqrt_y = s.B * (s.B.transpose() * y_w).cwiseQuotient(s.D);
  s.p_sigma = (1.0 - s.c_sigma) * s.p_sigma + std::sqrt(s.c_sigma * (2.0 - s.c_sigma) * s.mu_eff) * c_inv_sqrt_y;
  const double ps_norm = s.p_sigma.norm();
  const double decay = 1.0 - std::pow(1.0 - s.c_sigma, 2.0 * (s.generation + 1));
  const bool h_sigma = ps_norm / std::sqrt(decay) / s.chi_n < 1.4 + 2.0 / (n + 1.0);
  s.p_c = (1.0 - s.c_c) * s.p_c + (h_sigma ? std::sqrt(s.c_c * (2.0 - s.c_c) * s.mu_eff) : 0.0) * y_w;

  const double delta_h = h_sigma ? 0.0 : s.c_c * (2.0 - s.c_c);
  Eigen::MatrixXd rank_mu = Y * s.weights.asDiagonal() * Y.transpose();
  s.C = (1.0 - s.c_1 - s.c_mu) * s.C + s.c_1 * (s.p_c * s.p_c.transpose() + delta_h * s.C) + s.c_mu * rank_mu;
  s.C = 0.5 * (s.C + s.C.transpose()).eval();

  s.sigma *= std::exp((s.c_sigma / s.d_sigma) * (ps_norm / s.chi_n - 1.0));
  if (!(s.sigma > 0.0) || !std::isfinite(s.sigma)) throw Error(ErrorCode::DecompositionFailure, "step size degenerated");
  ++s.generation;
  decompose(s);
}

CmaResult cma_minimize(const BatchObjective& objective, const CmaConfig& config, const CmaObserver& observer) {
  CmaState state = cma_init(config);
  auto evaluate = [&](const std::vector<Eigen::VectorXd>& xs) {
    std::vector<double> f;
    try {
      f = objective(xs);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ObjectiveFailure) throw;
      throw Error(ErrorCode::ObjectiveFailure, e.what());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::ObjectiveFailure, e.what());
    }
    if (f.size() != xs.size()) throw Error(ErrorCode::ObjectiveFailure, "objective returned the wrong number of values");
    for (std::size_t i = 0; i < f.size(); ++i)
      if (!std::isfinite(f[i]))
        throw Error(ErrorCode::ObjectiveFailure, "candidate " + std::to_string(i) + " has a non-finite fitness");
    return f;
  };

  CmaResult r;
  r.best = state.mean;
  r.best_fitness = evaluate({state.mean}).front();
  r.evaluations = 1;
  r.history.push_back(r.best_fitness);
  for (int g = 0; g < config.max_generations; ++g) {
    const auto xs = cma_ask(state);
    const auto f = evaluate(xs);
    r.evaluations += static_cast<int>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
      if (f[i] < r.best_fitness) {
        r.best_fitness = f[i];
        r.best = xs[i];
      }
    cma_tell(state, xs, f);
    r.history.push_back(r.best_fitness);
    if (observer) observer(state, r.best_fitness);
  }
  return r;
}

CmaResult cma_minimize(const Objective& objective, const CmaConfig& config, const CmaObserver& observer) {
  const BatchObjective batch = [&objective](const std::vector<Eigen::VectorXd>& xs) {
    std::vector<double> f(xs.size());
    std::string failure;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(xs.size()); ++i) {
      try {
        f[static_cast<std::size_t>(i)] = objective(xs[static_cast<std::size_t>(i)]);
      } catch (const std::exception& e) {
#pragma omp critical
        if (failure.empty()) failure = "candidate " + std::to_string(i) + ": " + e.what();
      }
    }
    if (!failure.empty()) throw Error(ErrorCode::ObjectiveFailure, failure);
    return f;
  };
  return cma_minimize(batch, config, observer);
}

nlohmann::json cma_trace_line(const CmaState& state, double best_fitness) {
  return {{"generation", state.generation},
          {"best_fitness", best_fitness},
          {"sigma", state.sigma},
          {"mean", std::vector<double>(state.mean.data(), state.mean.data() + state.mean.size())}};
}

}  // namespace verbgen
