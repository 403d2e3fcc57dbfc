#pragma once

// (mu/mu_w, lambda)-CMA-ES with ask/tell, following the usual tutorial
// parameterization: log-linear positive weights over the better half,
// cumulative step-size adaptation, rank-one plus rank-mu covariance update.

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace verbgen {

struct CmaConfig {
  int dimension = 1;
  double sigma0 = 0.33;
  int population = 40;
  int max_generations = 60;
  std::uint64_t seed = 0;
  /// Start point; empty means the origin.
  std::vector<double> initial_mean;
  /// Per-dimension box, either empty or of length `dimension`. Infinite
  /// entries leave that side open.
  std::vector<double> lower, upper;

  /// Throws Error(InvalidArgument).
  void validate() const;
};

struct CmaState {
  CmaConfig config;
  Eigen::VectorXd mean;
  double sigma = 0.0;
  Eigen::MatrixXd C;
  /// Eigen-decomposition C = B diag(D^2) B^T, refreshed on every tell.
  Eigen::MatrixXd B;
  Eigen::VectorXd D;
  Eigen::VectorXd p_sigma, p_c;
  int generation = 0;

  int mu = 0;
  Eigen::VectorXd weights;
  double mu_eff = 0.0, c_sigma = 0.0, d_sigma = 0.0, c_c = 0.0, c_1 = 0.0, c_mu = 0.0, chi_n = 0.0;

  std::mt19937_64 rng;
};

CmaState cma_init(const CmaConfig& config);

/// population candidates mean + sigma * B D z, clipped to the box.
/// Advances the state's generator only.
std::vector<Eigen::VectorXd> cma_ask(CmaState& state);

/// Lower fitness is better. Equal fitnesses keep candidate order.
void cma_tell(CmaState& state, const std::vector<Eigen::VectorXd>& candidates, const std::vector<double>& fitness);

using Objective = std::function<double(const Eigen::VectorXd&)>;
/// Evaluates a whole generation; must return one fitness per candidate, in order.
using BatchObjective = std::function<std::vector<double>(const std::vector<Eigen::VectorXd>&)>;

struct CmaResult {
  Eigen::VectorXd best;
  double best_fitness = 0.0;
  /// Best-so-far fitness: entry 0 is the initial mean, entry g after generation g.
  std::vector<double> history;
  int evaluations = 0;
};

/// Called after every tell with the best-so-far fitness.
using CmaObserver = std::function<void(const CmaState&, double best_fitness)>;

/// Evaluates the initial mean, then runs ask/evaluate/tell for
/// max_generations and returns the best candidate ever evaluated.
CmaResult cma_minimize(const Objective& objective, const CmaConfig& config, const CmaObserver& observer = {});
CmaResult cma_minimize(const BatchObjective& objective, const CmaConfig& config, const CmaObserver& observer = {});

/// {generation, best_fitness, sigma, mean}
nlohmann::json cma_trace_line(const CmaState& state, double best_fitness);

}  // namespace verbgen
