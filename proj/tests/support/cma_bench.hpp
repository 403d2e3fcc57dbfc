#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "verbgen/cmaes.hpp"

namespace bench {

inline double sphere(const Eigen::VectorXd& x) { return x.squaredNorm(); }

inline double rosenbrock(const Eigen::VectorXd& x) {
  double f = 0.0;
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i)
    f += 100.0 * std::pow(x[i + 1] - x[i] * x[i], 2) + std::pow(1.0 - x[i], 2);
  return f;
}

/// Worst covariance health seen across a run, plus how the run went.
struct Run {
  verbgen::CmaResult result;
  int first_below = -1;  // generation where best fitness first dropped under the target
  double worst_asymmetry = 0.0;
  double min_eigenvalue = std::numeric_limits<double>::infinity();
  bool always_cholesky = true;
  bool sigma_ok = true;
  bool monotone = true;
};

inline Run run(const verbgen::Objective& f, verbgen::CmaConfig cfg, double target) {
  Run r;
  r.result = verbgen::cma_minimize(
      f, cfg, [&](const verbgen::CmaState& s, double best) {
        r.worst_asymmetry = std::max(r.worst_asymmetry, (s.C - s.C.transpose()).cwiseAbs().maxCoeff());
        const Eigen::MatrixXd sym = 0.5 * (s.C + s.C.transpose());
        r.min_eigenvalue = std::min(r.min_eigenvalue, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym).eigenvalues().minCoeff());
        r.always_cholesky = r.always_cholesky && Eigen::LLT<Eigen::MatrixXd>(sym).info() == Eigen::Success;
        r.sigma_ok = r.sigma_ok && s.sigma > 0.0 && std::isfinite(s.sigma);
        if (r.first_below < 0 && best < target) r.first_below = s.generation;
      });
  for (std::size_t g = 1; g < r.result.history.size(); ++g)
    r.monotone = r.monotone && r.result.history[g] <= r.result.history[g - 1];
  return r;
}

}  // namespace bench
