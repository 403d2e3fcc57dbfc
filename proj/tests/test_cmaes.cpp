#include <doctest.h>

#include <cmath>
#include <limits>

#include "support/cma_bench.hpp"
#include "verbgen/cmaes.hpp"
#include "verbgen/error.hpp"

using namespace verbgen;

namespace {

CmaConfig config(int d, std::uint64_t seed = 1) {
  CmaConfig c;
  c.dimension = d;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_SUITE("cmaes") {

TEST_CASE("init: dimension, identity covariance and the standard constants") {
  const CmaState s7 = cma_init(config(7));
  CHECK(s7.mean.size() == 7);
  CHECK(s7.mean.isZero());
  CHECK(s7.C == Eigen::MatrixXd::Identity(7, 7));
  CHECK(s7.sigma == 0.33);
  CHECK(s7.p_sigma.isZero());
  CHECK(s7.p_c.isZero());
  CHECK(s7.generation == 0);

  // Reference values for d = 10, lambda = 40 from the textbook formulas.
  const CmaState s = cma_init(config(10));
  CHECK(s.mu == 20);
  CHECK(s.weights.sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK((s.weights.array() > 0.0).all());
  CHECK(s.weights[0] == doctest::Approx(0.16712470149808076).epsilon(1e-14));
  CHECK(s.mu_eff == doctest::Approx(11.30948208893226).epsilon(1e-14));
  CHECK(s.c_sigma == doctest::Approx(0.5058815693879137).epsilon(1e-14));
  CHECK(s.d_sigma == doctest::Approx(1.5058815693879137).epsilon(1e-14));
  CHECK(s.c_c == doctest::Approx(0.3155196710809971).epsilon(1e-14));
  CHECK(s.c_1 == doctest::Approx(0.014388542820040108).epsilon(1e-14));
  CHECK(s.c_mu == doctest::Approx(0.12102163166531006).epsilon(1e-14));
  CHECK(s.chi_n == doctest::Approx(3.0847265651690123).epsilon(1e-14));

  CmaConfig start = config(3);
  start.initial_mean = {1.0, -2.0, 0.5};
  CHECK(cma_init(start).mean == Eigen::Vector3d(1.0, -2.0, 0.5));
}

TEST_CASE("init rejects invalid configurations") {
  CmaConfig c = config(0);
  CHECK_THROWS_AS(cma_init(c), Error);
  c = config(3);
  c.population = 1;
  CHECK_THROWS_AS(cma_init(c), Error);
  c = config(3);
  c.sigma0 = 0.0;
  CHECK_THROWS_AS(cma_init(c), Error);
  c = config(3);
  c.initial_mean = {1.0};
  CHECK_THROWS_AS(cma_init(c), Error);
  c = config(3);
  c.lower = {0, 0, 0};
  c.upper = {1, -1, 1};
  CHECK_THROWS_AS(cma_init(c), Error);
}

TEST_CASE("ask: population size, determinism and box clipping") {
  CmaState a = cma_init(config(7, 4)), b = cma_init(config(7, 4));
  const auto xa = cma_ask(a), xb = cma_ask(b);
  CHECK(xa.size() == 40);
  for (std::size_t i = 0; i < xa.size(); ++i) CHECK(xa[i] == xb[i]);
  CHECK_FALSE(cma_ask(a)[0] == xa[0]);

  CmaConfig boxed = config(4, 2);
  boxed.sigma0 = 5.0;
  boxed.lower = {-0.1, -std::numeric_limits<double>::infinity(), 0.0, -1.0};
  boxed.upper = {0.1, std::numeric_limits<double>::infinity(), 0.0, 1.0};
  CmaState s = cma_init(boxed);
  bool escaped = false;
  for (const auto& x : cma_ask(s)) {
    CHECK(x[0] >= -0.1);
    CHECK(x[0] <= 0.1);
    CHECK(x[2] == 0.0);
    CHECK(std::abs(x[3]) <= 1.0);
    escaped = escaped || std::abs(x[1]) > 1.0;
  }
  CHECK(escaped);
}

TEST_CASE("ask: vanishing step size returns the mean") {
  CmaConfig c = config(5);
  c.sigma0 = 1e-300;
  c.initial_mean = {0.5, -1.0, 2.0, 0.75, 3.0};
  CmaState s = cma_init(c);
  for (const auto& x : cma_ask(s)) CHECK(x == s.mean);
}

TEST_CASE("ask: sample mean lies within three standard errors of the state mean") {
  CmaConfig c = config(3, 11);
  c.population = 1000;
  c.sigma0 = 0.7;
  c.initial_mean = {1.0, -2.0, 0.25};
  CmaState s = cma_init(c);
  // A non-trivial covariance so the test exercises B and D.
  Eigen::Matrix3d C;
  C << 2.0, 0.6, -0.3, 0.6, 1.0, 0.2, -0.3, 0.2, 0.5;
  s.C = C;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.C);
  s.B = es.eigenvectors();
  s.D = es.eigenvalues().cwiseSqrt();
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  const int draws = 100;  // 100 x 1000 = 1e5 samples
  for (int k = 0; k < draws; ++k)
    for (const auto& x : cma_ask(s)) sum += x;
  const Eigen::Vector3d mean = sum / (draws * 1000.0);
  for (int i = 0; i < 3; ++i) {
    const double se = c.sigma0 * std::sqrt(C(i, i) / 1e5);
    CAPTURE(i);
    CHECK(std::abs(mean[i] - c.initial_mean[static_cast<std::size_t>(i)]) < 3.0 * se);
  }
}

TEST_CASE("tell: equal fitnesses keep the state healthy and deterministic") {
  CmaState a = cma_init(config(6, 3)), b = cma_init(config(6, 3));
  for (int g = 0; g < 30; ++g) {
    const auto xa = cma_ask(a), xb = cma_ask(b);
    cma_tell(a, xa, std::vector<double>(xa.size(), 1.0));
    cma_tell(b, xb, std::vector<double>(xb.size(), 1.0));
  }
  CHECK(a.mean == b.mean);
  CHECK(a.C == b.C);
  CHECK(a.generation == 30);
  CHECK((a.C - a.C.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a.C).eigenvalues().minCoeff() > 0.0);

  // With ties the ranking is candidate order, so the new mean is the weighted
  // sum of the first mu candidates.
  CmaState s = cma_init(config(4, 8));
  const auto xs = cma_ask(s);
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(4);
  for (int i = 0; i < s.mu; ++i) expected += s.weights[i] * xs[static_cast<std::size_t>(i)];
  cma_tell(s, xs, std::vector<double>(xs.size(), 0.0));
  CHECK((s.mean - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("tell: errors") {
  CmaState s = cma_init(config(3));
  auto xs = cma_ask(s);
  CHECK_THROWS_AS(cma_tell(s, xs, std::vector<double>(xs.size() - 1, 0.0)), Error);
  std::vector<double> f(xs.size(), 0.0);
  f[5] = std::numeric_limits<double>::quiet_NaN();
  try {
    cma_tell(s, xs, f);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFinite);
  }
  xs[2] = Eigen::VectorXd::Zero(4);
  CHECK_THROWS_AS(cma_tell(s, xs, std::vector<double>(xs.size(), 0.0)), Error);
  CHECK(s.generation == 0);
}

TEST_CASE("sphere d=10 from (1,...,1) converges below 1e-10 in 300 generations") {
  CmaConfig c = config(10, 1);
  c.max_generations = 300;
  c.initial_mean.assign(10, 1.0);
  const auto r = bench::run(bench::sphere, c, 1e-10);
  MESSAGE("first below 1e-10 at generation " << r.first_below);
  CHECK(r.result.best_fitness < 1e-10);
  CHECK(r.worst_asymmetry < 1e-12);
  CHECK(r.min_eigenvalue > 0.0);
  CHECK(r.always_cholesky);
  CHECK(r.sigma_ok);
  CHECK(r.monotone);
  CHECK(r.result.history.size() == 301);
  CHECK(r.result.evaluations == 1 + 300 * 40);
}

TEST_CASE("shifted sphere recovers its optimum") {
  const Eigen::Vector3d c0(1.0, -2.0, 0.5);
  CmaConfig c = config(3, 3);
  c.max_generations = 200;
  const auto r = cma_minimize([&](const Eigen::VectorXd& x) { return (x - c0).squaredNorm(); }, c);
  CHECK((r.best - c0).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("rosenbrock d=5 converges below 1e-6") {
  CmaConfig c = config(5, 2);
  c.max_generations = 2000;
  const auto r = bench::run(bench::rosenbrock, c, 1e-6);
  MESSAGE("first below 1e-6 at generation " << r.first_below);
  CHECK(r.result.best_fitness < 1e-6);
  CHECK((r.result.best.array() - 1.0).abs().maxCoeff() < 1e-2);
  CHECK(r.worst_asymmetry < 1e-12);
  CHECK(r.min_eigenvalue > 0.0);
}

TEST_CASE("minimize: constant objective, zero budget, determinism, batch overload") {
  CmaConfig c = config(4, 5);
  c.max_generations = 10;
  const auto flat = cma_minimize([](const Eigen::VectorXd&) { return 3.5; }, c);
  CHECK(flat.best_fitness == 3.5);
  CHECK(flat.best.isZero());  // the initial mean is evaluated first and ties keep it

  c.max_generations = 0;
  c.initial_mean = {1, 2, 3, 4};
  const auto none = cma_minimize(bench::sphere, c);
  CHECK(none.best_fitness == 30.0);
  CHECK(none.best == Eigen::Vector4d(1, 2, 3, 4));
  CHECK(none.evaluations == 1);
  CHECK(none.history == std::vector<double>{30.0});

  c.max_generations = 25;
  const auto r1 = cma_minimize(bench::rosenbrock, c), r2 = cma_minimize(bench::rosenbrock, c);
  CHECK(r1.history == r2.history);
  CHECK(r1.best == r2.best);
  const BatchObjective batch = [](const std::vector<Eigen::VectorXd>& xs) {
    std::vector<double> f;
    for (const auto& x : xs) f.push_back(bench::rosenbrock(x));
    return f;
  };
  const auto r3 = cma_minimize(batch, c);
  CHECK(r3.history == r1.history);
  CHECK(r3.best == r1.best);
}

TEST_CASE("minimize: objective failures name the candidate") {
  CmaConfig c = config(2, 1);
  c.max_generations = 3;
  try {
    cma_minimize(
        [](const Eigen::VectorXd& x) {
          if (x[0] > 0.2) throw std::runtime_error("boom");
          return x.squaredNorm();
        },
        c);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ObjectiveFailure);
    CHECK(std::string(e.what()).find("boom") != std::string::npos);
    CHECK(std::string(e.what()).find("candidate") != std::string::npos);
  }
  const BatchObjective short_batch = [](const std::vector<Eigen::VectorXd>&) { return std::vector<double>{1.0}; };
  CHECK_THROWS_AS(cma_minimize(short_batch, c), Error);
}

TEST_CASE("trace line fields") {
  CmaState s = cma_init(config(2));
  const auto j = cma_trace_line(s, 0.5);
  CHECK(j.at("generation") == 0);
  CHECK(j.at("best_fitness") == 0.5);
  CHECK(j.at("sigma") == 0.33);
  CHECK(j.at("mean").size() == 2);
}

}  // TEST_SUITE
