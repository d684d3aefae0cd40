#include <cmath>

#include "doctest.h"
#include "npg/errors.hpp"
#include "npg/matrix_game.hpp"
#include "npg/rng.hpp"

using npg::CostMatrix;
using npg::RegularizedGame;
using npg::SimplexVector;

namespace {

RegularizedGame random_game(std::uint64_t seed, Eigen::Index n, double tau) {
  npg::CounterRng rng(seed);
  return {CostMatrix(rng.uniform_matrix(n, n, -1.0, 1.0)), tau};
}

Eigen::VectorXd softmax_plain(const Eigen::VectorXd& x) {
  Eigen::VectorXd e = (x.array() - x.maxCoeff()).exp();
  return e / e.sum();
}

double lse_plain(const Eigen::VectorXd& x) { return std::log(x.array().exp().sum()); }

}  // namespace

TEST_CASE("vanilla NPG drifts without bound on the single-column instance") {
  const RegularizedGame game{CostMatrix(Eigen::MatrixXd::Constant(2, 1, -2.0)), 1.0};
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(1);
  double prev = 0.0;
  for (int t = 0; t < 2000; ++t) {
    std::tie(theta, nu) = npg::vanilla_npg_step(game, theta, nu, 0.1);
    const double norm = theta.cwiseAbs().maxCoeff();
    CHECK(norm > prev);
    prev = norm;
  }
  // Drift per step is eta * (1 + log 2) once the policy sits at uniform.
  CHECK(prev == doctest::Approx(2000 * 0.1 * (1.0 + std::log(2.0))).epsilon(1e-2));
}

TEST_CASE("vanilla NPG with zero cost drifts by a constant shift") {
  const RegularizedGame game{CostMatrix(Eigen::MatrixXd::Zero(4, 4)), 1.0};
  const double eta = 0.3;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(4);
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(4);
  std::tie(theta, nu) = npg::vanilla_npg_step(game, theta, nu, eta);
  CHECK((theta.array() - eta * (std::log(4.0) - 1.0)).abs().maxCoeff() < 1e-15);
  for (int t = 0; t < 50; ++t) {
    std::tie(theta, nu) = npg::vanilla_npg_step(game, theta, nu, eta);
    CHECK((npg::softmax(theta).probs().array() - 0.25).abs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("vanilla NPG single step matches a direct transcription") {
  const RegularizedGame game = random_game(42, 3, 0.2);
  const double eta = 0.05;
  npg::CounterRng rng(43);
  const Eigen::VectorXd theta0 = rng.uniform_vector(3, -1.0, 1.0);
  const Eigen::VectorXd nu0 = rng.uniform_vector(3, -1.0, 1.0);
  for (const auto& [t0, n0] : {std::pair{Eigen::VectorXd(Eigen::VectorXd::Zero(3)), Eigen::VectorXd(Eigen::VectorXd::Zero(3))},
                               std::pair{theta0, nu0}}) {
    const auto [theta, nu] = npg::vanilla_npg_step(game, t0, n0, eta);
    const Eigen::MatrixXd& q = game.q.entries();
    for (int a = 0; a < 3; ++a) {
      double qh = 0.0;
      for (int b = 0; b < 3; ++b) qh += q(a, b) * softmax_plain(n0)(b);
      const double expect = (1 - eta * 0.2) * t0(a) - eta * qh + eta * 0.2 * (lse_plain(t0) - 1.0);
      CHECK(std::abs(theta(a) - expect) < 1e-14);
    }
    for (int b = 0; b < 3; ++b) {
      double qg = 0.0;
      for (int a = 0; a < 3; ++a) qg += q(a, b) * softmax_plain(t0)(a);
      const double expect = (1 - eta * 0.2) * n0(b) + eta * qg + eta * 0.2 * (lse_plain(n0) - 1.0);
      CHECK(std::abs(nu(b) - expect) < 1e-14);
    }
  }
}

TEST_CASE("modified NPG converges to q on the single-row maximization instance") {
  Eigen::MatrixXd q(1, 2);
  q << -2.0, -3.0;
  const RegularizedGame game{CostMatrix(q), 1.0};
  for (double eta : {0.1, 0.5, 0.9}) {
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(1);
    Eigen::VectorXd nu = Eigen::VectorXd::Zero(2);
    for (int t = 0; t < 2000; ++t) std::tie(theta, nu) = npg::npg_step(game, theta, nu, eta);
    CHECK(std::abs(nu(0) + 2.0) < 1e-10);
    CHECK(std::abs(nu(1) + 3.0) < 1e-10);
  }
}

TEST_CASE("modified NPG rejects eta * tau >= 1") {
  const RegularizedGame game = random_game(1, 3, 0.5);
  CHECK_THROWS_AS(npg::npg_step(game, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3), 2.0), npg::InvalidStepsize);
}

TEST_CASE("the regularized NE parameters are a fixed point of modified and optimistic NPG") {
  const RegularizedGame game = random_game(9, 6, 0.3);
  const auto sol = npg::qre_fixed_point(game.q, game.tau);
  const auto [theta, nu] = npg::npg_step(game, sol.theta_star, sol.nu_star, 0.2);
  CHECK((theta - sol.theta_star).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((nu - sol.nu_star).cwiseAbs().maxCoeff() < 1e-12);
  const auto s = npg::onpg_step(game, npg::OptimisticState::from(sol.theta_star, sol.nu_star), 0.2);
  CHECK((s.theta - sol.theta_star).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((s.nu_bar - sol.nu_star).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("modified NPG on the identity converges to theta* = -0.4") {
  const RegularizedGame game{CostMatrix(Eigen::MatrixXd::Identity(5, 5)), 0.5};
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(5);
  npg::CounterRng rng(2);
  theta = rng.uniform_vector(5, -1.0, 1.0);
  Eigen::VectorXd nu = rng.uniform_vector(5, -1.0, 1.0);
  for (int t = 0; t < 3000; ++t) std::tie(theta, nu) = npg::npg_step(game, theta, nu, 0.2);
  CHECK((theta.array() + 0.4).abs().maxCoeff() < 1e-10);
  CHECK((nu.array() - 0.4).abs().maxCoeff() < 1e-10);
}

TEST_CASE("mwu step leaves uniform policies unchanged when Q = 0") {
  const RegularizedGame game{CostMatrix(Eigen::MatrixXd::Zero(3, 3)), 0.5};
  const auto [g, h] = npg::mwu_policy_step(game, SimplexVector::uniform(3), SimplexVector::uniform(3), 0.4);
  CHECK((g.probs().array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);
  CHECK((h.probs().array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);
}

TEST_CASE("mwu step matches a direct transcription on the 2x2 identity") {
  const RegularizedGame game{CostMatrix(Eigen::MatrixXd::Identity(2, 2)), 1.0};
  const SimplexVector p(Eigen::Vector2d(0.9, 0.1));
  const auto [g, h] = npg::mwu_policy_step(game, p, p, 0.1);
  // g(a) ∝ 0.9^0.9 e^{-0.1 * 0.9}, 0.1^0.9 e^{-0.1 * 0.1}; h(b) with the opposite sign.
  const double g0 = std::pow(0.9, 0.9) * std::exp(-0.09);
  const double g1 = std::pow(0.1, 0.9) * std::exp(-0.01);
  const double h0 = std::pow(0.9, 0.9) * std::exp(0.09);
  const double h1 = std::pow(0.1, 0.9) * std::exp(0.01);
  CHECK(std::abs(g[0] - g0 / (g0 + g1)) < 1e-15);
  CHECK(std::abs(h[0] - h0 / (h0 + h1)) < 1e-15);
}

TEST_CASE("mwu step rejects policies with zero entries") {
  const RegularizedGame game{CostMatrix(Eigen::MatrixXd::Identity(2, 2)), 1.0};
  const SimplexVector pure(Eigen::Vector2d(1.0, 0.0));
  CHECK_THROWS_AS(npg::mwu_policy_step(game, pure, SimplexVector::uniform(2), 0.1), npg::SupportMismatch);
}

TEST_CASE("softmax commutes with the modified NPG step") {
  npg::CounterRng rng(77);
  for (int k = 0; k < 100; ++k) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.uniform01() * 8);
    const double tau = rng.uniform(0.01, 2.0);
    const double eta = rng.uniform(0.01, 0.99) / tau;
    const RegularizedGame game{CostMatrix(rng.uniform_matrix(n, n, -3.0, 3.0)), tau};
    const Eigen::VectorXd theta = rng.uniform_vector(n, -5.0, 5.0);
    const Eigen::VectorXd nu = rng.uniform_vector(n, -5.0, 5.0);
    const auto [t1, n1] = npg::npg_step(game, theta, nu, eta);
    const auto [g1, h1] = npg::mwu_policy_step(game, npg::softmax(theta), npg::softmax(nu), eta);
    CHECK((npg::softmax(t1).probs() - g1.probs()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((npg::softmax(n1).probs() - h1.probs()).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("optimistic step from zeros matches a direct transcription") {
  const RegularizedGame game = random_game(4, 4, 0.25);
  const double eta = 0.1;
  const auto s = npg::onpg_step(game, npg::OptimisticState::zeros(4, 4), eta);
  const Eigen::MatrixXd& q = game.q.entries();
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(4, 0.25);
  const Eigen::VectorXd theta_bar = -eta * q * u;
  const Eigen::VectorXd nu_bar = eta * q.transpose() * u;
  const Eigen::VectorXd theta = -eta * q * softmax_plain(nu_bar);
  const Eigen::VectorXd nu = eta * q.transpose() * softmax_plain(theta_bar);
  CHECK((s.theta_bar - theta_bar).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((s.nu_bar - nu_bar).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((s.theta - theta).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((s.nu - nu).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("optimistic step enforces the convergence bound on request") {
  const RegularizedGame game{CostMatrix(Eigen::MatrixXd::Identity(5, 5)), 0.5};
  CHECK(npg::onpg_stepsize_bound(game) == doctest::Approx(0.25));
  CHECK_NOTHROW(npg::onpg_step(game, npg::OptimisticState::zeros(5, 5), 0.25, true));
  CHECK_THROWS_AS(npg::onpg_step(game, npg::OptimisticState::zeros(5, 5), 0.26, true), npg::InvalidStepsize);
  CHECK(npg::onpg_stepsize_bound(game, npg::StepsizeNorm::kOperator) <= npg::onpg_stepsize_bound(game));
}

TEST_CASE("optimistic parameter distance obeys the V0 bound on the identity game") {
  const RegularizedGame game{CostMatrix(Eigen::MatrixXd::Identity(5, 5)), 0.5};
  npg::SolverConfig cfg;
  cfg.eta = 0.25;
  cfg.max_iters = 400;
  cfg.kl_tol = 0.0;
  cfg.param_tol = 0.0;
  const auto trace = npg::solve_regularized(game, cfg);
  CHECK((trace.target.theta_star.array() + 0.4).abs().maxCoeff() < 1e-12);
  const double et = cfg.eta * game.tau;
  for (const auto& r : trace.records) {
    const double bound = std::pow(1.0 - et / 2.0, static_cast<double>(r.iter)) * trace.v0;
    if (bound < 1e-24) break;
    CHECK(r.param_dist_to_target * r.param_dist_to_target <= bound * (1.0 + 1e-9));
  }
  for (std::size_t i = 1; i < trace.records.size(); ++i) {
    if (npg::lyapunov(trace, i - 1) < 1e-24) break;
    CHECK(npg::lyapunov(trace, i) <= (1.0 - et / 2.0) * npg::lyapunov(trace, i - 1) * (1.0 + 1e-9));
  }
}

TEST_CASE("solve on the zero matrix converges to theta* = 0") {
  const RegularizedGame game{CostMatrix(Eigen::MatrixXd::Zero(3, 3)), 1.0};
  npg::SolverConfig cfg;
  cfg.eta = 0.2;
  cfg.max_iters = 10;
  const auto trace = npg::solve_regularized(game, cfg);
  CHECK(trace.status == npg::SolverStatus::kConvergedParam);
  CHECK(trace.target.theta_star.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identity game: NPG and ONPG converge, ONPG at a larger stepsize") {
  const RegularizedGame game{CostMatrix(Eigen::MatrixXd::Identity(5, 5)), 0.1};
  const auto est = npg::estimate_npg_lipschitz(game);
  const double npg_eta = npg::npg_stepsize_bound(game, est.l_hat);
  const double onpg_eta = npg::onpg_stepsize_bound(game);
  CHECK(onpg_eta > npg_eta);

  npg::SolverConfig cfg;
  cfg.param_tol = 1e-6;
  cfg.kl_tol = 1e-12;
  cfg.optimistic = false;
  cfg.eta = npg_eta;
  cfg.max_iters = 2000000;
  const auto a = npg::solve_regularized(game, cfg);
  CHECK(a.status == npg::SolverStatus::kConvergedParam);
  cfg.optimistic = true;
  cfg.eta = onpg_eta;
  const auto b = npg::solve_regularized(game, cfg);
  CHECK(b.status == npg::SolverStatus::kConvergedParam);
  CHECK(b.iterations < a.iterations);
  // NPG above its bound is refused on the guaranteed path.
  cfg.optimistic = false;
  cfg.eta = 2.0 * npg_eta;
  CHECK_THROWS_AS(npg::solve_regularized(game, cfg), npg::InvalidStepsize);
}

TEST_CASE("random 10x10 ONPG log-KL slope is below log(1 - eta tau / 2)") {
  const RegularizedGame game = random_game(2024, 10, 0.2);
  npg::SolverConfig cfg;
  cfg.eta = npg::onpg_stepsize_bound(game);
  cfg.max_iters = 1500;
  cfg.kl_tol = 0.0;
  cfg.param_tol = 0.0;
  const auto trace = npg::solve_regularized(game, cfg);
  // Least-squares slope of log KL over [10%, end] restricted to KL above 1e-26.
  std::vector<double> xs, ys;
  for (const auto& r : trace.records) {
    if (r.iter < cfg.max_iters / 10 || r.kl_to_target < 1e-26) continue;
    xs.push_back(static_cast<double>(r.iter));
    ys.push_back(std::log(r.kl_to_target));
  }
  REQUIRE(xs.size() > 10);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
  mx /= xs.size();
  my /= ys.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) sxy += (xs[i] - mx) * (ys[i] - my), sxx += (xs[i] - mx) * (xs[i] - mx);
  CHECK(sxy / sxx <= std::log(1.0 - cfg.eta * game.tau / 2.0));
}

TEST_CASE("NPG policy iterates stay above the floor seen in the first 50 iterates") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const RegularizedGame game = random_game(seed, 6, 0.3);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(6), nu = Eigen::VectorXd::Zero(6);
    double floor = 1.0;
    for (int t = 0; t < 50; ++t) {
      std::tie(theta, nu) = npg::npg_step(game, theta, nu, 0.5);
      floor = std::min({floor, npg::softmax(theta).min_entry(), npg::softmax(nu).min_entry()});
    }
    // The floor bounds every later iterate up to a factor covering the approach to the limit.
    double later = 1.0;
    for (int t = 0; t < 5000; ++t) {
      std::tie(theta, nu) = npg::npg_step(game, theta, nu, 0.5);
      later = std::min({later, npg::softmax(theta).min_entry(), npg::softmax(nu).min_entry()});
    }
    CHECK(later > 0.0);
    CHECK(later >= 0.5 * floor);
  }
}

TEST_CASE("duality gap reference values") {
  // Q11 is the maximum of row 1 and the minimum of column 1: a pure saddle at (e1, e1).
  Eigen::Matrix2d pure;
  pure << 1.0, 0.5, 2.0, 3.0;
  const SimplexVector e1(Eigen::Vector2d(1.0, 0.0));
  CHECK(npg::duality_gap(CostMatrix(pure), e1, e1) == 0.0);
  CHECK(npg::duality_gap(CostMatrix(Eigen::Matrix2d::Identity()), SimplexVector::uniform(2), SimplexVector::uniform(2)) == 0.0);
  Eigen::Matrix2d q;
  q << 1.0, 2.0, 0.0, 3.0;
  CHECK(npg::duality_gap(CostMatrix(q), SimplexVector::uniform(2), SimplexVector::uniform(2)) > 0.0);
}

TEST_CASE("clipped vanilla run holds the policy at uniform") {
  Eigen::MatrixXd q(1, 2);
  q << -2.0, -3.0;
  const RegularizedGame game{CostMatrix(q), 1.0};
  const auto run = npg::run_vanilla_npg(game, 0.5, 20000, npg::kDivergenceThreshold, 80.0);
  CHECK(std::abs(run.nu(0) - run.nu(1)) < 1e-12);
  CHECK(std::abs(run.nu.cwiseAbs().maxCoeff() - 80.0) < 1e-12);
}
