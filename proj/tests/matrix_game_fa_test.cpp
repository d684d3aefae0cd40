#include <cmath>

#include "doctest.h"
#include "npg/errors.hpp"
#include "npg/matrix_game_fa.hpp"
#include "npg/rng.hpp"

using npg::CostMatrix;
using npg::FeatureMap;
using npg::RegularizedGame;

namespace {

Eigen::MatrixXd random_invertible(std::uint64_t seed, Eigen::Index d) {
  npg::CounterRng rng(seed);
  // Diagonal shift keeps the condition number small.
  return rng.uniform_matrix(d, d, -1.0, 1.0) + 2.0 * static_cast<double>(d) * Eigen::MatrixXd::Identity(d, d);
}

Eigen::VectorXd restricted_point(npg::CounterRng& rng, Eigen::Index d, Eigen::Index n) {
  const Eigen::VectorXd w = rng.dirichlet_flat(d + 1);
  Eigen::VectorXd mu(n);
  mu.head(d) = w.head(d);
  mu.tail(n - d).setConstant(w(d) / static_cast<double>(n - d));
  return mu;
}

Eigen::VectorXd softmax_plain(const Eigen::VectorXd& x) {
  Eigen::VectorXd e = (x.array() - x.maxCoeff()).exp();
  return e / e.sum();
}

}  // namespace

TEST_CASE("feature map matrices for M = I2, n = 4") {
  const FeatureMap f = npg::build_feature_map(Eigen::MatrixXd::Identity(2, 2), 4);
  Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(4, 4);
  psi.topLeftCorner(2, 2).setIdentity();
  psi.bottomRightCorner(2, 2).setConstant(0.5);
  Eigen::MatrixXd pt = Eigen::MatrixXd::Zero(4, 4);
  pt.topLeftCorner(2, 2).setIdentity();
  pt.topRightCorner(2, 2).setConstant(-0.5);
  CHECK((f.psi - psi).cwiseAbs().maxCoeff() == 0.0);
  CHECK((f.p_tilde - pt).cwiseAbs().maxCoeff() == 0.0);
  CHECK((f.preconditioner - pt.topRows(2)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("identity features give the top rows of P~ as preconditioner") {
  for (Eigen::Index n : {3, 5, 9}) {
    const FeatureMap f = npg::build_feature_map(Eigen::MatrixXd::Identity(2, 2), n);
    CHECK((f.preconditioner - f.p_tilde.topRows(2)).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("Psi is idempotent and fixes the restricted simplex") {
  const FeatureMap f = npg::build_feature_map(random_invertible(3, 3), 7);
  CHECK((f.psi * f.psi - f.psi).cwiseAbs().maxCoeff() < 1e-12);
  npg::CounterRng rng(11);
  for (int k = 0; k < 100; ++k) {
    const Eigen::VectorXd mu = restricted_point(rng, 3, 7);
    REQUIRE(npg::in_restricted_simplex(mu, 3));
    CHECK((f.psi * mu - mu).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("singular feature blocks are rejected") {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 2.0, 2.0, 4.0;
  CHECK_THROWS_AS(npg::build_feature_map(m, 4), npg::SingularFeatureBlock);
  Eigen::MatrixXd nearly = Eigen::MatrixXd::Identity(2, 2);
  nearly(1, 1) = 1e-14;
  CHECK_THROWS_AS(npg::build_feature_map(nearly, 4), npg::SingularFeatureBlock);
}

TEST_CASE("log-linear policy examples") {
  const FeatureMap f = npg::build_feature_map(Eigen::MatrixXd::Identity(2, 2), 4);
  const auto u = npg::log_linear_policy(f, Eigen::VectorXd::Zero(2));
  CHECK((u.probs().array() - 0.25).abs().maxCoeff() < 1e-15);
  const auto p = npg::log_linear_policy(f, Eigen::VectorXd::Constant(2, std::log(2.0)));
  Eigen::Vector4d expected(2.0 / 6, 2.0 / 6, 1.0 / 6, 1.0 / 6);
  CHECK((p.probs() - expected).cwiseAbs().maxCoeff() < 1e-15);

  const FeatureMap g = npg::build_feature_map(random_invertible(5, 3), 8);
  npg::CounterRng rng(6);
  for (int k = 0; k < 100; ++k) {
    const Eigen::VectorXd theta = rng.uniform_vector(3, -5.0, 5.0);
    CHECK(npg::in_restricted_simplex(npg::log_linear_policy(g, theta).probs(), 3));
  }
}

TEST_CASE("restricted targets are fixed points of the feature-map step") {
  npg::CounterRng rng(21);
  const RegularizedGame game{CostMatrix(rng.uniform_matrix(6, 6, -1.0, 1.0)), 0.3};
  const FeatureMap f = npg::build_feature_map(random_invertible(22, 3), 6);
  npg::QreOptions opts;
  opts.restrict_g = &f;
  opts.restrict_h = &f;
  const auto sol = npg::qre_fixed_point(game.q, game.tau, opts);
  CHECK(npg::in_restricted_simplex(sol.g_star.probs(), 3));
  CHECK(npg::in_restricted_simplex(sol.h_star.probs(), 3));

  // theta* = -Pre Q h*/tau and nu* = Pre Q^T g*/tau.
  const Eigen::VectorXd theta_star = -f.preconditioner * (game.q.entries() * sol.h_star.probs()) / game.tau;
  const Eigen::VectorXd nu_star = f.preconditioner * (game.q.entries().transpose() * sol.g_star.probs()) / game.tau;
  CHECK((theta_star - sol.theta_star).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((nu_star - sol.nu_star).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((npg::log_linear_policy(f, theta_star).probs() - sol.g_star.probs()).cwiseAbs().maxCoeff() < 1e-12);

  const auto s0 = npg::OptimisticState::from(theta_star, nu_star);
  const auto s1 = npg::onpg_fa_step(game, f, s0, 0.1);
  CHECK((s1.theta - theta_star).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((s1.nu - nu_star).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((s1.theta_bar - theta_star).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("identity features reproduce the tabular run on the surrogate game") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    npg::CounterRng rng(100 + seed);
    const RegularizedGame game{CostMatrix(rng.uniform_matrix(8, 8, -1.0, 1.0)), 0.2};
    const FeatureMap f = npg::build_feature_map(Eigen::MatrixXd::Identity(3, 3), 8);
    const RegularizedGame sur = npg::surrogate_game(game, f, f);
    const double eta = npg::fa_stepsize_bound(game, f, f);
    auto fa = npg::OptimisticState::zeros(3, 3);
    auto tab = npg::OptimisticState::zeros(8, 8);
    double worst = 0.0;
    for (int t = 0; t < 300; ++t) {
      fa = npg::onpg_fa_step(game, f, fa, eta, true);
      tab = npg::onpg_step(sur, tab, eta, true);
      worst = std::max(worst, (npg::log_linear_policy(f, fa.theta).probs() - npg::softmax(tab.theta).probs())
                                  .cwiseAbs()
                                  .maxCoeff());
      worst = std::max(worst, (npg::log_linear_policy(f, fa.nu).probs() - npg::softmax(tab.nu).probs())
                                  .cwiseAbs()
                                  .maxCoeff());
    }
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("feature-map step from zeros matches a direct transcription") {
  const Eigen::Index n = 6;
  const Eigen::Index d = 3;
  npg::CounterRng rng(31);
  const Eigen::MatrixXd q = rng.uniform_matrix(n, n, -1.0, 1.0);
  const Eigen::MatrixXd m = random_invertible(32, d);
  const RegularizedGame game{CostMatrix(q), 0.25};
  const FeatureMap f = npg::build_feature_map(m, n);
  const double eta = 0.1;

  Eigen::MatrixXd pt = Eigen::MatrixXd::Zero(n, n);
  pt.topLeftCorner(d, d).setIdentity();
  pt.topRightCorner(d, n - d).setConstant(-1.0 / static_cast<double>(n - d));
  Eigen::MatrixXd lift = Eigen::MatrixXd::Zero(d, n);
  lift.leftCols(d) = m.transpose().inverse();
  const Eigen::MatrixXd pre = lift * pt;
  auto pol = [&](const Eigen::VectorXd& th) {
    Eigen::VectorXd logits = Eigen::VectorXd::Zero(n);
    logits.head(d) = m.transpose() * th;
    return softmax_plain(logits);
  };

  const Eigen::VectorXd z = Eigen::VectorXd::Zero(d);
  const double keep = 1.0 - eta * game.tau;
  const Eigen::VectorXd tb = keep * z - eta * pre * q * pol(z);
  const Eigen::VectorXd nb = keep * z + eta * pre * q.transpose() * pol(z);
  const Eigen::VectorXd th = keep * z - eta * pre * q * pol(nb);
  const Eigen::VectorXd nu = keep * z + eta * pre * q.transpose() * pol(tb);

  const auto s = npg::onpg_fa_step(game, f, npg::OptimisticState::zeros(d, d), eta);
  CHECK((s.theta_bar - tb).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((s.nu_bar - nb).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((s.theta - th).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((s.nu - nu).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("zero cost converges to zero parameters") {
  const RegularizedGame game{CostMatrix(Eigen::MatrixXd::Zero(5, 5)), 0.5};
  const FeatureMap f = npg::build_feature_map(random_invertible(41, 2), 5);
  npg::SolverConfig cfg;
  cfg.eta = 0.5;
  cfg.guaranteed = false;
  cfg.max_iters = 1000;
  const auto trace = npg::solve_regularized_fa(game, f, cfg);
  CHECK(trace.target.theta_star.cwiseAbs().maxCoeff() == 0.0);
  CHECK(trace.status == npg::SolverStatus::kConvergedParam);
}

TEST_CASE("feature-map parameter distance contracts at the optimistic rate") {
  npg::CounterRng rng(51);
  const RegularizedGame game{CostMatrix(rng.uniform_matrix(20, 20, -1.0, 1.0)), 0.2};
  const FeatureMap f = npg::build_feature_map(random_invertible(52, 4), 20);
  npg::SolverConfig cfg;
  cfg.eta = npg::fa_stepsize_bound(game, f, f);
  cfg.max_iters = 3000;
  cfg.kl_tol = 0.0;
  cfg.param_tol = 0.0;
  const auto trace = npg::solve_regularized_fa(game, f, cfg);
  const double rate = 1.0 - cfg.eta * game.tau / 2.0;
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const double bound = std::pow(rate, static_cast<double>(trace.records[i].iter)) * trace.v0;
    if (bound < 1e-20) break;
    CHECK(npg::lyapunov(trace, i) <= bound * (1.0 + 1e-6));
  }
}

TEST_CASE("small regularization gives an in-class approximate equilibrium") {
  const double eps = 0.1;
  const Eigen::Index n = 8;
  const double tau = eps / (8.0 * std::log(static_cast<double>(n)));
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    npg::CounterRng rng(60 + seed);
    const RegularizedGame game{CostMatrix(rng.uniform_matrix(n, n, -1.0, 1.0)), tau};
    const FeatureMap f = npg::build_feature_map(random_invertible(70 + seed, 3), n);
    npg::SolverConfig cfg;
    cfg.eta = npg::fa_stepsize_bound(game, f, f);
    cfg.max_iters = 200000;
    cfg.record_every = 200000;
    const auto trace = npg::solve_regularized_fa(game, f, cfg);
    const auto& last = trace.records.back();
    CHECK(npg::in_class_duality_gap(game.q, f, f, last.g, last.h) <= eps);
  }
}
