#include "npg/acceptance.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "npg/errors.hpp"
#include "npg/markov_game.hpp"
#include "npg/matrix_game_fa.hpp"
#include "npg/monotone_game.hpp"
#include "npg/rng.hpp"

namespace npg {

namespace {

// Rate bounds are asserted only while the bound sits above double-precision noise on the compared quantity.
constexpr double kKlFloor = 1e-20;
constexpr double kParamFloor = 1e-24;
constexpr double kRateSlack = 1e-6;

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", x);
  return buf;
}

RegularizedGame seeded_game(std::uint64_t seed, Eigen::Index n, double tau) {
  CounterRng rng(seed);
  return {CostMatrix(rng.uniform_matrix(n, n, -1.0, 1.0)), tau};
}

double max_policy_gap(const std::vector<SimplexVector>& a, const std::vector<SimplexVector>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, (a[i].probs() - b[i].probs()).cwiseAbs().maxCoeff());
  return d;
}

// Least-squares slope of y against x.
double fitted_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

AcceptanceResult ac1() {
  AcceptanceResult r{1, "vanilla NPG divergence", true, "", 0.0};
  const RegularizedGame game{CostMatrix(Eigen::MatrixXd::Constant(2, 1, -2.0)), 1.0};
  std::ostringstream os;
  const char* sep = "";
  for (double eta : {1e-3, 1e-2, 1e-1, 1.0}) {
    const long budget = static_cast<long>(std::ceil(1e7 / eta));
    const VanillaRun run = run_vanilla_npg(game, eta, budget, kDivergenceThreshold);
    const bool ok = run.diverged && run.theta.cwiseAbs().maxCoeff() > kDivergenceThreshold;
    r.passed &= ok;
    os << sep << "eta=" << eta << (ok ? " crossed 1e6 at t=" : " stayed bounded through t=") << run.iterations;
    sep = "; ";
  }
  r.detail = os.str();
  return r;
}

AcceptanceResult ac2() {
  AcceptanceResult r{2, "clipping counterexample", false, "", 0.0};
  Eigen::MatrixXd q(1, 2);
  q << -2.0, -3.0;
  const RegularizedGame game{CostMatrix(q), 1.0};
  const double eta = 0.1;
  ParamVector theta = ParamVector::Zero(1);
  ParamVector nu = ParamVector::Zero(2);
  for (int t = 0; t < 2000; ++t) std::tie(theta, nu) = npg_step(game, theta, nu, eta);
  const double mod_err = (nu - Eigen::Vector2d(-2.0, -3.0)).cwiseAbs().maxCoeff();
  const bool mod_ok = mod_err <= 1e-8;

  const VanillaRun clipped = run_vanilla_npg(game, eta, 20000, kDivergenceThreshold, 80.0);
  const SimplexVector pol = softmax(clipped.nu);
  const bool uniform = (pol.probs().array() - 0.5).abs().maxCoeff() <= 1e-12;
  const bool at_plus = (clipped.nu.array() - 80.0).abs().maxCoeff() <= 1e-8;
  r.passed = mod_ok && uniform && at_plus;
  std::ostringstream os;
  os << "modified NPG error " << sci(mod_err) << (mod_ok ? " (ok)" : " (too large)") << "; clipped vanilla ends at ["
     << clipped.nu(0) << ", " << clipped.nu(1) << "] with policy [" << pol[0] << ", " << pol[1] << "]"
     << (at_plus ? "" : ", expected [80, 80]");
  r.detail = os.str();
  return r;
}

AcceptanceResult ac3() {
  AcceptanceResult r{3, "non-optimistic NPG rates", true, "", 0.0};
  double worst_kl = 0.0;
  double worst_v = 0.0;
  double min_eta = 1.0;
  long checked = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const RegularizedGame game = seeded_game(3000 + s, 10, 0.2);
    const LipschitzEstimate est = estimate_npg_lipschitz(game);
    SolverConfig cfg;
    cfg.optimistic = false;
    cfg.lipschitz_override = est.l_hat;
    cfg.eta = npg_stepsize_bound(game, est.l_hat);
    cfg.max_iters = 20000;
    cfg.kl_tol = -1.0;
    cfg.param_tol = 0.0;
    const SolverTrace tr = solve_regularized(game, cfg);
    min_eta = std::min(min_eta, cfg.eta);
    const double kl_rate = 1.0 - cfg.eta * game.tau / 2.0;
    const double v_rate = 1.0 - cfg.eta * game.tau / 4.0;
    for (std::size_t t = 0; t + 1 < tr.records.size(); ++t) {
      const double k0 = tr.records[t].kl_to_target;
      if (k0 > kKlFloor) {
        worst_kl = std::max(worst_kl, tr.records[t + 1].kl_to_target / (kl_rate * k0));
        ++checked;
      }
      const double v0 = lyapunov(tr, t);
      if (v0 > kParamFloor) worst_v = std::max(worst_v, lyapunov(tr, t + 1) / (v_rate * v0));
    }
  }
  r.passed = worst_kl <= 1.0 + kRateSlack && worst_v <= 1.0 + kRateSlack;
  r.detail = "max KL ratio to (1 - eta tau/2) bound " + sci(worst_kl) + ", max Lyapunov ratio to (1 - eta tau/4) bound " +
             sci(worst_v) + " over " + std::to_string(checked) + " steps; smallest eta " + sci(min_eta);
  return r;
}

AcceptanceResult ac4() {
  AcceptanceResult r{4, "optimistic NPG rate", true, "", 0.0};
  double worst_margin = -1e300;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const RegularizedGame game = seeded_game(3000 + s, 10, 0.2);
    SolverConfig cfg;
    cfg.eta = onpg_stepsize_bound(game);
    cfg.max_iters = 4000;
    cfg.kl_tol = -1.0;
    cfg.param_tol = 0.0;
    const SolverTrace tr = solve_regularized(game, cfg);
    std::vector<double> xs, ys;
    for (const auto& rec : tr.records) {
      const double d2 = rec.param_dist_to_target * rec.param_dist_to_target;
      if (d2 <= kParamFloor) break;
      xs.push_back(static_cast<double>(rec.iter));
      ys.push_back(std::log(d2));
    }
    const std::size_t burn = xs.size() / 10;
    xs.erase(xs.begin(), xs.begin() + static_cast<long>(burn));
    ys.erase(ys.begin(), ys.begin() + static_cast<long>(burn));
    const double slope = fitted_slope(xs, ys);
    const double margin = slope - (std::log(1.0 - cfg.eta * game.tau / 2.0) + 1e-3);
    worst_margin = std::max(worst_margin, margin);
    r.passed &= margin <= 0.0;
  }
  r.detail = "largest fitted slope minus allowed slope " + sci(worst_margin) + " (must be <= 0)";
  return r;
}

AcceptanceResult ac5() {
  AcceptanceResult r{5, "small-regularization equilibrium", true, "", 0.0};
  const double eps = 0.05;
  const int n = 5;
  const double tau = eps / (8.0 * std::log(static_cast<double>(n)));
  // Budget constant 16 in T = c (log n)/(eta eps) log(1/eps).
  constexpr double kBudgetConstant = 16.0;
  double worst = 0.0;
  long budget = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const RegularizedGame game = seeded_game(5000 + s, n, tau);
    const double eta = onpg_stepsize_bound(game);
    budget = static_cast<long>(std::ceil(kBudgetConstant * std::log(static_cast<double>(n)) / (eta * eps) *
                                         std::log(1.0 / eps)));
    OptimisticState st = OptimisticState::zeros(n, n);
    for (long t = 0; t < budget; ++t) st = onpg_step(game, st, eta, true);
    const double gap = duality_gap(game.q, softmax(st.theta), softmax(st.nu));
    worst = std::max(worst, gap);
  }
  r.passed = worst <= eps;
  r.detail = "largest duality gap " + sci(worst) + " (eps 0.05, tau " + sci(tau) + ", last budget " +
             std::to_string(budget) + ")";
  return r;
}

AcceptanceResult ac6() {
  AcceptanceResult r{6, "feature-map equivalence", true, "", 0.0};
  double worst_traj = 0.0;
  double worst_limit = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const RegularizedGame game = seeded_game(6000 + s, 8, 0.2);
    const FeatureMap ident = build_feature_map(Eigen::MatrixXd::Identity(3, 3), 8);
    const RegularizedGame sur = surrogate_game(game, ident, ident);
    const double eta = fa_stepsize_bound(game, ident, ident);
    OptimisticState fa = OptimisticState::zeros(3, 3);
    OptimisticState tab = OptimisticState::zeros(8, 8);
    for (int t = 0; t < 500; ++t) {
      fa = onpg_fa_step(game, ident, fa, eta);
      tab = onpg_step(sur, tab, eta);
      worst_traj = std::max(worst_traj, (log_linear_policy(ident, fa.theta).probs() - softmax(tab.theta).probs())
                                            .cwiseAbs()
                                            .maxCoeff());
      worst_traj = std::max(
          worst_traj, (log_linear_policy(ident, fa.nu).probs() - softmax(tab.nu).probs()).cwiseAbs().maxCoeff());
    }

    CounterRng rng(6100 + s);
    const Eigen::MatrixXd m = rng.uniform_matrix(3, 3, -1.0, 1.0) + 6.0 * Eigen::MatrixXd::Identity(3, 3);
    const FeatureMap general = build_feature_map(m, 8);
    const RegularizedGame sur2 = surrogate_game(game, general, general);
    const double eta2 = fa_stepsize_bound(game, general, general);
    OptimisticState fa2 = OptimisticState::zeros(3, 3);
    OptimisticState tab2 = OptimisticState::zeros(8, 8);
    for (int t = 0; t < 5000; ++t) {
      fa2 = onpg_fa_step(game, general, fa2, eta2);
      tab2 = onpg_step(sur2, tab2, eta2);
    }
    worst_limit = std::max(
        worst_limit, (log_linear_policy(general, fa2.theta).probs() - softmax(tab2.theta).probs()).cwiseAbs().maxCoeff());
    worst_limit = std::max(
        worst_limit, (log_linear_policy(general, fa2.nu).probs() - softmax(tab2.nu).probs()).cwiseAbs().maxCoeff());
  }
  r.passed = worst_traj <= 1e-10 && worst_limit <= 1e-8;
  r.detail = "M = I per-step policy gap " + sci(worst_traj) + "; random M limit policy gap " + sci(worst_limit);
  return r;
}

AcceptanceResult ac7() {
  AcceptanceResult r{7, "monotone three-method agreement", true, "", 0.0};
  std::vector<MonotoneGameSpec> specs;
  for (std::uint64_t s = 0; s < 4; ++s) specs.push_back(zero_sum_as_monotone(seeded_game(7000 + s, 5, 0.2).q, 0.2));
  specs.push_back(cyclic_linear_game(3, 4, 3, 0.1));
  double worst_gap = 0.0;
  double worst_ratio = 0.0;
  for (const auto& spec : specs) {
    const MonotoneOracleSolution target = pp_reference_monotone(spec);
    std::vector<std::vector<SimplexVector>> limits;
    for (auto method : {MonotoneMethod::kOnpg, MonotoneMethod::kEg, MonotoneMethod::kPp}) {
      MonotoneConfig cfg;
      cfg.eta = monotone_default_stepsize(spec, method);
      cfg.max_iters = 400000;
      cfg.kl_tol = 1e-24;
      cfg.param_tol = 1e-11;
      cfg.record_every = 100000;
      const MonotoneTrace tr = solve_monotone(spec, cfg, method, target);
      r.passed &= tr.status == SolverStatus::kConvergedParam;
      limits.push_back(tr.records.back().z);
    }
    worst_gap = std::max({worst_gap, max_policy_gap(limits[0], limits[1]), max_policy_gap(limits[0], limits[2]),
                          max_policy_gap(limits[1], limits[2])});

    MonotoneConfig cfg;
    cfg.eta = 0.9 * monotone_stepsize_bound(spec, MonotoneMethod::kOnpg);
    cfg.max_iters = 20000;
    cfg.kl_tol = -1.0;
    cfg.param_tol = 0.0;
    const MonotoneTrace tr = solve_monotone(spec, cfg, MonotoneMethod::kOnpg, target);
    const double kl0 = tr.records.front().kl_main;
    for (std::size_t t = 0; t + 1 < tr.records.size(); ++t) {
      const double bound = std::pow(1.0 - cfg.eta * spec.tau, static_cast<double>(t)) * 2.0 * kl0;
      if (bound <= kKlFloor) break;
      worst_ratio = std::max(worst_ratio, onpg_kl_potential(tr, t) / bound);
    }
  }
  r.passed &= worst_gap <= 1e-8 && worst_ratio <= 1.0 + kRateSlack;
  r.detail = "largest pairwise limit gap " + sci(worst_gap) + "; largest KL ratio to (1 - eta tau)^t 2 KL0 " +
             sci(worst_ratio);
  return r;
}

AcceptanceResult ac8(int threads) {
  AcceptanceResult r{8, "tabular Markov game", true, "", 0.0};
  const MarkovGameSpec spec = random_markov_game(5, 4, 0.8, 0.1, 5);
  MarkovConfig cfg;
  cfg.threads = threads;
  const MarkovOracleSolution oracle = soft_value_iteration_oracle(spec, nullptr, 1e-13);
  // Baseline budgets that already reach 1e-3 on both quantities; the criterion runs them doubled.
  constexpr long kBaseOuter = 50;
  constexpr long kBaseInner = 2000;
  const MarkovResult base = solve_markov_tabular(spec, kBaseOuter, kBaseInner, cfg, oracle);
  const MarkovResult run = solve_markov_tabular(spec, 2 * kBaseOuter, 2 * kBaseInner, cfg, oracle);
  const auto& last = run.trace.back();
  r.passed = last.q_error <= 1e-3 && last.param_dist <= 1e-3;
  r.detail = "doubled budgets (" + std::to_string(2 * kBaseOuter) + ", " + std::to_string(2 * kBaseInner) +
             "): Q error " + sci(last.q_error) + ", parameter distance " + sci(last.param_dist) + "; baseline gave " +
             sci(base.trace.back().q_error) + ", " + sci(base.trace.back().param_dist);
  return r;
}

AcceptanceResult ac9(int threads) {
  AcceptanceResult r{9, "Markov game with features", true, "", 0.0};
  const MarkovGameSpec spec = uniform_transition_game(10, 10, 0.8, 0.1, 71);
  const MarkovFeatureMap mf = first_action_feature_map(10, 10);
  MarkovConfig cfg;
  cfg.threads = threads;
  constexpr long kOuter = 60;
  const MarkovResult run = solve_markov_fa(spec, mf, kOuter, 2000, cfg);
  const std::size_t burn = static_cast<std::size_t>(kOuter / 10);
  // Roundoff slack for trace entries that have already settled.
  constexpr double kMonotoneSlack = 1e-12;
  bool monotone = true;
  for (std::size_t k = burn + 1; k < run.trace.size(); ++k) {
    monotone &= run.trace[k].q_error <= run.trace[k - 1].q_error + kMonotoneSlack;
    monotone &= run.trace[k].param_dist <= run.trace[k - 1].param_dist + kMonotoneSlack;
  }
  const auto& last = run.trace.back();
  const bool small = last.q_error < 1e-4 && last.param_dist < 1e-4;

  const MarkovFeatureMap ident = tabular_markov_feature_map(10, 10);
  const MarkovOracleSolution oracle = soft_value_iteration_oracle(spec, nullptr, 1e-13);
  const MarkovResult tab = solve_markov_tabular(spec, 10, 500, cfg, oracle);
  const MarkovResult fa = solve_markov_fa(spec, ident, 10, 500, cfg, oracle);
  double match = 0.0;
  for (int s = 0; s < 10; ++s) {
    match = std::max(match, (tab.q.q[s] - fa.q.q[s]).cwiseAbs().maxCoeff());
    match = std::max(match, (tab.params.theta[s] - fa.params.theta[s]).cwiseAbs().maxCoeff());
    match = std::max(match, (tab.params.nu[s] - fa.params.nu[s]).cwiseAbs().maxCoeff());
  }
  for (std::size_t k = 0; k < tab.trace.size(); ++k)
    match = std::max(match, std::abs(tab.trace[k].q_error - fa.trace[k].q_error));
  r.passed = monotone && small && match <= 1e-12;
  r.detail = std::string(monotone ? "non-increasing" : "NOT non-increasing") + " after burn-in; final Q error " +
             sci(last.q_error) + ", parameter distance " + sci(last.param_dist) + "; identity features vs tabular " +
             sci(match);
  return r;
}

AcceptanceResult ac10() {
  AcceptanceResult r{10, "soft Bellman contraction", true, "", 0.0};
  const MarkovGameSpec spec = random_markov_game(5, 4, 0.8, 0.1, 10);
  CounterRng rng(1010);
  const double hi = value_bound(spec);
  double worst = -1e300;
  for (int k = 0; k < 50; ++k) {
    std::vector<Eigen::MatrixXd> q1, q2;
    for (int s = 0; s < spec.n_states; ++s) q1.push_back(rng.uniform_matrix(4, 4, 0.0, hi));
    for (int s = 0; s < spec.n_states; ++s) q2.push_back(rng.uniform_matrix(4, 4, 0.0, hi));
    double din = 0.0, dout = 0.0;
    const QTensor t1 = soft_bellman_exact(spec, q1);
    const QTensor t2 = soft_bellman_exact(spec, q2);
    for (int s = 0; s < spec.n_states; ++s) {
      din = std::max(din, (q1[s] - q2[s]).cwiseAbs().maxCoeff());
      dout = std::max(dout, (t1.q[s] - t2.q[s]).cwiseAbs().maxCoeff());
    }
    worst = std::max(worst, dout - spec.gamma * din);
  }
  r.passed = worst <= 1e-9;
  r.detail = "largest ||T Q1 - T Q2|| - gamma ||Q1 - Q2|| over 50 pairs " + sci(worst);
  return r;
}

AcceptanceResult ac11() {
  AcceptanceResult r{11, "oracle integrity", true, "", 0.0};
  double worst_res = 0.0;
  double worst_agree = 0.0;
  const double taus[] = {0.05, 0.1, 0.2, 0.5};
  for (std::uint64_t s = 0; s < 20; ++s) {
    const double tau = taus[s % 4];
    const RegularizedGame game = seeded_game(11000 + s, 3 + static_cast<Eigen::Index>(s % 6), tau);
    const OracleSolution qre = qre_fixed_point(game.q, tau);
    const MonotoneOracleSolution pp = pp_reference_monotone(zero_sum_as_monotone(game.q, tau));
    worst_res = std::max({worst_res, qre.residual, pp.residual});
    worst_agree = std::max({worst_agree, (qre.g_star.probs() - pp.z_star[0].probs()).cwiseAbs().maxCoeff(),
                            (qre.h_star.probs() - pp.z_star[1].probs()).cwiseAbs().maxCoeff()});

    const FeatureMap f = build_feature_map(Eigen::MatrixXd::Identity(2, 2), game.q.rows());
    worst_res = std::max(worst_res, qre_fixed_point(game.q, tau, &f).residual);
  }
  const MarkovOracleSolution markov = soft_value_iteration_oracle(random_markov_game(5, 4, 0.8, 0.1, 5), nullptr, 1e-13);
  worst_res = std::max(worst_res, markov.max_state_residual);
  r.passed = worst_res <= 1e-12 && worst_agree <= 1e-10;
  r.detail = "largest oracle residual " + sci(worst_res) + "; largest QRE vs proximal-point gap " + sci(worst_agree);
  return r;
}

}  // namespace

AcceptanceResult run_criterion(int id, int threads) {
  const auto start = std::chrono::steady_clock::now();
  AcceptanceResult r;
  try {
    switch (id) {
      case 1: r = ac1(); break;
      case 2: r = ac2(); break;
      case 3: r = ac3(); break;
      case 4: r = ac4(); break;
      case 5: r = ac5(); break;
      case 6: r = ac6(); break;
      case 7: r = ac7(); break;
      case 8: r = ac8(threads); break;
      case 9: r = ac9(threads); break;
      case 10: r = ac10(); break;
      case 11: r = ac11(); break;
      default: throw ValidationError("criterion", "must lie in [1, 11]");
    }
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    r.id = id;
    r.name = "criterion";
    r.passed = false;
    r.detail = std::string("raised: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::vector<AcceptanceResult> run_acceptance(int threads, const std::function<void(const AcceptanceResult&)>& on_result) {
  std::vector<AcceptanceResult> out;
  for (int id = 1; id <= kAcceptanceCount; ++id) {
    out.push_back(run_criterion(id, threads));
    if (on_result) on_result(out.back());
  }
  return out;
}

std::string format_result(const AcceptanceResult& r) {
  char secs[32];
  std::snprintf(secs, sizeof(secs), "%.1f", r.seconds);
  return std::string(r.passed ? "PASS" : "FAIL") + " AC" + std::to_string(r.id) + " " + r.name + ": " + r.detail +
         " [" + secs + "s]";
}

}  // namespace npg
