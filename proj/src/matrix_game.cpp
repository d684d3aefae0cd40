#include "npg/matrix_game.hpp"

#include <algorithm>
#include <cmath>
#include <vector>
#include <sstream>

#include "npg/errors.hpp"

namespace npg {

namespace {

void check_shapes(const RegularizedGame& game, const ParamVector& theta, const ParamVector& nu) {
  if (theta.size() != game.q.rows() || nu.size() != game.q.cols())
    throw DimensionMismatch("parameter lengths do not match the cost matrix");
}

void check_modified_stepsize(double eta, double tau) {
  if (!(eta > 0.0) || !(tau > 0.0) || !(eta * tau < 1.0)) {
    std::ostringstream os;
    os << "modified NPG needs 0 < eta*tau < 1, got eta = " << eta << ", tau = " << tau;
    throw InvalidStepsize(os.str());
  }
}

double norm_for(const CostMatrix& q, StepsizeNorm norm) {
  return norm == StepsizeNorm::kOperator ? q.inf_operator_norm() : q.max_abs_entry();
}

double sq_param_dist(const ParamVector& theta, const ParamVector& nu, const OracleSolution& t) {
  return (theta - t.theta_star).squaredNorm() + (nu - t.nu_star).squaredNorm();
}

}  // namespace

const char* to_string(SolverStatus status) {
  switch (status) {
    case SolverStatus::kConvergedKL: return "ConvergedKL";
    case SolverStatus::kConvergedParam: return "ConvergedParam";
    case SolverStatus::kMaxIters: return "MaxIters";
    case SolverStatus::kDiverged: return "Diverged";
  }
  return "Unknown";
}

OptimisticState OptimisticState::zeros(Eigen::Index n, Eigen::Index m) {
  return from(ParamVector::Zero(n), ParamVector::Zero(m));
}

OptimisticState OptimisticState::from(ParamVector theta, ParamVector nu) {
  OptimisticState s;
  s.theta_bar = theta;
  s.nu_bar = nu;
  s.theta = std::move(theta);
  s.nu = std::move(nu);
  return s;
}

ParamPair vanilla_npg_step(const RegularizedGame& game, const ParamVector& theta, const ParamVector& nu, double eta) {
  check_shapes(game, theta, nu);
  if (!(game.tau >= 0.0)) throw ValidationError("tau", "must be nonnegative");
  const double tau = game.tau;
  const SimplexVector g = softmax(theta);
  const SimplexVector h = softmax(nu);
  const double lse_theta = log_sum_exp(theta);
  const double lse_nu = log_sum_exp(nu);
  ParamVector theta_next = (1.0 - eta * tau) * theta - eta * (game.q.entries() * h.probs());
  theta_next.array() += eta * tau * (lse_theta - 1.0);
  ParamVector nu_next = (1.0 - eta * tau) * nu + eta * (game.q.entries().transpose() * g.probs());
  nu_next.array() += eta * tau * (lse_nu - 1.0);
  require_finite(theta_next);
  require_finite(nu_next);
  return {std::move(theta_next), std::move(nu_next)};
}

ParamPair npg_step(const RegularizedGame& game, const ParamVector& theta, const ParamVector& nu, double eta) {
  check_shapes(game, theta, nu);
  check_modified_stepsize(eta, game.tau);
  const double keep = 1.0 - eta * game.tau;
  const SimplexVector g = softmax(theta);
  const SimplexVector h = softmax(nu);
  ParamVector theta_next = keep * theta - eta * (game.q.entries() * h.probs());
  ParamVector nu_next = keep * nu + eta * (game.q.entries().transpose() * g.probs());
  require_finite(theta_next);
  require_finite(nu_next);
  return {std::move(theta_next), std::move(nu_next)};
}

PolicyPair mwu_policy_step(const RegularizedGame& game, const SimplexVector& g, const SimplexVector& h, double eta) {
  if (g.size() != game.q.rows() || h.size() != game.q.cols()) throw DimensionMismatch("mwu_policy_step: shapes");
  if (!(g.min_entry() > 0.0) || !(h.min_entry() > 0.0)) throw SupportMismatch("mwu_policy_step: zero policy entry");
  check_modified_stepsize(eta, game.tau);
  const double keep = 1.0 - eta * game.tau;
  const Eigen::VectorXd lg = keep * g.probs().array().log().matrix() - eta * (game.q.entries() * h.probs());
  const Eigen::VectorXd lh = keep * h.probs().array().log().matrix() + eta * (game.q.entries().transpose() * g.probs());
  return {softmax(lg), softmax(lh)};
}

double onpg_stepsize_bound(const RegularizedGame& game, StepsizeNorm norm) {
  const double qn = norm_for(game.q, norm);
  const double a = 1.0 / (2.0 * game.tau + 2.0 * qn);
  return qn > 0.0 ? std::min(a, 1.0 / (4.0 * qn)) : a;
}

OptimisticState onpg_step(const RegularizedGame& game, const OptimisticState& s, double eta, bool guaranteed,
                          StepsizeNorm norm) {
  check_shapes(game, s.theta, s.nu);
  check_shapes(game, s.theta_bar, s.nu_bar);
  check_modified_stepsize(eta, game.tau);
  if (guaranteed) {
    const double bound = onpg_stepsize_bound(game, norm);
    if (eta > bound * (1.0 + 1e-12)) {
      std::ostringstream os;
      os << "optimistic stepsize " << eta << " exceeds the convergence bound " << bound;
      throw InvalidStepsize(os.str());
    }
  }
  const Eigen::MatrixXd& q = game.q.entries();
  const double keep = 1.0 - eta * game.tau;
  OptimisticState out;
  out.theta_bar = keep * s.theta - eta * (q * softmax(s.nu_bar).probs());
  out.nu_bar = keep * s.nu + eta * (q.transpose() * softmax(s.theta_bar).probs());
  out.theta = keep * s.theta - eta * (q * softmax(out.nu_bar).probs());
  out.nu = keep * s.nu + eta * (q.transpose() * softmax(out.theta_bar).probs());
  require_finite(out.theta);
  require_finite(out.nu);
  return out;
}

LipschitzEstimate estimate_npg_lipschitz(const RegularizedGame& game) {
  const double qop = game.q.operator_norm();
  const double eta = 0.5 / (game.tau + qop);
  ParamVector theta = ParamVector::Zero(game.q.rows());
  ParamVector nu = ParamVector::Zero(game.q.cols());
  double floor = std::min(1.0 / game.q.rows(), 1.0 / game.q.cols());
  SimplexVector g = softmax(theta);
  SimplexVector h = softmax(nu);
  for (int it = 0; it < 5000; ++it) {
    std::tie(theta, nu) = npg_step(game, theta, nu, eta);
    SimplexVector g1 = softmax(theta);
    SimplexVector h1 = softmax(nu);
    floor = std::min({floor, g1.min_entry(), h1.min_entry()});
    const double change = std::max((g1.probs() - g.probs()).cwiseAbs().maxCoeff(),
                                   (h1.probs() - h.probs()).cwiseAbs().maxCoeff());
    g = std::move(g1);
    h = std::move(h1);
    if (change < 1e-12) break;
  }
  return {qop + game.tau / floor, floor};
}

namespace {

IterationRecord make_record(long iter, const ParamVector& theta, const ParamVector& nu, const OracleSolution& t) {
  IterationRecord r;
  r.iter = iter;
  r.theta = theta;
  r.nu = nu;
  r.g = softmax(theta);
  r.h = softmax(nu);
  r.kl_to_target = kl(t.g_star, r.g) + kl(t.h_star, r.h);
  r.param_dist_to_target = std::sqrt(sq_param_dist(theta, nu, t));
  return r;
}

}  // namespace

SolverTrace solve_regularized(const RegularizedGame& game, const SolverConfig& cfg) {
  return solve_regularized(game, cfg, qre_fixed_point(game.q, game.tau));
}

SolverTrace solve_regularized(const RegularizedGame& game, const SolverConfig& cfg, const OracleSolution& target) {
  if (!(game.tau > 0.0)) throw ValidationError("tau", "regularized solvers need tau > 0");
  if (cfg.max_iters <= 0) throw ValidationError("max_iters", "must be positive");
  if (cfg.record_every <= 0) throw ValidationError("record_every", "must be positive");
  check_modified_stepsize(cfg.eta, game.tau);
  if (!cfg.optimistic && cfg.guaranteed) {
    const double l = cfg.lipschitz_override > 0.0 ? cfg.lipschitz_override : estimate_npg_lipschitz(game).l_hat;
    const double bound = npg_stepsize_bound(game, l);
    if (cfg.eta > bound * (1.0 + 1e-12)) {
      std::ostringstream os;
      os << "NPG stepsize " << cfg.eta << " exceeds tau/L^2 = " << bound << " (L = " << l << ")";
      throw InvalidStepsize(os.str());
    }
  }

  const double eta = cfg.eta;
  const double tau = game.tau;
  SolverTrace trace;
  trace.target = target;
  trace.optimistic = cfg.optimistic;
  trace.eta = eta;
  trace.tau = tau;

  OptimisticState state = OptimisticState::zeros(game.q.rows(), game.q.cols());
  trace.records.push_back(make_record(0, state.theta, state.nu, target));
  const double kl0 = trace.records.front().kl_to_target;
  const double d0 = std::pow(trace.records.front().param_dist_to_target, 2);
  if (cfg.optimistic) {
    const double qn = norm_for(game.q, cfg.norm);
    trace.lyapunov_c = (1.0 + (1.0 / (eta * tau)) * std::pow(1.0 - eta * tau, 2)) * 4.0 * eta * eta * qn * qn * kl0;
    trace.v0 = d0 + 2.0 * trace.lyapunov_c / (eta * tau);
  } else {
    const double qop = game.q.operator_norm();
    trace.lyapunov_c = (1.0 + 2.0 / (eta * tau)) * 2.0 * eta * eta * qop * qop * kl0;
    trace.v0 = d0 + 4.0 * trace.lyapunov_c / (eta * tau);
  }

  auto converged = [&](const IterationRecord& r) {
    if (r.kl_to_target > cfg.kl_tol) return false;
    return cfg.param_tol <= 0.0 || r.param_dist_to_target <= cfg.param_tol;
  };

  trace.status = SolverStatus::kMaxIters;
  long t = 0;
  try {
    while (t < cfg.max_iters) {
      if (cfg.optimistic) {
        state = onpg_step(game, state, eta, cfg.guaranteed, cfg.norm);
      } else {
        std::tie(state.theta, state.nu) = npg_step(game, state.theta, state.nu, eta);
      }
      ++t;
      if (std::max(state.theta.cwiseAbs().maxCoeff(), state.nu.cwiseAbs().maxCoeff()) > cfg.divergence_threshold) {
        trace.records.push_back(make_record(t, state.theta, state.nu, target));
        trace.status = SolverStatus::kDiverged;
        break;
      }
      IterationRecord rec = make_record(t, state.theta, state.nu, target);
      const bool done = converged(rec);
      if (done || t % cfg.record_every == 0 || t == cfg.max_iters) trace.records.push_back(std::move(rec));
      if (done) {
        trace.status = cfg.param_tol > 0.0 ? SolverStatus::kConvergedParam : SolverStatus::kConvergedKL;
        break;
      }
    }
  } catch (const DivergedParameter&) {
    if (cfg.throw_on_divergence) throw;
    trace.status = SolverStatus::kDiverged;
  }
  trace.iterations = t;
  if (trace.status == SolverStatus::kDiverged && cfg.throw_on_divergence)
    throw DivergedParameter(0, "parameter norm exceeded the divergence threshold");
  return trace;
}

double lyapunov(const SolverTrace& trace, std::size_t record_index) {
  const IterationRecord& r = trace.records.at(record_index);
  const double et = trace.eta * trace.tau;
  const double d = r.param_dist_to_target * r.param_dist_to_target;
  const double t = static_cast<double>(r.iter);
  if (trace.optimistic) return d + (2.0 * trace.lyapunov_c / et) * std::pow(1.0 - et, t);
  return d + (4.0 * trace.lyapunov_c / et) * std::pow(1.0 - et / 2.0, t);
}

VanillaRun run_vanilla_npg(const RegularizedGame& game, double eta, long max_iters, double threshold, double clip) {
  // Scalar loops over raw buffers; this runs for up to ~6e8 steps in the divergence check.
  const Eigen::MatrixXd& q = game.q.entries();
  const Eigen::Index n = q.rows();
  const Eigen::Index m = q.cols();
  const double keep = 1.0 - eta * game.tau;
  const double et = eta * game.tau;
  std::vector<double> theta(n, 0.0), nu(m, 0.0), eg(n), eh(m);
  std::vector<double> qrow(q.data(), q.data() + q.size());  // column-major copy
  VanillaRun run;
  long t = 0;
  while (t < max_iters) {
    double mt = theta[0];
    for (Eigen::Index i = 1; i < n; ++i) mt = std::max(mt, theta[i]);
    double zt = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) zt += (eg[i] = std::exp(theta[i] - mt));
    double mn = nu[0];
    for (Eigen::Index j = 1; j < m; ++j) mn = std::max(mn, nu[j]);
    double zn = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) zn += (eh[j] = std::exp(nu[j] - mn));
    const double shift_t = et * (mt + std::log(zt) - 1.0);
    const double shift_n = et * (mn + std::log(zn) - 1.0);
    // theta uses Q h, nu uses Q^T g, both at the pre-step policies.
    for (Eigen::Index j = 0; j < m; ++j) {
      double qtg = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) qtg += qrow[j * n + i] * eg[i];
      nu[j] = keep * nu[j] + eta * (qtg / zt) + shift_n;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      double qh = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) qh += qrow[j * n + i] * eh[j];
      theta[i] = keep * theta[i] - eta * (qh / zn) + shift_t;
    }
    ++t;
    if (clip > 0.0) {
      for (auto& x : theta) x = std::clamp(x, -clip, clip);
      for (auto& x : nu) x = std::clamp(x, -clip, clip);
      continue;
    }
    double norm = 0.0;
    bool finite = true;
    for (double x : theta) {
      finite &= std::isfinite(x);
      norm = std::max(norm, std::abs(x));
    }
    for (double x : nu) finite &= std::isfinite(x);
    if (!finite || norm > threshold) {
      run.diverged = true;
      break;
    }
  }
  run.iterations = t;
  run.theta = Eigen::Map<const Eigen::VectorXd>(theta.data(), n);
  run.nu = Eigen::Map<const Eigen::VectorXd>(nu.data(), m);
  return run;
}

}  // namespace npg
