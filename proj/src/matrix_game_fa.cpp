#include "npg/matrix_game_fa.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "npg/errors.hpp"

namespace npg {

namespace {

void check_maps(const RegularizedGame& game, const FeatureMap& fg, const FeatureMap& fh) {
  if (fg.n != game.q.rows() || fh.n != game.q.cols()) throw DimensionMismatch("feature maps do not match Q");
  if (fg.d != fh.d) throw DimensionMismatch("players must share the feature dimension");
}

IterationRecord fa_record(long iter, const OptimisticState& s, const FeatureMap& fg, const FeatureMap& fh,
                          const OracleSolution& t) {
  IterationRecord r;
  r.iter = iter;
  r.theta = s.theta;
  r.nu = s.nu;
  r.g = log_linear_policy(fg, s.theta);
  r.h = log_linear_policy(fh, s.nu);
  r.kl_to_target = kl(t.g_star, r.g) + kl(t.h_star, r.h);
  r.param_dist_to_target =
      std::sqrt((s.theta - t.theta_star).squaredNorm() + (s.nu - t.nu_star).squaredNorm());
  return r;
}

}  // namespace

RegularizedGame surrogate_game(const RegularizedGame& game, const FeatureMap& fg, const FeatureMap& fh) {
  check_maps(game, fg, fh);
  return {CostMatrix(fg.psi.transpose() * game.q.entries() * fh.psi), game.tau};
}

double fa_stepsize_bound(const RegularizedGame& game, const FeatureMap& fg, const FeatureMap& fh, StepsizeNorm norm) {
  return onpg_stepsize_bound(surrogate_game(game, fg, fh), norm);
}

OptimisticState onpg_fa_step(const RegularizedGame& game, const FeatureMap& fg, const FeatureMap& fh,
                             const OptimisticState& s, double eta, bool guaranteed, StepsizeNorm norm) {
  check_maps(game, fg, fh);
  if (s.theta.size() != fg.d || s.nu.size() != fh.d || s.theta_bar.size() != fg.d || s.nu_bar.size() != fh.d)
    throw DimensionMismatch("onpg_fa_step: parameters must have length d");
  if (!(eta > 0.0) || !(eta * game.tau < 1.0)) throw InvalidStepsize("onpg_fa_step: need 0 < eta*tau < 1");
  if (guaranteed) {
    const double bound = fa_stepsize_bound(game, fg, fh, norm);
    if (eta > bound * (1.0 + 1e-12)) {
      std::ostringstream os;
      os << "stepsize " << eta << " exceeds the surrogate-game bound " << bound;
      throw InvalidStepsize(os.str());
    }
  }
  const Eigen::MatrixXd& q = game.q.entries();
  const double keep = 1.0 - eta * game.tau;
  OptimisticState out;
  out.theta_bar = keep * s.theta - eta * (fg.preconditioner * (q * log_linear_policy(fh, s.nu_bar).probs()));
  out.nu_bar = keep * s.nu + eta * (fh.preconditioner * (q.transpose() * log_linear_policy(fg, s.theta_bar).probs()));
  out.theta = keep * s.theta - eta * (fg.preconditioner * (q * log_linear_policy(fh, out.nu_bar).probs()));
  out.nu = keep * s.nu + eta * (fh.preconditioner * (q.transpose() * log_linear_policy(fg, out.theta_bar).probs()));
  require_finite(out.theta);
  require_finite(out.nu);
  return out;
}

OptimisticState onpg_fa_step(const RegularizedGame& game, const FeatureMap& fmap, const OptimisticState& state,
                             double eta, bool guaranteed) {
  return onpg_fa_step(game, fmap, fmap, state, eta, guaranteed);
}

SolverTrace solve_regularized_fa(const RegularizedGame& game, const FeatureMap& fg, const FeatureMap& fh,
                                 const SolverConfig& cfg) {
  check_maps(game, fg, fh);
  if (!(game.tau > 0.0)) throw ValidationError("tau", "regularized solvers need tau > 0");
  if (!cfg.optimistic) throw ValidationError("optimistic", "the feature-map solver is optimistic only");
  if (cfg.max_iters <= 0) throw ValidationError("max_iters", "must be positive");
  if (cfg.record_every <= 0) throw ValidationError("record_every", "must be positive");

  QreOptions opts;
  opts.restrict_g = &fg;
  opts.restrict_h = &fh;
  const OracleSolution target = qre_fixed_point(game.q, game.tau, opts);

  const double eta = cfg.eta;
  const double tau = game.tau;
  SolverTrace trace;
  trace.target = target;
  trace.optimistic = true;
  trace.eta = eta;
  trace.tau = tau;

  OptimisticState state = OptimisticState::zeros(fg.d, fh.d);
  trace.records.push_back(fa_record(0, state, fg, fh, target));
  const double kl0 = trace.records.front().kl_to_target;
  const double qn = cfg.norm == StepsizeNorm::kOperator ? surrogate_game(game, fg, fh).q.inf_operator_norm()
                                                         : surrogate_game(game, fg, fh).q.max_abs_entry();
  trace.lyapunov_c = (1.0 + (1.0 / (eta * tau)) * std::pow(1.0 - eta * tau, 2)) * 4.0 * eta * eta * qn * qn * kl0;
  trace.v0 = std::pow(trace.records.front().param_dist_to_target, 2) + 2.0 * trace.lyapunov_c / (eta * tau);

  trace.status = SolverStatus::kMaxIters;
  long t = 0;
  try {
    while (t < cfg.max_iters) {
      state = onpg_fa_step(game, fg, fh, state, eta, cfg.guaranteed, cfg.norm);
      ++t;
      IterationRecord rec = fa_record(t, state, fg, fh, target);
      if (std::max(state.theta.cwiseAbs().maxCoeff(), state.nu.cwiseAbs().maxCoeff()) > cfg.divergence_threshold) {
        trace.records.push_back(std::move(rec));
        trace.status = SolverStatus::kDiverged;
        break;
      }
      const bool done = rec.kl_to_target <= cfg.kl_tol && (cfg.param_tol <= 0.0 || rec.param_dist_to_target <= cfg.param_tol);
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
  return trace;
}

SolverTrace solve_regularized_fa(const RegularizedGame& game, const FeatureMap& fmap, const SolverConfig& cfg) {
  return solve_regularized_fa(game, fmap, fmap, cfg);
}

double in_class_duality_gap(const CostMatrix& q, const FeatureMap& fg, const FeatureMap& fh, const SimplexVector& g,
                            const SimplexVector& h) {
  const Eigen::VectorXd qtg = q.entries().transpose() * g.probs();
  const Eigen::VectorXd qh = q.entries() * h.probs();
  double best_max = -std::numeric_limits<double>::infinity();
  for (const auto& v : restricted_extreme_points(fh)) best_max = std::max(best_max, qtg.dot(v));
  double best_min = std::numeric_limits<double>::infinity();
  for (const auto& u : restricted_extreme_points(fg)) best_min = std::min(best_min, qh.dot(u));
  return best_max - best_min;
}

}  // namespace npg
