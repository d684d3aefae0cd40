#include "npg/monotone_game.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "npg/errors.hpp"

namespace npg {

namespace {

Eigen::VectorXd stacked(const MonotoneGameSpec& spec, const std::vector<SimplexVector>& z) {
  if (static_cast<int>(z.size()) != spec.n_players) throw DimensionMismatch("player count mismatch");
  return stack_policies(z);
}

Eigen::VectorXd player_block(const Eigen::VectorXd& f, const MonotoneGameSpec& spec, int i) {
  return f.segment(static_cast<Eigen::Index>(i) * spec.n_actions, spec.n_actions);
}

void check_eta(const MonotoneGameSpec& spec, MonotoneMethod method, double eta, bool guaranteed) {
  if (!(eta > 0.0) || !(eta * spec.tau < 1.0)) throw InvalidStepsize("need 0 < eta*tau < 1");
  if (!guaranteed) return;
  const double bound = monotone_stepsize_bound(spec, method);
  if (!(eta < bound)) {
    std::ostringstream os;
    os << to_string(method) << " stepsize " << eta << " violates the strict bound " << bound;
    throw InvalidStepsize(os.str());
  }
}

void check_state(const MultiPlayerState& s, int n_players) {
  if (static_cast<int>(s.theta.size()) != n_players || static_cast<int>(s.theta_bar.size()) != n_players)
    throw DimensionMismatch("state player count mismatch");
}

}  // namespace

const char* to_string(MonotoneMethod method) {
  switch (method) {
    case MonotoneMethod::kOnpg: return "onpg";
    case MonotoneMethod::kEg: return "eg";
    case MonotoneMethod::kPp: return "pp";
  }
  return "unknown";
}

MonotoneMethod parse_monotone_method(const std::string& name) {
  if (name == "onpg") return MonotoneMethod::kOnpg;
  if (name == "eg") return MonotoneMethod::kEg;
  if (name == "pp") return MonotoneMethod::kPp;
  throw ValidationError("method", "expected one of onpg, eg, pp; got '" + name + "'");
}

MultiPlayerState MultiPlayerState::zeros(int n_players, Eigen::Index dim) {
  MultiPlayerState s;
  s.theta.assign(n_players, ParamVector::Zero(dim));
  s.theta_bar = s.theta;
  return s;
}

std::vector<SimplexVector> MultiPlayerState::policies() const {
  std::vector<SimplexVector> z;
  for (const auto& t : theta) z.push_back(softmax(t));
  return z;
}

std::vector<SimplexVector> MultiPlayerState::bar_policies() const {
  std::vector<SimplexVector> z;
  for (const auto& t : theta_bar) z.push_back(softmax(t));
  return z;
}

double monotone_stepsize_bound(const MonotoneGameSpec& spec, MonotoneMethod method) {
  const double N = spec.n_players;
  const double L = spec.lipschitz;
  switch (method) {
    case MonotoneMethod::kOnpg: return 1.0 / (2.0 * (N + 4.0) * L + 2.0 * spec.tau);
    case MonotoneMethod::kEg: return 1.0 / (2.0 * N * L + spec.tau);
    case MonotoneMethod::kPp: return 1.0 / (2.0 * spec.tau);
  }
  return 0.0;
}

double monotone_default_stepsize(const MonotoneGameSpec& spec, MonotoneMethod method) {
  const double eta = 0.9 * monotone_stepsize_bound(spec, method);
  if (method != MonotoneMethod::kPp) return eta;
  return std::min(eta, 1.0 / (spec.n_players * spec.lipschitz));
}

MultiPlayerState onpg_monotone_step(const MonotoneGameSpec& spec, const MultiPlayerState& s, double eta,
                                    bool guaranteed) {
  check_state(s, spec.n_players);
  check_eta(spec, MonotoneMethod::kOnpg, eta, guaranteed);
  const double keep = 1.0 - eta * spec.tau;
  MultiPlayerState out;
  const Eigen::VectorXd f_bar = spec.pseudo_gradient(stacked(spec, s.bar_policies()));
  for (int i = 0; i < spec.n_players; ++i) out.theta_bar.push_back(keep * s.theta[i] - eta * player_block(f_bar, spec, i));
  const Eigen::VectorXd f_next = spec.pseudo_gradient(stacked(spec, out.bar_policies()));
  for (int i = 0; i < spec.n_players; ++i) {
    out.theta.push_back(keep * s.theta[i] - eta * player_block(f_next, spec, i));
    require_finite(out.theta.back());
  }
  return out;
}

MultiPlayerState eg_step(const MonotoneGameSpec& spec, const MultiPlayerState& s, double eta, bool guaranteed) {
  check_state(s, spec.n_players);
  check_eta(spec, MonotoneMethod::kEg, eta, guaranteed);
  const double keep = 1.0 - eta * spec.tau;
  MultiPlayerState out;
  const Eigen::VectorXd f_cur = spec.pseudo_gradient(stacked(spec, s.policies()));
  for (int i = 0; i < spec.n_players; ++i) out.theta_bar.push_back(keep * s.theta[i] - eta * player_block(f_cur, spec, i));
  const Eigen::VectorXd f_next = spec.pseudo_gradient(stacked(spec, out.bar_policies()));
  for (int i = 0; i < spec.n_players; ++i) {
    out.theta.push_back(keep * s.theta[i] - eta * player_block(f_next, spec, i));
    require_finite(out.theta.back());
  }
  return out;
}

MultiPlayerState pp_step(const MonotoneGameSpec& spec, const MultiPlayerState& s, double eta, double inner_tol,
                         bool guaranteed) {
  check_state(s, spec.n_players);
  check_eta(spec, MonotoneMethod::kPp, eta, guaranteed);
  const double keep = 1.0 - eta * spec.tau;
  std::vector<ParamVector> x = s.theta;
  for (int it = 0; it < kPpInnerCap; ++it) {
    std::vector<SimplexVector> z;
    for (const auto& t : x) z.push_back(softmax(t));
    const Eigen::VectorXd f = spec.pseudo_gradient(stacked(spec, z));
    double change = 0.0;
    std::vector<ParamVector> next;
    for (int i = 0; i < spec.n_players; ++i) {
      next.push_back(keep * s.theta[i] - eta * player_block(f, spec, i));
      require_finite(next.back());
      change = std::max(change, (next.back() - x[i]).cwiseAbs().maxCoeff());
    }
    x = std::move(next);
    if (change < inner_tol) {
      MultiPlayerState out;
      out.theta = x;
      out.theta_bar = x;
      return out;
    }
  }
  std::ostringstream os;
  os << "proximal-point inner loop exceeded " << kPpInnerCap << " iterations";
  throw ImplicitSolveFailed(os.str());
}

double pp_residual(const MonotoneGameSpec& spec, const MultiPlayerState& prev, const MultiPlayerState& next,
                   double eta) {
  const Eigen::VectorXd f = spec.pseudo_gradient(stacked(spec, next.policies()));
  double r = 0.0;
  for (int i = 0; i < spec.n_players; ++i) {
    const ParamVector rhs = (1.0 - eta * spec.tau) * prev.theta[i] - eta * player_block(f, spec, i);
    r = std::max(r, (next.theta[i] - rhs).cwiseAbs().maxCoeff());
  }
  return r;
}

std::vector<SimplexVector> fa_policies(const FeatureMap& fmap, const std::vector<ParamVector>& theta) {
  std::vector<SimplexVector> z;
  for (const auto& t : theta) z.push_back(log_linear_policy(fmap, t));
  return z;
}

MultiPlayerState monotone_fa_step(const MonotoneGameSpec& spec, const FeatureMap& fmap, const MultiPlayerState& s,
                                  double eta, bool guaranteed) {
  check_state(s, spec.n_players);
  if (fmap.n != spec.n_actions) throw DimensionMismatch("feature map does not match the action count");
  check_eta(spec, MonotoneMethod::kOnpg, eta, guaranteed);
  const double keep = 1.0 - eta * spec.tau;
  MultiPlayerState out;
  const Eigen::VectorXd f_bar = spec.pseudo_gradient(stacked(spec, fa_policies(fmap, s.theta_bar)));
  for (int i = 0; i < spec.n_players; ++i)
    out.theta_bar.push_back(keep * s.theta[i] - eta * (fmap.preconditioner * player_block(f_bar, spec, i)));
  const Eigen::VectorXd f_next = spec.pseudo_gradient(stacked(spec, fa_policies(fmap, out.theta_bar)));
  for (int i = 0; i < spec.n_players; ++i) {
    out.theta.push_back(keep * s.theta[i] - eta * (fmap.preconditioner * player_block(f_next, spec, i)));
    require_finite(out.theta.back());
  }
  return out;
}

namespace {

MonotoneRecord monotone_record(long iter, const MultiPlayerState& s, const MonotoneOracleSolution& t) {
  MonotoneRecord r;
  r.iter = iter;
  r.z = s.policies();
  r.kl_main = kl_sum(t.z_star, r.z);
  r.kl_bar = kl_sum(t.z_star, s.bar_policies());
  double d2 = 0.0;
  for (std::size_t i = 0; i < s.theta.size(); ++i) d2 += (s.theta[i] - t.theta_star[i]).squaredNorm();
  r.param_dist = std::sqrt(d2);
  return r;
}

}  // namespace

MonotoneTrace solve_monotone(const MonotoneGameSpec& spec, const MonotoneConfig& cfg, MonotoneMethod method) {
  return solve_monotone(spec, cfg, method, pp_reference_monotone(spec));
}

MonotoneTrace solve_monotone(const MonotoneGameSpec& spec, const MonotoneConfig& cfg, MonotoneMethod method,
                             const MonotoneOracleSolution& target) {
  if (cfg.max_iters <= 0) throw ValidationError("max_iters", "must be positive");
  if (cfg.record_every <= 0) throw ValidationError("record_every", "must be positive");
  check_eta(spec, method, cfg.eta, cfg.guaranteed);

  MonotoneTrace trace;
  trace.target = target;
  trace.method = method;
  trace.eta = cfg.eta;
  trace.tau = spec.tau;

  MultiPlayerState state = MultiPlayerState::zeros(spec.n_players, spec.n_actions);
  trace.records.push_back(monotone_record(0, state, target));
  long t = 0;
  try {
    while (t < cfg.max_iters) {
      MultiPlayerState next;
      switch (method) {
        case MonotoneMethod::kOnpg: next = onpg_monotone_step(spec, state, cfg.eta); break;
        case MonotoneMethod::kEg: next = eg_step(spec, state, cfg.eta); break;
        case MonotoneMethod::kPp:
          next = pp_step(spec, state, cfg.eta, cfg.inner_tol);
          trace.max_inner_residual = std::max(trace.max_inner_residual, pp_residual(spec, state, next, cfg.eta));
          break;
      }
      state = std::move(next);
      ++t;
      double norm = 0.0;
      for (const auto& th : state.theta) norm = std::max(norm, th.cwiseAbs().maxCoeff());
      MonotoneRecord rec = monotone_record(t, state, target);
      if (norm > cfg.divergence_threshold) {
        trace.records.push_back(std::move(rec));
        trace.status = SolverStatus::kDiverged;
        break;
      }
      const bool done = rec.kl_main <= cfg.kl_tol && (cfg.param_tol <= 0.0 || rec.param_dist <= cfg.param_tol);
      if (done || t % cfg.record_every == 0 || t == cfg.max_iters) trace.records.push_back(std::move(rec));
      if (done) {
        trace.status = cfg.param_tol > 0.0 ? SolverStatus::kConvergedParam : SolverStatus::kConvergedKL;
        break;
      }
    }
  } catch (const DivergedParameter&) {
    trace.status = SolverStatus::kDiverged;
  }
  trace.iterations = t;
  return trace;
}

double onpg_kl_potential(const MonotoneTrace& trace, std::size_t i) {
  return std::max(trace.records.at(i).kl_main, trace.records.at(i + 1).kl_bar);
}

}  // namespace npg
