#include "npg/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "npg/errors.hpp"

namespace npg {

namespace {

Eigen::VectorXd softmax_raw(const Eigen::VectorXd& x) {
  Eigen::VectorXd e = (x.array() - x.maxCoeff()).exp();
  return e / e.sum();
}

Eigen::VectorXd centered(const Eigen::VectorXd& x) { return x.array() - x.mean(); }

Eigen::MatrixXd surrogate(const CostMatrix& q, const FeatureMap* rg, const FeatureMap* rh) {
  Eigen::MatrixXd s = q.entries();
  if (rg != nullptr) s = rg->psi.transpose() * s;
  if (rh != nullptr) s = s * rh->psi;
  return s;
}

double residual_of(const Eigen::MatrixXd& qs, double tau, const Eigen::VectorXd& g, const Eigen::VectorXd& h) {
  const double rg = (g - softmax_raw(-(qs * h) / tau)).cwiseAbs().maxCoeff();
  const double rh = (h - softmax_raw((qs.transpose() * g) / tau)).cwiseAbs().maxCoeff();
  return std::max(rg, rh);
}

struct LogitResidual {
  Eigen::VectorXd r;
  Eigen::VectorXd g;
  Eigen::VectorXd h;
};

// R = [P(a + Qs h / tau); P(b - Qs^T g / tau)] with g = softmax(a), h = softmax(b).
LogitResidual logit_residual(const Eigen::MatrixXd& qs, double tau, const Eigen::VectorXd& a,
                             const Eigen::VectorXd& b) {
  LogitResidual out;
  out.g = softmax_raw(a);
  out.h = softmax_raw(b);
  out.r.resize(a.size() + b.size());
  out.r.head(a.size()) = centered(a + qs * out.h / tau);
  out.r.tail(b.size()) = centered(b - qs.transpose() * out.g / tau);
  return out;
}

Eigen::MatrixXd softmax_jacobian(const Eigen::VectorXd& s) {
  Eigen::MatrixXd d = -s * s.transpose();
  d.diagonal() += s;
  return d;
}

void newton_polish(const Eigen::MatrixXd& qs, double tau, Eigen::VectorXd& g, Eigen::VectorXd& h, int max_iters) {
  const Eigen::Index n = g.size();
  const Eigen::Index m = h.size();
  Eigen::VectorXd a = centered(g.array().log().matrix());
  Eigen::VectorXd b = centered(h.array().log().matrix());
  LogitResidual cur = logit_residual(qs, tau, a, b);
  double best_res = residual_of(qs, tau, cur.g, cur.h);
  Eigen::VectorXd best_g = cur.g;
  Eigen::VectorXd best_h = cur.h;
  const Eigen::MatrixXd pn = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
  const Eigen::MatrixXd pm = Eigen::MatrixXd::Identity(m, m) - Eigen::MatrixXd::Constant(m, m, 1.0 / m);

  for (int it = 0; it < max_iters; ++it) {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Identity(n + m, n + m);
    jac.topRightCorner(n, m) = pn * qs * softmax_jacobian(cur.h) / tau;
    jac.bottomLeftCorner(m, n) = -pm * qs.transpose() * softmax_jacobian(cur.g) / tau;
    Eigen::VectorXd step = jac.fullPivLu().solve(-cur.r);
    step.head(n) = centered(step.head(n));
    step.tail(m) = centered(step.tail(m));

    const double r0 = cur.r.norm();
    double t = 1.0;
    bool accepted = false;
    while (t > 1e-12) {
      const Eigen::VectorXd a1 = a + t * step.head(n);
      const Eigen::VectorXd b1 = b + t * step.tail(m);
      LogitResidual trial = logit_residual(qs, tau, a1, b1);
      if (trial.r.allFinite() && trial.r.norm() < (1.0 - 1e-4 * t) * r0) {
        a = a1;
        b = b1;
        cur = std::move(trial);
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    const double res = residual_of(qs, tau, cur.g, cur.h);
    if (res < best_res) {
      best_res = res;
      best_g = cur.g;
      best_h = cur.h;
    }
    if (!accepted || best_res <= 1e-16) break;
  }
  g = best_g;
  h = best_h;
}

}  // namespace

double qre_residual(const CostMatrix& q, double tau, const SimplexVector& g, const SimplexVector& h,
                    const FeatureMap* restrict_g, const FeatureMap* restrict_h) {
  return residual_of(surrogate(q, restrict_g, restrict_h), tau, g.probs(), h.probs());
}

OracleSolution qre_fixed_point(const CostMatrix& q, double tau, const FeatureMap* restriction) {
  QreOptions opts;
  opts.restrict_g = restriction;
  opts.restrict_h = restriction;
  return qre_fixed_point(q, tau, opts);
}

OracleSolution qre_fixed_point(const CostMatrix& q, double tau, const QreOptions& opts) {
  if (!(tau > 0.0)) throw ValidationError("tau", "oracle requires tau > 0");
  const Eigen::Index n = q.rows();
  const Eigen::Index m = q.cols();
  if (opts.restrict_g != nullptr && opts.restrict_g->n != n) throw DimensionMismatch("qre: row restriction size");
  if (opts.restrict_h != nullptr && opts.restrict_h->n != m) throw DimensionMismatch("qre: column restriction size");
  const Eigen::MatrixXd qs = surrogate(q, opts.restrict_g, opts.restrict_h);

  Eigen::VectorXd g = opts.g0 != nullptr ? opts.g0->probs() : Eigen::VectorXd::Constant(n, 1.0 / n);
  Eigen::VectorXd h = opts.h0 != nullptr ? opts.h0->probs() : Eigen::VectorXd::Constant(m, 1.0 / m);
  if (opts.restrict_g != nullptr) g = opts.restrict_g->psi * g;
  if (opts.restrict_h != nullptr) h = opts.restrict_h->psi * h;

  // Phase 1: damped alternating response; damping halves when a 100-step window stalls.
  double alpha = 0.5;
  double res = residual_of(qs, tau, g, h);
  double window_start = res;
  for (int it = 1; it <= opts.max_damped_iters && res > 1e-8; ++it) {
    g = (1.0 - alpha) * g + alpha * softmax_raw(-(qs * h) / tau);
    h = (1.0 - alpha) * h + alpha * softmax_raw((qs.transpose() * g) / tau);
    res = residual_of(qs, tau, g, h);
    if (it % 100 == 0) {
      if (res > 0.9 * window_start) alpha = std::max(alpha * 0.5, 1e-3);
      window_start = res;
    }
  }

  // Phase 2: Newton on the logit-space fixed-point equations.
  newton_polish(qs, tau, g, h, opts.max_newton_iters);
  res = residual_of(qs, tau, g, h);
  if (!(res <= kOracleResidualTarget)) {
    std::ostringstream os;
    os << "QRE oracle residual " << res << " above " << kOracleResidualTarget << " (tau = " << tau << ")";
    throw OracleNotConverged(os.str());
  }

  OracleSolution sol;
  sol.g_star = SimplexVector(g / g.sum());
  sol.h_star = SimplexVector(h / h.sum());
  sol.residual = residual_of(qs, tau, sol.g_star.probs(), sol.h_star.probs());
  const Eigen::VectorXd qh = q.entries() * sol.h_star.probs();
  const Eigen::VectorXd qtg = q.entries().transpose() * sol.g_star.probs();
  sol.theta_star = opts.restrict_g != nullptr ? Eigen::VectorXd(-(opts.restrict_g->preconditioner * qh) / tau)
                                              : Eigen::VectorXd(-qh / tau);
  sol.nu_star = opts.restrict_h != nullptr ? Eigen::VectorXd((opts.restrict_h->preconditioner * qtg) / tau)
                                           : Eigen::VectorXd(qtg / tau);
  sol.method = "damped-qre+newton";
  return sol;
}

double monotone_residual(const MonotoneGameSpec& spec, const std::vector<SimplexVector>& z) {
  const Eigen::VectorXd f = spec.pseudo_gradient(stack_policies(z));
  const Eigen::Index n = spec.n_actions;
  double res = 0.0;
  for (int i = 0; i < spec.n_players; ++i) {
    const Eigen::VectorXd br = softmax_raw(-f.segment(i * n, n) / spec.tau);
    res = std::max(res, (z[i].probs() - br).cwiseAbs().maxCoeff());
  }
  return res;
}

MonotoneOracleSolution pp_reference_monotone(const MonotoneGameSpec& spec, double tol) {
  if (!(spec.tau > 0.0)) throw ValidationError("tau", "oracle requires tau > 0");
  const int N = spec.n_players;
  const Eigen::Index n = spec.n_actions;
  const double eta = std::min(0.45 / spec.tau, 0.5 / std::max(spec.lipschitz, 1e-12));
  const double keep = 1.0 - eta * spec.tau;

  Eigen::VectorXd z = Eigen::VectorXd::Constant(N * n, 1.0 / static_cast<double>(n));
  auto as_policies = [&](const Eigen::VectorXd& x) { return split_policies(x, N, static_cast<int>(n)); };

  const long max_outer = 2000000;
  double res = monotone_residual(spec, as_policies(z));
  long outer = 0;
  for (; outer < max_outer && res > tol; ++outer) {
    const Eigen::VectorXd base = keep * z.array().log();
    // Implicit step: z' = normalize(z^{1 - eta tau} exp(-eta F(z'))) per player.
    Eigen::VectorXd x = z;
    bool settled = false;
    for (int inner = 0; inner < 10000; ++inner) {
      const Eigen::VectorXd logits = base - eta * spec.pseudo_gradient(x);
      Eigen::VectorXd next(N * n);
      for (int i = 0; i < N; ++i) next.segment(i * n, n) = softmax_raw(logits.segment(i * n, n));
      const double change = (next - x).cwiseAbs().maxCoeff();
      x = next;
      if (change <= 1e-16) {
        settled = true;
        break;
      }
    }
    if (!settled) {
      // Accept the last inner iterate once it stops improving at roundoff level.
      const Eigen::VectorXd logits = base - eta * spec.pseudo_gradient(x);
      Eigen::VectorXd next(N * n);
      for (int i = 0; i < N; ++i) next.segment(i * n, n) = softmax_raw(logits.segment(i * n, n));
      if ((next - x).cwiseAbs().maxCoeff() > 1e-14) throw OracleNotConverged("proximal-point inner loop did not settle");
    }
    z = x;
    res = monotone_residual(spec, as_policies(z));
  }
  if (res > tol) {
    std::ostringstream os;
    os << "proximal-point oracle residual " << res << " above " << tol;
    throw OracleNotConverged(os.str());
  }

  MonotoneOracleSolution sol;
  sol.z_star = as_policies(z);
  const Eigen::VectorXd f = spec.pseudo_gradient(z);
  for (int i = 0; i < N; ++i) sol.theta_star.push_back(-f.segment(i * n, n) / spec.tau);
  sol.residual = res;
  sol.method = "policy-space-proximal-point";
  return sol;
}

MarkovOracleSolution soft_value_iteration_oracle(const MarkovGameSpec& spec, const MarkovFeatureMap* mfmap,
                                                 double tol) {
  validate(spec);
  if (!(tol > 0.0)) throw ValidationError("tol", "must be positive");
  const int S = spec.n_states;
  const int n = spec.n_actions;
  if (mfmap != nullptr && (mfmap->n_states != S || mfmap->n_actions != n))
    throw DimensionMismatch("oracle: feature map does not match the game");
  const double tau = spec.tau;
  const SimplexVector uniform = SimplexVector::uniform(n);

  MarkovOracleSolution out;
  std::vector<SimplexVector> g(S, uniform);
  std::vector<SimplexVector> h(S, uniform);

  auto stage_q = [&](int s, const Eigen::VectorXd& v) -> Eigen::MatrixXd {
    return spec.rewards[s] + spec.gamma * expected_next_value(spec, s, v);
  };
  auto solve_state = [&](int s, const Eigen::MatrixXd& qs, OracleSolution* full) -> double {
    const FeatureMap* block = nullptr;
    if (mfmap != nullptr) {
      if (!mfmap->active(s)) {
        g[s] = uniform;
        h[s] = uniform;
        return f_tau(qs, uniform, uniform, tau);
      }
      block = &*mfmap->blocks[s];
    }
    QreOptions opts;
    opts.restrict_g = block;
    opts.restrict_h = block;
    opts.g0 = &g[s];
    opts.h0 = &h[s];
    OracleSolution sol = qre_fixed_point(CostMatrix(-qs), tau, opts);
    g[s] = sol.g_star;
    h[s] = sol.h_star;
    out.max_state_residual = std::max(out.max_state_residual, sol.residual);
    if (full != nullptr) *full = sol;
    return f_tau(qs, g[s], h[s], tau);
  };

  Eigen::VectorXd v = Eigen::VectorXd::Zero(S);
  const double stop = spec.gamma > 0.0 ? tol * (1.0 - spec.gamma) / spec.gamma : INFINITY;
  const int max_sweeps = 100000;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    Eigen::VectorXd next(S);
    for (int s = 0; s < S; ++s) next(s) = solve_state(s, stage_q(s, v), nullptr);
    const double delta = (next - v).cwiseAbs().maxCoeff();
    out.delta_history.push_back(delta);
    v = next;
    ++out.sweeps;
    if (spec.gamma == 0.0 || delta <= stop) break;
  }

  out.q_star.q.resize(S);
  out.q_star.v = v;
  out.g_star.resize(S, uniform);
  out.h_star.resize(S, uniform);
  out.params_star.theta.resize(S);
  out.params_star.nu.resize(S);
  for (int s = 0; s < S; ++s) {
    const Eigen::MatrixXd qs = stage_q(s, v);
    out.q_star.q[s] = qs;
    OracleSolution sol;
    const bool active = mfmap == nullptr || mfmap->active(s);
    solve_state(s, qs, active ? &sol : nullptr);
    out.g_star[s] = g[s];
    out.h_star[s] = h[s];
    if (active) {
      out.params_star.theta[s] = sol.theta_star;
      out.params_star.nu[s] = sol.nu_star;
    }
  }
  return out;
}

}  // namespace npg
