#include "npg/markov_game.hpp"

#include <cmath>
#include <exception>
#include <thread>

#include "npg/errors.hpp"
#include "npg/matrix_game_fa.hpp"

namespace npg {

namespace {

struct StateOutcome {
  ParamVector theta;
  ParamVector nu;
  SimplexVector g;
  SimplexVector h;
  double v = 0.0;
};

// Runs body(s) for every state; each state writes only its own slot, so the thread count cannot
// change the result.
template <typename Body>
void for_each_state(int n_states, int threads, Body body) {
  std::vector<std::exception_ptr> errors(n_states);
  auto guarded = [&](int s) {
    try {
      body(s);
    } catch (...) {
      errors[s] = std::current_exception();
    }
  };
  const int workers = std::max(1, std::min(threads, n_states));
  if (workers == 1) {
    for (int s = 0; s < n_states; ++s) guarded(s);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (int s = w; s < n_states; s += workers) guarded(s);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void check_map(const MarkovGameSpec& spec, const MarkovFeatureMap* mfmap) {
  if (mfmap != nullptr && (mfmap->n_states != spec.n_states || mfmap->n_actions != spec.n_actions))
    throw DimensionMismatch("Markov feature map does not match the game");
}

double param_distance(const StatePolicyParams& p, const StatePolicyParams& target) {
  const double dt = (p.concat_theta() - target.concat_theta()).norm();
  const double dn = (p.concat_nu() - target.concat_nu()).norm();
  return std::max(dt, dn);
}

}  // namespace

double markov_inner_stepsize(const MarkovGameSpec& spec) {
  const double logn = std::log(static_cast<double>(spec.n_actions));
  return (1.0 - spec.gamma) / (2.0 * (1.0 + spec.tau * (logn + 1.0 - spec.gamma)));
}

BellmanApplyResult soft_bellman_apply(const MarkovGameSpec& spec, const QTensor& q, long t_inner,
                                      const MarkovConfig& cfg, const MarkovFeatureMap* mfmap,
                                      const StatePolicyParams* warm) {
  check_map(spec, mfmap);
  const int S = spec.n_states;
  const int n = spec.n_actions;
  if (q.v.size() != S) throw DimensionMismatch("soft_bellman_apply: value vector length");
  if (t_inner <= 0) throw ValidationError("t_inner", "must be positive");
  const double eta = cfg.eta > 0.0 ? cfg.eta : markov_inner_stepsize(spec);
  const SimplexVector uniform = SimplexVector::uniform(n);

  BellmanApplyResult out;
  out.q.q.resize(S);
  out.q.v.resize(S);
  for (int s = 0; s < S; ++s) out.q.q[s] = spec.rewards[s] + spec.gamma * expected_next_value(spec, s, q.v);

  std::vector<StateOutcome> outcome(S);
  for_each_state(S, cfg.threads, [&](int s) {
    StateOutcome& o = outcome[s];
    const Eigen::MatrixXd& qs = out.q.q[s];
    if (mfmap != nullptr && !mfmap->active(s)) {
      o.g = uniform;
      o.h = uniform;
      o.v = f_tau(qs, uniform, uniform, spec.tau);
      return;
    }
    const RegularizedGame game{CostMatrix(-qs), spec.tau};
    const Eigen::Index dim = mfmap != nullptr ? mfmap->active_count[s] : n;
    OptimisticState st = warm != nullptr ? OptimisticState::from(warm->theta[s], warm->nu[s])
                                         : OptimisticState::zeros(dim, dim);
    if (mfmap != nullptr) {
      const FeatureMap& block = *mfmap->blocks[s];
      for (long t = 0; t < t_inner; ++t) st = onpg_fa_step(game, block, st, eta);
      o.g = log_linear_policy(block, st.theta);
      o.h = log_linear_policy(block, st.nu);
    } else {
      for (long t = 0; t < t_inner; ++t) st = onpg_step(game, st, eta);
      o.g = softmax(st.theta);
      o.h = softmax(st.nu);
    }
    o.theta = std::move(st.theta);
    o.nu = std::move(st.nu);
    o.v = f_tau(qs, o.g, o.h, spec.tau);
  });

  out.params.theta.resize(S);
  out.params.nu.resize(S);
  for (int s = 0; s < S; ++s) {
    out.params.theta[s] = std::move(outcome[s].theta);
    out.params.nu[s] = std::move(outcome[s].nu);
    out.g.push_back(outcome[s].g);
    out.h.push_back(outcome[s].h);
    out.q.v(s) = outcome[s].v;
  }
  return out;
}

QTensor soft_bellman_exact(const MarkovGameSpec& spec, const std::vector<Eigen::MatrixXd>& q,
                           const MarkovFeatureMap* mfmap) {
  check_map(spec, mfmap);
  const int S = spec.n_states;
  if (static_cast<int>(q.size()) != S) throw DimensionMismatch("soft_bellman_exact: state count");
  const SimplexVector uniform = SimplexVector::uniform(spec.n_actions);
  Eigen::VectorXd val(S);
  for (int s = 0; s < S; ++s) {
    if (mfmap != nullptr && !mfmap->active(s)) {
      val(s) = f_tau(q[s], uniform, uniform, spec.tau);
      continue;
    }
    const FeatureMap* block = mfmap != nullptr ? &*mfmap->blocks[s] : nullptr;
    const OracleSolution sol = qre_fixed_point(CostMatrix(-q[s]), spec.tau, block);
    val(s) = f_tau(q[s], sol.g_star, sol.h_star, spec.tau);
  }
  QTensor out;
  out.v = val;
  for (int s = 0; s < S; ++s) out.q.push_back(spec.rewards[s] + spec.gamma * expected_next_value(spec, s, val));
  return out;
}

namespace {

MarkovResult run_markov(const MarkovGameSpec& spec, const MarkovFeatureMap* mfmap, long t_outer, long t_inner,
                        const MarkovConfig& cfg, const MarkovOracleSolution& target) {
  validate(spec);
  check_map(spec, mfmap);
  if (t_outer <= 0) throw ValidationError("t_outer", "must be positive");
  MarkovResult result;
  result.target = target;
  result.eta = cfg.eta > 0.0 ? cfg.eta : markov_inner_stepsize(spec);
  QTensor cur = QTensor::zeros(spec.n_states, spec.n_actions);
  StatePolicyParams params;
  for (long k = 1; k <= t_outer; ++k) {
    const bool warm = cfg.warm_start && k > 1;
    BellmanApplyResult step = soft_bellman_apply(spec, cur, t_inner, cfg, mfmap, warm ? &params : nullptr);
    cur = std::move(step.q);
    params = std::move(step.params);
    result.g = std::move(step.g);
    result.h = std::move(step.h);
    result.trace.push_back({k, cur.q_distance(target.q_star), param_distance(params, target.params_star)});
  }
  result.q = std::move(cur);
  result.params = std::move(params);
  result.status = SolverStatus::kMaxIters;
  return result;
}

}  // namespace

MarkovResult solve_markov_tabular(const MarkovGameSpec& spec, long t_outer, long t_inner, const MarkovConfig& cfg) {
  return run_markov(spec, nullptr, t_outer, t_inner, cfg, soft_value_iteration_oracle(spec, nullptr, cfg.oracle_tol));
}

MarkovResult solve_markov_tabular(const MarkovGameSpec& spec, long t_outer, long t_inner, const MarkovConfig& cfg,
                                  const MarkovOracleSolution& target) {
  return run_markov(spec, nullptr, t_outer, t_inner, cfg, target);
}

MarkovResult solve_markov_fa(const MarkovGameSpec& spec, const MarkovFeatureMap& mfmap, long t_outer, long t_inner,
                             const MarkovConfig& cfg) {
  return run_markov(spec, &mfmap, t_outer, t_inner, cfg, soft_value_iteration_oracle(spec, &mfmap, cfg.oracle_tol));
}

MarkovResult solve_markov_fa(const MarkovGameSpec& spec, const MarkovFeatureMap& mfmap, long t_outer, long t_inner,
                             const MarkovConfig& cfg, const MarkovOracleSolution& target) {
  return run_markov(spec, &mfmap, t_outer, t_inner, cfg, target);
}

std::vector<double> stage_game_gaps(const MarkovResult& result, const MarkovFeatureMap* mfmap) {
  std::vector<double> gaps;
  for (std::size_t s = 0; s < result.q.q.size(); ++s) {
    const CostMatrix c(-result.q.q[s]);
    if (mfmap == nullptr) {
      gaps.push_back(duality_gap(c, result.g[s], result.h[s]));
    } else if (!mfmap->active(static_cast<int>(s))) {
      gaps.push_back(0.0);
    } else {
      const FeatureMap& block = *mfmap->blocks[s];
      gaps.push_back(in_class_duality_gap(c, block, block, result.g[s], result.h[s]));
    }
  }
  return gaps;
}

}  // namespace npg
