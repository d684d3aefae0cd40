#pragma once

#include <vector>

#include "npg/markov_spec.hpp"
#include "npg/matrix_game.hpp"
#include "npg/oracles.hpp"

namespace npg {

// Orientation: the stage game at s is min_theta max_nu f_tau(Q(s); g, h), i.e. the matrix game with
// cost C(s) = -Q(s). V(s) is f_tau at the final inner iterates and Q(s) = r(s) + gamma E[V(s')].

// (1 - gamma) / (2 (1 + tau (log n + 1 - gamma))).
double markov_inner_stepsize(const MarkovGameSpec& spec);

struct MarkovConfig {
  double eta = 0.0;          // <= 0 selects markov_inner_stepsize
  bool warm_start = false;   // reuse the previous outer iteration's inner parameters
  int threads = 1;           // per-state inner solves; results do not depend on it
  double oracle_tol = 1e-12;
};

struct BellmanApplyResult {
  QTensor q;  // q = r + gamma E[V_in], v = f_tau at the final inner iterates
  StatePolicyParams params;
  std::vector<SimplexVector> g;
  std::vector<SimplexVector> h;
};

// One outer iteration: Q(s) from the input tensor's V, then t_inner inner ONPG steps per state.
// mfmap == nullptr runs the tabular parameterization. warm (optional) seeds the inner parameters.
BellmanApplyResult soft_bellman_apply(const MarkovGameSpec& spec, const QTensor& q, long t_inner,
                                      const MarkovConfig& cfg, const MarkovFeatureMap* mfmap = nullptr,
                                      const StatePolicyParams* warm = nullptr);

// Exact operator on Q tensors: T(Q)(s) = r(s) + gamma E[val(Q(s'))] with val the stage saddle value
// from the reference oracle. Returned tensor carries v(s) = val(Q(s)).
QTensor soft_bellman_exact(const MarkovGameSpec& spec, const std::vector<Eigen::MatrixXd>& q,
                           const MarkovFeatureMap* mfmap = nullptr);

struct MarkovRecord {
  long outer = 0;
  double q_error = 0.0;     // ||Q_t - Q*||_inf
  double param_dist = 0.0;  // max{||theta_t - theta*||, ||nu_t - nu*||}
};

struct MarkovResult {
  QTensor q;
  StatePolicyParams params;
  std::vector<SimplexVector> g;
  std::vector<SimplexVector> h;
  std::vector<MarkovRecord> trace;
  MarkovOracleSolution target;
  SolverStatus status = SolverStatus::kMaxIters;
  double eta = 0.0;
};

MarkovResult solve_markov_tabular(const MarkovGameSpec& spec, long t_outer, long t_inner, const MarkovConfig& cfg);
MarkovResult solve_markov_tabular(const MarkovGameSpec& spec, long t_outer, long t_inner, const MarkovConfig& cfg,
                                  const MarkovOracleSolution& target);

MarkovResult solve_markov_fa(const MarkovGameSpec& spec, const MarkovFeatureMap& mfmap, long t_outer, long t_inner,
                             const MarkovConfig& cfg);
MarkovResult solve_markov_fa(const MarkovGameSpec& spec, const MarkovFeatureMap& mfmap, long t_outer, long t_inner,
                             const MarkovConfig& cfg, const MarkovOracleSolution& target);

// Same computation as soft_value_iteration_oracle.
inline MarkovOracleSolution in_class_ne_oracle(const MarkovGameSpec& spec, const MarkovFeatureMap* mfmap, double tol) {
  return soft_value_iteration_oracle(spec, mfmap, tol);
}

// Per-state unregularized exploitability of the stage game with cost -Q(s), best responses restricted
// to each state's class under mfmap.
std::vector<double> stage_game_gaps(const MarkovResult& result, const MarkovFeatureMap* mfmap = nullptr);

}  // namespace npg
