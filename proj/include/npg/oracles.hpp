#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "npg/cost_matrix.hpp"
#include "npg/feature_map.hpp"
#include "npg/markov_spec.hpp"
#include "npg/monotone_spec.hpp"
#include "npg/simplex.hpp"

namespace npg {

inline constexpr double kOracleResidualTarget = 1e-13;

struct OracleSolution {
  SimplexVector g_star;
  SimplexVector h_star;
  ParamVector theta_star;
  ParamVector nu_star;
  // max of ||g - softmax(-Qh/tau)||_inf and ||h - softmax(Q^T g/tau)||_inf on the solved game.
  double residual = 0.0;
  std::string method;
};

struct QreOptions {
  // Per-player restrictions; the solved game is Psi_g^T Q Psi_h.
  const FeatureMap* restrict_g = nullptr;
  const FeatureMap* restrict_h = nullptr;
  // Warm start; must be interior.
  const SimplexVector* g0 = nullptr;
  const SimplexVector* h0 = nullptr;
  int max_damped_iters = 20000;
  int max_newton_iters = 200;
};

// Damped softmax-response iteration followed by a Newton polish in logit space.
// Throws OracleNotConverged when the residual stays above kOracleResidualTarget.
OracleSolution qre_fixed_point(const CostMatrix& q, double tau, const FeatureMap* restriction = nullptr);
OracleSolution qre_fixed_point(const CostMatrix& q, double tau, const QreOptions& opts);

// Residual of (g, h) on the (optionally restricted) game.
double qre_residual(const CostMatrix& q, double tau, const SimplexVector& g, const SimplexVector& h,
                    const FeatureMap* restrict_g = nullptr, const FeatureMap* restrict_h = nullptr);

struct MonotoneOracleSolution {
  std::vector<SimplexVector> z_star;
  std::vector<ParamVector> theta_star;  // -F_i(z*) / tau
  double residual = 0.0;                // max_i ||g_i - softmax(-F_i(z)/tau)||_inf
  std::string method;
};

// Proximal point in policy space with eta = min(0.45/tau, 0.5/L).
MonotoneOracleSolution pp_reference_monotone(const MonotoneGameSpec& spec, double tol = kOracleResidualTarget);

double monotone_residual(const MonotoneGameSpec& spec, const std::vector<SimplexVector>& z);

struct MarkovOracleSolution {
  QTensor q_star;                  // Q* = r + gamma P V*, with v = V*
  std::vector<SimplexVector> g_star;
  std::vector<SimplexVector> h_star;
  StatePolicyParams params_star;   // inactive FA states hold empty vectors
  std::vector<double> delta_history;  // ||V_{k+1} - V_k||_inf per sweep
  double max_state_residual = 0.0;
  int sweeps = 0;
};

// Soft value iteration with exact per-state saddle solves. The stage game at s is the matrix game
// with cost C(s) = -Q(s), so V(s) = f_tau(Q(s); g*, h*) and theta*(s) = -C(s) h*/tau.
// Stops when ||dV||_inf <= tol (1 - gamma) / gamma.
MarkovOracleSolution soft_value_iteration_oracle(const MarkovGameSpec& spec, const MarkovFeatureMap* mfmap,
                                                 double tol);

}  // namespace npg
