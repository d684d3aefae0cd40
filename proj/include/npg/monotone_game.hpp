#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "npg/feature_map.hpp"
#include "npg/matrix_game.hpp"
#include "npg/monotone_spec.hpp"
#include "npg/oracles.hpp"

namespace npg {

enum class MonotoneMethod { kOnpg, kEg, kPp };

const char* to_string(MonotoneMethod method);
MonotoneMethod parse_monotone_method(const std::string& name);

// Per-player (theta_i, theta_bar_i); tabular length n, feature-map length d.
struct MultiPlayerState {
  std::vector<ParamVector> theta;
  std::vector<ParamVector> theta_bar;

  static MultiPlayerState zeros(int n_players, Eigen::Index dim);
  std::vector<SimplexVector> policies() const;
  std::vector<SimplexVector> bar_policies() const;
};

// Strict upper bounds: ONPG 1/(2(N+4)L + 2 tau), EG 1/(2NL + tau), PP 1/(2 tau).
double monotone_stepsize_bound(const MonotoneGameSpec& spec, MonotoneMethod method);
// Default run stepsize: 0.9 of the bound; pp is further capped at 1/(N L) so its plain inner
// fixed-point iteration contracts (softmax Jacobians have norm <= 1/2).
double monotone_default_stepsize(const MonotoneGameSpec& spec, MonotoneMethod method);

MultiPlayerState onpg_monotone_step(const MonotoneGameSpec& spec, const MultiPlayerState& state, double eta,
                                    bool guaranteed = false);
MultiPlayerState eg_step(const MonotoneGameSpec& spec, const MultiPlayerState& state, double eta,
                         bool guaranteed = false);

inline constexpr double kPpInnerTol = 1e-12;
inline constexpr int kPpInnerCap = 10000;

// Solves theta' = (1 - eta tau) theta - eta F(softmax(theta')) by plain fixed-point iteration from theta.
// Throws ImplicitSolveFailed past kPpInnerCap iterations.
MultiPlayerState pp_step(const MonotoneGameSpec& spec, const MultiPlayerState& state, double eta,
                         double inner_tol = kPpInnerTol, bool guaranteed = false);

// || theta' - ((1 - eta tau) theta - eta F(softmax(theta'))) ||_inf.
double pp_residual(const MonotoneGameSpec& spec, const MultiPlayerState& prev, const MultiPlayerState& next,
                   double eta);

// ONPG with theta_i in R^d and gradients preconditioned by [(M^T)^{-1} | 0] P~.
MultiPlayerState monotone_fa_step(const MonotoneGameSpec& spec, const FeatureMap& fmap,
                                  const MultiPlayerState& state, double eta, bool guaranteed = false);
std::vector<SimplexVector> fa_policies(const FeatureMap& fmap, const std::vector<ParamVector>& theta);

struct MonotoneConfig {
  double eta = 0.0;
  long max_iters = 1000;
  double kl_tol = 1e-12;
  double param_tol = 1e-8;  // <= 0 stops on KL alone
  bool guaranteed = true;
  double inner_tol = kPpInnerTol;
  double divergence_threshold = kDivergenceThreshold;
  long record_every = 1;
};

struct MonotoneRecord {
  long iter = 0;
  std::vector<SimplexVector> z;
  double kl_main = 0.0;  // KL(z* || z_t)
  double kl_bar = 0.0;   // KL(z* || z_bar_t)
  double param_dist = 0.0;
};

struct MonotoneTrace {
  std::vector<MonotoneRecord> records;
  SolverStatus status = SolverStatus::kMaxIters;
  MonotoneOracleSolution target;
  MonotoneMethod method = MonotoneMethod::kOnpg;
  double eta = 0.0;
  double tau = 0.0;
  long iterations = 0;
  double max_inner_residual = 0.0;  // PP only
};

// Targets from pp_reference_monotone unless supplied.
MonotoneTrace solve_monotone(const MonotoneGameSpec& spec, const MonotoneConfig& cfg, MonotoneMethod method);
MonotoneTrace solve_monotone(const MonotoneGameSpec& spec, const MonotoneConfig& cfg, MonotoneMethod method,
                             const MonotoneOracleSolution& target);

// max{KL(z*||z_t), KL(z*||z_bar_{t+1})} for consecutive records i, i+1.
double onpg_kl_potential(const MonotoneTrace& trace, std::size_t i);

}  // namespace npg
