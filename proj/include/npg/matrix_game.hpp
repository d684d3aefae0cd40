#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "npg/cost_matrix.hpp"
#include "npg/oracles.hpp"
#include "npg/simplex.hpp"

namespace npg {

inline constexpr double kDivergenceThreshold = 1e6;

// kOperator uses the induced infinity norm (max row sum of |Q_ab|), which is never smaller than max |Q_ab|.
enum class StepsizeNorm { kMaxAbsEntry, kOperator };
enum class SolverStatus { kConvergedKL, kConvergedParam, kMaxIters, kDiverged };

const char* to_string(SolverStatus status);

struct SolverConfig {
  double eta = 0.0;
  long max_iters = 1000;
  double kl_tol = 1e-12;
  // <= 0 stops on the KL tolerance alone.
  double param_tol = 1e-8;
  bool optimistic = true;
  // Enforce the convergence stepsize bound of the chosen variant.
  bool guaranteed = true;
  StepsizeNorm norm = StepsizeNorm::kMaxAbsEntry;
  // > 0 replaces the probe estimate of L in the non-optimistic bound.
  double lipschitz_override = 0.0;
  double divergence_threshold = kDivergenceThreshold;
  long record_every = 1;
  // Rethrow DivergedParameter instead of returning a Diverged trace.
  bool throw_on_divergence = false;
};

using ParamPair = std::pair<ParamVector, ParamVector>;
using PolicyPair = std::pair<SimplexVector, SimplexVector>;

struct OptimisticState {
  ParamVector theta;
  ParamVector nu;
  ParamVector theta_bar;
  ParamVector nu_bar;

  static OptimisticState zeros(Eigen::Index n, Eigen::Index m);
  // Bar iterates start equal to the main iterates.
  static OptimisticState from(ParamVector theta, ParamVector nu);
};

struct IterationRecord {
  long iter = 0;
  ParamVector theta;
  ParamVector nu;
  SimplexVector g;
  SimplexVector h;
  double kl_to_target = 0.0;
  double param_dist_to_target = 0.0;
};

struct SolverTrace {
  std::vector<IterationRecord> records;
  SolverStatus status = SolverStatus::kMaxIters;
  OracleSolution target;
  bool optimistic = true;
  double eta = 0.0;
  double tau = 0.0;
  long iterations = 0;
  // Lyapunov constants derived from the initial KL; see lyapunov().
  double lyapunov_c = 0.0;
  double v0 = 0.0;
};

// Vanilla NPG, log-partition terms included, both players from the same (theta, nu):
//   theta' = (1 - eta tau) theta - eta Q h + eta tau (logsumexp(theta) - 1)
//   nu'    = (1 - eta tau) nu + eta Q^T g + eta tau (logsumexp(nu) - 1)
ParamPair vanilla_npg_step(const RegularizedGame& game, const ParamVector& theta, const ParamVector& nu, double eta);

// Modified NPG; throws InvalidStepsize unless 0 < eta tau < 1.
ParamPair npg_step(const RegularizedGame& game, const ParamVector& theta, const ParamVector& nu, double eta);

// g' ∝ g^{1 - eta tau} exp(-eta Q h), h' ∝ h^{1 - eta tau} exp(eta Q^T g).
PolicyPair mwu_policy_step(const RegularizedGame& game, const SimplexVector& g, const SimplexVector& h, double eta);

double onpg_stepsize_bound(const RegularizedGame& game, StepsizeNorm norm = StepsizeNorm::kMaxAbsEntry);

OptimisticState onpg_step(const RegularizedGame& game, const OptimisticState& state, double eta,
                          bool guaranteed = false, StepsizeNorm norm = StepsizeNorm::kMaxAbsEntry);

struct LipschitzEstimate {
  double l_hat = 0.0;
  double delta_hat = 0.0;
};

// L^ = ||Q||_2 + tau / delta^, delta^ the smallest policy entry seen along a modified-NPG probe run
// from zero at eta = 0.5 / (tau + ||Q||_2), stopped when policies settle or after 5000 steps.
LipschitzEstimate estimate_npg_lipschitz(const RegularizedGame& game);

inline double npg_stepsize_bound(const RegularizedGame& game, double l) { return game.tau / (l * l); }

// Targets from qre_fixed_point unless supplied.
SolverTrace solve_regularized(const RegularizedGame& game, const SolverConfig& cfg);
SolverTrace solve_regularized(const RegularizedGame& game, const SolverConfig& cfg, const OracleSolution& target);

// V_t for the trace's variant:
//   optimistic:     D_t + (2C / (eta tau)) (1 - eta tau)^t,   contracts by (1 - eta tau / 2)
//   non-optimistic: D_t + (4C / (eta tau)) (1 - eta tau / 2)^t, contracts by (1 - eta tau / 4)
// with D_t the squared parameter distance of record t.
double lyapunov(const SolverTrace& trace, std::size_t record_index);

struct VanillaRun {
  bool diverged = false;
  long iterations = 0;
  ParamVector theta;
  ParamVector nu;
};

// Vanilla NPG from zero until ||theta||_inf > threshold or max_iters. clip > 0 clamps every entry of
// both players to [-clip, clip] after each step and disables the threshold.
VanillaRun run_vanilla_npg(const RegularizedGame& game, double eta, long max_iters,
                           double threshold = kDivergenceThreshold, double clip = 0.0);

}  // namespace npg
