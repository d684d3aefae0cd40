#pragma once

#include "npg/feature_map.hpp"
#include "npg/matrix_game.hpp"

namespace npg {

// Psi_g^T Q Psi_h with the same tau.
RegularizedGame surrogate_game(const RegularizedGame& game, const FeatureMap& fg, const FeatureMap& fh);

// Optimistic bound evaluated on the surrogate game's norm.
double fa_stepsize_bound(const RegularizedGame& game, const FeatureMap& fg, const FeatureMap& fh,
                         StepsizeNorm norm = StepsizeNorm::kMaxAbsEntry);

// theta_bar' = (1 - eta tau) theta - eta Pre_g Q h(nu_bar), theta' uses h(nu_bar'); nu symmetric with
// +eta Pre_h Q^T g. Parameters live in R^d; policies are log-linear through each player's map.
OptimisticState onpg_fa_step(const RegularizedGame& game, const FeatureMap& fg, const FeatureMap& fh,
                             const OptimisticState& state, double eta, bool guaranteed = false,
                             StepsizeNorm norm = StepsizeNorm::kMaxAbsEntry);
OptimisticState onpg_fa_step(const RegularizedGame& game, const FeatureMap& fmap, const OptimisticState& state,
                             double eta, bool guaranteed = false);

// Targets are the restricted oracle solution mapped through the preconditioners. cfg.optimistic must be set.
SolverTrace solve_regularized_fa(const RegularizedGame& game, const FeatureMap& fg, const FeatureMap& fh,
                                 const SolverConfig& cfg);
SolverTrace solve_regularized_fa(const RegularizedGame& game, const FeatureMap& fmap, const SolverConfig& cfg);

// Unregularized exploitability with both best responses restricted to the class (vertex enumeration).
double in_class_duality_gap(const CostMatrix& q, const FeatureMap& fg, const FeatureMap& fh, const SimplexVector& g,
                            const SimplexVector& h);

}  // namespace npg
