#pragma once

#include <vector>

#include <Eigen/Dense>

#include "npg/simplex.hpp"

namespace npg {

inline constexpr double kFeatureConditionLimit = 1e12;
inline constexpr double kRestrictedTol = 1e-12;

// Phi = [M | 0] with d x d invertible M. d == n is accepted and gives Psi = P~ = I.
struct FeatureMap {
  Eigen::Index d = 0;
  Eigen::Index n = 0;
  Eigen::MatrixXd phi;             // d x n
  Eigen::MatrixXd m;               // d x d
  Eigen::MatrixXd m_inv_t;         // (M^T)^{-1}
  Eigen::MatrixXd psi;             // n x n averaging map onto the restricted simplex
  Eigen::MatrixXd p_tilde;         // n x n centering map
  Eigen::MatrixXd preconditioner;  // d x n, [(M^T)^{-1} | 0] P~
};

// Throws SingularFeatureBlock if cond(M) exceeds kFeatureConditionLimit.
FeatureMap build_feature_map(const Eigen::MatrixXd& m, Eigen::Index n);

// mu is a simplex vector whose trailing n - d entries agree within tol.
bool in_restricted_simplex(const Eigen::Ref<const Eigen::VectorXd>& mu, Eigen::Index d,
                           double tol = kRestrictedTol);

// softmax(Phi^T theta).
SimplexVector log_linear_policy(const FeatureMap& fmap, const Eigen::Ref<const Eigen::VectorXd>& theta);

// e_1..e_d plus the uniform vector on the trailing block (when d < n).
std::vector<Eigen::VectorXd> restricted_extreme_points(const FeatureMap& fmap);

}  // namespace npg
