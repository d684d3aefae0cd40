#pragma once

#include <Eigen/Dense>

#include "npg/simplex.hpp"

namespace npg {

// Cost to the row (minimizing) player. Rectangular shapes are allowed so that
// single-action opponents can be embedded.
class CostMatrix {
 public:
  CostMatrix() = default;
  explicit CostMatrix(Eigen::MatrixXd entries);

  const Eigen::MatrixXd& entries() const { return q_; }
  Eigen::Index rows() const { return q_.rows(); }
  Eigen::Index cols() const { return q_.cols(); }
  double max_abs_entry() const { return max_abs_; }
  double inf_operator_norm() const { return inf_op_; }
  double operator_norm() const { return op_; }

 private:
  Eigen::MatrixXd q_;
  double max_abs_ = 0.0;
  double inf_op_ = 0.0;
  double op_ = 0.0;
};

struct RegularizedGame {
  CostMatrix q;
  double tau = 0.0;
};

// f(g, h) = g^T Q h - tau H(g) + tau H(h).
double regularized_value(const RegularizedGame& game, const SimplexVector& g, const SimplexVector& h);

// max_b [Q^T g]_b - min_a [Q h]_a.
double duality_gap(const CostMatrix& q, const SimplexVector& g, const SimplexVector& h);

}  // namespace npg
