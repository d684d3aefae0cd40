#include "npg/cost_matrix.hpp"

#include <cmath>

#include "npg/errors.hpp"

namespace npg {

CostMatrix::CostMatrix(Eigen::MatrixXd entries) : q_(std::move(entries)) {
  if (q_.size() == 0) throw ValidationError("q", "empty cost matrix");
  if (!q_.allFinite()) throw ValidationError("q", "non-finite cost entry");
  max_abs_ = q_.cwiseAbs().maxCoeff();
  inf_op_ = q_.cwiseAbs().rowwise().sum().maxCoeff();
  op_ = Eigen::JacobiSVD<Eigen::MatrixXd>(q_).singularValues()(0);
}

double regularized_value(const RegularizedGame& game, const SimplexVector& g, const SimplexVector& h) {
  const double bilinear = g.probs().dot(game.q.entries() * h.probs());
  return bilinear - game.tau * entropy(g) + game.tau * entropy(h);
}

double duality_gap(const CostMatrix& q, const SimplexVector& g, const SimplexVector& h) {
  if (g.size() != q.rows() || h.size() != q.cols()) throw DimensionMismatch("duality_gap: shape mismatch");
  const double best_max = (q.entries().transpose() * g.probs()).maxCoeff();
  const double best_min = (q.entries() * h.probs()).minCoeff();
  return best_max - best_min;
}

}  // namespace npg
