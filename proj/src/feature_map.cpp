#include "npg/feature_map.hpp"

#include <cmath>
#include <sstream>

#include "npg/errors.hpp"

namespace npg {

FeatureMap build_feature_map(const Eigen::MatrixXd& m, Eigen::Index n) {
  const Eigen::Index d = m.rows();
  if (d == 0 || m.cols() != d) throw DimensionMismatch("feature block M must be square and nonempty");
  if (d > n) throw DimensionMismatch("feature dimension d exceeds action count n");
  if (!m.allFinite()) throw SingularFeatureBlock("feature block has non-finite entries");

  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
  const double smin = sv(sv.size() - 1);
  if (!(smin > 0.0) || sv(0) / smin > kFeatureConditionLimit) {
    std::ostringstream os;
    os << "feature block condition number " << (smin > 0.0 ? sv(0) / smin : INFINITY)
       << " exceeds " << kFeatureConditionLimit;
    throw SingularFeatureBlock(os.str());
  }

  FeatureMap f;
  f.d = d;
  f.n = n;
  f.m = m;
  f.phi = Eigen::MatrixXd::Zero(d, n);
  f.phi.leftCols(d) = m;
  f.m_inv_t = m.transpose().partialPivLu().inverse();

  const Eigen::Index k = n - d;
  f.psi = Eigen::MatrixXd::Zero(n, n);
  f.psi.topLeftCorner(d, d).setIdentity();
  f.p_tilde = Eigen::MatrixXd::Zero(n, n);
  f.p_tilde.topLeftCorner(d, d).setIdentity();
  if (k > 0) {
    const double inv_k = 1.0 / static_cast<double>(k);
    f.psi.bottomRightCorner(k, k).setConstant(inv_k);
    f.p_tilde.topRightCorner(d, k).setConstant(-inv_k);
  }

  Eigen::MatrixXd lifted = Eigen::MatrixXd::Zero(d, n);
  lifted.leftCols(d) = f.m_inv_t;
  f.preconditioner = lifted * f.p_tilde;
  return f;
}

bool in_restricted_simplex(const Eigen::Ref<const Eigen::VectorXd>& mu, Eigen::Index d, double tol) {
  if (d > mu.size()) return false;
  if ((mu.array() < 0.0).any() || !mu.allFinite()) return false;
  if (std::abs(mu.sum() - 1.0) > kSimplexSumTol) return false;
  const Eigen::Index k = mu.size() - d;
  if (k <= 1) return true;
  const auto tail = mu.tail(k);
  return tail.maxCoeff() - tail.minCoeff() <= tol;
}

SimplexVector log_linear_policy(const FeatureMap& fmap, const Eigen::Ref<const Eigen::VectorXd>& theta) {
  if (theta.size() != fmap.d) throw DimensionMismatch("log_linear_policy: theta has wrong length");
  Eigen::VectorXd logits = Eigen::VectorXd::Zero(fmap.n);
  logits.head(fmap.d) = fmap.m.transpose() * theta;
  return softmax(logits);
}

std::vector<Eigen::VectorXd> restricted_extreme_points(const FeatureMap& fmap) {
  std::vector<Eigen::VectorXd> pts;
  for (Eigen::Index i = 0; i < fmap.d; ++i) pts.push_back(Eigen::VectorXd::Unit(fmap.n, i));
  const Eigen::Index k = fmap.n - fmap.d;
  if (k > 0) {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(fmap.n);
    u.tail(k).setConstant(1.0 / static_cast<double>(k));
    pts.push_back(u);
  }
  return pts;
}

}  // namespace npg
