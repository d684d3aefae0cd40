#include "npg/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "npg/errors.hpp"

namespace npg {

SimplexVector::SimplexVector(Eigen::VectorXd probs) : probs_(std::move(probs)) {
  if (probs_.size() == 0) throw SupportMismatch("empty simplex vector");
  for (Eigen::Index i = 0; i < probs_.size(); ++i) {
    if (!std::isfinite(probs_[i]) || probs_[i] < 0.0) {
      std::ostringstream os;
      os << "simplex entry " << i << " is " << probs_[i];
      throw SupportMismatch(os.str());
    }
  }
  const double s = probs_.sum();
  if (std::abs(s - 1.0) > kSimplexSumTol) {
    std::ostringstream os;
    os.precision(17);
    os << "simplex entries sum to " << s;
    throw SupportMismatch(os.str());
  }
}

SimplexVector SimplexVector::uniform(Eigen::Index n) {
  return SimplexVector(Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)), Unchecked{});
}

void require_finite(const Eigen::Ref<const Eigen::VectorXd>& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      std::ostringstream os;
      os << "non-finite parameter at index " << i;
      throw DivergedParameter(static_cast<std::size_t>(i), os.str());
    }
  }
}

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

SimplexVector softmax(const Eigen::Ref<const Eigen::VectorXd>& theta) {
  require_finite(theta);
  Eigen::VectorXd e = (theta.array() - theta.maxCoeff()).exp();
  e /= e.sum();
  return SimplexVector(std::move(e), SimplexVector::Unchecked{});
}

double entropy(const SimplexVector& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
  }
  return h;
}

namespace {

// (1+x)log(1+x) - x for |x| small; coefficients (-1)^k / (k(k-1)).
double bregman_entropy_series(double x) {
  double term = x * x;
  double sum = 0.0;
  for (int k = 2; k <= 9; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    sum += sign * term / static_cast<double>(k * (k - 1));
    term *= x;
  }
  return sum;
}

}  // namespace

double kl(const SimplexVector& p, const SimplexVector& q) {
  if (p.size() != q.size()) throw SupportMismatch("kl: dimension mismatch");
  // Summed as q * phi(p/q) with phi(r) = r log r - r + 1 >= 0; equals sum p log(p/q)
  // when both sum to one, and stays accurate as p -> q.
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pi = p[i];
    const double qi = q[i];
    if (pi == 0.0) {
      total += qi;
      continue;
    }
    if (qi == 0.0) {
      std::ostringstream os;
      os << "kl: q vanishes at index " << i << " where p = " << pi;
      throw SupportMismatch(os.str());
    }
    const double x = (pi - qi) / qi;
    if (std::abs(x) < 1e-3) {
      total += qi * bregman_entropy_series(x);
    } else {
      const double lr = std::clamp(std::log(pi) - std::log(qi), -kLogRatioClamp, kLogRatioClamp);
      total += pi * lr - pi + qi;
    }
  }
  return std::max(total, 0.0);
}

double kl_sum(const std::vector<SimplexVector>& p, const std::vector<SimplexVector>& q) {
  if (p.size() != q.size()) throw SupportMismatch("kl_sum: block count mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += kl(p[i], q[i]);
  return total;
}

}  // namespace npg
