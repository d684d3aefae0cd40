#pragma once

#include <vector>

#include <Eigen/Dense>

namespace npg {

using ParamVector = Eigen::VectorXd;

inline constexpr double kSimplexSumTol = 1e-12;
inline constexpr double kShiftInvarianceTol = 1e-14;
inline constexpr double kLogRatioClamp = 700.0;

// Probability vector: nonnegative entries summing to one within kSimplexSumTol.
class SimplexVector {
 public:
  SimplexVector() = default;
  // Throws SupportMismatch on negative/non-finite entries or a bad sum.
  explicit SimplexVector(Eigen::VectorXd probs);

  static SimplexVector uniform(Eigen::Index n);

  const Eigen::VectorXd& probs() const { return probs_; }
  Eigen::Index size() const { return probs_.size(); }
  double operator[](Eigen::Index i) const { return probs_[i]; }
  double min_entry() const { return probs_.minCoeff(); }
  bool strictly_interior(double delta) const { return min_entry() >= delta; }

 private:
  struct Unchecked {};
  SimplexVector(Eigen::VectorXd probs, Unchecked) : probs_(std::move(probs)) {}
  friend SimplexVector softmax(const Eigen::Ref<const Eigen::VectorXd>& theta);

  Eigen::VectorXd probs_;
};

// Throws DivergedParameter carrying the first non-finite index.
void require_finite(const Eigen::Ref<const Eigen::VectorXd>& v);

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v);

SimplexVector softmax(const Eigen::Ref<const Eigen::VectorXd>& theta);

double entropy(const SimplexVector& p);

double kl(const SimplexVector& p, const SimplexVector& q);

// Joint KL over a stacked profile, e.g. KL(z*||z) = KL(g*||g) + KL(h*||h).
double kl_sum(const std::vector<SimplexVector>& p, const std::vector<SimplexVector>& q);

}  // namespace npg
