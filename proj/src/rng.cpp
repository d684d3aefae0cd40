#include "npg/rng.hpp"

#include <cmath>

namespace npg {

double CounterRng::exponential() { return -std::log1p(-uniform01()); }

Eigen::MatrixXd CounterRng::uniform_matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = uniform(lo, hi);
  return m;
}

Eigen::VectorXd CounterRng::uniform_vector(Eigen::Index n, double lo, double hi) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform(lo, hi);
  return v;
}

Eigen::VectorXd CounterRng::dirichlet_flat(Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = exponential();
  return v / v.sum();
}

Eigen::VectorXd CounterRng::interior_simplex(Eigen::Index n, double floor) {
  const Eigen::VectorXd p = dirichlet_flat(n);
  Eigen::VectorXd mixed = (1.0 - floor) * p + Eigen::VectorXd::Constant(n, floor / static_cast<double>(n));
  return mixed / mixed.sum();
}

}  // namespace npg
