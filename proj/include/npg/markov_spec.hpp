#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "npg/feature_map.hpp"
#include "npg/simplex.hpp"

namespace npg {

struct MarkovGameSpec {
  int n_states = 0;
  int n_actions = 0;
  // transitions[s] is (n*n) x S; row a*n + b holds P(. | s, a, b).
  std::vector<Eigen::MatrixXd> transitions;
  // rewards[s] is n x n with entries in [0, 1].
  std::vector<Eigen::MatrixXd> rewards;
  double gamma = 0.0;
  double tau = 0.0;
};

// Throws ValidationError naming the first violated field.
void validate(const MarkovGameSpec& spec);

// n x n matrix of E_{s' ~ P(.|s,a,b)} v(s').
Eigen::MatrixXd expected_next_value(const MarkovGameSpec& spec, int s, const Eigen::VectorXd& v);

struct QTensor {
  std::vector<Eigen::MatrixXd> q;
  Eigen::VectorXd v;

  static QTensor zeros(int n_states, int n_actions);
  // max over states of max |entry| of the difference.
  double q_distance(const QTensor& other) const;
};

// -g^T Q h - tau H(g) + tau H(h).
double f_tau(const Eigen::MatrixXd& q, const SimplexVector& g, const SimplexVector& h, double tau);

// Per-state parameters; inactive FA states hold empty vectors.
struct StatePolicyParams {
  std::vector<ParamVector> theta;
  std::vector<ParamVector> nu;

  ParamVector concat_theta() const;
  ParamVector concat_nu() const;
};

// Phi in R^{d x (S n)}, column s*n + a. Each row is a unit vector and each column holds at most one
// unit entry; a state's active actions must be its leading ones, so Phi_s = [M_s | 0] with M_s a
// permutation (identity in the canonical layout).
struct MarkovFeatureMap {
  int n_states = 0;
  int n_actions = 0;
  Eigen::MatrixXd phi;
  std::vector<int> active_count;                  // |A_s|
  std::vector<std::vector<int>> rows;             // global rows feeding theta_s, in action order
  std::vector<std::optional<FeatureMap>> blocks;  // nullopt for states with empty A_s

  bool active(int s) const { return active_count[s] > 0; }
  Eigen::Index d() const { return phi.rows(); }
};

MarkovFeatureMap build_markov_feature_map(const Eigen::MatrixXd& phi, int n_states, int n_actions);
MarkovFeatureMap tabular_markov_feature_map(int n_states, int n_actions);
// d = |S|, Phi_{(s, first action)} = e_s; every state has a single active action.
MarkovFeatureMap first_action_feature_map(int n_states, int n_actions);

// Per state, in order: transition rows (flat Dirichlet, renormalized) then rewards U[0, 1] row-major.
MarkovGameSpec random_markov_game(int n_states, int n_actions, double gamma, double tau, std::uint64_t seed);
// P(s' | s, a, b) = 1/|S|; rewards U[0, 1] row-major per state.
MarkovGameSpec uniform_transition_game(int n_states, int n_actions, double gamma, double tau, std::uint64_t seed);

// Upper bound on |Q| and |V| entries for the value range: (1 + tau log n) / (1 - gamma).
double value_bound(const MarkovGameSpec& spec);

}  // namespace npg
