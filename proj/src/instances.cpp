#include "npg/instances.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"
#include "npg/errors.hpp"
#include "npg/rng.hpp"

namespace npg {

using Json = nlohmann::ordered_json;

namespace {

constexpr const char* kFormatName = "npg-instance";

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

const Json& require(const Json& j, const char* field) {
  if (!j.contains(field)) throw ValidationError(field, "missing");
  return j.at(field);
}

double number_field(const Json& j, const char* field) {
  const Json& v = require(j, field);
  if (!v.is_number()) throw ValidationError(field, "must be a number");
  return v.get<double>();
}

Eigen::MatrixXd matrix_from_json(const Json& j, const std::string& field) {
  if (!j.is_array() || j.empty() || !j.front().is_array() || j.front().empty())
    throw ValidationError(field, "must be a nonempty array of rows");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j.front().size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ValidationError(field, "rows must have equal length");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Json& x = row[static_cast<std::size_t>(c)];
      if (!x.is_number()) throw ValidationError(field, "entries must be numbers");
      m(i, c) = x.get<double>();
      if (!std::isfinite(m(i, c))) throw ValidationError(field, "entries must be finite");
    }
  }
  return m;
}

void check_size(InstanceKind kind, int size) {
  const bool markov = kind == InstanceKind::kMarkov || kind == InstanceKind::kMarkovFa;
  const int hi = markov ? 10 : 100;
  if (size < 1 || size > hi) {
    std::ostringstream os;
    os << "must lie in [1, " << hi << "] for " << to_string(kind) << ", got " << size;
    throw ValidationError("size", os.str());
  }
}

MarkovFeatureMap random_markov_features(int n_states, int n_actions, std::uint64_t seed) {
  // Separate stream so the game draws match random_markov_game for the same seed.
  CounterRng rng(CounterRng::mix64(seed));
  std::vector<int> active(n_states);
  int d = 0;
  for (int s = 0; s < n_states; ++s) {
    active[s] = std::min(n_actions, static_cast<int>(rng.uniform01() * (n_actions + 1)));
    d += active[s];
  }
  if (d == 0) {
    active[0] = 1;
    d = 1;
  }
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(d, static_cast<Eigen::Index>(n_states) * n_actions);
  int row = 0;
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < active[s]; ++a) phi(row++, static_cast<Eigen::Index>(s) * n_actions + a) = 1.0;
  return build_markov_feature_map(phi, n_states, n_actions);
}

}  // namespace

const char* to_string(InstanceKind kind) {
  switch (kind) {
    case InstanceKind::kMatrix: return "matrix";
    case InstanceKind::kMatrixFa: return "matrix-fa";
    case InstanceKind::kMonotoneWrapped: return "monotone-wrapped";
    case InstanceKind::kMarkov: return "markov";
    case InstanceKind::kMarkovFa: return "markov-fa";
  }
  return "unknown";
}

InstanceKind parse_instance_kind(const std::string& name) {
  for (auto k : {InstanceKind::kMatrix, InstanceKind::kMatrixFa, InstanceKind::kMonotoneWrapped,
                 InstanceKind::kMarkov, InstanceKind::kMarkovFa})
    if (name == to_string(k)) return k;
  throw ValidationError("kind", "expected matrix, matrix-fa, monotone-wrapped, markov or markov-fa; got '" + name + "'");
}

Instance generate_instance(InstanceKind kind, int size, std::uint64_t seed) {
  check_size(kind, size);
  Instance inst;
  inst.kind = kind;
  inst.size = size;
  inst.seed = seed;
  switch (kind) {
    case InstanceKind::kMatrix:
    case InstanceKind::kMonotoneWrapped:
    case InstanceKind::kMatrixFa: {
      CounterRng rng(seed);
      inst.game = RegularizedGame{CostMatrix(rng.uniform_matrix(size, size, -1.0, 1.0)), kInstanceTau};
      if (kind == InstanceKind::kMatrixFa) {
        const Eigen::Index d = std::max(1, size / 2);
        const Eigen::MatrixXd m = rng.uniform_matrix(d, d, -1.0, 1.0) +
                                  2.0 * static_cast<double>(d) * Eigen::MatrixXd::Identity(d, d);
        inst.features = build_feature_map(m, size);
      }
      break;
    }
    case InstanceKind::kMarkov:
    case InstanceKind::kMarkovFa:
      inst.markov = random_markov_game(size, kInstanceMarkovActions, kInstanceGamma, kInstanceTau, seed);
      if (kind == InstanceKind::kMarkovFa)
        inst.markov_features = random_markov_features(size, kInstanceMarkovActions, seed);
      break;
  }
  return inst;
}

std::string serialize_instance(const Instance& inst) {
  Json j;
  j["format"] = kFormatName;
  j["version"] = kInstanceFormatVersion;
  j["rng"] = kRngName;
  j["kind"] = to_string(inst.kind);
  j["seed"] = inst.seed;
  j["size"] = inst.size;
  if (inst.game) {
    j["tau"] = inst.game->tau;
    j["q"] = matrix_to_json(inst.game->q.entries());
  }
  if (inst.features) j["m"] = matrix_to_json(inst.features->m);
  if (inst.markov) {
    const MarkovGameSpec& spec = *inst.markov;
    j["n_states"] = spec.n_states;
    j["n_actions"] = spec.n_actions;
    j["gamma"] = spec.gamma;
    j["tau"] = spec.tau;
    Json tr = Json::array();
    for (const auto& p : spec.transitions) tr.push_back(matrix_to_json(p));
    j["transitions"] = std::move(tr);
    Json rw = Json::array();
    for (const auto& r : spec.rewards) rw.push_back(matrix_to_json(r));
    j["rewards"] = std::move(rw);
  }
  if (inst.markov_features) j["phi"] = matrix_to_json(inst.markov_features->phi);
  return j.dump(1) + "\n";
}

Instance parse_instance(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("document", e.what());
  }
  if (!j.is_object()) throw ValidationError("document", "must be an object");
  if (!require(j, "format").is_string() || j["format"].get<std::string>() != kFormatName)
    throw ValidationError("format", std::string("expected '") + kFormatName + "'");
  if (!require(j, "version").is_number_integer() || j["version"].get<int>() != kInstanceFormatVersion)
    throw ValidationError("version", "unsupported instance format version");
  if (j.contains("rng") && j["rng"] != kRngName) throw ValidationError("rng", std::string("expected ") + kRngName);
  if (!require(j, "kind").is_string()) throw ValidationError("kind", "must be a string");

  Instance inst;
  inst.kind = parse_instance_kind(j["kind"].get<std::string>());
  if (!require(j, "seed").is_number_unsigned()) throw ValidationError("seed", "must be a nonnegative integer");
  inst.seed = j["seed"].get<std::uint64_t>();
  if (!require(j, "size").is_number_integer()) throw ValidationError("size", "must be an integer");
  inst.size = j["size"].get<int>();

  switch (inst.kind) {
    case InstanceKind::kMatrix:
    case InstanceKind::kMonotoneWrapped:
    case InstanceKind::kMatrixFa: {
      const double tau = number_field(j, "tau");
      if (!(tau > 0.0)) throw ValidationError("tau", "must be positive");
      const Eigen::MatrixXd q = matrix_from_json(require(j, "q"), "q");
      inst.game = RegularizedGame{CostMatrix(q), tau};
      if (inst.kind == InstanceKind::kMatrixFa) {
        if (q.rows() != q.cols()) throw ValidationError("q", "feature-map instances need a square Q");
        const Eigen::MatrixXd m = matrix_from_json(require(j, "m"), "m");
        if (m.rows() != m.cols() || m.rows() > q.rows())
          throw ValidationError("m", "must be square with d <= n");
        try {
          inst.features = build_feature_map(m, q.rows());
        } catch (const SingularFeatureBlock& e) {
          throw ValidationError("m", e.what());
        }
      }
      break;
    }
    case InstanceKind::kMarkov:
    case InstanceKind::kMarkovFa: {
      MarkovGameSpec spec;
      if (!require(j, "n_states").is_number_integer()) throw ValidationError("n_states", "must be an integer");
      if (!require(j, "n_actions").is_number_integer()) throw ValidationError("n_actions", "must be an integer");
      spec.n_states = j["n_states"].get<int>();
      spec.n_actions = j["n_actions"].get<int>();
      spec.gamma = number_field(j, "gamma");
      spec.tau = number_field(j, "tau");
      const Json& tr = require(j, "transitions");
      const Json& rw = require(j, "rewards");
      if (!tr.is_array() || !rw.is_array()) throw ValidationError("transitions", "must be arrays per state");
      for (const auto& p : tr) spec.transitions.push_back(matrix_from_json(p, "transitions"));
      for (const auto& r : rw) spec.rewards.push_back(matrix_from_json(r, "rewards"));
      validate(spec);
      inst.markov = std::move(spec);
      if (inst.kind == InstanceKind::kMarkovFa) {
        const Eigen::MatrixXd phi = matrix_from_json(require(j, "phi"), "phi");
        inst.markov_features = build_markov_feature_map(phi, inst.markov->n_states, inst.markov->n_actions);
      }
      break;
    }
  }
  return inst;
}

}  // namespace npg
