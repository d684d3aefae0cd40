#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "npg/cost_matrix.hpp"
#include "npg/feature_map.hpp"
#include "npg/markov_spec.hpp"

namespace npg {

inline constexpr int kInstanceFormatVersion = 1;
inline constexpr const char* kRngName = "splitmix64-counter";

enum class InstanceKind { kMatrix, kMatrixFa, kMonotoneWrapped, kMarkov, kMarkovFa };

const char* to_string(InstanceKind kind);
InstanceKind parse_instance_kind(const std::string& name);

// Generation defaults shared by every kind.
inline constexpr double kInstanceTau = 0.1;
inline constexpr double kInstanceGamma = 0.8;
inline constexpr int kInstanceMarkovActions = 4;

struct Instance {
  InstanceKind kind = InstanceKind::kMatrix;
  std::uint64_t seed = 0;
  int size = 0;
  std::optional<RegularizedGame> game;      // matrix kinds
  std::optional<FeatureMap> features;       // matrix-fa
  std::optional<MarkovGameSpec> markov;     // markov kinds
  std::optional<MarkovFeatureMap> markov_features;  // markov-fa
};

// size is n for the matrix kinds and |S| for the Markov kinds (n = kInstanceMarkovActions).
//   matrix, monotone-wrapped: Q ~ U[-1, 1]^{n x n}
//   matrix-fa: Q as above, d = max(1, n / 2), M = U[-1, 1]^{d x d} + 2d I
//   markov: per state, transition rows then rewards (see random_markov_game)
//   markov-fa: markov draws, then per state |A_s| = floor(u n) leading actions
// Throws ValidationError("size") for sizes outside [1, 100] (matrix) or [1, 10] (Markov).
Instance generate_instance(InstanceKind kind, int size, std::uint64_t seed);

// Structured text with a format version; identical inputs give byte-identical output.
std::string serialize_instance(const Instance& inst);
// Re-checks every invariant on load; throws ValidationError naming the failing field.
Instance parse_instance(const std::string& text);

}  // namespace npg
