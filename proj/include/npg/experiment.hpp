#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace npg {

inline constexpr int kConfigFormatVersion = 1;

// Experiment ids: vanilla-vs-modified, npg-vs-onpg, matrix-fa, monotone-methods, markov-tabular, markov-fa.
const std::vector<std::string>& experiment_ids();

struct ExperimentConfig {
  int version = kConfigFormatVersion;
  std::string experiment;
  std::uint64_t seed = 0;
  std::string output = "out";
  int threads = 1;
  std::string game = "random";  // npg-vs-onpg: random | matching-pennies
  int n = 5;                    // actions per player
  int d = 0;                    // feature dimension (matrix-fa)
  int n_states = 0;             // Markov experiments
  int n_players = 0;            // monotone-methods
  double gamma = 0.0;
  double tau = 0.1;
  double eta = 0.0;  // <= 0 picks the variant's stepsize rule
  std::vector<double> eta_grid;
  long iterations = 0;  // matrix and monotone budgets
  long t_outer = 0;
  long t_inner = 0;
};

// Defaults per experiment; throws ValidationError("experiment") for unknown ids.
ExperimentConfig default_config(const std::string& experiment);

// Unknown keys and out-of-range values raise ValidationError naming the field. Missing keys take the
// experiment's defaults.
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);
void validate_config(const ExperimentConfig& cfg);

// One tracked quantity: rows are iterations 1..budget, one column per run.
struct TraceTable {
  std::string name;
  std::vector<std::string> columns;
  std::vector<long> iterations;
  std::vector<std::vector<double>> rows;
};

struct ExperimentOutput {
  std::vector<TraceTable> tables;
  std::vector<std::string> summary;
  // A run diverged that the experiment does not expect to diverge.
  bool unexpected_divergence = false;
};

ExperimentOutput run_experiment(const ExperimentConfig& cfg);

// "iteration,<columns>" header then one line per row; doubles in shortest round-trip form.
std::string format_csv(const TraceTable& table);
// Writes <dir>/<name>.csv per table plus the resolved config; returns the written paths.
std::vector<std::string> write_outputs(const ExperimentConfig& cfg, const ExperimentOutput& out);

}  // namespace npg
