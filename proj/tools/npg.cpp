#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "npg/acceptance.hpp"
#include "npg/errors.hpp"
#include "npg/experiment.hpp"
#include "npg/instances.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAcceptanceFailed = 1;
constexpr int kExitValidation = 2;
constexpr int kExitDivergence = 3;

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw npg::ValidationError("config", "cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Natural policy gradient solvers for regularized games: experiments, instances, acceptance"};
  app.require_subcommand(1);

  std::string config_path;
  std::string experiment;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 1;
  auto* run = app.add_subcommand("run", "Run an experiment and write CSV traces");
  run->add_option("experiment", experiment, "Experiment id (defaults apply unless --config is given)");
  run->add_option("--config", config_path, "Experiment config file")->check(CLI::ExistingFile);
  auto* run_seed = run->add_option("--seed", seed, "Override the config seed");
  run->add_option("--out", out_dir, "Override the output directory");
  auto* run_threads = run->add_option("--threads", threads, "Worker threads; results do not depend on it");

  std::string kind;
  int size = 0;
  std::string gen_out;
  std::uint64_t gen_seed = 0;
  auto* gen = app.add_subcommand("gen", "Generate a seeded instance file");
  gen->add_option("kind", kind, "matrix | matrix-fa | monotone-wrapped | markov | markov-fa")->required();
  gen->add_option("--size", size, "n for matrix kinds, |S| for Markov kinds")->required();
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--out", gen_out, "Output file (stdout when omitted)");

  int only = 0;
  int accept_threads = 1;
  auto* accept = app.add_subcommand("accept", "Run the acceptance suite");
  accept->add_option("--only", only, "Run a single criterion")->check(CLI::Range(1, npg::kAcceptanceCount));
  accept->add_option("--threads", accept_threads, "Worker threads for per-state work")->check(CLI::Range(1, 64));

  auto* list = app.add_subcommand("list", "List experiment ids and instance kinds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*list) {
      std::cout << "experiments:\n";
      for (const auto& id : npg::experiment_ids()) std::cout << "  " << id << "\n";
      std::cout << "instance kinds:\n";
      for (auto k : {npg::InstanceKind::kMatrix, npg::InstanceKind::kMatrixFa, npg::InstanceKind::kMonotoneWrapped,
                     npg::InstanceKind::kMarkov, npg::InstanceKind::kMarkovFa})
        std::cout << "  " << npg::to_string(k) << "\n";
      return kExitOk;
    }

    if (*gen) {
      const npg::Instance inst = npg::generate_instance(npg::parse_instance_kind(kind), size, gen_seed);
      const std::string text = npg::serialize_instance(inst);
      // Round-trip through the validating loader before writing.
      npg::parse_instance(text);
      if (gen_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream f(gen_out, std::ios::binary);
        if (!f) throw npg::ValidationError("out", "cannot write " + gen_out);
        f << text;
      }
      return kExitOk;
    }

    if (*accept) {
      bool all = true;
      auto print = [&](const npg::AcceptanceResult& r) {
        all &= r.passed;
        std::cout << npg::format_result(r) << std::endl;
      };
      if (only > 0) {
        print(npg::run_criterion(only, accept_threads));
      } else {
        npg::run_acceptance(accept_threads, print);
      }
      return all ? kExitOk : kExitAcceptanceFailed;
    }

    npg::ExperimentConfig cfg;
    if (!config_path.empty()) {
      cfg = npg::config_from_json(read_file(config_path));
      if (!experiment.empty() && experiment != cfg.experiment)
        throw npg::ValidationError("experiment", "positional id disagrees with the config file");
    } else {
      if (experiment.empty()) throw npg::ValidationError("experiment", "give an experiment id or --config");
      cfg = npg::default_config(experiment);
    }
    if (*run_seed) cfg.seed = seed;
    if (!out_dir.empty()) cfg.output = out_dir;
    if (*run_threads) cfg.threads = threads;
    npg::validate_config(cfg);

    const npg::ExperimentOutput out = npg::run_experiment(cfg);
    for (const auto& path : npg::write_outputs(cfg, out)) std::cout << "wrote " << path << "\n";
    for (const auto& line : out.summary) std::cout << line << "\n";
    if (out.unexpected_divergence) {
      std::cerr << "error: a run diverged that was expected to converge\n";
      return kExitDivergence;
    }
    return kExitOk;
  } catch (const npg::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const npg::DivergedParameter& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  }
}
