#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "nmode/nmode.hpp"

namespace {

nmode::ParamMap parse_params(const std::vector<std::string>& items) {
  nmode::ParamMap params;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw CLI::ValidationError("--param", "expected key=value, got '" + item + "'");
    params[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return params;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Modular neuroevolution engine"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Evolve controllers from a run configuration");
  std::string run_config;
  nmode::RunOverrides overrides;
  std::uint64_t seed = 0, generations = 0;
  unsigned jobs = 1;
  std::string out_dir;
  run->add_option("config", run_config, "Run configuration XML")->required();
  auto* seed_opt = run->add_option("--seed", seed, "Master seed");
  auto* gen_opt = run->add_option("--generations", generations, "Maximum generation index");
  auto* jobs_opt = run->add_option("--jobs", jobs, "Parallel evaluations")->check(CLI::PositiveNumber);
  auto* out_opt = run->add_option("--out", out_dir, "Output directory");

  // merge
  auto* merge = app.add_subcommand("merge", "Merge genomes for incremental evolution");
  std::vector<std::string> merge_inputs;
  std::string merge_output;
  bool keep_evolvable = false;
  merge->add_option("inputs", merge_inputs, "Input genomes")->required();
  merge->add_option("-o,--output", merge_output, "Merged genome")->required();
  merge->add_flag("--keep-evolvable", keep_evolvable, "Leave merged non-CPG modules evolvable");

  // dims
  auto* dims = app.add_subcommand("dims", "Search-space dimension per module");
  std::string dims_genome;
  nmode::DimsRequest dims_req;
  dims->add_option("genome", dims_genome, "Genome XML");
  dims->add_flag("--unrestricted", dims_req.unrestricted, "Unrestricted network dimension");
  dims->add_option("--ns", dims_req.ns, "Sensor count");
  dims->add_option("--nh", dims_req.nh, "Hidden count");
  dims->add_option("--na", dims_req.na, "Actuator count");

  // replay
  auto* replay = app.add_subcommand("replay", "Evaluate one genome and export its trace");
  std::string replay_genome, replay_env, replay_trace, replay_config;
  std::uint64_t replay_steps = 0, replay_seed = 0;
  std::vector<std::string> replay_params;
  replay->add_option("genome", replay_genome, "Genome XML")->required();
  auto* env_opt = replay->add_option("--env", replay_env, "Environment name");
  auto* steps_opt = replay->add_option("--steps", replay_steps, "Lifetime in steps");
  auto* trace_opt = replay->add_option("-o,--output", replay_trace, "Trace CSV");
  auto* config_opt = replay->add_option("--config", replay_config, "Run configuration to take the environment from");
  auto* rseed_opt = replay->add_option("--seed", replay_seed, "Evaluation seed");
  replay->add_option("--param", replay_params, "Environment parameter key=value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help output exits 0; any other usage error maps to the generic failure code.
    return app.exit(e) == 0 ? nmode::kExitOk : nmode::kExitFailure;
  }

  if (run->parsed()) {
    if (*seed_opt) overrides.seed = seed;
    if (*gen_opt) overrides.generations = generations;
    if (*jobs_opt) overrides.jobs = jobs;
    if (*out_opt) overrides.out = out_dir;
    return nmode::cmd_run(run_config, overrides, std::cout, std::cerr);
  }
  if (merge->parsed()) {
    std::vector<std::filesystem::path> inputs(merge_inputs.begin(), merge_inputs.end());
    return nmode::cmd_merge(inputs, merge_output, keep_evolvable, std::cout, std::cerr);
  }
  if (dims->parsed()) {
    if (!dims_genome.empty()) dims_req.genome = dims_genome;
    return nmode::cmd_dims(dims_req, std::cout, std::cerr);
  }
  if (replay->parsed()) {
    nmode::ReplayRequest req;
    req.genome = replay_genome;
    if (*env_opt) req.environment = replay_env;
    if (*steps_opt) req.steps = replay_steps;
    if (*trace_opt) req.trace = replay_trace;
    if (*config_opt) req.config = replay_config;
    if (*rseed_opt) req.seed = replay_seed;
    try {
      req.params = parse_params(replay_params);
    } catch (const CLI::Error& e) {
      return app.exit(e);
    }
    return nmode::cmd_replay(req, std::cout, std::cerr);
  }
  return nmode::kExitFailure;
}
