#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nmode/environments.hpp"
#include "nmode/evolution.hpp"
#include "nmode/genome.hpp"
#include "nmode/run_config.hpp"
#include "nmode/xml.hpp"

namespace nmode {

// Exit codes shared by all commands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitEvaluation = 3;

inline std::string checkpoint_name(std::uint64_t generation) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "gen_%05llu.xml", static_cast<unsigned long long>(generation));
  return buf;
}

// Every evaluation, in a run or a replay, draws from this stream so that a
// replay reproduces the recorded fitness bit for bit.
inline Rng evaluation_rng(std::uint64_t seed) { return Rng(seed).substream("evaluate", 0); }

// ---------------------------------------------------------------------------
// run

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> generations;
  std::optional<unsigned> jobs;
  std::optional<std::filesystem::path> out;
};

struct RunSummary {
  std::uint64_t generations_run = 0;  // index of the last evaluated generation
  Individual best;
};

// Evolves from a resolved configuration. Throws ConfigError, GenomeError or
// EvaluationError.
inline RunSummary run_evolution(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const Genome templ = load_genome(cfg.genome_path);
  // Fail early on a bad environment name or parameter.
  (void)make_environment(cfg.evaluation.environment, cfg.evaluation.params);

  std::filesystem::create_directories(cfg.output_dir);
  write_text_file(cfg.output_dir / "resolved_config.xml", serialize_run_config(cfg));

  const auto evaluator = [&](const Individual& ind) {
    Rng rng = evaluation_rng(cfg.engine.seed);
    return evaluate(ind.genome, cfg.evaluation, rng).fitness;
  };

  std::ofstream stats(cfg.output_dir / "stats.csv", std::ios::binary);
  if (!stats) throw ConfigError("cannot write " + (cfg.output_dir / "stats.csv").string());
  stats << stats_csv_header();

  RunSummary summary;
  Population pop = initial_population(templ, cfg.engine);
  for (;;) {
    evaluate_population(pop, evaluator, cfg.jobs);
    write_text_file(cfg.output_dir / checkpoint_name(pop.generation), serialize_population(pop));
    const auto s = compute_stats(pop, cfg.engine.selection);
    stats << stats_csv_row(s) << std::flush;
    const Individual top = rank(pop.members).front();
    if (!summary.best.evaluated() || top.fitness > summary.best.fitness) summary.best = top;
    summary.generations_run = pop.generation;
    log << "generation " << pop.generation << " best " << xml::format_real(s.best) << " mean "
        << xml::format_real(s.mean) << '\n';
    if (cfg.target_fitness && summary.best.fitness >= *cfg.target_fitness) break;
    if (pop.generation >= cfg.generations) break;
    pop = reproduce(pop, cfg.engine);
  }
  save_genome(cfg.output_dir / "best.xml", annotated_genome(summary.best));
  return summary;
}

inline RunConfig resolve_run_config(const std::filesystem::path& config_path,
                                    const RunOverrides& overrides) {
  RunConfig cfg = load_run_config(config_path);
  if (overrides.seed) cfg.engine.seed = *overrides.seed;
  if (overrides.generations) cfg.generations = *overrides.generations;
  if (overrides.jobs) cfg.jobs = *overrides.jobs;
  if (overrides.out) cfg.output_dir = *overrides.out;
  return cfg;
}

inline int cmd_run(const std::filesystem::path& config_path, const RunOverrides& overrides,
                   std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  try {
    cfg = resolve_run_config(config_path, overrides);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    const auto summary = run_evolution(cfg, out);
    out << "best fitness " << xml::format_real(summary.best.fitness) << " (individual "
        << summary.best.id << ")\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const GenomeError& e) {
    err << "config error: genome: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "evaluation error: " << e.what() << '\n';
    return kExitEvaluation;
  }
}

// ---------------------------------------------------------------------------
// merge

// Merges genomes for incremental evolution. Non-CPG modules are frozen unless
// `keep_evolvable` is set. A single input is copied unchanged.
inline Genome merge_for_increment(const std::vector<Genome>& parts, bool keep_evolvable) {
  Genome merged = merge_genomes(parts);
  if (parts.size() > 1 && !keep_evolvable) {
    for (auto& m : merged.modules)
      if (m.role != ModuleRole::cpg) m.evolvable = false;
  }
  return merged;
}

inline int cmd_merge(const std::vector<std::filesystem::path>& inputs,
                     const std::filesystem::path& output, bool keep_evolvable, std::ostream& out,
                     std::ostream& err) {
  if (inputs.empty()) {
    err << "merge: no input genomes\n";
    return kExitFailure;
  }
  try {
    std::vector<Genome> parts;
    for (const auto& p : inputs) parts.push_back(load_genome(p));
    const Genome merged = merge_for_increment(parts, keep_evolvable);
    save_genome(output, merged);
    out << "merged " << inputs.size() << " genome(s): " << merged.modules.size() << " module(s), "
        << instance_list(merged).size() << " instance(s)\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "merge error: " << e.what() << '\n';
    return kExitFailure;
  }
}

// ---------------------------------------------------------------------------
// dims

struct DimensionRow {
  std::string module;
  DimensionMode mode;
  DimensionCounts counts;
  std::int64_t dimension;
};

// One row per module template; instances share their template's parameters.
inline std::vector<DimensionRow> genome_dimensions(const Genome& g) {
  std::vector<DimensionRow> rows;
  for (const auto& m : g.modules) {
    const auto ctx = module_context(g, m.name);
    const auto counts = count_nodes(m, ctx);
    const auto mode = dimension_mode(m, counts);
    rows.push_back({m.name, mode, counts, dimension(counts, mode)});
  }
  return rows;
}

struct DimsRequest {
  std::optional<std::filesystem::path> genome;
  bool unrestricted = false;
  std::int64_t ns = 0, nh = 0, na = 0;
};

inline int cmd_dims(const DimsRequest& req, std::ostream& out, std::ostream& err) {
  if (!req.genome && !req.unrestricted) {
    err << "dims: give a genome file or --unrestricted counts\n";
    return kExitFailure;
  }
  if (req.ns < 0 || req.nh < 0 || req.na < 0) {
    err << "dims: counts must be non-negative\n";
    return kExitFailure;
  }
  std::optional<std::int64_t> total;
  if (req.genome) {
    Genome g;
    try {
      g = load_genome(*req.genome);
    } catch (const std::exception& e) {
      err << "dims: " << e.what() << '\n';
      return kExitFailure;
    }
    std::int64_t sum = 0;
    out << "module,mode,ns,na,ni,no,nh,dimension\n";
    for (const auto& r : genome_dimensions(g)) {
      out << r.module << ',' << to_string(r.mode) << ',' << r.counts.sensors << ','
          << r.counts.actuators << ',' << r.counts.inputs << ',' << r.counts.outputs << ','
          << r.counts.hidden << ',' << r.dimension << '\n';
      sum += r.dimension;
    }
    out << "total," << sum << '\n';
    total = sum;
  }
  if (req.unrestricted) {
    const DimensionCounts c{req.ns, req.na, 0, 0, req.nh};
    const auto u = dimension(c, DimensionMode::unrestricted);
    out << "unrestricted," << u << '\n';
    if (total && *total > 0)
      out << "ratio," << std::fixed << std::setprecision(1)
          << static_cast<double>(u) / static_cast<double>(*total) << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// replay

struct ReplayRequest {
  std::filesystem::path genome;
  std::optional<std::filesystem::path> config;  // run config supplying env, params and seed
  std::optional<std::string> environment;
  ParamMap params;
  std::optional<std::uint64_t> steps;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> trace;
};

inline int cmd_replay(const ReplayRequest& req, std::ostream& out, std::ostream& err) {
  EvaluationConfig eval;
  std::uint64_t seed = 0;
  try {
    if (req.config) {
      const auto cfg = load_run_config(*req.config);
      eval = cfg.evaluation;
      seed = cfg.engine.seed;
    }
    if (req.environment) eval.environment = *req.environment;
    for (const auto& [k, v] : req.params) eval.params[k] = v;
    if (req.steps) eval.lifetime = *req.steps;
    if (req.seed) seed = *req.seed;
    eval.validate();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    const Genome g = load_genome(req.genome);
    Rng rng = evaluation_rng(seed);
    const auto net = compile(g);
    auto env = make_environment(eval.environment, eval.params);
    const auto result = run_lifecycle(net, *env, eval.lifetime, rng, {.record_network = true});
    if (req.trace) {
      std::ofstream os(*req.trace, std::ios::binary);
      if (!os) throw ConfigError("cannot write " + req.trace->string());
      write_trace_csv(os, result.trace, net.size());
    }
    out << xml::format_real(result.fitness) << '\n';
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "replay error: " << e.what() << '\n';
    return kExitEvaluation;
  }
}

}  // namespace nmode
