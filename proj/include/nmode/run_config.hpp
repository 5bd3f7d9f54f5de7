#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>

#include "nmode/environment.hpp"
#include "nmode/evolution.hpp"
#include "nmode/xml.hpp"

namespace nmode {

struct RunConfig {
  std::filesystem::path genome_path;
  EvaluationConfig evaluation;
  EngineConfig engine;
  std::uint64_t generations = 0;
  std::optional<double> target_fitness;
  std::filesystem::path output_dir = "out";
  unsigned jobs = 1;

  void validate() const {
    evaluation.validate();
    try {
      engine.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (!std::filesystem::exists(genome_path))
      throw ConfigError("genome/@path: file not found '" + genome_path.string() + "'");
  }
};

namespace detail {

using Tree = xml::Tree;

inline const Tree* child(const Tree& parent, const std::string& name) {
  auto it = parent.find(name);
  return it == parent.not_found() ? nullptr : &parent.to_iterator(it)->second;
}

inline const Tree& require_child(const Tree& parent, const std::string& name) {
  const auto* c = child(parent, name);
  if (!c) throw ConfigError("missing element <" + name + ">");
  return *c;
}

inline std::optional<std::string> config_attr(const Tree* e, const std::string& name) {
  if (!e) return std::nullopt;
  return xml::attr(*e, name);
}

inline double config_real(const Tree* e, const std::string& field, const std::string& name,
                          double fallback) {
  auto v = config_attr(e, name);
  if (!v) return fallback;
  auto d = xml::parse_real(*v);
  if (!d) throw ConfigError(field + "/@" + name + ": not a real number '" + *v + "'");
  return *d;
}

inline std::uint64_t config_uint(const Tree* e, const std::string& field, const std::string& name,
                                 std::uint64_t fallback) {
  auto v = config_attr(e, name);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    if (!v->empty() && (*v)[0] == '-') throw std::invalid_argument("negative");
    auto n = std::stoull(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing");
    return n;
  } catch (const std::exception&) {
    throw ConfigError(field + "/@" + name + ": not a non-negative integer '" + *v + "'");
  }
}

}  // namespace detail

// Relative genome and output paths resolve against `base_dir`.
inline RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
  using namespace detail;
  Tree tree;
  try {
    tree = xml::read(text);
  } catch (const GenomeError& e) {
    throw ConfigError(e.what());
  }
  const auto* root = child(tree, "nmode-run");
  if (!root) throw ConfigError("missing <nmode-run> root element");

  RunConfig cfg;
  const auto* genome = child(*root, "genome");
  auto genome_path = config_attr(genome, "path");
  if (!genome_path) throw ConfigError("genome/@path: missing");
  cfg.genome_path = base_dir / *genome_path;

  const auto* env = child(*root, "environment");
  auto env_name = config_attr(env, "name");
  if (!env_name || env_name->empty()) throw ConfigError("environment/@name: missing");
  cfg.evaluation.environment = *env_name;
  cfg.evaluation.lifetime = config_uint(env, "environment", "lifetime", cfg.evaluation.lifetime);
  for (const auto& [key, p] : *env) {
    if (key != "param") continue;
    auto k = xml::attr(p, "key");
    if (!k) throw ConfigError("environment/param/@key: missing");
    cfg.evaluation.params[*k] = xml::attr(p, "value").value_or("");
  }

  const auto* pop = child(*root, "population");
  cfg.engine.population_size = config_uint(pop, "population", "size", cfg.engine.population_size);
  cfg.generations = config_uint(pop, "population", "generations", cfg.generations);
  cfg.engine.seed = config_uint(pop, "population", "seed", cfg.engine.seed);
  if (config_attr(pop, "target-fitness"))
    cfg.target_fitness = config_real(pop, "population", "target-fitness", 0.0);
  cfg.jobs = static_cast<unsigned>(config_uint(pop, "population", "jobs", cfg.jobs));

  const auto* sel = child(*root, "selection");
  auto& s = cfg.engine.selection;
  s.pressure = config_real(sel, "selection", "pressure", s.pressure);
  s.elitism = config_real(sel, "selection", "elitism", s.elitism);
  s.crossover = config_real(sel, "selection", "crossover", s.crossover);
  s.elite_count = config_uint(sel, "selection", "elite-count", s.elite_count);

  const auto* mut = child(*root, "mutation");
  auto& m = cfg.engine.mutation;
  m.edge_add = config_real(mut, "mutation", "edge-add", m.edge_add);
  if (auto mode = config_attr(mut, "edge-add-mode")) {
    if (*mode == "uniform")
      m.edge_add_mode = EdgeInsertionMode::uniform;
    else if (*mode == "distance")
      m.edge_add_mode = EdgeInsertionMode::distance;
    else
      throw ConfigError("mutation/@edge-add-mode: expected uniform or distance, got '" + *mode + "'");
  }
  m.min_distance = config_real(mut, "mutation", "min-distance", m.min_distance);
  m.weight_init_max = config_real(mut, "mutation", "weight-init-max", m.weight_init_max);
  m.edge_del = config_real(mut, "mutation", "edge-del", m.edge_del);
  m.edge_mod = config_real(mut, "mutation", "edge-mod", m.edge_mod);
  m.edge_delta = config_real(mut, "mutation", "edge-delta", m.edge_delta);
  m.edge_max = config_real(mut, "mutation", "edge-max", m.edge_max);
  m.node_add = config_real(mut, "mutation", "node-add", m.node_add);
  m.node_del = config_real(mut, "mutation", "node-del", m.node_del);
  m.node_mod = config_real(mut, "mutation", "node-mod", m.node_mod);
  m.node_delta = config_real(mut, "mutation", "node-delta", m.node_delta);
  m.node_max = config_real(mut, "mutation", "node-max", m.node_max);

  if (auto dir = config_attr(child(*root, "output"), "dir")) cfg.output_dir = base_dir / *dir;
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return parse_run_config(text, path.parent_path());
}

// Fully resolved configuration, written next to run outputs.
inline std::string serialize_run_config(const RunConfig& cfg) {
  using xml::escape;
  using xml::format_real;
  std::ostringstream os;
  const auto& s = cfg.engine.selection;
  const auto& m = cfg.engine.mutation;
  os << "<nmode-run>\n";
  os << "  <genome path=\"" << escape(std::filesystem::absolute(cfg.genome_path).string())
     << "\"/>\n";
  os << "  <environment name=\"" << escape(cfg.evaluation.environment) << "\" lifetime=\""
     << cfg.evaluation.lifetime << "\">\n";
  for (const auto& [k, v] : cfg.evaluation.params)
    os << "    <param key=\"" << escape(k) << "\" value=\"" << escape(v) << "\"/>\n";
  os << "  </environment>\n";
  os << "  <population size=\"" << cfg.engine.population_size << "\" generations=\""
     << cfg.generations << "\" seed=\"" << cfg.engine.seed << '"';
  if (cfg.target_fitness) os << " target-fitness=\"" << format_real(*cfg.target_fitness) << '"';
  os << "/>\n";
  os << "  <selection pressure=\"" << format_real(s.pressure) << "\" elitism=\""
     << format_real(s.elitism) << "\" crossover=\"" << format_real(s.crossover)
     << "\" elite-count=\"" << s.elite_count << "\"/>\n";
  os << "  <mutation edge-add=\"" << format_real(m.edge_add) << "\" edge-add-mode=\""
     << (m.edge_add_mode == EdgeInsertionMode::uniform ? "uniform" : "distance")
     << "\" min-distance=\"" << format_real(m.min_distance) << "\" weight-init-max=\""
     << format_real(m.weight_init_max) << "\" edge-del=\"" << format_real(m.edge_del)
     << "\" edge-mod=\"" << format_real(m.edge_mod) << "\" edge-delta=\""
     << format_real(m.edge_delta) << "\" edge-max=\"" << format_real(m.edge_max)
     << "\" node-add=\"" << format_real(m.node_add) << "\" node-del=\""
     << format_real(m.node_del) << "\" node-mod=\"" << format_real(m.node_mod)
     << "\" node-delta=\"" << format_real(m.node_delta) << "\" node-max=\""
     << format_real(m.node_max) << "\"/>\n";
  os << "  <output dir=\"" << escape(std::filesystem::absolute(cfg.output_dir).string())
     << "\"/>\n";
  os << "</nmode-run>\n";
  return os.str();
}

}  // namespace nmode
