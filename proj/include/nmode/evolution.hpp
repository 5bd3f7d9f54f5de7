#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "nmode/genome.hpp"
#include "nmode/mutation.hpp"
#include "nmode/rng.hpp"
#include "nmode/xml.hpp"

namespace nmode {

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Individual {
  std::uint64_t id = 0;
  Genome genome;
  double fitness = std::numeric_limits<double>::quiet_NaN();  // NaN until evaluated
  std::vector<std::uint64_t> parents;

  bool evaluated() const { return !std::isnan(fitness); }
};

struct Population {
  std::uint64_t generation = 0;
  std::vector<Individual> members;  // ordered by id
  std::uint64_t next_id = 0;
};

struct SelectionConfig {
  double pressure = 0.1;      // share of the ranked population kept as parents
  double elitism = 10.0;      // exponent of the reproduction factors
  double crossover = 0.1;     // zeta
  std::size_t elite_count = 1;

  void validate(std::size_t population_size) const {
    if (!(pressure > 0.0 && pressure <= 1.0))
      throw std::invalid_argument("selection pressure must be in (0,1]");
    if (!(elitism >= 0.0) || !std::isfinite(elitism))
      throw std::invalid_argument("elitism must be finite and >= 0");
    if (!(crossover >= 0.0 && crossover <= 1.0))
      throw std::invalid_argument("crossover probability must be in [0,1]");
    if (elite_count > population_size)
      throw std::invalid_argument("elite count exceeds population size");
  }
};

struct EngineConfig {
  std::size_t population_size = 100;
  SelectionConfig selection;
  MutationParams mutation;
  std::uint64_t seed = 0;

  void validate() const {
    if (population_size == 0) throw std::invalid_argument("population size must be positive");
    selection.validate(population_size);
    mutation.validate();
  }
};

// ---------------------------------------------------------------------------
// Selection and reproduction

inline std::size_t selection_size(std::size_t n, double pressure) {
  const auto k = static_cast<std::size_t>(std::ceil(pressure * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(n, 1));
}

// Fitness descending, ties by ascending id.
inline std::vector<Individual> rank(std::vector<Individual> members) {
  std::stable_sort(members.begin(), members.end(), [](const Individual& a, const Individual& b) {
    if (a.fitness != b.fitness) return a.fitness > b.fitness;
    return a.id < b.id;
  });
  return members;
}

inline std::vector<Individual> select(const Population& pop, const SelectionConfig& cfg) {
  for (const auto& m : pop.members)
    if (!m.evaluated()) throw EvaluationError("individual " + std::to_string(m.id) + " not evaluated");
  auto ranked = rank(pop.members);
  ranked.resize(std::min(ranked.size(), selection_size(pop.members.size(), cfg.pressure)));
  return ranked;
}

// s_i = ((f_i - min f) / (max f - min f))^eta, r_i = s_i / sum(s).
// Equal fitness values or eta = 0 give uniform factors.
inline std::vector<double> reproduction_factors(const std::vector<double>& fitness, double eta) {
  if (fitness.empty()) throw std::invalid_argument("reproduction factors of an empty list");
  for (double f : fitness)
    if (!std::isfinite(f)) throw std::invalid_argument("non-finite fitness");
  const auto [lo, hi] = std::minmax_element(fitness.begin(), fitness.end());
  const double min_f = *lo, max_f = *hi;
  const auto n = fitness.size();
  if (max_f == min_f || eta == 0.0) return std::vector<double>(n, 1.0 / static_cast<double>(n));
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = std::pow((fitness[i] - min_f) / (max_f - min_f), eta);
  const double total = std::accumulate(s.begin(), s.end(), 0.0);
  for (auto& v : s) v /= total;
  return s;
}

// Largest-remainder apportionment of `slots` by `factors`; remainder ties go
// to the lower index.
inline std::vector<std::size_t> allocate_offspring(const std::vector<double>& factors,
                                                   std::size_t slots) {
  std::vector<std::size_t> counts(factors.size(), 0);
  if (factors.empty()) return counts;
  std::vector<double> remainder(factors.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    const double quota = factors[i] * static_cast<double>(slots);
    counts[i] = static_cast<std::size_t>(std::floor(quota));
    remainder[i] = quota - std::floor(quota);
    assigned += counts[i];
  }
  while (assigned > slots) {  // only reachable through rounding of sum(factors) > 1
    auto it = std::max_element(counts.begin(), counts.end());
    --*it;
    --assigned;
  }
  std::vector<std::size_t> order(factors.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < slots; k = (k + 1) % order.size()) {
    ++counts[order[k]];
    ++assigned;
  }
  return counts;
}

// Same node labels, kinds, channels and references on every non-hidden node.
inline bool interface_compatible(const ModuleSpec& a, const ModuleSpec& b) {
  const auto interface = [](const ModuleSpec& m) {
    std::vector<std::tuple<std::string, NodeKind, std::optional<std::string>,
                           std::optional<NodeRef>>>
        out;
    for (const auto& n : m.nodes)
      if (n.kind != NodeKind::hidden) out.emplace_back(n.label, n.kind, n.binding, n.reference);
    std::sort(out.begin(), out.end());
    return out;
  };
  return a.role == b.role && a.evolvable == b.evolvable && interface(a) == interface(b);
}

inline std::size_t sample_index(const std::vector<double>& factors, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (factors[i] <= 0.0) continue;
    last_positive = i;
    acc += factors[i];
    if (u < acc) return i;
  }
  return last_positive;
}

struct CrossoverResult {
  Genome genome;
  std::uint64_t father = 0;
};

// Offspring starts as the mother. For zeta > 0 a father is drawn by the
// reproduction factors and each evolvable module is taken from him with
// probability zeta when the interfaces match.
inline CrossoverResult crossover_with_father(const Individual& mother,
                                             const std::vector<Individual>& parents,
                                             const std::vector<double>& factors, double zeta,
                                             Rng& rng) {
  CrossoverResult out{mother.genome, mother.id};
  if (zeta <= 0.0 || parents.empty()) return out;
  const auto& father = parents[sample_index(factors, rng)];
  out.father = father.id;
  for (auto& m : out.genome.modules) {
    const bool swap = rng.uniform() < zeta;
    if (!swap || !m.evolvable || father.id == mother.id) continue;
    const auto* fm = father.genome.find_module(m.name);
    if (fm && interface_compatible(m, *fm)) m = *fm;
  }
  return out;
}

inline Genome crossover(const Individual& mother, const std::vector<Individual>& parents,
                        const std::vector<double>& factors, double zeta, Rng& rng) {
  return crossover_with_father(mother, parents, factors, zeta, rng).genome;
}

// ---------------------------------------------------------------------------
// Population lifecycle

// Member 0 is the template itself; all others are independent mutations of it.
inline Population initial_population(const Genome& templ, const EngineConfig& cfg) {
  cfg.validate();
  validate(templ);
  Population pop;
  const Rng root = Rng(cfg.seed).substream("initial", 0);
  for (std::size_t i = 0; i < cfg.population_size; ++i) {
    Individual ind;
    ind.id = i;
    if (i == 0) {
      ind.genome = templ;
      normalize(ind.genome);
    } else {
      Rng rng = root.substream("member", i);
      ind.genome = mutate_genome(templ, cfg.mutation, rng);
    }
    pop.members.push_back(std::move(ind));
  }
  pop.next_id = cfg.population_size;
  return pop;
}

using Evaluator = std::function<double(const Individual&)>;

// Evaluates every unevaluated member. Results land in member slots, so the
// outcome does not depend on `jobs`.
inline void evaluate_population(Population& pop, const Evaluator& evaluator, unsigned jobs = 1) {
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < pop.members.size(); ++i)
    if (!pop.members[i].evaluated()) todo.push_back(i);
  std::vector<double> results(todo.size(), 0.0);
  std::vector<std::exception_ptr> errors(todo.size());

  std::atomic<std::size_t> cursor{0};
  const auto worker = [&] {
    for (std::size_t k = cursor++; k < todo.size(); k = cursor++) {
      try {
        results[k] = evaluator(pop.members[todo[k]]);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(todo.size())));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (std::size_t k = 0; k < todo.size(); ++k) {
    auto& member = pop.members[todo[k]];
    if (errors[k]) {
      try {
        std::rethrow_exception(errors[k]);
      } catch (const std::exception& e) {
        throw EvaluationError("individual " + std::to_string(member.id) + ": " + e.what());
      }
    }
    if (!std::isfinite(results[k]))
      throw EvaluationError("individual " + std::to_string(member.id) + ": non-finite fitness");
    member.fitness = results[k];
  }
}

// Selection, reproduction and mutation of an evaluated population. Elites are
// carried over unmutated and keep their fitness; offspring are unevaluated.
inline Population reproduce(const Population& pop, const EngineConfig& cfg) {
  const auto n = cfg.population_size;
  const auto ranked = rank(pop.members);
  for (const auto& m : ranked)
    if (!m.evaluated()) throw EvaluationError("individual " + std::to_string(m.id) + " not evaluated");
  const auto parents = select(pop, cfg.selection);
  std::vector<double> fitness;
  for (const auto& p : parents) fitness.push_back(p.fitness);
  const auto factors = reproduction_factors(fitness, cfg.selection.elitism);

  Population next;
  next.generation = pop.generation + 1;
  next.next_id = pop.next_id;

  const auto elites = std::min(cfg.selection.elite_count, std::min(n, ranked.size()));
  for (std::size_t i = 0; i < elites; ++i) next.members.push_back(ranked[i]);

  const auto counts = allocate_offspring(factors, n - elites);
  const Rng gen_rng = Rng(cfg.seed).substream("generation", next.generation);
  std::uint64_t child = 0;
  for (std::size_t k = 0; k < parents.size(); ++k) {
    for (std::size_t c = 0; c < counts[k]; ++c, ++child) {
      Rng rng = gen_rng.substream("offspring", child);
      auto cross = crossover_with_father(parents[k], parents, factors, cfg.selection.crossover, rng);
      Individual ind;
      ind.id = next.next_id++;
      ind.genome = mutate_genome(std::move(cross.genome), cfg.mutation, rng);
      ind.parents = {parents[k].id};
      if (cross.father != parents[k].id) ind.parents.push_back(cross.father);
      next.members.push_back(std::move(ind));
    }
  }
  std::sort(next.members.begin(), next.members.end(),
            [](const Individual& a, const Individual& b) { return a.id < b.id; });
  return next;
}

// P(n+1) = M(R(S(E(P(n))))).
inline Population next_generation(Population pop, const EngineConfig& cfg,
                                  const Evaluator& evaluator, unsigned jobs = 1) {
  evaluate_population(pop, evaluator, jobs);
  return reproduce(pop, cfg);
}

// ---------------------------------------------------------------------------
// Statistics and checkpoints

struct GenerationStats {
  std::uint64_t generation = 0;
  double best = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  double selected_mean = 0.0;
  double selected_sd = 0.0;
};

namespace detail {
inline std::pair<double, double> mean_sd(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
}
}  // namespace detail

// Population standard deviations over all members and over the selected ones.
inline GenerationStats compute_stats(const Population& pop, const SelectionConfig& cfg) {
  GenerationStats s;
  s.generation = pop.generation;
  const auto ranked = rank(pop.members);
  std::vector<double> all, selected;
  for (const auto& m : ranked) all.push_back(m.fitness);
  const auto k = selection_size(ranked.size(), cfg.pressure);
  selected.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(std::min(k, all.size())));
  s.best = all.empty() ? 0.0 : all.front();
  std::tie(s.mean, s.sd) = detail::mean_sd(all);
  std::tie(s.selected_mean, s.selected_sd) = detail::mean_sd(selected);
  return s;
}

inline std::string stats_csv_header() { return "generation,best,mean,sd,selected_mean,selected_sd\n"; }

inline std::string stats_csv_row(const GenerationStats& s) {
  using xml::format_real;
  return std::to_string(s.generation) + "," + format_real(s.best) + "," + format_real(s.mean) + "," +
         format_real(s.sd) + "," + format_real(s.selected_mean) + "," +
         format_real(s.selected_sd) + "\n";
}

// Genome with id, fitness and lineage stored as metadata.
inline Genome annotated_genome(const Individual& ind) {
  Genome g = ind.genome;
  g.metadata["id"] = std::to_string(ind.id);
  if (ind.evaluated()) g.metadata["fitness"] = xml::format_real(ind.fitness);
  std::string parents;
  for (auto p : ind.parents) parents += (parents.empty() ? "" : ",") + std::to_string(p);
  g.metadata["parents"] = parents;
  return g;
}

inline std::string serialize_population(const Population& pop) {
  std::ostringstream os;
  os << "<population generation=\"" << pop.generation << "\" next-id=\"" << pop.next_id << "\">\n";
  for (const auto& m : pop.members) xml::write_genome_element(os, annotated_genome(m), "  ");
  os << "</population>\n";
  return os.str();
}

inline Population parse_population(std::string_view text) {
  const auto tree = xml::read(text);
  auto it = tree.find("population");
  if (it == tree.not_found()) throw GenomeError("missing <population> root element");
  const auto& root = tree.to_iterator(it)->second;
  Population pop;
  pop.generation = std::stoull(xml::require_attr(root, "generation", "population"));
  pop.next_id = std::stoull(xml::require_attr(root, "next-id", "population"));
  for (const auto& [key, child] : root) {
    if (xml::is_markup(key)) continue;
    if (key != "nmode") throw GenomeError("unexpected element <" + key + "> in population");
    Individual ind;
    ind.genome = xml::parse_genome_element(child);
    auto& meta = ind.genome.metadata;
    ind.id = std::stoull(meta.at("id"));
    if (auto f = meta.find("fitness"); f != meta.end()) {
      auto v = xml::parse_real(f->second);
      if (!v) throw GenomeError("invalid fitness '" + f->second + "'");
      ind.fitness = *v;
    }
    std::stringstream ss(meta["parents"]);
    for (std::string p; std::getline(ss, p, ',');)
      if (!p.empty()) ind.parents.push_back(std::stoull(p));
    meta.erase("id");
    meta.erase("fitness");
    meta.erase("parents");
    pop.members.push_back(std::move(ind));
  }
  return pop;
}

}  // namespace nmode
