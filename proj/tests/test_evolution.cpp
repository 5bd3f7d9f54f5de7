#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "nmode/nmode.hpp"
#include "support/random_genome.hpp"

using namespace nmode;
using nmode::testing::make_node;

namespace {

Individual individual(std::uint64_t id, double fitness, Genome g = {}) {
  Individual i;
  i.id = id;
  i.fitness = fitness;
  i.genome = std::move(g);
  return i;
}

Population population(const std::vector<double>& fitness) {
  Population p;
  for (std::size_t i = 0; i < fitness.size(); ++i) p.members.push_back(individual(i, fitness[i]));
  p.next_id = fitness.size();
  return p;
}

// Two evolvable modules with equal interfaces; `w` marks the origin.
Genome two_modules(double w) {
  Genome g;
  for (const auto* name : {"a", "b"}) {
    ModuleSpec m;
    m.name = name;
    m.nodes = {make_node("in", NodeKind::input), make_node("out", NodeKind::output)};
    m.edges = {{"in", "out", w}};
    g.modules.push_back(m);
  }
  normalize(g);
  return g;
}

// Fitness from the genome alone: sum of edge weights.
double weight_sum(const Individual& ind) {
  double f = 0.0;
  for (const auto& m : ind.genome.modules)
    for (const auto& e : m.edges) f += e.weight;
  return f;
}

}  // namespace

TEST_CASE("selection") {
  SelectionConfig cfg;
  cfg.pressure = 1.0;
  REQUIRE(select(population({3, 1, 2}), cfg).size() == 3);
  cfg.pressure = 0.1;
  std::vector<double> f(100);
  std::iota(f.begin(), f.end(), 0.0);
  const auto top = select(population(f), cfg);
  REQUIRE(top.size() == 10);
  REQUIRE(top.front().fitness == 99.0);
  REQUIRE(top.back().fitness == 90.0);
  // Equal fitness: lower id first.
  cfg.pressure = 1.0;
  const auto tied = select(population({1, 2, 2, 1}), cfg);
  REQUIRE(tied[0].id == 1);
  REQUIRE(tied[1].id == 2);
  REQUIRE(tied[2].id == 0);
  REQUIRE(tied[3].id == 3);
  REQUIRE(selection_size(7, 0.01) == 1);
}

TEST_CASE("reproduction factors") {
  const auto uniform = reproduction_factors({5, 5, 5}, 10.0);
  for (double r : uniform) REQUIRE(r == 1.0 / 3.0);
  const auto r = reproduction_factors({1, 2, 3}, 1.0);
  REQUIRE(r[0] == 0.0);
  REQUIRE(r[1] == Catch::Approx(1.0 / 3.0).epsilon(1e-15));
  REQUIRE(r[2] == Catch::Approx(2.0 / 3.0).epsilon(1e-15));
  const auto sharp = reproduction_factors({1, 2, 3}, 60.0);
  REQUIRE(sharp[2] > 1.0 - 1e-15);
  const auto flat = reproduction_factors({1, 2, 3}, 0.0);
  REQUIRE(flat[0] == 1.0 / 3.0);
  REQUIRE_THROWS(reproduction_factors({1, std::nan("")}, 1.0));
  REQUIRE_THROWS(reproduction_factors({}, 1.0));
}

TEST_CASE("offspring allocation") {
  REQUIRE(allocate_offspring({1.0}, 10) == std::vector<std::size_t>{10});
  REQUIRE(allocate_offspring({0.0, 1.0 / 3.0, 2.0 / 3.0}, 9) == std::vector<std::size_t>{0, 3, 6});
  REQUIRE(allocate_offspring({0.5, 0.5}, 3) == std::vector<std::size_t>{2, 1});
  REQUIRE(allocate_offspring({0.5, 0.5}, 0) == std::vector<std::size_t>{0, 0});
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> f(1 + rng.below(12));
    for (auto& v : f) v = rng.uniform(-3, 3);
    const auto r = reproduction_factors(f, rng.uniform(0, 5));
    const auto slots = rng.below(200);
    const auto c = allocate_offspring(r, slots);
    REQUIRE(std::accumulate(c.begin(), c.end(), std::size_t{0}) == slots);
    for (std::size_t k = 0; k < r.size(); ++k)
      REQUIRE(std::abs(static_cast<double>(c[k]) - r[k] * static_cast<double>(slots)) < 1.0);
  }
}

TEST_CASE("crossover") {
  const auto mother = individual(0, 1.0, two_modules(1.0));
  const auto father = individual(1, 2.0, two_modules(2.0));
  const std::vector<Individual> parents{mother, father};
  Rng rng(2);

  SECTION("zeta = 0 copies the mother") {
    REQUIRE(crossover(mother, parents, {0.0, 1.0}, 0.0, rng) == mother.genome);
  }
  SECTION("self-mating copies the mother") {
    REQUIRE(crossover(mother, {mother}, {1.0}, 1.0, rng) == mother.genome);
  }
  SECTION("zeta = 1 takes every compatible module from the father") {
    REQUIRE(crossover(mother, parents, {0.0, 1.0}, 1.0, rng) == father.genome);
  }
  SECTION("incompatible modules stay with the mother") {
    auto odd = father;
    odd.genome.modules[0].nodes.push_back(make_node("extra", NodeKind::output));
    const auto child = crossover(mother, {mother, odd}, {0.0, 1.0}, 1.0, rng);
    REQUIRE(child.modules[0] == mother.genome.modules[0]);
    REQUIRE(child.modules[1] == father.genome.modules[1]);
  }
  SECTION("hidden nodes do not affect compatibility") {
    auto grown = father;
    grown.genome.modules[0].nodes.push_back(make_node("h0", NodeKind::hidden));
    const auto child = crossover(mother, {mother, grown}, {0.0, 1.0}, 1.0, rng);
    REQUIRE(child.modules[0] == grown.genome.modules[0]);
  }
  SECTION("frozen modules are never exchanged") {
    auto m = mother;
    m.genome.modules[0].evolvable = false;
    auto f = father;
    f.genome.modules[0].evolvable = false;
    const auto child = crossover(m, {m, f}, {0.0, 1.0}, 1.0, rng);
    REQUIRE(child.modules[0] == m.genome.modules[0]);
  }
  SECTION("swap frequency follows zeta") {
    const double zeta = 0.3;
    const int trials = 100000;
    int swaps = 0;
    for (int i = 0; i < trials; ++i) {
      const auto child = crossover(mother, parents, {0.0, 1.0}, zeta, rng);
      for (const auto& m : child.modules) swaps += m.edges[0].weight == 2.0;
    }
    const double rate = swaps / (2.0 * trials);
    const double sigma = std::sqrt(zeta * (1 - zeta) / (2.0 * trials));
    REQUIRE(std::abs(rate - zeta) < 4 * sigma);
  }
}

TEST_CASE("next_generation without variation keeps the population") {
  EngineConfig cfg;
  cfg.population_size = 6;
  cfg.selection.elite_count = 6;
  cfg.selection.crossover = 0.0;
  cfg.seed = 3;
  Rng gen(4);
  Population pop;
  for (std::uint64_t i = 0; i < 6; ++i) pop.members.push_back(individual(i, std::nan(""), nmode::testing::random_genome(gen)));
  pop.next_id = 6;
  const auto next = next_generation(pop, cfg, weight_sum);
  REQUIRE(next.generation == 1);
  REQUIRE(next.members.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    REQUIRE(next.members[i].id == pop.members[i].id);
    REQUIRE(next.members[i].genome == pop.members[i].genome);
  }
}

TEST_CASE("engine loop: monotone best, constant size, determinism, jobs") {
  Genome templ = two_modules(0.0);
  EngineConfig cfg;
  cfg.population_size = 20;
  cfg.selection = {0.2, 5.0, 0.25, 1};
  cfg.mutation.edge_mod = 0.5;
  cfg.mutation.edge_add = 0.1;
  cfg.mutation.node_add = 0.1;
  cfg.seed = 5;

  const auto run = [&](unsigned jobs) {
    std::string trace;
    double best = -1e300;
    Population pop = initial_population(templ, cfg);
    REQUIRE(pop.members[0].genome == templ);
    for (int g = 0; g < 15; ++g) {
      evaluate_population(pop, weight_sum, jobs);
      REQUIRE(pop.members.size() == cfg.population_size);
      const auto stats = compute_stats(pop, cfg.selection);
      REQUIRE(stats.best >= best);
      best = stats.best;
      trace += serialize_population(pop) + stats_csv_row(stats);
      pop = reproduce(pop, cfg);
    }
    return trace;
  };
  const auto a = run(1);
  REQUIRE(a == run(1));
  REQUIRE(a == run(4));
}

TEST_CASE("evaluation errors name the individual") {
  EngineConfig cfg;
  cfg.population_size = 4;
  Population pop = initial_population(two_modules(0.0), cfg);
  const Evaluator failing = [](const Individual& i) -> double {
    if (i.id == 2) throw std::runtime_error("boom");
    return 0.0;
  };
  REQUIRE_THROWS_WITH(evaluate_population(pop, failing, 2),
                      Catch::Matchers::ContainsSubstring("individual 2") && Catch::Matchers::ContainsSubstring("boom"));
  const Evaluator nan = [](const Individual&) { return std::nan(""); };
  REQUIRE_THROWS_AS(evaluate_population(pop, nan), EvaluationError);
}

TEST_CASE("statistics and checkpoints") {
  auto pop = population({1, 2, 3, 4});
  pop.generation = 7;
  SelectionConfig cfg;
  cfg.pressure = 0.5;
  const auto s = compute_stats(pop, cfg);
  REQUIRE(s.best == 4.0);
  REQUIRE(s.mean == 2.5);
  REQUIRE(s.sd == Catch::Approx(std::sqrt(1.25)));
  REQUIRE(s.selected_mean == 3.5);
  REQUIRE(s.selected_sd == 0.5);
  REQUIRE(stats_csv_header() == "generation,best,mean,sd,selected_mean,selected_sd\n");
  REQUIRE(stats_csv_row(s).rfind("7,4,2.5,", 0) == 0);

  pop.members[1].parents = {0, 3};
  pop.members[2].fitness = 0.1;
  const auto text = serialize_population(pop);
  const auto back = parse_population(text);
  REQUIRE(back.generation == 7);
  REQUIRE(back.next_id == 4);
  REQUIRE(back.members.size() == 4);
  REQUIRE(back.members[1].parents == std::vector<std::uint64_t>{0, 3});
  REQUIRE(back.members[2].fitness == 0.1);
  REQUIRE(serialize_population(back) == text);
}

TEST_CASE("config validation") {
  EngineConfig cfg;
  REQUIRE_NOTHROW(cfg.validate());
  cfg.selection.pressure = 0.0;
  REQUIRE_THROWS(cfg.validate());
  cfg = {};
  cfg.selection.elite_count = cfg.population_size + 1;
  REQUIRE_THROWS(cfg.validate());
}
