#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "nmode/nmode.hpp"
#include "support/random_genome.hpp"

using namespace nmode;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = NMODE_CONFIG_DIR;

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("nmode_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Small run configuration pointing at a config genome.
fs::path write_run_config(const fs::path& dir, const std::string& genome, const std::string& env,
                          std::size_t n, std::uint64_t generations, const std::string& extra = "") {
  const auto path = dir / "run.xml";
  write_text_file(path, "<nmode-run>\n  <genome path=\"" + (kConfigs / genome).string() +
                            "\"/>\n" + env + "\n  <population size=\"" + std::to_string(n) +
                            "\" generations=\"" + std::to_string(generations) +
                            "\" seed=\"42\"/>\n"
                            "  <mutation edge-add=\"0.05\" edge-mod=\"0.2\" node-mod=\"0.01\"/>\n" +
                            extra + "  <output dir=\"out\"/>\n</nmode-run>\n");
  return path;
}

const std::string kHexapod = "  <environment name=\"hexapod\" lifetime=\"100\"/>";

}  // namespace

TEST_CASE("run config parsing") {
  const auto cfg = load_run_config(kConfigs / "hexaboard_run.xml");
  REQUIRE(cfg.engine.population_size == 100);
  REQUIRE(cfg.engine.selection.pressure == 0.1);
  REQUIRE(cfg.engine.selection.elitism == 10.0);
  REQUIRE(cfg.engine.selection.crossover == 0.1);
  REQUIRE(cfg.engine.mutation.edge_add == 0.05);
  REQUIRE(cfg.engine.mutation.edge_mod == 0.2);
  REQUIRE(cfg.engine.mutation.edge_max == 5.0);
  REQUIRE(cfg.engine.mutation.edge_delta == 0.5);
  REQUIRE(cfg.engine.mutation.node_mod == 0.01);
  REQUIRE(cfg.engine.mutation.node_delta == 0.01);
  REQUIRE(cfg.engine.mutation.node_max == 1.0);
  REQUIRE(cfg.engine.mutation.node_add == 0.0);
  REQUIRE(cfg.evaluation.environment == "hexapod");
  REQUIRE(cfg.evaluation.lifetime == 500);
  REQUIRE_NOTHROW(cfg.validate());

  const auto resolved = serialize_run_config(cfg);
  const auto again = parse_run_config(resolved, "/");
  REQUIRE(serialize_run_config(again) == resolved);

  REQUIRE_THROWS_WITH(parse_run_config("<nmode-run><genome path=\"g.xml\"/></nmode-run>", "."),
                      Catch::Matchers::ContainsSubstring("environment/@name"));
  REQUIRE_THROWS_WITH(parse_run_config("<nmode-run><genome path=\"g\"/><environment name=\"x\"/>"
                                       "<population size=\"-3\"/></nmode-run>",
                                       "."),
                      Catch::Matchers::ContainsSubstring("population/@size"));
}

TEST_CASE("run: missing environment name exits 2 naming the field") {
  const auto dir = scratch("noenv");
  const auto cfg = write_run_config(dir, "hexaboard.xml", "  <environment lifetime=\"10\"/>", 4, 0);
  std::ostringstream out, err;
  REQUIRE(cmd_run(cfg, {}, out, err) == kExitConfig);
  REQUIRE(err.str().find("environment/@name") != std::string::npos);
}

TEST_CASE("run: unknown environment and unbound channels") {
  const auto dir = scratch("badenv");
  std::ostringstream out, err;
  auto cfg = write_run_config(dir, "hexaboard.xml", "  <environment name=\"nope\"/>", 4, 0);
  REQUIRE(cmd_run(cfg, {}, out, err) == kExitConfig);
  cfg = write_run_config(dir, "oscillator.xml", kHexapod, 4, 0);
  REQUIRE(cmd_run(cfg, {}, out, err) == kExitEvaluation);
  REQUIRE(err.str().find("unbound") != std::string::npos);
}

TEST_CASE("run: generation 0 only") {
  const auto dir = scratch("gen0");
  const auto cfg = write_run_config(dir, "hexaboard.xml", kHexapod, 6, 0);
  std::ostringstream out, err;
  REQUIRE(cmd_run(cfg, {}, out, err) == kExitOk);
  REQUIRE(fs::exists(dir / "out" / "gen_00000.xml"));
  REQUIRE_FALSE(fs::exists(dir / "out" / "gen_00001.xml"));
  REQUIRE(fs::exists(dir / "out" / "best.xml"));
  REQUIRE(fs::exists(dir / "out" / "resolved_config.xml"));
  const auto stats = read_text_file(dir / "out" / "stats.csv");
  REQUIRE(std::count(stats.begin(), stats.end(), '\n') == 2);
}

TEST_CASE("run: deterministic, overrides win, replay agrees") {
  const auto dir = scratch("det");
  const auto cfg = write_run_config(dir, "hexaboard.xml", kHexapod, 10, 99);
  std::ostringstream out, err;
  RunOverrides o;
  o.generations = 5;
  o.out = dir / "a";
  REQUIRE(cmd_run(cfg, o, out, err) == kExitOk);
  o.out = dir / "b";
  o.jobs = 3;
  REQUIRE(cmd_run(cfg, o, out, err) == kExitOk);
  const auto stats = read_text_file(dir / "a" / "stats.csv");
  REQUIRE(stats == read_text_file(dir / "b" / "stats.csv"));
  REQUIRE(std::count(stats.begin(), stats.end(), '\n') == 7);
  for (int g = 0; g <= 5; ++g)
    REQUIRE(read_text_file(dir / "a" / checkpoint_name(g)) == read_text_file(dir / "b" / checkpoint_name(g)));

  const auto best = load_genome(dir / "a" / "best.xml");
  ReplayRequest req;
  req.genome = dir / "a" / "best.xml";
  req.config = cfg;
  req.trace = dir / "trace.csv";
  std::ostringstream rout;
  REQUIRE(cmd_replay(req, rout, err) == kExitOk);
  REQUIRE(rout.str() == best.metadata.at("fitness") + "\n");

  // A seed override changes the run.
  o.seed = 7;
  o.out = dir / "c";
  REQUIRE(cmd_run(cfg, o, out, err) == kExitOk);
  REQUIRE(read_text_file(dir / "c" / checkpoint_name(5)) != read_text_file(dir / "a" / checkpoint_name(5)));
}

TEST_CASE("run: target fitness stops early") {
  const auto dir = scratch("target");
  const auto cfg = write_run_config(dir, "hexaboard.xml", kHexapod, 10, 50);
  auto text = read_text_file(cfg);
  text.replace(text.find("seed=\"42\""), 9, "seed=\"42\" target-fitness=\"-1\"");
  write_text_file(cfg, text);
  std::ostringstream out, err;
  REQUIRE(cmd_run(cfg, {}, out, err) == kExitOk);
  REQUIRE(fs::exists(dir / "out" / "gen_00000.xml"));
  REQUIRE_FALSE(fs::exists(dir / "out" / "gen_00001.xml"));
}

TEST_CASE("merge command") {
  const auto dir = scratch("merge");
  std::ostringstream out, err;
  const auto pair = load_genome(kConfigs / "leg_pair.xml");

  REQUIRE(cmd_merge({kConfigs / "leg_pair.xml"}, dir / "one.xml", false, out, err) == kExitOk);
  REQUIRE(read_text_file(dir / "one.xml") == serialize_genome(pair));

  save_genome(dir / "mid.xml", nmode::testing::rename_pair(pair, "_mid", {{"fl", "ml"}, {"fr", "mr"}}, "mid"));
  save_genome(dir / "rear.xml", nmode::testing::rename_pair(pair, "_rear", {{"fl", "rl"}, {"fr", "rr"}}, "rear"));
  REQUIRE(cmd_merge({kConfigs / "leg_pair.xml", dir / "mid.xml", dir / "rear.xml"}, dir / "all.xml", false, out,
                    err) == kExitOk);
  const auto merged = load_genome(dir / "all.xml");
  REQUIRE(merged.instances.size() == 6);
  int cpgs = 0;
  for (const auto& m : merged.modules) {
    if (m.role == ModuleRole::cpg) {
      ++cpgs;
      REQUIRE(m.evolvable);
    } else {
      REQUIRE_FALSE(m.evolvable);
    }
  }
  REQUIRE(cpgs == 1);

  REQUIRE(cmd_merge({kConfigs / "leg_pair.xml", dir / "mid.xml"}, dir / "keep.xml", true, out, err) == kExitOk);
  for (const auto& m : load_genome(dir / "keep.xml").modules) REQUIRE(m.evolvable);

  std::ostringstream conflict;
  REQUIRE(cmd_merge({kConfigs / "leg_pair.xml", kConfigs / "leg_pair.xml"}, dir / "bad.xml", false, out,
                    conflict) != kExitOk);
  REQUIRE(conflict.str().find("collision") != std::string::npos);
  REQUIRE_FALSE(fs::exists(dir / "bad.xml"));
}

TEST_CASE("dims command") {
  std::ostringstream out, err;
  DimsRequest req;
  req.genome = kConfigs / "hexaboard.xml";
  REQUIRE(cmd_dims(req, out, err) == kExitOk);
  REQUIRE(out.str().find("leg,modular-leg,3,2,1,1,0,21") != std::string::npos);
  REQUIRE(out.str().find("cpg,modular-cpg,0,0,6,6,0,72") != std::string::npos);
  REQUIRE(out.str().find("total,93") != std::string::npos);

  std::ostringstream u;
  DimsRequest ureq;
  ureq.unrestricted = true;
  ureq.ns = 12;
  ureq.nh = 6;
  ureq.na = 12;
  REQUIRE(cmd_dims(ureq, u, err) == kExitOk);
  REQUIRE(u.str() == "unrestricted,540\n");

  const auto dir = scratch("dims");
  save_genome(dir / "empty.xml", Genome{});
  std::ostringstream e;
  DimsRequest ereq;
  ereq.genome = dir / "empty.xml";
  REQUIRE(cmd_dims(ereq, e, err) == kExitOk);
  REQUIRE(e.str().find("total,0") != std::string::npos);
}

TEST_CASE("replay command") {
  const auto dir = scratch("replay");
  std::ostringstream out, err;
  ReplayRequest req;
  req.genome = kConfigs / "hexaboard.xml";
  req.environment = "hexapod";
  req.steps = 1;
  req.trace = dir / "t.csv";
  REQUIRE(cmd_replay(req, out, err) == kExitOk);
  REQUIRE(out.str() == "0\n");
  const auto csv = read_text_file(dir / "t.csv");
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 2);

  ReplayRequest bad = req;
  bad.genome = kConfigs / "oscillator.xml";
  REQUIRE(cmd_replay(bad, out, err) != kExitOk);
  ReplayRequest none = req;
  none.environment.reset();
  REQUIRE(cmd_replay(none, out, err) == kExitConfig);
}

TEST_CASE("binary parses its subcommands") {
  const char* bin = std::getenv("NMODE_BIN");
  if (!bin) SKIP("NMODE_BIN not set");
  const auto dir = scratch("bin");
  const std::string b = std::string("\"") + bin + "\"";
  const auto run = [&](const std::string& args) {
    const int rc = std::system((b + " " + args + " > " + (dir / "out.txt").string() + " 2>&1").c_str());
    return WEXITSTATUS(rc);
  };
  REQUIRE(run("dims --unrestricted --ns 12 --nh 6 --na 12") == 0);
  REQUIRE(read_text_file(dir / "out.txt") == "unrestricted,540\n");
  REQUIRE(run("dims " + (kConfigs / "hexaboard.xml").string() + " --unrestricted --ns 12 --nh 6 --na 12") == 0);
  REQUIRE(read_text_file(dir / "out.txt").find("ratio,5.8") != std::string::npos);
  REQUIRE(run("replay " + (kConfigs / "hexaboard.xml").string() + " --env hexapod --steps 2 -o " +
              (dir / "t.csv").string()) == 0);
  REQUIRE(run("merge " + (kConfigs / "leg_pair.xml").string() + " " + (kConfigs / "leg_pair.xml").string() +
              " -o " + (dir / "m.xml").string()) != 0);
  REQUIRE(run("frobnicate") != 0);
}
