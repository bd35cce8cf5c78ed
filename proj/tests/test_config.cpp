#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "conelab/config.hpp"
#include "conelab/experiments.hpp"
#include "doctest.h"

using namespace conelab;
using namespace conelab::scenario;

namespace {

std::vector<ConfigIssue> issues_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigErrors& e) {
    return e.issues();
  }
  return {};
}

bool mentions(const std::vector<ConfigIssue>& v, std::size_t line, const std::string& needle) {
  for (const auto& i : v)
    if (i.line == line && i.message.find(needle) != std::string::npos) return true;
  return false;
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("conelab_test_config_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("minimal kg_locality config gets the documented defaults") {
  const auto c = parse_config("experiment = kg_locality\n");
  CHECK(c.experiment == Experiment::kg_locality);
  CHECK(c.name == "kg_locality");
  CHECK(c.count("grid.extent") == 2048);
  CHECK(c.real("solver.cfl") == 1.0);
  CHECK(c.real("solver.mass") == 0.0);
  CHECK(c.integers("solver.seeds") == std::vector<std::int64_t>{1});
  CHECK(c.integers("grid.levels").empty());
  CHECK(c.real("checks.inside_tol") == 1e-13);
  CHECK(c.text("output.dir") == ".");
  CHECK(c.lines.empty());
  // Every documented key resolves.
  for (auto e : all_experiments()) {
    const auto cfg = parse_config("experiment = " + to_string(e) + "\n");
    CHECK(cfg.values.size() == documented_keys(e).size());
  }
}

TEST_CASE("values, lists, comments and booleans") {
  const auto c = parse_config(
      "# leading comment\n"
      "experiment = kg_locality\n"
      "name = \"trial run\"\n"
      "[grid]\n"
      "levels = [512, 1024, 2048]   # inline comment\n"
      "; another comment\n"
      "[solver]\n"
      "cfl = 5e-1\n"
      "seeds = 3, 4 , 5\n"
      "mass = +1.0\n"
      "[output]\n"
      "csv = false\n");
  CHECK(c.name == "trial run");
  CHECK(c.integers("grid.levels") == std::vector<std::int64_t>{512, 1024, 2048});
  CHECK(c.real("solver.cfl") == 0.5);
  CHECK(c.real("solver.mass") == 1.0);
  CHECK(c.integers("solver.seeds").size() == 3);
  CHECK_FALSE(c.flag("output.csv"));
  CHECK(c.lines.at("solver.cfl") == 8);
  CHECK(c.user_set("grid.levels"));
}

TEST_CASE("cfl outside (0,1] is rejected with the documented message") {
  const auto v = issues_of("experiment = kg_locality\n[solver]\ncfl = 1.5\n");
  REQUIRE(v.size() == 1);
  CHECK(v[0].line == 3);
  CHECK(v[0].message == "cfl must be in (0,1]");
  CHECK(mentions(issues_of("experiment = kg_locality\n[solver]\ncfl = 0\n"), 3, "cfl must be in (0,1]"));
}

TEST_CASE("unknown experiment lists the valid names") {
  const auto v = issues_of("experiment = warp_drive\n");
  REQUIRE(v.size() == 1);
  CHECK(v[0].line == 1);
  for (auto e : all_experiments()) CHECK(v[0].message.find(to_string(e)) != std::string::npos);
}

TEST_CASE("every problem is reported with its line, not just the first") {
  const std::string text =
      "experiment = kg_locality\n"   // 1
      "[grid]\n"                     // 2
      "extent = 2\n"                 // 3 out of range
      "lenght = 1.0\n"               // 4 unknown key
      "[solver]\n"                   // 5
      "cfl = 1.5\n"                  // 6 out of range
      "mass = heavy\n"               // 7 not a number
      "steps = 2.5\n"                // 8 not an integer
      "seeds = \n"                   // 9 empty list
      "cfl = 0.5\n"                  // 10 duplicate
      "sigma = 0.1\n"                // 11 not used by kg_locality
      "[checks]\n"                   // 12
      "inside_tol = -1\n"            // 13 non-positive tolerance
      "[plots]\n"                    // 14 unknown section
      "width = 3\n"                  // 15 (inside the unknown section)
      "[output]\n"                   // 16
      "csv = yes\n"                  // 17 not a boolean
      "this line has no equals\n"    // 18 malformed
      "Bad-Key = 1\n";               // 19 not snake case
  const auto v = issues_of(text);
  CHECK(mentions(v, 3, "extent"));
  CHECK(mentions(v, 4, "unknown key 'grid.lenght'"));
  CHECK(mentions(v, 6, "cfl must be in (0,1]"));
  CHECK(mentions(v, 7, "expected a number"));
  CHECK(mentions(v, 8, "expected an integer"));
  CHECK(mentions(v, 9, "seeds"));
  CHECK(mentions(v, 10, "duplicate key"));
  CHECK(mentions(v, 11, "not used by experiment kg_locality"));
  CHECK(mentions(v, 13, "tolerance checks.inside_tol must be positive"));
  CHECK(mentions(v, 14, "unknown section [plots]"));
  CHECK(mentions(v, 17, "expected true or false"));
  CHECK(mentions(v, 18, "expected 'key = value'"));
  CHECK(mentions(v, 19, "lower_snake_case"));
  CHECK(v.size() == 13);
  for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i - 1].line <= v[i].line);
  // The exception text carries every issue.
  try {
    parse_config(text);
  } catch (const ConfigErrors& e) {
    CHECK(std::string(e.what()).find("13 configuration error(s)") != std::string::npos);
    CHECK(std::string(e.what()).find("line 19") != std::string::npos);
  }
}

TEST_CASE("malformed corpus: each file fails with a located message") {
  struct Case {
    std::string text;
    std::size_t line;
    std::string needle;
  };
  const std::vector<Case> corpus = {
      {"[grid]\nextent = 64\n", 0, "missing required key 'experiment'"},
      {"experiment = kg_locality\nextent = 64\n", 2, "must appear inside a section"},
      {"experiment = kg_locality\n[grid\nextent = 64\n", 2, "malformed section header"},
      {"experiment = kg_locality\n[grid]\nlevels = 512, 256, 1024\n", 3, "levels"},
      {"experiment = kg_locality\n[grid]\nlevels = 512, 1024\n", 3, "levels"},
      {"experiment = kg_locality\n[region]\nradius = -0.1\n", 3, "radius must be > 0"},
      {"experiment = kg_locality\n[region]\ncenter = 0.95\n", 3, "strictly inside the grid"},
      {"experiment = kg_locality\n[solver]\nseeds = 1, 1\n", 3, "duplicates"},
      {"experiment = dirac_locality\n[grid]\nlevels = []\n", 3, "refinement levels"},
      {"experiment = nw_probe\n[solver]\ntime = 4\n", 3, "below the region radius"},
      {"experiment = gaussian_locality\n[solver]\nmass = 0\n", 3, "mass > 0"},
      {"experiment = fock_regional\n[region]\nsites = 1, 40\n", 3, "outside the lattice"},
      {"experiment = fock_regional\n[solver]\nn_max = 4\n", 3, "n_max must be in [0,3]"},
      {"experiment = em_locality\n[solver]\nsource_speed = 1.0\n", 3, "|v| < 1"},
      {"experiment = two_point_scan\n[solver]\nfalloff_r = 4, 5\n", 3, "at least three"},
      {"experiment = entropy_scan\n[solver]\nlengths = 4, 8, 200\n", 3, "below the chain extent"},
      {"experiment = nonseparability\n[grid]\nextent = 8\n", 3, "not used by experiment"},
  };
  CHECK(corpus.size() >= 10);
  for (const auto& c : corpus) {
    CAPTURE(c.text);
    CHECK(mentions(issues_of(c.text), c.line, c.needle));
  }
}

TEST_CASE("load_config reports unreadable files as config errors") {
  CHECK_THROWS_AS(load_config("/nonexistent/conelab.ini"), ConfigErrors);
  const auto dir = scratch("load");
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "ok.ini") << "experiment = nonseparability\n";
  CHECK(load_config(dir / "ok.ini").experiment == Experiment::nonseparability);
}

TEST_CASE("seed override and JSON echo") {
  auto c = parse_config("experiment = kg_locality\n[solver]\nseeds = 1, 2, 3\n");
  c.override_seed(42);
  CHECK(c.integers("solver.seeds") == std::vector<std::int64_t>{42});
  const auto j = c.to_json();
  CHECK(j["experiment"] == "kg_locality");
  CHECK(j["solver"]["seeds"][0] == 42);
  CHECK(j["grid"]["extent"] == 2048);
  auto n = parse_config("experiment = nonseparability\n");
  n.override_seed(3);  // no seeds: nothing to replace
  CHECK_FALSE(n.values.count("solver.seeds"));
}

TEST_CASE("make_check relations and NaN") {
  CHECK(make_check("a", 1.0, Relation::le, 1.0).pass);
  CHECK_FALSE(make_check("a", 1.0, Relation::lt, 1.0).pass);
  CHECK(make_check("a", 2.0, Relation::ge, 1.9).pass);
  CHECK_FALSE(make_check("a", 1.0, Relation::gt, 1.0).pass);
  CHECK(make_check("a", 0.0, Relation::eq, 0.0).pass);
  for (auto r : {Relation::le, Relation::lt, Relation::ge, Relation::gt, Relation::eq})
    CHECK_FALSE(make_check("nan", std::nan(""), r, 0.0).pass);
}

TEST_CASE("run: report contract, artifacts and determinism") {
  const auto dir = scratch("run");
  const auto cfg = parse_config("experiment = nonseparability\n");
  RunOptions opt;
  opt.out_dir = dir;
  const auto r = run(cfg, opt);
  CHECK(r.checks.size() == 3);
  CHECK(r.pass);
  CHECK(r.exit_code() == 0);
  CHECK(std::filesystem::exists(dir / "report.json"));
  std::ifstream f(dir / "report.json");
  const auto j = nlohmann::json::parse(f);
  CHECK(j["pass"] == true);
  CHECK(j["scenario"]["experiment"] == "nonseparability");
  CHECK(j["checks"].size() == 3);
  CHECK(j.contains("versions"));

  const auto kg = parse_config(
      "experiment = kg_locality\n[grid]\nextent = 256\n[region]\njitter = 0.1\n"
      "[solver]\nseeds = 1, 2, 3, 4\n");
  RunOptions a, b;
  a.out_dir = dir / "a";
  b.out_dir = dir / "b";
  a.threads = 1;
  b.threads = 4;
  const auto ra = run(kg, a), rb = run(kg, b);
  CHECK(ra.to_json(false).dump() == rb.to_json(false).dump());
  CHECK(std::filesystem::exists(dir / "a" / "divergence.csv"));
  CHECK(std::filesystem::exists(dir / "a" / "plot.py"));
}

TEST_CASE("run: failing checks and domain errors become failed reports") {
  const auto dir = scratch("fail");
  RunOptions opt;
  opt.out_dir = dir;
  // A tolerance nothing can meet.
  const auto strict = parse_config(
      "experiment = sqrt_kg_leakage\n[checks]\ncontrol_ceiling = 1e-300\n");
  const auto r = run(strict, opt);
  CHECK_FALSE(r.pass);
  CHECK(r.exit_code() == 1);
  CHECK(r.error.empty());

  // Tail protocol where no distance clears the floor: the module raises a
  // domain error, which must not escape.
  const auto domain = parse_config(
      "experiment = gaussian_locality\n[grid]\nextent = 64\n[region]\nradius = 8\nmargin = 8\n"
      "[solver]\ntime = 2\ntail_max_margin = 8\n[checks]\ntail_floor = 1e3\n");
  const auto rd = run(domain, opt);
  CHECK_FALSE(rd.pass);
  CHECK(rd.error_kind == "domain");
  CHECK(rd.exit_code() == 3);
  std::ifstream f(dir / "report.json");
  const auto j = nlohmann::json::parse(f);
  CHECK(j["error"]["kind"] == "domain");
}
