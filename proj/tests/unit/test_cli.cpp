#include "cli.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace subdiff::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "subdiff_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Outcome {
  int code;
  std::string out, err;
};

Outcome invoke(const std::string& command, std::vector<std::string> overrides, const fs::path& dir,
               std::optional<fs::path> config_file = std::nullopt) {
  std::ostringstream out, err;
  overrides.push_back("run.run_id=r");
  Invocation inv{command, std::move(config_file), std::move(overrides), dir, false};
  const int code = run(inv, out, err);
  return {code, out.str(), err.str()};
}

const std::vector<std::string> small{"model.alpha=0.5",
                                     "model.steps=8",
                                     "problem.mesh_size=20",
                                     "inverse.reference_mesh_size=80",
                                     "inverse.reference_steps=40",
                                     "inverse.max_iterations=20"};

std::vector<std::string> with(std::vector<std::string> base, const std::vector<std::string>& extra) {
  base.insert(base.end(), extra.begin(), extra.end());
  return base;
}

}  // namespace

TEST_CASE("config grammar") {
  Config c = Config::parse("[model]\nalpha = 0.25\n; comment\n[inverse]\neps = 1e-2, 5e-3\n");
  CHECK(c.require_double("model.alpha") == 0.25);
  CHECK(c.get_list("inverse.eps", {}) == std::vector<double>{1e-2, 5e-3});
  CHECK(c.get_double("model.T", 3.0) == 3.0);
  CHECK(c.has("model.T"));
  CHECK(c.get_bool("run.verbose", false) == false);
  c.set("model.T=7");
  CHECK(c.get_double("model.T", 3.0) == 7.0);
  CHECK_THROWS_AS(c.set("no_equals_sign"), ConfigError);
  c.set("model.steps=abc");
  CHECK_THROWS_AS(c.get_int("model.steps", 1), ConfigError);
  CHECK_THROWS_AS(c.require_string("problem.q"), ConfigError);
  CHECK_THROWS_AS(Config::parse("[model\nalpha=1\n"), ConfigError);
}

TEST_CASE("effective config round trips through INI") {
  Config c = Config::parse("[model]\nalpha = 0.5\n");
  c.get_double("model.T", 1.0);
  c.get_list("bench.alphas", {0.25, 0.5});
  Config back = Config::parse(c.to_ini());
  CHECK(back.require_double("model.alpha") == 0.5);
  CHECK(back.require_double("model.T") == 1.0);
  CHECK(back.get_list("bench.alphas", {}) == std::vector<double>{0.25, 0.5});
}

TEST_CASE("unknown keys are rejected") {
  CHECK_THROWS_AS(Config::parse("[modle]\nalpha=1\n").check_known_keys(), ConfigError);
  CHECK_THROWS_AS(Config::parse("[model]\nalpah=1\n").check_known_keys(), ConfigError);
  CHECK_NOTHROW(Config::parse("[model]\nalpha=1\n").check_known_keys());
  const auto o = invoke("forward", {"model.alpha=0.5", "model.bogus=1"}, scratch("unknown"));
  CHECK(o.code == exit_config);
}

TEST_CASE("missing alpha is a configuration error") {
  const auto o = invoke("forward", {}, scratch("missing"));
  CHECK(o.code == exit_config);
  CHECK(o.err.find("model.alpha") != std::string::npos);
}

TEST_CASE("invalid values are configuration errors") {
  const fs::path dir = scratch("invalid");
  CHECK(invoke("invert", with(small, {"inverse.gamma=-1"}), dir).code == exit_config);
  CHECK(invoke("forward", {"model.alpha=1.5"}, dir).code == exit_config);
  CHECK(invoke("forward", {"model.alpha=0.5", "model.solver=lu"}, dir).code == exit_config);
  CHECK(invoke("forward", {"model.alpha=0.5", "problem.name=custom", "problem.q=1"}, dir).code == exit_config);
  CHECK(invoke("forward", {"model.alpha=0.5", "problem.q=1 +"}, dir).code == exit_config);
  CHECK(invoke("launch", {"model.alpha=0.5"}, dir).code == exit_config);
  // Validation happens before any output is written.
  CHECK_FALSE(fs::exists(dir / "r" / "config.ini"));
}

TEST_CASE("forward run and config echo") {
  const fs::path dir = scratch("forward");
  const auto o = invoke("forward", {"model.alpha=0.5", "problem.mesh_size=40"}, dir);
  REQUIRE(o.code == exit_ok);
  CHECK(o.out.find("||U^N||_L2 = ") != std::string::npos);
  CHECK(fs::exists(dir / "r" / "mesh.txt"));
  const std::string terminal = slurp(dir / "r" / "terminal.field");
  Config echo = Config::load(dir / "r" / "config.ini");
  CHECK(echo.require_double("model.T") == 1.0);
  CHECK(echo.require_double("model.steps") == 30.0);
  CHECK(echo.require_string("problem.name") == "example-4.1");

  const fs::path again = scratch("forward_again");
  const auto o2 = invoke("forward", {}, again, dir / "r" / "config.ini");
  REQUIRE(o2.code == exit_ok);
  CHECK(o2.out == o.out);
  CHECK(slurp(again / "r" / "terminal.field") == terminal);
}

TEST_CASE("zero data forward run") {
  const auto o = invoke("forward",
                        {"model.alpha=0.5", "problem.name=custom", "problem.dim=1", "problem.q=1", "problem.u0=0",
                         "problem.f=0", "problem.mesh_size=10"},
                        scratch("zero"));
  REQUIRE(o.code == exit_ok);
  CHECK(o.out.find("||U^N||_L2 = 0\n") != std::string::npos);
}

TEST_CASE("overrides take precedence over the config file") {
  const fs::path dir = scratch("precedence");
  std::ofstream(dir / "in.ini") << "[model]\nalpha = 0.5\nT = 2\n";
  const auto o = invoke("forward", {"model.T=3", "problem.mesh_size=10"}, dir, dir / "in.ini");
  REQUIRE(o.code == exit_ok);
  CHECK(Config::load(dir / "r" / "config.ini").require_double("model.T") == 3.0);
}

TEST_CASE("output directory from the environment") {
  const fs::path dir = scratch("env");
  ::setenv("SUBDIFF_OUTPUT_DIR", dir.c_str(), 1);
  std::ostringstream out, err;
  const int code = run(Invocation{"forward", std::nullopt, {"model.alpha=0.5", "problem.mesh_size=8", "run.run_id=e"},
                                  std::nullopt, false},
                       out, err);
  ::unsetenv("SUBDIFF_OUTPUT_DIR");
  CHECK(code == exit_ok);
  CHECK(fs::exists(dir / "e" / "terminal.field"));
}

TEST_CASE("inversion run") {
  const fs::path dir = scratch("invert");
  const auto o = invoke("invert", small, dir);
  REQUIRE(o.code == exit_ok);
  for (const char* f : {"history.csv", "q_star.field", "observation.field", "mesh.txt", "summary.json"})
    CHECK(fs::exists(dir / "r" / f));
  CHECK(o.out.find("e_q = ") != std::string::npos);

  SUBCASE("observation from a file") {
    const fs::path dir2 = scratch("invert_file");
    const auto o2 =
        invoke("invert", with(small, {"inverse.observation=" + (dir / "r" / "observation.field").string()}), dir2);
    CHECK(o2.code == exit_ok);
  }
}

TEST_CASE("gradient check passes") {
  const fs::path dir = scratch("gradcheck");
  const auto o = invoke("gradcheck", small, dir);
  CHECK(o.code == exit_ok);
  CHECK(fs::exists(dir / "r" / "gradcheck.csv"));
}

TEST_CASE("bench report shape") {
  const fs::path dir = scratch("bench");
  const auto o = invoke("bench", small, dir);
  REQUIRE(o.code == exit_ok);
  const std::string csv = slurp(dir / "r" / "report.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 3 * 4);
  CHECK(fs::exists(dir / "r" / "report.json"));
}

TEST_CASE("verify run") {
  const fs::path dir = scratch("verify");
  const auto o = invoke("verify",
                        {"model.alpha=0.5", "problem.mesh_size=40", "verify.decay_steps=100", "verify.perturbations=2"},
                        dir);
  CHECK(o.code == exit_ok);
  for (const char* f : {"decay.csv", "positivity.field", "stability.csv"}) CHECK(fs::exists(dir / "r" / f));
}

TEST_CASE("iterative solver option") {
  const auto o = invoke("forward", {"model.alpha=0.5", "model.solver=pcg", "problem.mesh_size=10"}, scratch("pcg"));
  CHECK(o.code == exit_ok);
}
