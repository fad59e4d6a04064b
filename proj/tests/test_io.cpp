#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "levymin/io.hpp"

using namespace levymin;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"levymin"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code =
      run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string write_temp(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() /
                    ("levymin_test_" + name);
  std::ofstream f(path);
  f << text;
  return path.string();
}

const char* kDiffusionConfig = R"({
  "schema_version": 1,
  "model": {"dim": 1, "b": [0.0], "c": [[1.0]],
            "nu": {"kind": "atomic", "atoms": []}, "trunc": "canonical"},
  "divergence": {"name": "entropy"},
  "simulation": {"T": 1.0, "n_paths": 20000, "seed": 7}
})";

// b + Y - ln 2 = 0 with b = ln 2 forces Y to 0
const char* kExistenceConfig = R"({
  "model": {"dim": 1, "b": [0.6931471805599453], "c": [[0.0]],
            "nu": {"kind": "atomic",
                   "atoms": [{"y": [0.6931471805599453], "mass": 1.0}]}},
  "divergence": {"name": "entropy"}
})";

const char* kExample61Config = R"({
  "model": {"dim": 2,
            "b": [0.6931471805599453, 0.0986122886681098],
            "c": [[1.0, 1.0], [1.0, 1.0]],
            "nu": {"kind": "atomic",
                   "atoms": [{"y": [0.6931471805599453, 1.0986122886681098],
                              "mass": 1.0}]}},
  "divergence": {"terms": [{"gamma": 0.0, "weight": 0.5},
                            {"gamma": -1.0, "weight": 1.0}],
                 "linear": -1.0, "constant": 0.0},
  "simulation": {"T": 1.0, "n_paths": 20000, "seed": 11},
  "checks": {"minimality": false}
})";

}  // namespace

TEST_CASE("parse_config: defaults and field diagnostics") {
  const auto cfg = parse_config_text(kDiffusionConfig);
  CHECK(cfg.model.dim == 1);
  CHECK(cfg.solver.tol == 1e-10);
  CHECK(cfg.solver.max_iter == 100);
  CHECK(cfg.solver.max_restarts == 16);
  CHECK(cfg.solver.fd_step == 1e-7);
  CHECK(cfg.simulation.n_paths == 20000);
  CHECK(cfg.checks.minimality == false);
  CHECK(cfg.config_hash == fnv1a_hash(kDiffusionConfig));

  CHECK_THROWS_AS(parse_config_text("{"), ParseError);
  CHECK_THROWS_AS(parse_config_text(R"({"divergence":{"name":"entropy"}})"),
                  ParseError);
  // wrong matrix row length
  CHECK_THROWS_WITH_AS(
      parse_config_text(
          R"({"model":{"dim":2,"b":[0,0],"c":[[1,0],[0]]},
              "divergence":{"name":"entropy"}})"),
      doctest::Contains("model.c[1]"), ParseError);
}

TEST_CASE("parse_config: NaN and Inf are rejected") {
  // 1e999 overflows to Inf under strtod
  CHECK_THROWS_AS(parse_config_text(
                      R"({"model":{"dim":1,"b":[1e999],"c":[[1.0]]},
                          "divergence":{"name":"entropy"}})"),
                  ParseError);
  // literal NaN is not valid JSON at all
  CHECK_THROWS_AS(parse_config_text(
                      R"({"model":{"dim":1,"b":[NaN],"c":[[1.0]]},
                          "divergence":{"name":"entropy"}})"),
                  ParseError);
}

TEST_CASE("parse_config: radial density and shortcuts") {
  const auto cfg = parse_config_text(R"({
    "model": {"dim": 1, "b": [0.0], "c": [[1.0]],
              "nu": {"kind": "radial", "form": "exp", "rate": 2.0,
                     "r_min": 1e-6, "r_max": 30.0, "panels": 64}},
    "divergence": {"name": "power", "gamma": -3.0}
  })");
  CHECK(std::holds_alternative<RadialDensity>(cfg.model.nu));
  const auto pf = cfg.divergence.power_family();
  REQUIRE(pf.has_value());
  CHECK(pf->gamma == -3.0);
}

TEST_CASE("cmd_solve: diffusion config solves with exit 0") {
  const auto path = write_temp("bs.cfg", kDiffusionConfig);
  const auto res = run({"solve", "--config", path});
  CHECK(res.code == 0);
  CHECK(res.out.find("-0.5") != std::string::npos);
  CHECK(res.out.find("config_hash") != std::string::npos);
  CHECK(res.out.find("seed") != std::string::npos);
  CHECK(res.out.find("version") != std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("cmd_solve: existence violation exits 3") {
  const auto path = write_temp("exist.cfg", kExistenceConfig);
  const auto res = run({"solve", "--config", path});
  CHECK(res.code == 3);
  CHECK(res.out.find("existence.y_positive = false") != std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("cmd_solve: malformed config exits 1") {
  const auto path = write_temp("bad.cfg", "{\"model\": [1,2,");
  const auto res = run({"solve", "--config", path});
  CHECK(res.code == 1);
  std::remove(path.c_str());
}

TEST_CASE("cmd_verify: 6.1 config passes every enabled check") {
  const auto path = write_temp("ex61.cfg", kExample61Config);
  const auto res = run({"verify", "--config", path});
  CHECK(res.code == 0);
  CHECK(res.out.find("all_checks_pass = true") != std::string::npos);
  CHECK(res.out.find("whole_positive_line") != std::string::npos);

  // byte-identical rerun
  const auto again = run({"verify", "--config", path});
  CHECK(again.code == 0);
  CHECK(again.out == res.out);
  std::remove(path.c_str());
}

TEST_CASE("cmd_verify: forcing V to zero fails the fundamental check") {
  std::string text(kExample61Config);
  const auto pos = text.find("\"simulation\"");
  text.insert(pos, "\"solver\": {\"force_v_zero\": true},\n  ");
  const auto path = write_temp("ex61_v0.cfg", text);
  const auto res = run({"verify", "--config", path});
  CHECK(res.code == 4);
  CHECK(res.out.find("checks.fundamental.pass = false") !=
        std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("cmd_verify: pure diffusion reports whole positive line") {
  const auto path = write_temp("bs2.cfg", kDiffusionConfig);
  const auto res = run({"verify", "--config", path});
  CHECK(res.code == 0);
  CHECK(res.out.find("whole_positive_line") != std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("cmd example-6-1: golden values and consistency line") {
  const auto res = run({"example-6-1"});
  CHECK(res.code == 0);
  CHECK(res.out.find("pass = true") != std::string::npos);
  CHECK(res.out.find("consistency_beta1_plus_2beta2") != std::string::npos);
}

TEST_CASE("cli: seed and path overrides, json emission") {
  const auto path = write_temp("bs3.cfg", kDiffusionConfig);
  const auto res =
      run({"solve", "--config", path, "--seed", "123", "--paths", "5000",
           "--json"});
  CHECK(res.code == 0);
  CHECK(res.out.find("\"seed\": 123") != std::string::npos);
  CHECK(res.out.front() == '{');
  std::remove(path.c_str());
}

TEST_CASE("cli: simulate writes a path dump") {
  const auto cfg = write_temp("sim.cfg", kDiffusionConfig);
  const auto dump = std::filesystem::temp_directory_path() /
                    "levymin_test_dump.txt";
  const auto res =
      run({"simulate", "--config", cfg, "--paths", "100", "--out",
           dump.string()});
  CHECK(res.code == 0);
  std::ifstream in(dump);
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);
  CHECK(line == "# levymin path dump");
  std::getline(in, line);
  CHECK(line.find("philox4x32-10") != std::string::npos);
  int rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') ++rows;
  }
  CHECK(rows == 100);
  std::remove(cfg.c_str());
  std::filesystem::remove(dump);
}

TEST_CASE("cli: divergence subcommand agrees with the closed form") {
  const auto path = write_temp("div.cfg", kDiffusionConfig);
  const auto res = run({"divergence", "--config", path});
  CHECK(res.code == 0);
  CHECK(res.out.find("divergence.agree_within_4se = true") != std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("cli: unknown subcommand and missing config") {
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"solve"}).code == 1);
  CHECK(run({"solve", "--config", "/nonexistent/x.cfg"}).code == 1);
}
