#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "levymin/montecarlo.hpp"
#include "levymin/solver.hpp"
#include "levymin/verifier.hpp"

namespace levymin {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

struct CheckFlags {
  bool existence = true;
  bool fundamental = true;
  bool support = true;
  bool minimality = false;
  bool scale = true;
  bool time = true;
  bool montecarlo = true;
};

struct RunConfig {
  LevyTriplet model;
  DivergenceSpec divergence{{{1.0, -1.0}}};
  SolverConfig solver;
  SimulationConfig simulation;
  CheckFlags checks;
  std::uint64_t config_hash = 0;  // FNV-1a over the config bytes
};

// Parses the JSON run configuration. Bit-exact decimal parsing via strtod;
// NaN/Inf (including overflowing literals) are rejected. Throws ParseError
// with field diagnostics.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

std::uint64_t fnv1a_hash(const std::string& bytes);

// Built-in worked example: 2-d Brownian + single-atom Poisson model with
// singular covariance, under f(x) = x^2/2 + x ln x - x, whose Girsanov
// parameters have closed forms.
struct Example61 {
  LevyTriplet model;
  DivergenceSpec spec;
  double beta1, beta2, y_atom, v1;  // closed-form values
};
Example61 builtin_example_6_1();

// Subcommand drivers; reports go to `out`. Exit codes:
//   0 solved / all checks pass
//   1 configuration parse error
//   2 no solution (Newton failed to meet tolerance)
//   3 existence failure (cdsec1..cdsec3 / integrability)
//   4 a verification check failed
//   5 internal error
int cmd_solve(const RunConfig& cfg, std::ostream& out, bool json);
int cmd_verify(const RunConfig& cfg, std::ostream& out, bool json);
int cmd_example_6_1(std::ostream& out);
int cmd_simulate(const RunConfig& cfg, std::ostream& out,
                 const std::optional<std::string>& dump_path, bool json);
int cmd_divergence(const RunConfig& cfg, std::ostream& out, bool json);

// Full CLI dispatcher (the binary's main delegates here).
int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);

}  // namespace levymin
