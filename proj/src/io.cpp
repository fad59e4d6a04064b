#include "levymin/io.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "levymin/rng.hpp"

namespace levymin {

using ordered_json = nlohmann::ordered_json;

namespace {

double finite_number(const ordered_json& j, const std::string& field) {
  if (!j.is_number()) {
    throw ParseError(field + ": expected a number");
  }
  const double v = j.get<double>();
  if (!std::isfinite(v)) {
    throw ParseError(field + ": NaN/Inf values are rejected");
  }
  return v;
}

Eigen::VectorXd parse_vector(const ordered_json& j, const std::string& field,
                             int expect) {
  if (!j.is_array() || static_cast<int>(j.size()) != expect) {
    throw ParseError(field + ": expected an array of length " +
                     std::to_string(expect));
  }
  Eigen::VectorXd v(expect);
  for (int i = 0; i < expect; ++i) {
    v(i) = finite_number(j[i], field + "[" + std::to_string(i) + "]");
  }
  return v;
}

Eigen::MatrixXd parse_matrix(const ordered_json& j, const std::string& field,
                             int expect) {
  if (!j.is_array() || static_cast<int>(j.size()) != expect) {
    throw ParseError(field + ": expected " + std::to_string(expect) +
                     " rows");
  }
  Eigen::MatrixXd m(expect, expect);
  for (int i = 0; i < expect; ++i) {
    m.row(i) = parse_vector(j[i], field + "[" + std::to_string(i) + "]",
                            expect)
                   .transpose();
  }
  return m;
}

LevyTriplet parse_model(const ordered_json& j) {
  LevyTriplet t;
  if (!j.contains("dim")) throw ParseError("model.dim: required");
  t.dim = j.at("dim").get<int>();
  if (t.dim < 1) throw ParseError("model.dim: must be >= 1");
  t.b = parse_vector(j.at("b"), "model.b", t.dim);
  t.c = parse_matrix(j.at("c"), "model.c", t.dim);

  const std::string trunc = j.value("trunc", std::string("canonical"));
  if (trunc == "canonical") {
    t.trunc = Truncation::Canonical;
  } else if (trunc == "zero") {
    t.trunc = Truncation::Zero;
  } else {
    throw ParseError("model.trunc: expected \"canonical\" or \"zero\"");
  }

  if (!j.contains("nu")) {
    t.nu = FiniteAtomic{};
    return t;
  }
  const auto& nu = j.at("nu");
  const std::string kind = nu.value("kind", std::string("atomic"));
  if (kind == "atomic") {
    FiniteAtomic fa;
    if (nu.contains("atoms")) {
      for (std::size_t k = 0; k < nu.at("atoms").size(); ++k) {
        const auto& aj = nu.at("atoms")[k];
        const std::string base = "model.nu.atoms[" + std::to_string(k) + "]";
        Atom atom;
        atom.location = parse_vector(aj.at("y"), base + ".y", t.dim);
        atom.mass = finite_number(aj.at("mass"), base + ".mass");
        fa.atoms.push_back(std::move(atom));
      }
    }
    t.nu = std::move(fa);
  } else if (kind == "radial") {
    if (t.dim != 1) {
      throw ParseError("model.nu: radial densities are supported for dim 1");
    }
    RadialDensity rd;
    const std::string form = nu.value("form", std::string("exp"));
    const double scale = nu.contains("scale")
                             ? finite_number(nu.at("scale"), "model.nu.scale")
                             : 1.0;
    const double rate = nu.contains("rate")
                            ? finite_number(nu.at("rate"), "model.nu.rate")
                            : 1.0;
    if (form == "exp") {
      rd.density = [scale, rate](double y) {
        return scale * std::exp(-rate * std::abs(y));
      };
    } else if (form == "power_exp") {
      const double p = nu.contains("power")
                           ? finite_number(nu.at("power"), "model.nu.power")
                           : 1.0;
      rd.density = [scale, rate, p](double y) {
        return scale * std::pow(std::abs(y), -p) *
               std::exp(-rate * std::abs(y));
      };
    } else {
      throw ParseError("model.nu.form: expected \"exp\" or \"power_exp\"");
    }
    if (nu.contains("r_min")) {
      rd.r_min = finite_number(nu.at("r_min"), "model.nu.r_min");
    }
    if (nu.contains("r_max")) {
      rd.r_max = finite_number(nu.at("r_max"), "model.nu.r_max");
    }
    if (nu.contains("panels")) rd.panels = nu.at("panels").get<int>();
    t.nu = std::move(rd);
  } else {
    throw ParseError("model.nu.kind: expected \"atomic\" or \"radial\"");
  }
  return t;
}

DivergenceSpec parse_divergence(const ordered_json& j) {
  if (j.contains("name")) {
    const std::string name = j.at("name").get<std::string>();
    if (name == "entropy") return DivergenceSpec::entropy();
    if (name == "reverse_entropy") return DivergenceSpec::reverse_entropy();
    if (name == "quadratic") return DivergenceSpec::quadratic();
    if (name == "power") {
      return DivergenceSpec::power(
          finite_number(j.at("gamma"), "divergence.gamma"));
    }
    throw ParseError("divergence.name: unknown shortcut \"" + name + "\"");
  }
  if (!j.contains("terms")) {
    throw ParseError("divergence: \"name\" or \"terms\" required");
  }
  std::vector<DivergenceTerm> terms;
  for (std::size_t k = 0; k < j.at("terms").size(); ++k) {
    const auto& tj = j.at("terms")[k];
    const std::string base = "divergence.terms[" + std::to_string(k) + "]";
    terms.push_back({finite_number(tj.at("weight"), base + ".weight"),
                     finite_number(tj.at("gamma"), base + ".gamma")});
  }
  const double linear =
      j.contains("linear") ? finite_number(j.at("linear"), "divergence.linear")
                           : 0.0;
  const double constant = j.contains("constant")
                              ? finite_number(j.at("constant"),
                                              "divergence.constant")
                              : 0.0;
  try {
    return DivergenceSpec(std::move(terms), linear, constant);
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("divergence: ") + e.what());
  }
}

ordered_json vec_json(const Eigen::VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

void render_text(const ordered_json& j, const std::string& prefix,
                 std::ostream& out) {
  for (const auto& [key, value] : j.items()) {
    if (value.is_object()) {
      render_text(value, prefix + key + ".", out);
    } else {
      out << prefix << key << " = " << value.dump() << "\n";
    }
  }
}

void emit(const ordered_json& report, std::ostream& out, bool json) {
  if (json) {
    out << report.dump(2) << "\n";
  } else {
    render_text(report, "", out);
  }
}

ordered_json report_header(const RunConfig& cfg) {
  ordered_json h;
  h["schema_version"] = kSchemaVersion;
  h["tool"] = "levymin";
  h["version"] = kVersion;
  std::ostringstream hash;
  hash << "0x" << std::hex << cfg.config_hash;
  h["config_hash"] = hash.str();
  h["seed"] = cfg.simulation.seed;
  h["generator"] = kGeneratorName;
  return h;
}

ordered_json existence_json(const ExistenceReport& e) {
  ordered_json j;
  j["y_positive"] = e.y_positive;
  j["exp_integrable"] = e.exp_integrable;
  j["hellinger_finite"] = e.hellinger_finite;
  j["predictable_integrable"] = e.predictable_integrable;
  j["overall"] = e.overall;
  j["min_y"] = e.min_y;
  j["cdsec2_value"] = e.cdsec2_value;
  j["hellinger_integral"] = e.hellinger_integral;
  j["predictable_value"] = e.predictable_value;
  return j;
}

ordered_json solution_json(const RunConfig& cfg,
                           const MinimalMeasureSolution& sol) {
  ordered_json j;
  j["status"] = sol.status;
  j["beta"] = vec_json(sol.params.beta);
  j["theta"] = vec_json(sol.params.theta);
  j["V"] = vec_json(sol.params.V);
  ordered_json ys = ordered_json::array();
  if (const auto* fa = std::get_if<FiniteAtomic>(&cfg.model.nu)) {
    for (std::size_t k = 0; k < fa->atoms.size(); ++k) {
      ys.push_back(sol.params.y_at(k, fa->atoms[k].location));
    }
  }
  j["y_at_atoms"] = ys;
  j["drift_residual_norm"] = sol.drift_residual_norm;
  j["existence"] = existence_json(sol.existence);
  j["hellinger_rate"] = sol.hellinger_rate;
  j["divergence_per_T"] = sol.divergence_per_T;
  return j;
}

// shared solve step: returns exit code and fills `sol` on success
int solve_step(const RunConfig& cfg, ordered_json& report,
               std::optional<MinimalMeasureSolution>& sol) {
  const ValidationReport vr = validate_triplet(cfg.model);
  ordered_json vj = ordered_json::array();
  for (const auto& c : vr.checks) {
    ordered_json e;
    e["name"] = c.name;
    e["pass"] = c.pass;
    e["measured"] = c.measured;
    if (!c.detail.empty()) e["detail"] = c.detail;
    vj.push_back(e);
  }
  report["model_validation"] = ordered_json{{"overall", vr.overall},
                                            {"checks", vj}};
  if (!vr.overall) {
    report["status"] = "invalid_model";
    return 1;
  }
  try {
    sol = solve(cfg.model, cfg.divergence, cfg.solver);
  } catch (const NoSolution& e) {
    report["status"] = "no_solution";
    report["best_residual"] = e.best_residual;
    report["message"] = e.what();
    return 2;
  } catch (const ExistenceViolation& e) {
    report["status"] = "existence_violation";
    report["condition"] = e.condition;
    report["message"] = e.what();
    return 3;
  }
  report["solution"] = solution_json(cfg, *sol);
  return sol->existence.overall ? 0 : 3;
}

}  // namespace

std::uint64_t fnv1a_hash(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

RunConfig parse_config_text(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  try {
    RunConfig cfg;
    const int schema = j.value("schema_version", kSchemaVersion);
    if (schema != kSchemaVersion) {
      throw ParseError("schema_version: expected " +
                       std::to_string(kSchemaVersion));
    }
    if (!j.contains("model")) throw ParseError("model: required");
    cfg.model = parse_model(j.at("model"));
    if (!j.contains("divergence")) throw ParseError("divergence: required");
    cfg.divergence = parse_divergence(j.at("divergence"));

    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      cfg.solver.tol = s.contains("tol")
                           ? finite_number(s.at("tol"), "solver.tol")
                           : cfg.solver.tol;
      if (s.contains("max_iter")) cfg.solver.max_iter = s.at("max_iter").get<int>();
      if (s.contains("max_restarts")) {
        cfg.solver.max_restarts = s.at("max_restarts").get<int>();
      }
      if (s.contains("fd_step")) {
        cfg.solver.fd_step = finite_number(s.at("fd_step"), "solver.fd_step");
      }
      if (s.contains("force_v_zero")) {
        cfg.solver.force_v_zero = s.at("force_v_zero").get<bool>();
      }
    }
    if (j.contains("simulation")) {
      const auto& s = j.at("simulation");
      if (s.contains("T")) {
        cfg.simulation.T = finite_number(s.at("T"), "simulation.T");
      }
      if (s.contains("n_paths")) {
        cfg.simulation.n_paths = s.at("n_paths").get<std::uint64_t>();
      }
      if (s.contains("seed")) {
        cfg.simulation.seed = s.at("seed").get<std::uint64_t>();
      }
      if (s.contains("brownian_steps")) {
        cfg.simulation.brownian_steps = s.at("brownian_steps").get<int>();
      }
    }
    if (cfg.simulation.n_paths < 2) cfg.simulation.n_paths = 100000;
    if (j.contains("checks")) {
      const auto& c = j.at("checks");
      cfg.checks.existence = c.value("existence", cfg.checks.existence);
      cfg.checks.fundamental = c.value("fundamental", cfg.checks.fundamental);
      cfg.checks.support = c.value("support", cfg.checks.support);
      cfg.checks.minimality = c.value("minimality", cfg.checks.minimality);
      cfg.checks.scale = c.value("scale", cfg.checks.scale);
      cfg.checks.time = c.value("time", cfg.checks.time);
      cfg.checks.montecarlo = c.value("montecarlo", cfg.checks.montecarlo);
    }
    cfg.config_hash = fnv1a_hash(text);
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

Example61 builtin_example_6_1() {
  const double ln2 = std::log(2.0), ln3 = std::log(3.0);
  LevyTriplet t;
  t.dim = 2;
  t.b = Eigen::Vector2d(ln2, ln3 - 1.0);
  t.c = Eigen::Matrix2d{{1.0, 1.0}, {1.0, 1.0}};
  FiniteAtomic fa;
  fa.atoms.push_back({Eigen::Vector2d(ln2, ln3), 1.0});
  t.nu = std::move(fa);
  t.trunc = Truncation::Canonical;

  DivergenceSpec spec({{0.5, 0.0}, {1.0, -1.0}}, -1.0, 0.0);

  Example61 ex{std::move(t), std::move(spec), 0, 0, 0, 0};
  ex.beta1 = 3.0 * ln3 - 5.0 * ln2 - 3.0;
  ex.beta2 = 1.5 + 3.0 * ln2 - 2.0 * ln3;
  ex.y_atom = 1.0 - std::log(1.5);
  ex.v1 = -std::log(1.0 - std::log(1.5)) - std::log(1.5);
  return ex;
}

int cmd_solve(const RunConfig& cfg, std::ostream& out, bool json) {
  ordered_json report = report_header(cfg);
  std::optional<MinimalMeasureSolution> sol;
  const int code = solve_step(cfg, report, sol);
  if (sol) {
    try {
      report["divergence_at_T"] = ordered_json{
          {"T", cfg.simulation.T},
          {"value", divergence_closed_form(cfg.model, cfg.divergence,
                                           sol->params, cfg.simulation.T)}};
    } catch (const OverflowError& e) {
      report["divergence_at_T"] =
          ordered_json{{"T", cfg.simulation.T}, {"overflow_exponent", e.exponent}};
    }
  }
  emit(report, out, json);
  return code;
}

int cmd_verify(const RunConfig& cfg, std::ostream& out, bool json) {
  ordered_json report = report_header(cfg);
  std::optional<MinimalMeasureSolution> sol;
  const int solve_code = solve_step(cfg, report, sol);
  if (!sol) {
    emit(report, out, json);
    return solve_code;
  }

  bool all_pass = true;
  ordered_json checks;

  if (cfg.checks.existence) {
    checks["existence"] =
        ordered_json{{"pass", sol->existence.overall}};
    all_pass = all_pass && sol->existence.overall;
  }

  if (cfg.checks.fundamental) {
    ordered_json cj;
    const auto* fa = std::get_if<FiniteAtomic>(&cfg.model.nu);
    if (fa == nullptr || fa->atoms.empty()) {
      cj["pass"] = true;
      cj["note"] = "no enumerable atoms; nothing to test";
    } else {
      const double grid[] = {0.5, 1.0, 2.0, 5.0};
      const auto rep = fundamental_residual(cfg.divergence, sol->params, grid,
                                            cfg.model.nu);
      cj["max_residual_equ"] = rep.max_residual_equ;
      cj["rank1_defect"] = rep.rank1_defect;
      cj["tolerance"] = 1e-9;
      cj["pass"] =
          rep.max_residual_equ < 1e-9 && rep.rank1_defect < 1e-9;
    }
    checks["fundamental"] = cj;
    all_pass = all_pass && cj["pass"].get<bool>();
  }

  if (cfg.checks.support) {
    ordered_json cj;
    try {
      switch (classify_support(cfg.model, sol->params)) {
        case SupportClass::WholePositiveLine:
          cj["class"] = "whole_positive_line";
          break;
        case SupportClass::RayUpward:
          cj["class"] = "ray_upward";
          break;
        case SupportClass::RayDownward:
          cj["class"] = "ray_downward";
          break;
      }
      cj["pass"] = true;
    } catch (const DomainError& e) {
      cj["class"] = "degenerate";
      cj["note"] = e.what();
      cj["pass"] = true;
    }
    checks["support"] = cj;
  }

  if (cfg.checks.scale) {
    const double scales[] = {0.5, 2.0, std::exp(1.0)};
    const auto sc = scale_invariance_check(cfg.divergence, scales);
    ordered_json cj;
    cj["applicable"] = sc.applicable;
    if (sc.applicable) {
      ordered_json entries = ordered_json::array();
      for (const auto& e : sc.entries) {
        entries.push_back(ordered_json{{"scale", e.scale},
                                       {"max_rel_err", e.max_rel_err},
                                       {"pass", e.pass}});
      }
      cj["entries"] = entries;
    }
    cj["pass"] = sc.all_pass;
    checks["scale"] = cj;
    all_pass = all_pass && sc.all_pass;
  }

  if (cfg.checks.time) {
    const double horizons[] = {1.0, 2.0, 5.0};
    const auto tc =
        time_invariance_check(cfg.model, cfg.divergence, horizons, cfg.solver);
    checks["time"] = ordered_json{
        {"max_param_deviation", tc.max_param_deviation},
        {"max_scaling_err", tc.max_scaling_err},
        {"pass", tc.pass}};
    all_pass = all_pass && tc.pass;
  }

  if (cfg.checks.montecarlo) {
    ordered_json cj;
    PathBatch batch = simulate(cfg.model, cfg.simulation);
    density_terminal(batch, cfg.model, sol->params);
    const std::vector<double> z(batch.z_terminal.data(),
                                batch.z_terminal.data() +
                                    batch.z_terminal.size());
    const Estimate ez = estimate(z);
    const bool density_ok = std::abs(ez.mean - 1.0) <= 4.0 * ez.se;
    cj["density_mean"] = ez.mean;
    cj["density_se"] = ez.se;
    cj["density_pass"] = density_ok;

    const auto mart = mc_martingale_check(batch, cfg.model, sol->params);
    ordered_json assets = ordered_json::array();
    for (const auto& a : mart.assets) {
      assets.push_back(ordered_json{{"mean", a.mean},
                                    {"se", a.se},
                                    {"flagged", a.flagged},
                                    {"pass", a.pass}});
    }
    cj["martingale"] = assets;
    cj["martingale_pass"] = mart.all_pass;

    bool div_ok = true;
    const auto mc =
        mc_divergence(batch, cfg.model, cfg.divergence, sol->params);
    cj["divergence_mc_mean"] = mc.mean;
    cj["divergence_mc_se"] = mc.se;
    try {
      const double closed = divergence_closed_form(
          cfg.model, cfg.divergence, sol->params, cfg.simulation.T);
      cj["divergence_closed_form"] = closed;
      div_ok = std::abs(closed - mc.mean) <= 4.0 * mc.se;
    } catch (const OverflowError& e) {
      cj["divergence_overflow_exponent"] = e.exponent;
      div_ok = false;
    }
    cj["divergence_pass"] = div_ok;
    const bool pass = density_ok && mart.all_pass && div_ok;
    cj["pass"] = pass;
    checks["montecarlo"] = cj;
    all_pass = all_pass && pass;
  }

  if (cfg.checks.minimality) {
    ordered_json cj;
    const double steps[] = {-0.4, -0.3, -0.2, -0.1, 0.1, 0.2, 0.3, 0.4};
    const auto alts =
        martingale_alternatives(cfg.model, sol->params, steps);
    if (alts.empty()) {
      cj["pass"] = true;
      cj["note"] = "no feasible direction on the martingale manifold";
    } else {
      const auto rep = minimality_certificate(cfg.model, cfg.divergence, *sol,
                                              alts, cfg.simulation);
      ordered_json entries = ordered_json::array();
      for (const auto& e : rep.entries) {
        entries.push_back(ordered_json{{"difference", e.difference},
                                       {"se", e.se},
                                       {"martingale_ok", e.martingale_ok},
                                       {"pass", e.pass}});
      }
      cj["solution_value"] = rep.solution_value;
      cj["entries"] = entries;
      cj["pass"] = rep.certified;
    }
    checks["minimality"] = cj;
    all_pass = all_pass && cj["pass"].get<bool>();
  }

  report["checks"] = checks;
  report["all_checks_pass"] = all_pass;
  emit(report, out, json);
  if (solve_code != 0) return solve_code;
  return all_pass ? 0 : 4;
}

int cmd_example_6_1(std::ostream& out) {
  const Example61 ex = builtin_example_6_1();
  const MinimalMeasureSolution sol = solve(ex.model, ex.spec);

  const double b1 = sol.params.beta(0), b2 = sol.params.beta(1);
  const auto* fa = std::get_if<FiniteAtomic>(&ex.model.nu);
  const double ya = sol.params.y_at(0, fa->atoms[0].location);
  const double v1 = sol.params.V(0);

  const double e1 = std::abs(b1 - ex.beta1);
  const double e2 = std::abs(b2 - ex.beta2);
  const double e3 = std::abs(ya - ex.y_atom);
  const double e4 = std::abs(v1 - ex.v1);
  const bool pass = e1 <= 1e-8 && e2 <= 1e-8 && e3 <= 1e-8 && e4 <= 1e-8 &&
                    sol.drift_residual_norm < 1e-10;

  ordered_json report;
  report["tool"] = "levymin";
  report["version"] = kVersion;
  report["example"] = "6.1";
  report["model"] = ordered_json{
      {"b", vec_json(ex.model.b)},
      {"c", "[[1,1],[1,1]] (singular)"},
      {"atom", vec_json(fa->atoms[0].location)},
      {"divergence", "x^2/2 + x ln x - x"}};
  report["solved"] = ordered_json{{"beta1", b1},
                                  {"beta2", b2},
                                  {"y_atom", ya},
                                  {"v1", v1}};
  report["closed_form"] = ordered_json{{"beta1", ex.beta1},
                                       {"beta2", ex.beta2},
                                       {"y_atom", ex.y_atom},
                                       {"v1", ex.v1}};
  report["abs_error"] = ordered_json{
      {"beta1", e1}, {"beta2", e2}, {"y_atom", e3}, {"v1", e4}};
  // beta1 + 2 beta2 = Y(a) - 1 = -ln(3/2)
  report["consistency_beta1_plus_2beta2"] = b1 + 2.0 * b2;
  report["consistency_expected"] = -std::log(1.5);
  report["drift_residual_norm"] = sol.drift_residual_norm;
  report["existence_overall"] = sol.existence.overall;
  report["pass"] = pass;
  emit(report, out, false);
  return pass ? 0 : 4;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out,
                 const std::optional<std::string>& dump_path, bool json) {
  ordered_json report = report_header(cfg);
  std::optional<MinimalMeasureSolution> sol;
  const int code = solve_step(cfg, report, sol);
  if (!sol) {
    emit(report, out, json);
    return code;
  }

  PathBatch batch = simulate(cfg.model, cfg.simulation);
  density_terminal(batch, cfg.model, sol->params);
  const std::vector<double> z(batch.z_terminal.data(),
                              batch.z_terminal.data() +
                                  batch.z_terminal.size());
  const Estimate ez = estimate(z);
  report["simulation"] = ordered_json{
      {"n_paths", cfg.simulation.n_paths},
      {"T", cfg.simulation.T},
      {"density_mean", ez.mean},
      {"density_se", ez.se},
      {"nonfinite_samples", ez.n_nonfinite}};

  if (dump_path) {
    std::ofstream dump(*dump_path);
    if (!dump) {
      report["dump_error"] = "cannot open " + *dump_path;
      emit(report, out, json);
      return 5;
    }
    dump << "# levymin path dump\n";
    dump << "# generator " << kGeneratorName << "\n";
    dump << "# seed " << cfg.simulation.seed << "\n";
    dump << "# n_paths " << cfg.simulation.n_paths << "\n";
    dump << "# columns: path";
    for (int i = 0; i < batch.dim; ++i) dump << " G" << i;
    for (std::size_t j = 0; j < batch.n_atoms; ++j) dump << " N" << j;
    for (int i = 0; i < batch.dim; ++i) dump << " X" << i;
    dump << " Z\n";
    dump.precision(17);
    for (Eigen::Index p = 0; p < batch.z_terminal.size(); ++p) {
      dump << p;
      for (int i = 0; i < batch.dim; ++i) dump << " " << batch.gaussian(i, p);
      for (std::size_t j = 0; j < batch.n_atoms; ++j) {
        dump << " " << static_cast<std::uint64_t>(batch.jump_counts(j, p));
      }
      for (int i = 0; i < batch.dim; ++i) {
        dump << " " << batch.x_terminal(i, p);
      }
      dump << " " << batch.z_terminal(p) << "\n";
    }
    report["dump"] = *dump_path;
  }
  emit(report, out, json);
  return code;
}

int cmd_divergence(const RunConfig& cfg, std::ostream& out, bool json) {
  ordered_json report = report_header(cfg);
  std::optional<MinimalMeasureSolution> sol;
  const int code = solve_step(cfg, report, sol);
  if (!sol) {
    emit(report, out, json);
    return code;
  }
  PathBatch batch = simulate(cfg.model, cfg.simulation);
  const auto mc = mc_divergence(batch, cfg.model, cfg.divergence, sol->params);
  ordered_json dj;
  dj["T"] = cfg.simulation.T;
  dj["mc_mean"] = mc.mean;
  dj["mc_se"] = mc.se;
  bool agree = false;
  try {
    const double closed = divergence_closed_form(cfg.model, cfg.divergence,
                                                 sol->params,
                                                 cfg.simulation.T);
    dj["closed_form"] = closed;
    agree = std::abs(closed - mc.mean) <= 4.0 * mc.se;
  } catch (const OverflowError& e) {
    dj["overflow_exponent"] = e.exponent;
  }
  dj["agree_within_4se"] = agree;
  report["divergence"] = dj;
  emit(report, out, json);
  if (code != 0) return code;
  return agree ? 0 : 4;
}

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty()) {
    err << "usage: levymin <solve|verify|example-6-1|simulate|divergence> "
           "[--config PATH] [--out PATH] [--seed N] [--paths N] "
           "[--json|--text]\n";
    return 1;
  }
  const std::string sub = args.front();
  std::optional<std::string> config_path, out_path;
  std::optional<std::uint64_t> seed_override, paths_override;
  bool json = false;
  for (std::size_t i = 1; i < args.size(); ++i) {
    const std::string& a = args[i];
    auto need_value = [&](const char* flag) -> const std::string& {
      if (i + 1 >= args.size()) {
        throw ParseError(std::string(flag) + ": missing value");
      }
      return args[++i];
    };
    try {
      if (a == "--config") {
        config_path = need_value("--config");
      } else if (a == "--out") {
        out_path = need_value("--out");
      } else if (a == "--seed") {
        seed_override = std::stoull(need_value("--seed"));
      } else if (a == "--paths") {
        paths_override = std::stoull(need_value("--paths"));
      } else if (a == "--json") {
        json = true;
      } else if (a == "--text") {
        json = false;
      } else {
        err << "unknown flag: " << a << "\n";
        return 1;
      }
    } catch (const std::exception& e) {
      err << "flag error: " << e.what() << "\n";
      return 1;
    }
  }

  try {
    if (sub == "example-6-1") {
      return cmd_example_6_1(out);
    }
    if (!config_path) {
      err << sub << ": --config PATH is required\n";
      return 1;
    }
    RunConfig cfg = parse_config_file(*config_path);
    if (seed_override) cfg.simulation.seed = *seed_override;
    if (paths_override) cfg.simulation.n_paths = *paths_override;

    std::ofstream file_out;
    std::ostream* sink = &out;
    if (out_path && sub != "simulate") {
      file_out.open(*out_path);
      if (!file_out) {
        err << "cannot open " << *out_path << "\n";
        return 5;
      }
      sink = &file_out;
    }

    if (sub == "solve") return cmd_solve(cfg, *sink, json);
    if (sub == "verify") return cmd_verify(cfg, *sink, json);
    if (sub == "simulate") return cmd_simulate(cfg, out, out_path, json);
    if (sub == "divergence") return cmd_divergence(cfg, *sink, json);
    err << "unknown subcommand: " << sub << "\n";
    return 1;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 5;
  }
}

}  // namespace levymin
