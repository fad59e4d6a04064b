#include <doctest.h>

#include <cmath>
#include <memory>

#include "levymin/io.hpp"
#include "levymin/verifier.hpp"

using namespace levymin;

namespace {

Eigen::VectorXd scalar(double v) { return Eigen::VectorXd::Constant(1, v); }

LevyTriplet two_atom_model(double b) {
  LevyTriplet t;
  t.dim = 1;
  t.b = scalar(b);
  t.c = Eigen::MatrixXd::Zero(1, 1);
  FiniteAtomic fa;
  fa.atoms.push_back({scalar(std::log(2.0)), 1.0});
  fa.atoms.push_back({scalar(std::log(3.0)), 1.0});
  t.nu = std::move(fa);
  return t;
}

// drift: b + Y1 + 2 Y2 - ln 2 = 0 (h vanishes on the ln 3 atom);
// quadratic divergence then gives theta = -0.4, Y = (0.8, 0.6)
LevyTriplet incomplete_market() { return two_atom_model(std::log(2.0) - 2.0); }

const double kGrid[] = {0.5, 1.0, 2.0, 5.0};

}  // namespace

TEST_CASE("fundamental residual: trivial measure change") {
  auto spec = std::make_shared<DivergenceSpec>(DivergenceSpec::entropy());
  const auto params = GirsanovParams::esscher(spec, scalar(0.0), scalar(0.0),
                                              scalar(0.0));
  const auto t = two_atom_model(0.0);
  const auto rep = fundamental_residual(*spec, params, kGrid, t.nu);
  CHECK(rep.max_residual_equ == doctest::Approx(0.0));
  CHECK(rep.rank1_defect == doctest::Approx(0.0));
}

TEST_CASE("fundamental residual: 6.1 solution satisfies the equation") {
  const auto ex = builtin_example_6_1();
  const auto sol = solve(ex.model, ex.spec);
  const auto rep = fundamental_residual(ex.spec, sol.params, kGrid,
                                        ex.model.nu);
  CHECK(rep.max_residual_equ < 1e-10);
  CHECK(rep.rank1_defect < 1e-10);
}

TEST_CASE("fundamental residual: 6.1 with V forced to zero fails") {
  const auto ex = builtin_example_6_1();
  SolverConfig cfg;
  cfg.force_v_zero = true;
  const auto sol = solve(ex.model, ex.spec, cfg);
  const auto rep = fundamental_residual(ex.spec, sol.params, kGrid,
                                        ex.model.nu);
  CHECK(rep.max_residual_equ > 1e-3);
}

TEST_CASE("fundamental residual: entropy identity for beta = theta") {
  // f = x ln x on c = 1: x f''(x) = 1, so ln Y(y) = theta (e^y - 1) matches
  // the right-hand side with beta = theta, V = 0
  auto spec = std::make_shared<DivergenceSpec>(DivergenceSpec::entropy());
  const double theta = 0.7;
  const auto params = GirsanovParams::esscher(spec, scalar(theta),
                                              scalar(theta), scalar(0.0));
  const auto t = two_atom_model(0.0);
  const auto rep = fundamental_residual(*spec, params, kGrid, t.nu);
  CHECK(rep.max_residual_equ < 1e-10);
  CHECK(rep.rank1_defect < 1e-10);
}

TEST_CASE("fundamental residual: power family on c = 0 keeps the x-structure") {
  const auto t = incomplete_market();
  const auto spec = DivergenceSpec::quadratic();
  const auto sol = solve(t, spec);
  CHECK(std::abs(sol.params.theta(0) + 0.4) < 1e-9);
  CHECK(std::abs(sol.params.V(0)) < 1e-10);
  const auto rep = fundamental_residual(spec, sol.params, kGrid, t.nu);
  CHECK(rep.max_residual_equ < 1e-9);
  CHECK(rep.rank1_defect < 1e-9);
}

TEST_CASE("classify_support: the three regimes") {
  const auto ex = builtin_example_6_1();
  const auto sol = solve(ex.model, ex.spec);
  CHECK(classify_support(ex.model, sol.params) ==
        SupportClass::WholePositiveLine);
  const double quad = sol.params.beta.dot(ex.model.c_sym() * sol.params.beta);
  CHECK(quad == doctest::Approx(3.19581).epsilon(1e-5));

  // c = 0, single atom with Y = e > 1
  LevyTriplet up;
  up.dim = 1;
  up.b = scalar(std::log(2.0) - std::exp(1.0));
  up.c = Eigen::MatrixXd::Zero(1, 1);
  FiniteAtomic fa;
  fa.atoms.push_back({scalar(std::log(2.0)), 1.0});
  up.nu = fa;
  const auto sup = solve(up, DivergenceSpec::entropy());
  CHECK(classify_support(up, sup.params) == SupportClass::RayUpward);

  // c = 0, explicit Y on both sides of 1
  const auto mixed = GirsanovParams::atom_table(scalar(0.0), {2.0, 0.5}, 1);
  CHECK(classify_support(incomplete_market(), mixed) ==
        SupportClass::WholePositiveLine);

  const auto down = GirsanovParams::atom_table(scalar(0.0), {0.5, 0.25}, 1);
  CHECK(classify_support(incomplete_market(), down) ==
        SupportClass::RayDownward);
}

TEST_CASE("classify_support: degenerate density has no classification") {
  const auto flat = GirsanovParams::atom_table(scalar(0.0), {1.0, 1.0}, 1);
  CHECK_THROWS_AS(classify_support(incomplete_market(), flat), DomainError);
}

TEST_CASE("classify_support: invariant under mass rescaling") {
  auto t = incomplete_market();
  const auto params = GirsanovParams::atom_table(scalar(0.0), {2.0, 3.0}, 1);
  const auto before = classify_support(t, params);
  auto& fa = std::get<FiniteAtomic>(t.nu);
  for (auto& atom : fa.atoms) atom.mass *= 7.5;
  CHECK(classify_support(t, params) == before);
}

TEST_CASE("martingale alternatives stay on the constraint manifold") {
  const auto t = incomplete_market();
  const auto sol = solve(t, DivergenceSpec::quadratic());
  const double steps[] = {-0.4, -0.3, -0.2, -0.1, 0.1, 0.2, 0.3, 0.4};
  const auto alts = martingale_alternatives(t, sol.params, steps);
  REQUIRE(alts.size() == 8);
  for (const auto& alt : alts) {
    CHECK(drift_residual(t, alt).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("minimality certificate: solution vs itself and rejection path") {
  const auto t = incomplete_market();
  const auto spec = DivergenceSpec::quadratic();
  const auto sol = solve(t, spec);
  SimulationConfig mc{1.0, 20000, 71, 1};

  const auto self = minimality_certificate(t, spec, sol, {sol.params}, mc);
  REQUIRE(self.entries.size() == 1);
  CHECK(self.entries[0].difference == 0.0);
  CHECK(self.entries[0].se == 0.0);
  CHECK(self.certified);

  const auto bad = GirsanovParams::atom_table(scalar(0.0), {2.0, 2.0}, 1);
  const auto rej = minimality_certificate(t, spec, sol, {bad}, mc);
  REQUIRE(rej.entries.size() == 1);
  CHECK_FALSE(rej.entries[0].martingale_ok);
  CHECK(rej.entries[0].drift_residual > 0.1);
}

TEST_CASE("minimality certificate: perturbed alternatives never win") {
  const auto t = incomplete_market();
  const auto spec = DivergenceSpec::quadratic();
  const auto sol = solve(t, spec);
  const double steps[] = {-0.4, -0.3, -0.2, -0.1, 0.1, 0.2, 0.3, 0.4};
  const auto alts = martingale_alternatives(t, sol.params, steps);
  const auto rep = minimality_certificate(t, spec, sol, alts,
                                          SimulationConfig{1.0, 100000, 83, 1});
  CHECK(rep.certified);
  for (const auto& e : rep.entries) {
    CHECK(e.martingale_ok);
    CHECK(e.difference >= -3.0 * e.se);
  }
}

TEST_CASE("scale invariance check") {
  const double scales[] = {1.0, 0.5, 2.0, std::exp(1.0)};
  const auto sc = scale_invariance_check(DivergenceSpec::entropy(), scales);
  CHECK(sc.applicable);
  CHECK(sc.all_pass);
  CHECK(sc.entries[0].max_rel_err == doctest::Approx(0.0));  // scale 1

  const auto multi = scale_invariance_check(
      DivergenceSpec({{0.5, 0.0}, {1.0, -1.0}}, -1.0, 0.0), scales);
  CHECK_FALSE(multi.applicable);
}

TEST_CASE("time invariance: parameters and divergence laws") {
  LevyTriplet bm;
  bm.dim = 1;
  bm.b = scalar(0.0);
  bm.c = Eigen::MatrixXd::Constant(1, 1, 1.0);
  const double horizons[] = {1.0, 2.0, 5.0};
  for (const auto& spec :
       {DivergenceSpec::entropy(), DivergenceSpec::quadratic()}) {
    const auto tc = time_invariance_check(bm, spec, horizons);
    CHECK(tc.pass);
    CHECK(tc.max_param_deviation < 1e-9);
    CHECK(tc.max_scaling_err < 1e-9);
  }
  const auto ex = builtin_example_6_1();
  const auto tc = time_invariance_check(ex.model, ex.spec, horizons);
  CHECK(tc.pass);
}
