#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "levymin/io.hpp"
#include "levymin/montecarlo.hpp"
#include "levymin/rng.hpp"
#include "stat_util.hpp"

using namespace levymin;

namespace {

LevyTriplet brownian_1d(double b = 0.0, double c = 1.0) {
  LevyTriplet t;
  t.dim = 1;
  t.b = Eigen::VectorXd::Constant(1, b);
  t.c = Eigen::MatrixXd::Constant(1, 1, c);
  return t;
}

LevyTriplet single_atom_1d(double y, double mass, double b, double c) {
  LevyTriplet t = brownian_1d(b, c);
  FiniteAtomic fa;
  fa.atoms.push_back({Eigen::VectorXd::Constant(1, y), mass});
  t.nu = std::move(fa);
  return t;
}

Eigen::VectorXd scalar(double v) { return Eigen::VectorXd::Constant(1, v); }

GirsanovParams diffusion_params(double beta) {
  auto spec = std::make_shared<DivergenceSpec>(DivergenceSpec::entropy());
  return GirsanovParams::esscher(spec, scalar(beta),
                                 scalar(beta),  // f''(1) = 1 for entropy
                                 scalar(0.0));
}

}  // namespace

TEST_CASE("philox: reproducible, stream-separated, sane uniforms") {
  PhiloxStream a(42, 7), b(42, 7), c(42, 8);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u32();
    all_equal = all_equal && (x == b.next_u32());
    any_diff = any_diff || (x != c.next_u32());
  }
  CHECK(all_equal);
  CHECK(any_diff);

  PhiloxStream u(1, 0);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform01();
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("philox: normal moments") {
  PhiloxStream s(2024, 0);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = s.normal();
    sum += z;
    sum2 += z * z;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(double(n)));
  CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("estimate: hand values and flagged samples") {
  const std::vector<double> ones(16, 1.0);
  const auto e1 = estimate(ones);
  CHECK(e1.mean == 1.0);
  CHECK(e1.se == 0.0);

  const std::vector<double> pair = {0.0, 2.0};
  const auto e2 = estimate(pair);
  CHECK(e2.mean == doctest::Approx(1.0));
  CHECK(e2.se == doctest::Approx(1.0));

  const std::vector<double> with_inf = {
      1.0, std::numeric_limits<double>::infinity()};
  const auto e3 = estimate(with_inf);
  CHECK(e3.n_nonfinite == 1);
  CHECK_FALSE(std::isfinite(e3.mean));

  CHECK_THROWS_AS(estimate(std::vector<double>{1.0}), DomainError);
}

TEST_CASE("estimate: standard normal mean at a million draws") {
  PhiloxStream s(5, 0);
  std::vector<double> z(1000000);
  for (auto& v : z) v = s.normal();
  const auto est = estimate(z);
  CHECK(std::abs(est.mean) < 4e-3);
  CHECK(est.se == doctest::Approx(1e-3).epsilon(0.01));
}

TEST_CASE("simulate: Brownian terminal mean and atom jump counts") {
  SimulationConfig cfg{1.0, 200000, 11, 1};
  const auto bm = simulate(brownian_1d(), cfg);
  std::vector<double> x(bm.x_terminal.data(),
                        bm.x_terminal.data() + bm.x_terminal.cols());
  const auto est = estimate(x);
  CHECK(std::abs(est.mean) <= 4.0 / std::sqrt(double(cfg.n_paths)));

  const auto jm = simulate(single_atom_1d(std::log(2.0), 1.0, 0.0, 0.0), cfg);
  std::vector<double> counts(jm.jump_counts.data(),
                             jm.jump_counts.data() + jm.jump_counts.cols());
  const auto cest = estimate(counts);
  CHECK(std::abs(cest.mean - 1.0) <= 4.0 * std::sqrt(1.0 / cfg.n_paths));
}

TEST_CASE("simulate: radial density measures are rejected") {
  LevyTriplet t = brownian_1d();
  RadialDensity rd;
  rd.density = [](double y) { return std::exp(-2.0 * std::abs(y)); };
  t.nu = rd;
  CHECK_THROWS_AS(simulate(t, SimulationConfig{1.0, 10, 0, 1}),
                  UnsupportedMeasure);
}

TEST_CASE("simulate: 6.1 difference of assets is deterministic given jumps") {
  const auto ex = builtin_example_6_1();
  SimulationConfig cfg{1.0, 2000, 3, 1};
  const auto batch = simulate(ex.model, cfg);
  // X^2 - X^1 = (b2 - b1) T + ln(3/2) N because both share the Brownian part
  const double slope = std::log(1.5);
  const double intercept = (ex.model.b(1) - ex.model.b(0)) * cfg.T;
  for (Eigen::Index p = 0; p < batch.x_terminal.cols(); ++p) {
    const double diff = batch.x_terminal(1, p) - batch.x_terminal(0, p);
    const double expected = intercept + slope * batch.jump_counts(0, p);
    CHECK(std::abs(diff - expected) < 1e-12);
  }
}

TEST_CASE("density: trivial and Gaussian closed-form moments") {
  const auto t = brownian_1d();
  SimulationConfig cfg{1.0, 400000, 17, 1};
  PathBatch batch = simulate(t, cfg);

  density_terminal(batch, t, diffusion_params(0.0));
  CHECK((batch.z_terminal.array() == 1.0).all());

  density_terminal(batch, t, diffusion_params(-0.5));
  std::vector<double> z(batch.z_terminal.data(),
                        batch.z_terminal.data() + batch.z_terminal.size());
  const auto ez = estimate(z);
  CHECK(std::abs(ez.mean - 1.0) <= 4.0 * ez.se);

  std::vector<double> zlogz(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) zlogz[i] = z[i] * std::log(z[i]);
  const auto ezl = estimate(zlogz);
  CHECK(std::abs(ezl.mean - 0.125) <= 4.0 * ezl.se);
}

TEST_CASE("density: explicit Y table must stay positive") {
  const auto t = single_atom_1d(std::log(2.0), 1.0, 0.0, 0.0);
  SimulationConfig cfg{1.0, 100, 5, 1};
  PathBatch batch = simulate(t, cfg);
  const auto bad = GirsanovParams::atom_table(scalar(0.0), {-1.0}, 1);
  CHECK_THROWS_AS(density_terminal(batch, t, bad), DomainError);
}

TEST_CASE("mc_martingale_check: positive and negative controls") {
  const auto t = brownian_1d();
  SimulationConfig cfg{1.0, 400000, 23, 1};
  const PathBatch batch = simulate(t, cfg);

  const auto good = mc_martingale_check(batch, t, diffusion_params(-0.5));
  CHECK(good.all_pass);
  CHECK(std::abs(good.assets[0].mean - 1.0) <= 4.0 * good.assets[0].se);

  // beta = 0 keeps P: E[e^{X_T}] = e^{1/2}, so the check must fail
  const auto bad = mc_martingale_check(batch, t, diffusion_params(0.0));
  CHECK_FALSE(bad.all_pass);
  CHECK(std::abs(bad.assets[0].mean - std::exp(0.5)) <=
        4.0 * bad.assets[0].se);
}

TEST_CASE("mc_divergence: Gaussian oracle values") {
  const auto t = brownian_1d();
  SimulationConfig cfg{1.0, 400000, 29, 1};
  const PathBatch batch = simulate(t, cfg);

  const auto trivial =
      mc_divergence(batch, t, DivergenceSpec::entropy(), diffusion_params(0.0));
  CHECK(trivial.mean == 0.0);
  CHECK(trivial.se == 0.0);

  const auto ent = mc_divergence(batch, t, DivergenceSpec::entropy(),
                                 diffusion_params(-0.5));
  CHECK(std::abs(ent.mean - 0.125) <= 4.0 * ent.se);

  auto qspec = std::make_shared<DivergenceSpec>(DivergenceSpec::quadratic());
  const auto qparams =
      GirsanovParams::esscher(qspec, scalar(-0.5), scalar(-1.0), scalar(0.0));
  const auto quad = mc_divergence(batch, t, *qspec, qparams);
  CHECK(std::abs(quad.mean - std::exp(0.25)) <= 4.0 * quad.se);
}

TEST_CASE("characteristic-function MC test") {
  const auto t = single_atom_1d(std::log(2.0), 1.0, 0.1, 1.0);
  SimulationConfig cfg{1.0, 200000, 31, 1};
  const auto batch = simulate(t, cfg);
  for (double u : {1.0, 0.5}) {
    const auto psi =
        characteristic_exponent(t, Eigen::VectorXd::Constant(1, u));
    const auto expected = std::exp(cfg.T * psi);
    std::vector<double> re(cfg.n_paths), im(cfg.n_paths);
    for (std::size_t p = 0; p < cfg.n_paths; ++p) {
      re[p] = std::cos(u * batch.x_terminal(0, p));
      im[p] = std::sin(u * batch.x_terminal(0, p));
    }
    const auto ere = estimate(re), eim = estimate(im);
    CHECK(std::abs(ere.mean - expected.real()) <= 4.0 * ere.se);
    CHECK(std::abs(eim.mean - expected.imag()) <= 4.0 * eim.se);
  }
}

TEST_CASE("bit-identical reruns under a fixed seed") {
  const auto ex = builtin_example_6_1();
  SimulationConfig cfg{1.0, 20000, 97, 1};
  auto b1 = simulate(ex.model, cfg);
  auto b2 = simulate(ex.model, cfg);
  CHECK(b1.gaussian == b2.gaussian);
  CHECK(b1.jump_counts == b2.jump_counts);
  CHECK(b1.x_terminal == b2.x_terminal);

  const auto sol = solve(ex.model, ex.spec);
  density_terminal(b1, ex.model, sol.params);
  density_terminal(b2, ex.model, sol.params);
  CHECK(b1.z_terminal == b2.z_terminal);
  const auto e1 = mc_divergence(b1, ex.model, ex.spec, sol.params);
  const auto e2 = mc_divergence(b2, ex.model, ex.spec, sol.params);
  CHECK(e1.mean == e2.mean);
  CHECK(e1.se == e2.se);
}

TEST_CASE("jump counts pass a Poisson chi-square test") {
  // oracle sanity: Q(1/2, x) = erfc(sqrt(x))
  for (double x : {0.1, 0.5, 1.0, 2.0, 5.0}) {
    CHECK(testutil::gamma_q(0.5, x) ==
          doctest::Approx(std::erfc(std::sqrt(x))).epsilon(1e-12));
  }

  const double lambda_T = 1.0;
  SimulationConfig cfg{1.0, 100000, 41, 1};
  const auto batch =
      simulate(single_atom_1d(std::log(2.0), lambda_T, 0.0, 0.0), cfg);

  const int k_max = 8;  // bins 0..7 plus the tail
  std::vector<double> observed(k_max + 1, 0.0);
  for (Eigen::Index p = 0; p < batch.jump_counts.cols(); ++p) {
    const int k = static_cast<int>(batch.jump_counts(0, p));
    observed[std::min(k, k_max)] += 1.0;
  }
  double stat = 0.0;
  double tail_prob = 1.0;
  for (int k = 0; k < k_max; ++k) {
    const double pk = testutil::poisson_pmf(k, lambda_T);
    tail_prob -= pk;
    const double expected = pk * double(cfg.n_paths);
    stat += std::pow(observed[k] - expected, 2.0) / expected;
  }
  const double tail_expected = tail_prob * double(cfg.n_paths);
  stat += std::pow(observed[k_max] - tail_expected, 2.0) / tail_expected;

  const double p_value = testutil::chi2_pvalue(stat, k_max);
  CHECK(p_value > 0.001);
}
