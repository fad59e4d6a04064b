#include "levymin/montecarlo.hpp"

#include <cmath>
#include <vector>

#include "levymin/rng.hpp"

namespace levymin {

PathBatch simulate(const LevyTriplet& t, const SimulationConfig& cfg) {
  if (!(cfg.T > 0.0) || cfg.n_paths < 1 || cfg.brownian_steps < 1) {
    throw DomainError("simulate: T > 0, n_paths >= 1, brownian_steps >= 1");
  }
  const auto* fa = std::get_if<FiniteAtomic>(&t.nu);
  if (fa == nullptr) {
    throw UnsupportedMeasure(
        "simulate: only FiniteAtomic jump parts are simulated; discretize "
        "the density onto atoms first");
  }

  const int d = t.dim;
  const std::size_t n = cfg.n_paths;
  const std::size_t m = fa->atoms.size();

  // square root of c via eigendecomposition (works for singular c)
  const auto eig = t.cov_eig();
  const double scale = std::max(1.0, eig.evals.maxCoeff());
  std::vector<int> pos;
  for (int i = 0; i < d; ++i) {
    if (eig.evals(i) > 1e-14 * scale) pos.push_back(i);
  }
  const int r = static_cast<int>(pos.size());
  const double dt = cfg.T / cfg.brownian_steps;
  Eigen::MatrixXd root(d, r);
  for (int k = 0; k < r; ++k) {
    root.col(k) = eig.evecs.col(pos[k]) * std::sqrt(eig.evals(pos[k]) * dt);
  }

  // drift plus truncation compensation: X_T = base + G + sum_jumps y
  Eigen::VectorXd base = t.b * cfg.T;
  for (const auto& atom : fa->atoms) {
    base -= cfg.T * atom.mass * truncation_h(t.trunc, atom.location);
  }

  PathBatch batch;
  batch.cfg = cfg;
  batch.dim = d;
  batch.n_atoms = m;
  batch.gaussian.setZero(d, n);
  batch.jump_counts.setZero(std::max<std::size_t>(m, 1), n);
  batch.x_terminal.setZero(d, n);

  Eigen::VectorXd xi(r);
  for (std::size_t p = 0; p < n; ++p) {
    PhiloxStream stream(cfg.seed, p);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
    for (int step = 0; step < cfg.brownian_steps; ++step) {
      for (int k = 0; k < r; ++k) xi(k) = stream.normal();
      g += root * xi;
    }
    batch.gaussian.col(p) = g;

    Eigen::VectorXd x = base + g;
    for (std::size_t j = 0; j < m; ++j) {
      const auto count =
          stream.poisson(fa->atoms[j].mass * cfg.T);
      batch.jump_counts(j, p) = static_cast<double>(count);
      x += static_cast<double>(count) * fa->atoms[j].location;
    }
    batch.x_terminal.col(p) = x;
  }
  return batch;
}

Eigen::VectorXd density_for(const PathBatch& batch, const LevyTriplet& t,
                            const GirsanovParams& params) {
  const auto* fa = std::get_if<FiniteAtomic>(&t.nu);
  if (fa == nullptr) {
    throw UnsupportedMeasure("density_for: FiniteAtomic jump part required");
  }
  const std::size_t m = fa->atoms.size();
  if (batch.n_atoms != m || batch.dim != t.dim) {
    throw DomainError("density_for: batch was simulated on a different model");
  }

  std::vector<double> log_y(m);
  double compensator = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double Y = params.y_at(j, fa->atoms[j].location);
    if (!(Y > 0.0)) {
      throw DomainError(
          "density_for: Y <= 0 at an atom (cdsec1 violation)");
    }
    log_y[j] = std::log(Y);
    compensator += fa->atoms[j].mass * (Y - 1.0);
  }
  const double quad = params.beta.dot(t.c_sym() * params.beta);
  const double T = batch.cfg.T;

  Eigen::VectorXd z(batch.x_terminal.cols());
  for (Eigen::Index p = 0; p < z.size(); ++p) {
    double lz = params.beta.dot(batch.gaussian.col(p)) - 0.5 * T * quad -
                T * compensator;
    for (std::size_t j = 0; j < m; ++j) {
      lz += batch.jump_counts(j, p) * log_y[j];
    }
    z(p) = std::exp(lz);
  }
  return z;
}

const Eigen::VectorXd& density_terminal(PathBatch& batch, const LevyTriplet& t,
                                        const GirsanovParams& params) {
  batch.z_terminal = density_for(batch, t, params);
  return batch.z_terminal;
}

Estimate estimate(std::span<const double> samples) {
  if (samples.size() < 2) {
    throw DomainError("estimate: at least two samples required");
  }
  Estimate est;
  est.n = samples.size();
  for (double s : samples) {
    if (!std::isfinite(s)) ++est.n_nonfinite;
  }
  const double n = static_cast<double>(est.n);
  est.mean = pairwise_sum(samples) / n;

  std::vector<double> sq(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double d = samples[i] - est.mean;
    sq[i] = d * d;
  }
  const double var = pairwise_sum(sq) / (n - 1.0);
  est.se = std::sqrt(var / n);
  return est;
}

MartingaleCheck mc_martingale_check(const PathBatch& batch,
                                    const LevyTriplet& t,
                                    const GirsanovParams& params) {
  const Eigen::VectorXd z = density_for(batch, t, params);
  MartingaleCheck check;
  check.all_pass = true;
  std::vector<double> samples(z.size());
  for (int i = 0; i < batch.dim; ++i) {
    MartingaleCheck::PerAsset asset;
    for (Eigen::Index p = 0; p < z.size(); ++p) {
      samples[static_cast<std::size_t>(p)] =
          z(p) * std::exp(batch.x_terminal(i, p));
    }
    const Estimate est = estimate(samples);
    asset.mean = est.mean;
    asset.se = est.se;
    asset.flagged = est.n_nonfinite;
    asset.pass = std::isfinite(est.mean) &&
                 std::abs(est.mean - 1.0) <= 4.0 * est.se;
    check.all_pass = check.all_pass && asset.pass;
    check.assets.push_back(asset);
  }
  return check;
}

Estimate mc_divergence(const PathBatch& batch, const LevyTriplet& t,
                       const DivergenceSpec& spec,
                       const GirsanovParams& params) {
  const Eigen::VectorXd z = density_for(batch, t, params);
  std::vector<double> samples(z.size());
  for (Eigen::Index p = 0; p < z.size(); ++p) {
    if (!(z(p) > 0.0)) {
      throw DomainError("mc_divergence: Z_T <= 0 sample");
    }
    samples[static_cast<std::size_t>(p)] = spec.value(z(p));
  }
  return estimate(samples);
}

}  // namespace levymin
