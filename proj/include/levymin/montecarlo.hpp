#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "levymin/levy_model.hpp"
#include "levymin/solver.hpp"

namespace levymin {

struct SimulationConfig {
  double T = 1.0;
  std::size_t n_paths = 1;
  std::uint64_t seed = 0;
  int brownian_steps = 1;  // Gaussian part only; terminal laws stay exact
};

// Exact terminal-law samples of a finite-activity exponential Levy model.
// Per-path substream = PhiloxStream(seed, path index).
struct PathBatch {
  SimulationConfig cfg;
  int dim = 0;
  std::size_t n_atoms = 0;
  Eigen::MatrixXd gaussian;     // d x n, G ~ N(0, cT)
  Eigen::MatrixXd jump_counts;  // n_atoms x n (integer-valued)
  Eigen::MatrixXd x_terminal;   // d x n
  Eigen::VectorXd z_terminal;   // n, filled by density_terminal
};

PathBatch simulate(const LevyTriplet& t, const SimulationConfig& cfg);

// Doleans-Dade density at T for a finite-activity jump part:
//   Z_T = exp(b'G - T/2 b'cb) * prod_jumps Y(y) * exp(-T int (Y-1) nu)
Eigen::VectorXd density_for(const PathBatch& batch, const LevyTriplet& t,
                            const GirsanovParams& params);

// Same, and stores the result in batch.z_terminal.
const Eigen::VectorXd& density_terminal(PathBatch& batch, const LevyTriplet& t,
                                        const GirsanovParams& params);

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
  std::size_t n_nonfinite = 0;  // flagged, never silently dropped
};

// Sample mean and standard error (stdev / sqrt(n)); deterministic pairwise
// aggregation. Non-finite samples propagate into the mean by default.
Estimate estimate(std::span<const double> samples);

struct MartingaleCheck {
  struct PerAsset {
    double mean = 0.0;
    double se = 0.0;
    bool pass = false;
    std::size_t flagged = 0;  // overflowed e^{X_T} paths
  };
  std::vector<PerAsset> assets;
  bool all_pass = false;
};

// Estimates E_P[Z_T e^{X^i_T}] per asset; pass iff within 4 SE of 1.
MartingaleCheck mc_martingale_check(const PathBatch& batch,
                                    const LevyTriplet& t,
                                    const GirsanovParams& params);

// Sample mean of f(Z_T): the independent oracle for the closed-form
// divergence values.
Estimate mc_divergence(const PathBatch& batch, const LevyTriplet& t,
                       const DivergenceSpec& spec,
                       const GirsanovParams& params);

}  // namespace levymin
