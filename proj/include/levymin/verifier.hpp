#pragma once

#include <span>
#include <vector>

#include "levymin/montecarlo.hpp"
#include "levymin/solver.hpp"

namespace levymin {

struct FundamentalCheckReport {
  double max_residual_equ = 0.0;  // relative to 1 + |LHS|
  double rank1_defect = 0.0;      // sigma_2 / sigma_1 of [f'(xY(y)) - f'(x)]
  std::vector<double> grid;
};

// Residuals of the structural equation a minimal Levy-preserving measure
// must satisfy:
//   f'(x Y(y)) - f'(x) = x f''(x) sum_i beta_i (e^{y_i}-1)
//                        + sum_j V_j (e^{y_j}-1)
// over x-grid x atoms, plus the rank-1 factorization defect of the sampled
// left-hand side.
FundamentalCheckReport fundamental_residual(const DivergenceSpec& spec,
                                            const GirsanovParams& params,
                                            std::span<const double> x_grid,
                                            const LevyMeasure& nu);

// Qualitative support of Z_T: the whole positive half-line, an upward ray
// [A, inf), or a downward ray (0, A].
enum class SupportClass { WholePositiveLine, RayUpward, RayDownward };

SupportClass classify_support(const LevyTriplet& t,
                              const GirsanovParams& params);

struct MinimalityEntry {
  double drift_residual = 0.0;
  bool martingale_ok = false;  // precondition |drift residual| <= 1e-8
  double difference = 0.0;     // E_Q[f'(Z*)] - E_Q*[f'(Z*)]
  double se = 0.0;             // paired standard error (common random numbers)
  bool pass = false;           // difference >= -3 se
};

struct MinimalityReport {
  double solution_value = 0.0;
  double solution_se = 0.0;
  std::vector<MinimalityEntry> entries;
  bool certified = false;
};

// Statistical restatement of the minimality criterion
// E_Q*[f'(Z*_T)] <= E_Q[f'(Z*_T)]: each alternative must not beat the
// solution by more than 3 standard errors.
MinimalityReport minimality_certificate(
    const LevyTriplet& t, const DivergenceSpec& spec,
    const MinimalMeasureSolution& solution,
    const std::vector<GirsanovParams>& alternatives,
    const SimulationConfig& mc);

// Martingale-measure alternatives obtained by moving the per-atom Y table
// along the null space of the (linear in Y) drift constraint; martingality
// is preserved exactly. Steps with any Y <= 0 are skipped.
std::vector<GirsanovParams> martingale_alternatives(
    const LevyTriplet& t, const GirsanovParams& solution,
    std::span<const double> steps);

struct ScaleCheck {
  struct Entry {
    double scale = 1.0;
    double max_rel_err = 0.0;
    bool pass = false;
  };
  bool applicable = false;  // single-term specs only
  std::vector<Entry> entries;
  bool all_pass = false;
};

// Verifies f(u x) = A f(x) + B x + C numerically on a grid for each scale;
// this affine identity is what transports the minimizer under scaling.
ScaleCheck scale_invariance_check(const DivergenceSpec& spec,
                                  std::span<const double> scales);

struct TimeCheck {
  double max_param_deviation = 0.0;  // across re-solves at each T
  double max_scaling_err = 0.0;      // term-wise divergence law in T
  bool pass = false;
};

TimeCheck time_invariance_check(const LevyTriplet& t,
                                const DivergenceSpec& spec,
                                std::span<const double> T_list,
                                const SolverConfig& cfg = {});

}  // namespace levymin
