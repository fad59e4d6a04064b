#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "levymin/divergence.hpp"
#include "levymin/levy_model.hpp"

namespace levymin {

// Girsanov parameters (beta, Y) of a Levy-preserving change of measure,
// together with the kernel vector V coupling them: theta = f''(1) beta + V,
// c V = 0. Y is evaluated either through the induced form
//   Y(y) = (f')^{-1}( f'(1) + sum_i theta_i (e^{y_i} - 1) )
// when `spec` is set, or through an explicit per-atom table (used to
// represent martingale measures outside that family).
struct GirsanovParams {
  Eigen::VectorXd beta;
  Eigen::VectorXd theta;
  Eigen::VectorXd V;
  std::shared_ptr<const DivergenceSpec> spec;
  std::optional<std::vector<double>> atom_y;

  static GirsanovParams esscher(std::shared_ptr<const DivergenceSpec> spec,
                                Eigen::VectorXd beta, Eigen::VectorXd theta,
                                Eigen::VectorXd V);
  static GirsanovParams atom_table(Eigen::VectorXd beta,
                                   std::vector<double> y_values, int dim);

  // Y at an arbitrary jump location (requires the induced form)
  double y(const Eigen::VectorXd& yvec) const;
  // Y at atom j located at yvec (table if present, induced form otherwise)
  double y_at(std::size_t atom_index, const Eigen::VectorXd& yvec) const;
};

struct ExistenceReport {
  bool y_positive = false;              // cdsec1
  bool exp_integrable = false;          // cdsec2
  bool hellinger_finite = false;        // int (sqrt(Y)-1)^2 nu < inf
  bool predictable_integrable = false;  // int [f(Y)-f(1)-f'(1)(Y-1)] nu < inf
  bool overall = false;
  double min_y = 1.0;
  double cdsec2_value = 0.0;
  double hellinger_integral = 0.0;
  double predictable_value = 0.0;
};

struct SolverConfig {
  double tol = 1e-10;
  int max_iter = 100;
  int max_restarts = 16;
  double fd_step = 1e-7;
  // diagnostic: skip the kernel split and report V = 0 (the measure is
  // unchanged; Theorem-4 residuals then expose a wrong split)
  bool force_v_zero = false;
};

struct MinimalMeasureSolution {
  GirsanovParams params;
  double drift_residual_norm = 0.0;
  ExistenceReport existence;
  double hellinger_rate = 0.0;
  double divergence_per_T = 0.0;  // E_P f(Z_T) at T = 1
  std::string status = "solved";
};

// Y(y) induced by theta under the given divergence; CandidateInvalid if the
// argument leaves the range of f'.
double y_candidate(const DivergenceSpec& spec, const Eigen::VectorXd& theta,
                   const Eigen::VectorXd& y);

// Left-hand side of the martingale drift condition
//   b + 1/2 diag(c) + c beta + int [ (e^y - 1) Y(y) - h(y) ] nu(dy);
// the zero vector characterizes a martingale measure.
Eigen::VectorXd drift_residual(const LevyTriplet& t,
                               const GirsanovParams& params);

// Girsanov parameters of the f-divergence minimal equivalent martingale
// measure: damped Newton on theta with finite-difference Jacobian and
// multi-start, followed by the kernel split recovering (beta, V).
MinimalMeasureSolution solve(const LevyTriplet& t, const DivergenceSpec& spec,
                             const SolverConfig& cfg = {});

ExistenceReport check_existence(const LevyTriplet& t,
                                const DivergenceSpec& spec,
                                const GirsanovParams& params);

// 1/2 b'cb + 1/8 int (sqrt(Y)-1)^2 nu(dy); finite iff P_T ~ Q_T.
double hellinger_rate(const LevyTriplet& t, const GirsanovParams& params);

// term-wise closed form for E_P f(Z_T)
struct TermValue {
  double gamma = 0.0;
  double weight = 0.0;
  bool is_power = false;  // gamma not in {-1, -2}
  // power terms: value = weight * c_gamma * exp(T * rate); else value =
  // weight * T * rate
  double rate = 0.0;
  double value = 0.0;
};

std::vector<TermValue> divergence_terms(const LevyTriplet& t,
                                        const DivergenceSpec& spec,
                                        const GirsanovParams& params, double T);

double divergence_closed_form(const LevyTriplet& t, const DivergenceSpec& spec,
                              const GirsanovParams& params, double T);

// Closed-form descriptor of Y for power-family specs (Esscher-type when
// gamma = -1); cross-checks y_candidate.
struct EsscherForm {
  double a = 1.0;
  double gamma = -1.0;
  Eigen::VectorXd theta;
  std::string formula;
  double operator()(const Eigen::VectorXd& y) const;
};

std::optional<EsscherForm> esscher_form(const DivergenceSpec& spec,
                                        const Eigen::VectorXd& theta);

}  // namespace levymin
