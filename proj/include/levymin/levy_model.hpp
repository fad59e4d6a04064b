#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "levymin/common.hpp"

namespace levymin {

// Truncation function h in the Levy-Khintchine formula.
//   Canonical: h(y) = y * 1_{|y| <= 1}
//   Zero:      h = 0, valid only for finite-variation jump parts
enum class Truncation { Canonical, Zero };

Eigen::VectorXd truncation_h(Truncation trunc, const Eigen::VectorXd& y);

struct Atom {
  Eigen::VectorXd location;  // in R^d \ {0}
  double mass;               // > 0
};

struct FiniteAtomic {
  std::vector<Atom> atoms;
};

// Density-form Levy measure with a log-spaced Gauss-Legendre quadrature on
// [-r_max,-r_min] u [r_min,r_max]. The exclusion radius r_min keeps nodes
// away from 0 where the measure may be infinite; integrands used in this
// library vanish quadratically there. Implemented for dim == 1.
struct RadialDensity {
  int dim = 1;
  std::function<double(double)> density;  // rho(y) > 0, y != 0
  double r_min = 1e-6;
  double r_max = 40.0;
  int panels = 64;  // panels per side; refinement doubles this
};

using LevyMeasure = std::variant<FiniteAtomic, RadialDensity>;

struct LevyTriplet {
  int dim = 1;
  Eigen::VectorXd b;
  Eigen::MatrixXd c;
  LevyMeasure nu = FiniteAtomic{};
  Truncation trunc = Truncation::Canonical;

  // symmetric part of c, used by every numeric operation
  Eigen::MatrixXd c_sym() const { return 0.5 * (c + c.transpose()); }

  // eigendecomposition of c_sym with eigenvalues clamped at 0
  struct CovEig {
    Eigen::VectorXd evals;  // ascending, clamped >= 0
    Eigen::MatrixXd evecs;  // columns
  };
  CovEig cov_eig() const;
};

struct CheckResult {
  std::string name;
  bool pass;
  double measured;
  std::string detail;
};

struct ValidationReport {
  std::vector<CheckResult> checks;
  bool overall;
};

// Report-style validation of every triplet invariant; never throws.
ValidationReport validate_triplet(const LevyTriplet& t);

// Levy-Khintchine exponent psi(u); E[e^{i<u,X_t>}] = e^{t psi(u)}.
std::complex<double> characteristic_exponent(const LevyTriplet& t,
                                             const Eigen::VectorXd& u);

struct IntegralResult {
  double value = 0.0;
  bool converged = true;
  int nodes_used = 0;
  double refinement_delta = 0.0;  // relative change on node doubling
};

// Integration backbone for all  \int g(y) nu(dy)  terms: exact weighted sum
// for FiniteAtomic, refinement-checked quadrature for RadialDensity.
IntegralResult try_levy_integral(
    const LevyMeasure& nu,
    const std::function<double(const Eigen::VectorXd&)>& g);

// Throwing wrapper: NumericError on non-convergence.
double levy_integral(const LevyMeasure& nu,
                     const std::function<double(const Eigen::VectorXd&)>& g);

struct MomentDiagnostic {
  bool finite;
  std::string detail;
};

// Whether \int_{|y|>=1} e^{y_i} nu(dy) is (numerically) finite.
MomentDiagnostic exp_moment_finite(const LevyMeasure& nu, int coord);

// Finite-variation test \int (1 ^ |y|) nu(dy) < inf, gating Zero truncation.
MomentDiagnostic finite_variation(const LevyMeasure& nu);

}  // namespace levymin
