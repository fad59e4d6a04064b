#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "levymin/common.hpp"

namespace levymin {

struct DivergenceTerm {
  double weight;  // A_k > 0
  double gamma;   // exponent of f'' = a x^gamma for this term
};

struct PowerFamily {
  double a;  // f''(x) = a x^gamma
  double gamma;
};

struct AffineScale {
  double A, B, C;  // f(u x) = A f(x) + B x + C
};

// Convex f(x) = sum_k A_k f_{gamma_k}(x) + B x + C on x > 0, where
//   f_gamma(x) = c_gamma x^{gamma+2}   (gamma != -1, -2)
//              = x ln x                (gamma = -1)
//              = -ln x                 (gamma = -2)
// with c_gamma = sign[(gamma+1)/(gamma+2)], so that f_gamma'' = a(gamma) x^gamma
// with a(gamma) = |(gamma+1)(gamma+2)| (and a(-1) = a(-2) = 1).
class DivergenceSpec {
 public:
  DivergenceSpec(std::vector<DivergenceTerm> terms, double linear = 0.0,
                 double constant = 0.0);

  static DivergenceSpec entropy() { return DivergenceSpec({{1.0, -1.0}}); }
  static DivergenceSpec reverse_entropy() {
    return DivergenceSpec({{1.0, -2.0}});
  }
  static DivergenceSpec quadratic() { return DivergenceSpec({{1.0, 0.0}}); }
  static DivergenceSpec power(double gamma) {
    return DivergenceSpec({{1.0, gamma}});
  }

  static double a_coef(double gamma);  // a(gamma)
  static double c_coef(double gamma);  // c_gamma, gamma not in {-1,-2}

  const std::vector<DivergenceTerm>& terms() const { return terms_; }
  double linear() const { return linear_; }
  double constant() const { return constant_; }

  double value(double x) const;   // f(x), x > 0
  double prime(double x) const;   // f'(x)
  double second(double x) const;  // f''(x) > 0

  // open interval attained by f' on (0, inf)
  std::pair<double, double> prime_range() const;

  // monotone inverse of f'; analytic for single-term specs, otherwise
  // bracketed Newton. |f'(x) - u| <= 1e-12 (1 + |u|).
  double prime_inverse(double u) const;

  // (a, gamma) iff the spec has exactly one term
  std::optional<PowerFamily> power_family() const;

  // exact affine identity f(u x) = A f(x) + B x + C for single-term specs
  std::optional<AffineScale> scale_decomposition(double u) const;

 private:
  std::vector<DivergenceTerm> terms_;
  double linear_ = 0.0;
  double constant_ = 0.0;
};

// Theorem-5 style extended family,
//   f''(x) = a x^g + x^g sum_{i=1..n} b_i (ln x)^i
//          + (1/x) sum_{i=1..n} btilde_i (ln x)^{i-1}
struct ExtendedShapeParams {
  double gamma = 0.0;
  double a = 1.0;  // > 0
  std::vector<double> b;
  std::vector<double> btilde;
};

double extended_second_derivative(const ExtendedShapeParams& p, double x);
bool convexity_scan(const ExtendedShapeParams& p, std::span<const double> grid);

}  // namespace levymin
