#include "levymin/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace levymin {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_entropy(double gamma) { return gamma == -1.0; }
bool is_rev_entropy(double gamma) { return gamma == -2.0; }

double term_value(const DivergenceTerm& t, double x) {
  if (is_entropy(t.gamma)) return t.weight * x * std::log(x);
  if (is_rev_entropy(t.gamma)) return -t.weight * std::log(x);
  return t.weight * DivergenceSpec::c_coef(t.gamma) *
         std::pow(x, t.gamma + 2.0);
}

double term_prime(const DivergenceTerm& t, double x) {
  if (is_entropy(t.gamma)) return t.weight * (std::log(x) + 1.0);
  if (is_rev_entropy(t.gamma)) return -t.weight / x;
  return t.weight * DivergenceSpec::c_coef(t.gamma) * (t.gamma + 2.0) *
         std::pow(x, t.gamma + 1.0);
}

double term_second(const DivergenceTerm& t, double x) {
  return t.weight * DivergenceSpec::a_coef(t.gamma) * std::pow(x, t.gamma);
}

void require_positive(double x, const char* op) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    std::ostringstream os;
    os << op << ": argument must be a positive real, got " << x;
    throw DomainError(os.str());
  }
}

}  // namespace

DivergenceSpec::DivergenceSpec(std::vector<DivergenceTerm> terms, double linear,
                               double constant)
    : terms_(std::move(terms)), linear_(linear), constant_(constant) {
  if (terms_.empty()) {
    throw std::invalid_argument("DivergenceSpec: at least one term required");
  }
  for (const auto& t : terms_) {
    if (!(t.weight > 0.0) || !std::isfinite(t.weight) ||
        !std::isfinite(t.gamma)) {
      throw std::invalid_argument("DivergenceSpec: weights must be > 0");
    }
  }
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    for (std::size_t j = i + 1; j < terms_.size(); ++j) {
      if (terms_[i].gamma == terms_[j].gamma) {
        throw std::invalid_argument("DivergenceSpec: exponents must be distinct");
      }
    }
  }
}

double DivergenceSpec::a_coef(double gamma) {
  if (is_entropy(gamma) || is_rev_entropy(gamma)) return 1.0;
  return std::abs((gamma + 1.0) * (gamma + 2.0));
}

double DivergenceSpec::c_coef(double gamma) {
  return (gamma + 1.0) / (gamma + 2.0) >= 0.0 ? 1.0 : -1.0;
}

double DivergenceSpec::value(double x) const {
  require_positive(x, "f_value");
  double v = linear_ * x + constant_;
  for (const auto& t : terms_) v += term_value(t, x);
  return v;
}

double DivergenceSpec::prime(double x) const {
  require_positive(x, "f_prime");
  double v = linear_;
  for (const auto& t : terms_) v += term_prime(t, x);
  return v;
}

double DivergenceSpec::second(double x) const {
  require_positive(x, "f_second");
  double v = 0.0;
  for (const auto& t : terms_) v += term_second(t, x);
  return v;
}

std::pair<double, double> DivergenceSpec::prime_range() const {
  double gmin = terms_.front().gamma, gmax = gmin;
  for (const auto& t : terms_) {
    gmin = std::min(gmin, t.gamma);
    gmax = std::max(gmax, t.gamma);
  }
  // each term's f' tends to 0 at 0+ when gamma > -1 and to -inf otherwise;
  // at +inf it tends to +inf when gamma >= -1 and to 0- otherwise
  const double lo = gmin <= -1.0 ? -kInf : linear_;
  const double hi = gmax >= -1.0 ? kInf : linear_;
  return {lo, hi};
}

double DivergenceSpec::prime_inverse(double u) const {
  const auto [lo, hi] = prime_range();
  if (!(u > lo && u < hi)) {
    std::ostringstream os;
    os << "f_prime_inverse: " << u << " outside the attainable range ("
       << lo << ", " << hi << ")";
    throw RangeError(os.str(), lo, hi);
  }

  if (terms_.size() == 1) {
    const auto& t = terms_.front();
    const double s = u - linear_;
    if (is_entropy(t.gamma)) return std::exp(s / t.weight - 1.0);
    if (is_rev_entropy(t.gamma)) return t.weight / (-s);
    const double coef = t.weight * c_coef(t.gamma) * (t.gamma + 2.0);
    return std::pow(s / coef, 1.0 / (t.gamma + 1.0));
  }

  // bracket by doubling/halving from 1, then safeguarded Newton
  double xlo = 1.0, xhi = 1.0;
  if (prime(1.0) < u) {
    while (prime(xhi) < u) {
      xhi *= 2.0;
      if (xhi > 1e300) throw NumericError("f_prime_inverse: bracket overflow");
    }
    xlo = xhi * 0.5;
  } else {
    while (prime(xlo) > u) {
      xlo *= 0.5;
      if (xlo < 1e-300) throw NumericError("f_prime_inverse: bracket underflow");
    }
    xhi = xlo * 2.0;
  }

  const double tol = 1e-12 * (1.0 + std::abs(u));
  double x = 0.5 * (xlo + xhi);
  for (int it = 0; it < 200; ++it) {
    const double r = prime(x) - u;
    if (std::abs(r) <= tol) return x;
    if (r > 0.0) {
      xhi = x;
    } else {
      xlo = x;
    }
    double xn = x - r / second(x);
    if (!(xn > xlo && xn < xhi)) xn = 0.5 * (xlo + xhi);
    x = xn;
  }
  if (std::abs(prime(x) - u) <= tol) return x;
  throw NumericError("f_prime_inverse: Newton did not converge");
}

std::optional<PowerFamily> DivergenceSpec::power_family() const {
  if (terms_.size() != 1) return std::nullopt;
  const auto& t = terms_.front();
  return PowerFamily{t.weight * a_coef(t.gamma), t.gamma};
}

std::optional<AffineScale> DivergenceSpec::scale_decomposition(double u) const {
  require_positive(u, "affine_scale_decomposition");
  if (terms_.size() != 1) return std::nullopt;
  const auto& t = terms_.front();
  if (is_entropy(t.gamma)) {
    const double A = u;
    return AffineScale{A, t.weight * u * std::log(u), constant_ * (1.0 - A)};
  }
  if (is_rev_entropy(t.gamma)) {
    return AffineScale{1.0, linear_ * (u - 1.0), -t.weight * std::log(u)};
  }
  const double A = std::pow(u, t.gamma + 2.0);
  return AffineScale{A, linear_ * (u - A), constant_ * (1.0 - A)};
}

double extended_second_derivative(const ExtendedShapeParams& p, double x) {
  require_positive(x, "extended_second_derivative");
  const double lx = std::log(x);
  double v = p.a * std::pow(x, p.gamma);
  double pw = 1.0;
  for (std::size_t i = 0; i < p.b.size(); ++i) {
    pw *= lx;  // (ln x)^{i+1}
    v += std::pow(x, p.gamma) * p.b[i] * pw;
  }
  pw = 1.0;
  for (std::size_t i = 0; i < p.btilde.size(); ++i) {
    v += p.btilde[i] * pw / x;  // (ln x)^i
    pw *= lx;
  }
  return v;
}

bool convexity_scan(const ExtendedShapeParams& p, std::span<const double> grid) {
  for (double x : grid) {
    if (!(extended_second_derivative(p, x) > 0.0)) return false;
  }
  return true;
}

}  // namespace levymin
