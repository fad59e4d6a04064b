#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

namespace levymin {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// argument outside the domain of an operation (x <= 0 for f, etc.)
struct DomainError : Error {
  using Error::Error;
};

// value outside the attainable range of f'; carries the open interval
struct RangeError : Error {
  double lo, hi;
  RangeError(const std::string& msg, double lo_, double hi_)
      : Error(msg), lo(lo_), hi(hi_) {}
};

// quadrature non-convergence and similar numeric failures
struct NumericError : Error {
  using Error::Error;
};

struct UnsupportedMeasure : Error {
  using Error::Error;
};

// y_candidate argument left the range of f' (signals cdsec1 for that theta)
struct CandidateInvalid : Error {
  using Error::Error;
};

struct NoSolution : Error {
  double best_residual;
  NoSolution(const std::string& msg, double best)
      : Error(msg), best_residual(best) {}
};

struct ExistenceViolation : Error {
  std::string condition;  // "cdsec1", ...
  ExistenceViolation(const std::string& msg, std::string cond)
      : Error(msg), condition(std::move(cond)) {}
};

struct OverflowError : Error {
  double exponent;
  OverflowError(const std::string& msg, double e) : Error(msg), exponent(e) {}
};

struct ParseError : Error {
  using Error::Error;
};

// Deterministic pairwise summation; order-independent of any threading
// because the reduction tree is fixed by index order.
inline double pairwise_sum(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

}  // namespace levymin
