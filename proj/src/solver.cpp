#include "levymin/solver.hpp"

#include <cmath>
#include <sstream>

namespace levymin {

namespace {

constexpr double kKernelCut = 1e-10;    // eigenvalue cutoff for ker(c)
constexpr double kYPositiveMin = 1e-6;  // below this Y counts as forced to 0

Eigen::VectorXd expm1_vec(const Eigen::VectorXd& y) {
  Eigen::VectorXd e(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) e(i) = std::expm1(y(i));
  return e;
}

// sum over nu of fn(Y(y), y); works for atoms (indexed Y) and densities
double nu_integral_of_y(const LevyMeasure& nu, const GirsanovParams& params,
                        const std::function<double(double, const Eigen::VectorXd&)>& fn) {
  if (const auto* fa = std::get_if<FiniteAtomic>(&nu)) {
    double sum = 0.0;
    for (std::size_t j = 0; j < fa->atoms.size(); ++j) {
      const auto& atom = fa->atoms[j];
      sum += atom.mass * fn(params.y_at(j, atom.location), atom.location);
    }
    return sum;
  }
  return levy_integral(nu, [&](const Eigen::VectorXd& y) {
    return fn(params.y(y), y);
  });
}

// drift residual as a function of theta alone, using c beta = c theta / f''(1)
Eigen::VectorXd residual_theta(const LevyTriplet& t, const DivergenceSpec& spec,
                               const Eigen::VectorXd& theta) {
  const double f2 = spec.second(1.0);
  const Eigen::MatrixXd c = t.c_sym();
  Eigen::VectorXd r = t.b + 0.5 * c.diagonal() + c * theta / f2;

  if (const auto* fa = std::get_if<FiniteAtomic>(&t.nu)) {
    for (const auto& atom : fa->atoms) {
      const double Y = y_candidate(spec, theta, atom.location);
      r += atom.mass * (expm1_vec(atom.location) * Y -
                        truncation_h(t.trunc, atom.location));
    }
    return r;
  }
  for (int i = 0; i < t.dim; ++i) {
    r(i) += levy_integral(t.nu, [&](const Eigen::VectorXd& y) {
      const double Y = y_candidate(spec, theta, y);
      return std::expm1(y(i)) * Y - truncation_h(t.trunc, y)(i);
    });
  }
  return r;
}

struct NewtonOutcome {
  bool converged = false;
  bool ever_evaluable = false;
  Eigen::VectorXd theta;
  double best_norm = std::numeric_limits<double>::infinity();
};

// damped Newton with forward-difference Jacobian and min-norm steps
void newton_from(const LevyTriplet& t, const DivergenceSpec& spec,
                 const SolverConfig& cfg, const Eigen::VectorXd& start,
                 NewtonOutcome& out) {
  const int d = t.dim;
  Eigen::VectorXd theta = start, r;
  try {
    r = residual_theta(t, spec, theta);
  } catch (const CandidateInvalid&) {
    return;
  }
  out.ever_evaluable = true;

  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    const double rinf = r.cwiseAbs().maxCoeff();
    if (rinf < out.best_norm) {
      out.best_norm = rinf;
      out.theta = theta;
    }
    if (rinf <= cfg.tol) {
      out.converged = true;
      return;
    }

    Eigen::MatrixXd J(d, d);
    try {
      for (int j = 0; j < d; ++j) {
        const double h = cfg.fd_step * (1.0 + std::abs(theta(j)));
        Eigen::VectorXd tp = theta;
        tp(j) += h;
        J.col(j) = (residual_theta(t, spec, tp) - r) / h;
      }
    } catch (const CandidateInvalid&) {
      return;  // boundary of the feasible region; try another start
    }

    Eigen::VectorXd step =
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(J).solve(-r);
    if (!step.allFinite()) return;

    const double rnorm = r.norm();
    double s = 1.0;
    bool accepted = false;
    for (int half = 0; half < 40 && !accepted; ++half, s *= 0.5) {
      const Eigen::VectorXd cand = theta + s * step;
      try {
        Eigen::VectorXd rc = residual_theta(t, spec, cand);
        if (rc.norm() < rnorm) {
          theta = cand;
          r = std::move(rc);
          accepted = true;
        }
      } catch (const CandidateInvalid&) {
        // shrink further
      }
    }
    if (!accepted) return;  // stalled
  }
  const double rinf = r.cwiseAbs().maxCoeff();
  if (rinf < out.best_norm) {
    out.best_norm = rinf;
    out.theta = theta;
  }
  if (rinf <= cfg.tol) out.converged = true;
}

// Recovers the kernel component: V in ker(c) minimizing the residual of
//   f'(x Y(y)) - f'(x) = x f''(x) sum beta_i (e^{y_i}-1) + sum V_j (e^{y_j}-1)
// with beta = (theta - V)/f''(1), by least squares over an x-grid and the
// atoms. Power-family data drive V to 0; where the equation carries no
// x-information (entropy, or no atoms) the split defaults to V = P_ker(theta)
// so that beta keeps no unsupported kernel component.
Eigen::VectorXd split_kernel(const LevyTriplet& t, const DivergenceSpec& spec,
                             const Eigen::VectorXd& theta) {
  const int d = t.dim;
  const auto eig = t.cov_eig();
  const double scale = std::max(1.0, eig.evals.maxCoeff());
  std::vector<int> kernel_cols;
  for (int i = 0; i < d; ++i) {
    if (eig.evals(i) <= kKernelCut * scale) kernel_cols.push_back(i);
  }
  if (kernel_cols.empty()) return Eigen::VectorXd::Zero(d);

  const std::size_t cols = kernel_cols.size();
  Eigen::MatrixXd K(d, cols);
  for (std::size_t j = 0; j < cols; ++j) {
    K.col(j) = eig.evecs.col(kernel_cols[j]);
  }
  const Eigen::VectorXd q0 = K.transpose() * theta;  // default: V = P_ker theta

  const auto* fa = std::get_if<FiniteAtomic>(&t.nu);
  if (fa == nullptr || fa->atoms.empty()) return K * q0;

  const double f2 = spec.second(1.0);
  const double fp1 = spec.prime(1.0);
  const std::vector<double> grid = {0.5, 2.0 / 3.0, 1.0, 1.5, 2.0, 3.0, 5.0};
  const std::size_t rows = grid.size() * fa->atoms.size();
  Eigen::MatrixXd D(rows, cols);
  Eigen::VectorXd res0(rows);

  std::size_t row = 0;
  for (std::size_t k = 0; k < fa->atoms.size(); ++k) {
    const Eigen::VectorXd e = expm1_vec(fa->atoms[k].location);
    const double Y = spec.prime_inverse(fp1 + theta.dot(e));
    for (double x : grid) {
      const double m = x * spec.second(x) / f2;  // x f''(x) / f''(1)
      const double r0 = spec.prime(x * Y) - spec.prime(x) - m * theta.dot(e);
      for (std::size_t j = 0; j < cols; ++j) {
        D(row, j) = (m - 1.0) * K.col(j).dot(e);
      }
      res0(row) = r0;
      ++row;
    }
  }

  // minimize ||res0 + D q|| around the default q0: the min-norm correction
  // leaves indeterminate directions at the default
  const Eigen::VectorXd delta =
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(D).solve(
          -(res0 + D * q0));
  return K * (q0 + delta);
}

}  // namespace

GirsanovParams GirsanovParams::esscher(
    std::shared_ptr<const DivergenceSpec> spec, Eigen::VectorXd beta,
    Eigen::VectorXd theta, Eigen::VectorXd V) {
  GirsanovParams p;
  p.beta = std::move(beta);
  p.theta = std::move(theta);
  p.V = std::move(V);
  p.spec = std::move(spec);
  return p;
}

GirsanovParams GirsanovParams::atom_table(Eigen::VectorXd beta,
                                          std::vector<double> y_values,
                                          int dim) {
  GirsanovParams p;
  p.beta = std::move(beta);
  p.theta = Eigen::VectorXd::Zero(dim);
  p.V = Eigen::VectorXd::Zero(dim);
  p.atom_y = std::move(y_values);
  return p;
}

double GirsanovParams::y(const Eigen::VectorXd& yvec) const {
  if (!spec) {
    throw Error("GirsanovParams: no divergence attached; Y defined only at atoms");
  }
  return y_candidate(*spec, theta, yvec);
}

double GirsanovParams::y_at(std::size_t atom_index,
                            const Eigen::VectorXd& yvec) const {
  if (atom_y) {
    if (atom_index >= atom_y->size()) {
      throw Error("GirsanovParams: atom index outside the Y table");
    }
    return (*atom_y)[atom_index];
  }
  return y(yvec);
}

double y_candidate(const DivergenceSpec& spec, const Eigen::VectorXd& theta,
                   const Eigen::VectorXd& y) {
  if (theta.size() != y.size()) {
    throw DomainError("y_candidate: theta and y dimensions differ");
  }
  const double u = spec.prime(1.0) + theta.dot(expm1_vec(y));
  try {
    return spec.prime_inverse(u);
  } catch (const RangeError& e) {
    std::ostringstream os;
    os << "y_candidate: f'(1) + theta.(e^y - 1) = " << u
       << " outside the range of f' at y = (" << y.transpose() << ")";
    throw CandidateInvalid(os.str());
  }
}

Eigen::VectorXd drift_residual(const LevyTriplet& t,
                               const GirsanovParams& params) {
  const Eigen::MatrixXd c = t.c_sym();
  Eigen::VectorXd r = t.b + 0.5 * c.diagonal() + c * params.beta;
  if (const auto* fa = std::get_if<FiniteAtomic>(&t.nu)) {
    for (std::size_t j = 0; j < fa->atoms.size(); ++j) {
      const auto& atom = fa->atoms[j];
      const double Y = params.y_at(j, atom.location);
      r += atom.mass * (expm1_vec(atom.location) * Y -
                        truncation_h(t.trunc, atom.location));
    }
    return r;
  }
  for (int i = 0; i < t.dim; ++i) {
    r(i) += levy_integral(t.nu, [&](const Eigen::VectorXd& y) {
      return std::expm1(y(i)) * params.y(y) - truncation_h(t.trunc, y)(i);
    });
  }
  return r;
}

MinimalMeasureSolution solve(const LevyTriplet& t, const DivergenceSpec& spec,
                             const SolverConfig& cfg) {
  const int d = t.dim;
  std::vector<Eigen::VectorXd> starts;
  starts.push_back(Eigen::VectorXd::Zero(d));
  for (int i = 0; i < d; ++i) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(d);
    s(i) = 0.5;
    starts.push_back(s);
    starts.push_back(-s);
  }

  NewtonOutcome out;
  int attempts = 0;
  for (const auto& start : starts) {
    if (attempts++ > cfg.max_restarts) break;
    newton_from(t, spec, cfg, start, out);
    if (out.converged) break;
  }
  if (!out.ever_evaluable) {
    throw ExistenceViolation(
        "solve: Y(y) leaves the positive domain at every start (cdsec1)",
        "cdsec1");
  }
  if (!out.converged) {
    std::ostringstream os;
    os << "solve: no convergence after " << attempts
       << " starts; best max-norm residual " << out.best_norm;
    throw NoSolution(os.str(), out.best_norm);
  }

  const double f2 = spec.second(1.0);
  const Eigen::VectorXd theta = out.theta;
  const Eigen::VectorXd V = cfg.force_v_zero
                                ? Eigen::VectorXd::Zero(d)
                                : split_kernel(t, spec, theta);
  const Eigen::VectorXd beta = (theta - V) / f2;

  MinimalMeasureSolution sol;
  sol.params = GirsanovParams::esscher(
      std::make_shared<DivergenceSpec>(spec), beta, theta, V);
  sol.drift_residual_norm =
      drift_residual(t, sol.params).cwiseAbs().maxCoeff();
  sol.existence = check_existence(t, spec, sol.params);
  sol.hellinger_rate = hellinger_rate(t, sol.params);
  try {
    sol.divergence_per_T = divergence_closed_form(t, spec, sol.params, 1.0);
  } catch (const OverflowError&) {
    sol.divergence_per_T = std::numeric_limits<double>::infinity();
  }
  sol.status = "solved";
  return sol;
}

ExistenceReport check_existence(const LevyTriplet& t,
                                const DivergenceSpec& spec,
                                const GirsanovParams& params) {
  ExistenceReport rep;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  // cdsec1: Y strictly positive (and not numerically forced to 0)
  try {
    double min_y = std::numeric_limits<double>::infinity();
    if (const auto* fa = std::get_if<FiniteAtomic>(&t.nu)) {
      for (std::size_t j = 0; j < fa->atoms.size(); ++j) {
        min_y = std::min(min_y, params.y_at(j, fa->atoms[j].location));
      }
      if (fa->atoms.empty()) min_y = 1.0;
    } else {
      // scan the quadrature support through the integral machinery
      levy_integral(t.nu, [&](const Eigen::VectorXd& y) {
        min_y = std::min(min_y, params.y(y));
        return 0.0;
      });
    }
    rep.min_y = min_y;
    rep.y_positive = min_y >= kYPositiveMin;
  } catch (const Error&) {
    rep.min_y = 0.0;
    rep.y_positive = false;
  }

  // cdsec2: sum_i int_{|y|>=1} (e^{y_i}-1) Y nu(dy) finite
  try {
    rep.cdsec2_value = nu_integral_of_y(
        t.nu, params, [](double Y, const Eigen::VectorXd& y) {
          if (y.norm() < 1.0) return 0.0;
          double s = 0.0;
          for (Eigen::Index i = 0; i < y.size(); ++i) s += std::expm1(y(i));
          return s * Y;
        });
    rep.exp_integrable = std::isfinite(rep.cdsec2_value);
  } catch (const Error&) {
    rep.cdsec2_value = nan;
    rep.exp_integrable = false;
  }

  // Hellinger integral int (sqrt(Y)-1)^2 nu(dy)
  try {
    rep.hellinger_integral = nu_integral_of_y(
        t.nu, params, [](double Y, const Eigen::VectorXd&) {
          const double s = std::sqrt(std::max(Y, 0.0)) - 1.0;
          return s * s;
        });
    rep.hellinger_finite = std::isfinite(rep.hellinger_integral);
  } catch (const Error&) {
    rep.hellinger_integral = nan;
    rep.hellinger_finite = false;
  }

  // predictable criterion int [f(Y) - f(1) - f'(1)(Y-1)] nu(dy)
  try {
    const double f1 = spec.value(1.0), fp1 = spec.prime(1.0);
    rep.predictable_value = nu_integral_of_y(
        t.nu, params, [&](double Y, const Eigen::VectorXd&) {
          return spec.value(Y) - f1 - fp1 * (Y - 1.0);
        });
    rep.predictable_integrable = std::isfinite(rep.predictable_value);
  } catch (const Error&) {
    rep.predictable_value = nan;
    rep.predictable_integrable = false;
  }

  rep.overall = rep.y_positive && rep.exp_integrable && rep.hellinger_finite &&
                rep.predictable_integrable;
  return rep;
}

double hellinger_rate(const LevyTriplet& t, const GirsanovParams& params) {
  const double quad = params.beta.dot(t.c_sym() * params.beta);
  double jump;
  try {
    jump = nu_integral_of_y(t.nu, params,
                            [](double Y, const Eigen::VectorXd&) {
                              const double s = std::sqrt(std::max(Y, 0.0)) - 1.0;
                              return s * s;
                            });
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
  return 0.5 * quad + 0.125 * jump;
}

std::vector<TermValue> divergence_terms(const LevyTriplet& t,
                                        const DivergenceSpec& spec,
                                        const GirsanovParams& params,
                                        double T) {
  if (!(T > 0.0)) throw DomainError("divergence_closed_form: T must be > 0");
  const double quad = params.beta.dot(t.c_sym() * params.beta);
  std::vector<TermValue> out;
  for (const auto& term : spec.terms()) {
    TermValue tv;
    tv.gamma = term.gamma;
    tv.weight = term.weight;
    if (term.gamma == -1.0) {
      tv.rate = 0.5 * quad +
                nu_integral_of_y(t.nu, params,
                                 [](double Y, const Eigen::VectorXd&) {
                                   return Y * std::log(Y) - Y + 1.0;
                                 });
      tv.value = term.weight * T * tv.rate;
    } else if (term.gamma == -2.0) {
      tv.rate = 0.5 * quad +
                nu_integral_of_y(t.nu, params,
                                 [](double Y, const Eigen::VectorXd&) {
                                   return -std::log(Y) + Y - 1.0;
                                 });
      tv.value = term.weight * T * tv.rate;
    } else {
      const double alpha = term.gamma + 2.0;
      tv.is_power = true;
      tv.rate = 0.5 * alpha * (alpha - 1.0) * quad +
                nu_integral_of_y(t.nu, params,
                                 [alpha](double Y, const Eigen::VectorXd&) {
                                   return std::pow(Y, alpha) - 1.0 -
                                          alpha * (Y - 1.0);
                                 });
      const double expo = T * tv.rate;
      if (expo > 700.0) {
        std::ostringstream os;
        os << "divergence_closed_form: exponent " << expo
           << " overflows for gamma = " << term.gamma;
        throw OverflowError(os.str(), expo);
      }
      tv.value =
          term.weight * DivergenceSpec::c_coef(term.gamma) * std::exp(expo);
    }
    out.push_back(tv);
  }
  return out;
}

double divergence_closed_form(const LevyTriplet& t, const DivergenceSpec& spec,
                              const GirsanovParams& params, double T) {
  double total = spec.linear() + spec.constant();  // E_P Z_T = 1
  for (const auto& tv : divergence_terms(t, spec, params, T)) {
    total += tv.value;
  }
  return total;
}

double EsscherForm::operator()(const Eigen::VectorXd& y) const {
  double s = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    s += theta(i) * std::expm1(y(i));
  }
  if (gamma == -1.0) return std::exp(s / a);
  const double base = 1.0 + (gamma + 1.0) / a * s;
  if (!(base > 0.0)) {
    throw CandidateInvalid("esscher_form: base of the power form is not positive");
  }
  return std::pow(base, 1.0 / (gamma + 1.0));
}

std::optional<EsscherForm> esscher_form(const DivergenceSpec& spec,
                                        const Eigen::VectorXd& theta) {
  const auto pf = spec.power_family();
  if (!pf) return std::nullopt;
  EsscherForm form;
  form.a = pf->a;
  form.gamma = pf->gamma;
  form.theta = theta;
  std::ostringstream os;
  if (pf->gamma == -1.0) {
    os << "Y(y) = exp( sum_i theta_i (e^{y_i} - 1) / " << pf->a << " )";
  } else {
    os << "Y(y) = ( 1 + " << (pf->gamma + 1.0) / pf->a
       << " * sum_i theta_i (e^{y_i} - 1) )^(" << 1.0 / (pf->gamma + 1.0)
       << ")";
  }
  form.formula = os.str();
  return form;
}

}  // namespace levymin
