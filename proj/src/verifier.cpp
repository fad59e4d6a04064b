#include "levymin/verifier.hpp"

#include <cmath>
#include <sstream>

namespace levymin {

namespace {

constexpr double kSignTol = 1e-12;  // for b'cb and ln Y sign decisions

Eigen::VectorXd expm1_vec(const Eigen::VectorXd& y) {
  Eigen::VectorXd e(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) e(i) = std::expm1(y(i));
  return e;
}

}  // namespace

FundamentalCheckReport fundamental_residual(const DivergenceSpec& spec,
                                            const GirsanovParams& params,
                                            std::span<const double> x_grid,
                                            const LevyMeasure& nu) {
  const auto* fa = std::get_if<FiniteAtomic>(&nu);
  if (fa == nullptr) {
    throw UnsupportedMeasure(
        "fundamental_residual: atoms of nu must be enumerable");
  }
  FundamentalCheckReport rep;
  rep.grid.assign(x_grid.begin(), x_grid.end());
  if (fa->atoms.empty() || x_grid.empty()) return rep;

  const std::size_t nx = x_grid.size(), ny = fa->atoms.size();
  Eigen::MatrixXd lhs(nx, ny);
  for (std::size_t k = 0; k < ny; ++k) {
    const auto& atom = fa->atoms[k];
    const double Y = params.y_at(k, atom.location);
    const Eigen::VectorXd e = expm1_vec(atom.location);
    const double be = params.beta.dot(e);
    const double ve = params.V.dot(e);
    for (std::size_t i = 0; i < nx; ++i) {
      const double x = x_grid[i];
      double l;
      try {
        l = spec.prime(x * Y) - spec.prime(x);
      } catch (const DomainError& err) {
        std::ostringstream os;
        os << err.what() << " (grid x = " << x << ", atom " << k << ")";
        throw DomainError(os.str());
      }
      lhs(i, k) = l;
      const double rhs = x * spec.second(x) * be + ve;
      const double rel = std::abs(l - rhs) / (1.0 + std::abs(l));
      rep.max_residual_equ = std::max(rep.max_residual_equ, rel);
    }
  }

  if (nx >= 2 && ny >= 2) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(lhs);
    const auto& sv = svd.singularValues();
    if (sv(0) > 1e-300) rep.rank1_defect = sv(1) / sv(0);
  }
  return rep;
}

SupportClass classify_support(const LevyTriplet& t,
                              const GirsanovParams& params) {
  const double quad = params.beta.dot(t.c_sym() * params.beta);
  if (std::abs(quad) > kSignTol) return SupportClass::WholePositiveLine;

  bool any_pos = false, any_neg = false;
  auto classify_one = [&](double Y) {
    const double ln_y = std::log(Y);
    if (ln_y > kSignTol) any_pos = true;
    if (ln_y < -kSignTol) any_neg = true;
  };
  if (const auto* fa = std::get_if<FiniteAtomic>(&t.nu)) {
    for (std::size_t j = 0; j < fa->atoms.size(); ++j) {
      classify_one(params.y_at(j, fa->atoms[j].location));
    }
  } else {
    levy_integral(t.nu, [&](const Eigen::VectorXd& y) {
      classify_one(params.y(y));
      return 0.0;
    });
  }

  if (any_pos && any_neg) return SupportClass::WholePositiveLine;
  if (any_pos) return SupportClass::RayUpward;
  if (any_neg) return SupportClass::RayDownward;
  throw DomainError(
      "classify_support: Y == 1 on supp(nu) and b'cb == 0; Z_T is "
      "degenerate and has no support classification");
}

MinimalityReport minimality_certificate(
    const LevyTriplet& t, const DivergenceSpec& spec,
    const MinimalMeasureSolution& solution,
    const std::vector<GirsanovParams>& alternatives,
    const SimulationConfig& mc) {
  PathBatch batch = simulate(t, mc);
  const Eigen::VectorXd z_sol = density_for(batch, t, solution.params);

  std::vector<double> weight(z_sol.size());
  std::vector<double> g_sol(z_sol.size());
  for (Eigen::Index p = 0; p < z_sol.size(); ++p) {
    weight[static_cast<std::size_t>(p)] = spec.prime(z_sol(p));
    g_sol[static_cast<std::size_t>(p)] =
        z_sol(p) * weight[static_cast<std::size_t>(p)];
  }
  const Estimate sol_est = estimate(g_sol);

  MinimalityReport rep;
  rep.solution_value = sol_est.mean;
  rep.solution_se = sol_est.se;
  rep.certified = true;

  std::vector<double> diff(z_sol.size());
  for (const auto& alt : alternatives) {
    MinimalityEntry entry;
    entry.drift_residual = drift_residual(t, alt).cwiseAbs().maxCoeff();
    entry.martingale_ok = entry.drift_residual <= 1e-8;
    if (!entry.martingale_ok) {
      rep.entries.push_back(entry);  // rejected; excluded from the certificate
      continue;
    }
    const Eigen::VectorXd z_alt = density_for(batch, t, alt);
    for (Eigen::Index p = 0; p < z_alt.size(); ++p) {
      diff[static_cast<std::size_t>(p)] =
          (z_alt(p) - z_sol(p)) * weight[static_cast<std::size_t>(p)];
    }
    const Estimate est = estimate(diff);
    entry.difference = est.mean;
    entry.se = est.se;
    entry.pass = est.mean >= -3.0 * est.se;
    rep.certified = rep.certified && entry.pass;
    rep.entries.push_back(entry);
  }
  return rep;
}

std::vector<GirsanovParams> martingale_alternatives(
    const LevyTriplet& t, const GirsanovParams& solution,
    std::span<const double> steps) {
  const auto* fa = std::get_if<FiniteAtomic>(&t.nu);
  if (fa == nullptr || fa->atoms.empty()) return {};
  const std::size_t m = fa->atoms.size();

  // drift is linear in the per-atom Y values: row i of A is
  // lambda_j (e^{y_{j,i}} - 1); kernel moves preserve martingality exactly
  Eigen::MatrixXd A(t.dim, m);
  std::vector<double> y_base(m);
  for (std::size_t j = 0; j < m; ++j) {
    A.col(j) = fa->atoms[j].mass * expm1_vec(fa->atoms[j].location);
    y_base[j] = solution.y_at(j, fa->atoms[j].location);
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  const Eigen::MatrixXd kernel = lu.kernel();
  if (kernel.cols() == 0 || kernel.col(0).norm() == 0.0) return {};
  const Eigen::VectorXd dir = kernel.col(0) / kernel.col(0).norm();

  std::vector<GirsanovParams> alts;
  for (double s : steps) {
    std::vector<double> y_new(m);
    bool positive = true;
    for (std::size_t j = 0; j < m; ++j) {
      y_new[j] = y_base[j] + s * dir(static_cast<Eigen::Index>(j));
      positive = positive && y_new[j] > 0.0;
    }
    if (!positive) continue;
    alts.push_back(
        GirsanovParams::atom_table(solution.beta, std::move(y_new), t.dim));
  }
  return alts;
}

ScaleCheck scale_invariance_check(const DivergenceSpec& spec,
                                  std::span<const double> scales) {
  ScaleCheck check;
  check.applicable = spec.terms().size() == 1;
  check.all_pass = true;
  if (!check.applicable) return check;

  std::vector<double> grid;
  for (int i = 0; i <= 40; ++i) {
    grid.push_back(std::pow(10.0, -2.0 + 4.0 * i / 40.0));
  }
  for (double u : scales) {
    ScaleCheck::Entry entry;
    entry.scale = u;
    const auto dec = spec.scale_decomposition(u);
    for (double x : grid) {
      const double lhs = spec.value(u * x);
      const double rhs = dec->A * spec.value(x) + dec->B * x + dec->C;
      entry.max_rel_err = std::max(
          entry.max_rel_err, std::abs(lhs - rhs) / (1.0 + std::abs(lhs)));
    }
    entry.pass = entry.max_rel_err < 1e-10;
    check.all_pass = check.all_pass && entry.pass;
    check.entries.push_back(entry);
  }
  return check;
}

TimeCheck time_invariance_check(const LevyTriplet& t,
                                const DivergenceSpec& spec,
                                std::span<const double> T_list,
                                const SolverConfig& cfg) {
  TimeCheck check;
  if (T_list.size() < 2) {
    throw DomainError("time_invariance_check: need at least two horizons");
  }
  std::vector<MinimalMeasureSolution> sols;
  for (std::size_t i = 0; i < T_list.size(); ++i) {
    sols.push_back(solve(t, spec, cfg));  // the drift equation is T-free
  }
  for (std::size_t i = 1; i < sols.size(); ++i) {
    const auto& a = sols[0].params;
    const auto& b = sols[i].params;
    check.max_param_deviation = std::max(
        {check.max_param_deviation,
         (a.beta - b.beta).cwiseAbs().maxCoeff(),
         (a.theta - b.theta).cwiseAbs().maxCoeff(),
         (a.V - b.V).cwiseAbs().maxCoeff()});
  }

  // term-wise scaling law against the first horizon
  const double T0 = T_list[0];
  const auto base = divergence_terms(t, spec, sols[0].params, T0);
  for (std::size_t i = 1; i < T_list.size(); ++i) {
    const double T = T_list[i];
    const auto terms = divergence_terms(t, spec, sols[i].params, T);
    for (std::size_t k = 0; k < terms.size(); ++k) {
      double err;
      if (terms[k].is_power) {
        // exponent T * rate must be linear in T
        const double expect = (T / T0) * (T0 * base[k].rate);
        err = std::abs(T * terms[k].rate - expect) / (1.0 + std::abs(expect));
      } else {
        const double expect = (T / T0) * base[k].value;
        err = std::abs(terms[k].value - expect) / (1.0 + std::abs(expect));
      }
      check.max_scaling_err = std::max(check.max_scaling_err, err);
    }
  }
  check.pass =
      check.max_param_deviation < 1e-9 && check.max_scaling_err < 1e-9;
  return check;
}

}  // namespace levymin
