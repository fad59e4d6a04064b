#include "levymin/levy_model.hpp"

#include <cmath>
#include <sstream>

namespace levymin {

namespace {

// 4-point Gauss-Legendre on [-1, 1]
constexpr double kGlNode[4] = {-0.8611363115940526, -0.3399810435848563,
                               0.3399810435848563, 0.8611363115940526};
constexpr double kGlWeight[4] = {0.3478548451374538, 0.6521451548625461,
                                 0.6521451548625461, 0.3478548451374538};

struct QuadNode {
  double y;
  double w;
};

// log-spaced panels on [r_min, r_max] mirrored to the negative side, with a
// forced panel edge at |y| = 1 where the canonical truncation and 1 ^ |y|^2
// integrands have kinks
std::vector<QuadNode> radial_nodes(const RadialDensity& r, int panels) {
  std::vector<double> edges;
  auto add_group = [&edges](double a, double b, int p) {
    p = std::max(p, 1);
    const int start = edges.empty() ? 0 : 1;
    for (int k = start; k <= p; ++k) {
      edges.push_back(a * std::pow(b / a, double(k) / p));
    }
  };
  if (r.r_min < 1.0 && r.r_max > 1.0) {
    add_group(r.r_min, 1.0, panels / 2);
    add_group(1.0, r.r_max, panels - panels / 2);
  } else {
    add_group(r.r_min, r.r_max, panels);
  }

  std::vector<QuadNode> nodes;
  nodes.reserve(8 * edges.size());
  for (int side = 0; side < 2; ++side) {
    const double sign = side == 0 ? 1.0 : -1.0;
    for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
      const double mid = 0.5 * (edges[k] + edges[k + 1]);
      const double half = 0.5 * (edges[k + 1] - edges[k]);
      for (int j = 0; j < 4; ++j) {
        nodes.push_back({sign * (mid + half * kGlNode[j]), half * kGlWeight[j]});
      }
    }
  }
  return nodes;
}

double quad_pass(const RadialDensity& r, int panels,
                 const std::function<double(const Eigen::VectorXd&)>& g) {
  Eigen::VectorXd y(1);
  double sum = 0.0;
  for (const auto& node : radial_nodes(r, panels)) {
    y(0) = node.y;
    const double gv = g(y);
    if (!std::isfinite(gv)) {
      std::ostringstream os;
      os << "levy_integral: non-finite integrand at node y = " << node.y;
      throw NumericError(os.str());
    }
    sum += node.w * gv * r.density(node.y);
  }
  return sum;
}

// dyadic-shell integrals of g * rho on [1, 2^n_shells]; used for tail
// growth tests (shells stay below the exp overflow threshold)
std::vector<double> tail_shells(const RadialDensity& r,
                                const std::function<double(double)>& g,
                                int n_shells) {
  std::vector<double> shells;
  for (int k = 0; k < n_shells; ++k) {
    const double a = std::pow(2.0, k), b = std::pow(2.0, k + 1);
    double s = 0.0;
    const int sub = 32;
    for (int p = 0; p < sub; ++p) {
      const double pa = a + (b - a) * p / sub, pb = a + (b - a) * (p + 1) / sub;
      const double mid = 0.5 * (pa + pb), half = 0.5 * (pb - pa);
      for (int j = 0; j < 4; ++j) {
        const double y = mid + half * kGlNode[j];
        s += half * kGlWeight[j] * g(y) * r.density(y);
      }
    }
    shells.push_back(s);
  }
  return shells;
}

// shrinking-increment heuristic over dyadic shells
MomentDiagnostic shells_converge(const std::vector<double>& shells,
                                 const char* what) {
  double total = 0.0;
  for (double s : shells) {
    if (!std::isfinite(s)) {
      return {false, std::string(what) + ": non-finite shell integral"};
    }
    total += s;
  }
  bool shrinking = shells.size() >= 3;
  for (std::size_t k = shells.size() - 3; k + 1 < shells.size(); ++k) {
    if (std::abs(shells[k + 1]) > 0.9 * std::abs(shells[k]) &&
        std::abs(shells[k + 1]) > 1e-12 * (1.0 + std::abs(total))) {
      shrinking = false;
    }
  }
  std::ostringstream os;
  os << what << ": partial sum " << total << ", last shells "
     << shells[shells.size() - 2] << ", " << shells.back();
  return {shrinking, os.str()};
}

}  // namespace

Eigen::VectorXd truncation_h(Truncation trunc, const Eigen::VectorXd& y) {
  if (trunc == Truncation::Zero) return Eigen::VectorXd::Zero(y.size());
  return y.norm() <= 1.0 ? y : Eigen::VectorXd::Zero(y.size());
}

LevyTriplet::CovEig LevyTriplet::cov_eig() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c_sym());
  Eigen::VectorXd evals = es.eigenvalues().cwiseMax(0.0);
  return {evals, es.eigenvectors()};
}

ValidationReport validate_triplet(const LevyTriplet& t) {
  ValidationReport rep;
  auto add = [&rep](std::string name, bool pass, double measured,
                    std::string detail = "") {
    rep.checks.push_back({std::move(name), pass, measured, std::move(detail)});
  };

  const bool dims_ok = t.b.size() == t.dim && t.c.rows() == t.dim &&
                       t.c.cols() == t.dim && t.dim >= 1;
  add("dimensions", dims_ok, double(t.dim));
  if (!dims_ok) {
    rep.overall = false;
    return rep;
  }

  const double asym = (t.c - t.c.transpose()).cwiseAbs().maxCoeff();
  add("c_symmetric", asym <= 1e-12, asym, "max |c - c'|");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t.c_sym());
  const double min_eig = es.eigenvalues().minCoeff();
  add("c_psd", min_eig >= -1e-10, min_eig,
      "min eigenvalue (clamped to 0 in use)");

  if (const auto* fa = std::get_if<FiniteAtomic>(&t.nu)) {
    double min_norm = std::numeric_limits<double>::infinity();
    double min_mass = std::numeric_limits<double>::infinity();
    double total_mass = 0.0;
    bool dims = true;
    for (const auto& atom : fa->atoms) {
      if (atom.location.size() != t.dim) dims = false;
      min_norm = std::min(min_norm, atom.location.norm());
      min_mass = std::min(min_mass, atom.mass);
      total_mass += atom.mass;
    }
    if (fa->atoms.empty()) {
      min_norm = 1.0;
      min_mass = 1.0;
    }
    add("nu_atom_dims", dims, double(fa->atoms.size()));
    add("nu_no_mass_at_origin", min_norm > 0.0, min_norm, "min |y| over atoms");
    add("nu_masses_positive", min_mass > 0.0, min_mass);
    add("nu_total_mass_finite", std::isfinite(total_mass), total_mass);
    add("nu_square_integrable", std::isfinite(total_mass), total_mass,
        "finite atomic: exact");
  } else {
    const auto& rd = std::get<RadialDensity>(t.nu);
    add("nu_radial_dim", rd.dim == 1 && t.dim == 1, double(rd.dim),
        "density quadrature implemented for dim 1");
    add("nu_exclusion_radius", rd.r_min > 0.0, rd.r_min);
    if (rd.dim == 1 && t.dim == 1) {
      auto g = [](const Eigen::VectorXd& y) {
        const double n2 = y.squaredNorm();
        return std::min(1.0, n2);
      };
      auto res = try_levy_integral(t.nu, g);
      add("nu_square_integrable", res.converged && std::isfinite(res.value),
          res.value, "quadrature refinement test");
    }
  }

  if (t.trunc == Truncation::Zero) {
    auto fv = finite_variation(t.nu);
    add("zero_truncation_valid", fv.finite, fv.finite ? 1.0 : 0.0, fv.detail);
  }

  rep.overall = true;
  for (const auto& c : rep.checks) rep.overall = rep.overall && c.pass;
  return rep;
}

std::complex<double> characteristic_exponent(const LevyTriplet& t,
                                             const Eigen::VectorXd& u) {
  if (u.size() != t.dim) throw DomainError("characteristic_exponent: u size");
  const std::complex<double> i(0.0, 1.0);
  std::complex<double> psi = i * u.dot(t.b);
  psi -= 0.5 * u.dot(t.c_sym() * u);

  if (const auto* fa = std::get_if<FiniteAtomic>(&t.nu)) {
    for (const auto& atom : fa->atoms) {
      const double uy = u.dot(atom.location);
      const double uh = u.dot(truncation_h(t.trunc, atom.location));
      psi += atom.mass * (std::exp(i * uy) - 1.0 - i * uh);
    }
    return psi;
  }

  auto re = try_levy_integral(t.nu, [&](const Eigen::VectorXd& y) {
    return std::cos(u.dot(y)) - 1.0;
  });
  auto im = try_levy_integral(t.nu, [&](const Eigen::VectorXd& y) {
    return std::sin(u.dot(y)) - u.dot(truncation_h(t.trunc, y));
  });
  if (!re.converged || !im.converged) {
    std::ostringstream os;
    os << "characteristic_exponent: quadrature did not converge ("
       << re.nodes_used << " nodes, relative change "
       << std::max(re.refinement_delta, im.refinement_delta) << ")";
    throw NumericError(os.str());
  }
  return psi + std::complex<double>(re.value, im.value);
}

IntegralResult try_levy_integral(
    const LevyMeasure& nu,
    const std::function<double(const Eigen::VectorXd&)>& g) {
  if (const auto* fa = std::get_if<FiniteAtomic>(&nu)) {
    double sum = 0.0;
    for (const auto& atom : fa->atoms) {
      const double gv = g(atom.location);
      if (!std::isfinite(gv)) {
        std::ostringstream os;
        os << "levy_integral: non-finite integrand at atom y = ("
           << atom.location.transpose() << ")";
        throw NumericError(os.str());
      }
      sum += atom.mass * gv;
    }
    return {sum, true, int(fa->atoms.size()), 0.0};
  }

  const auto& rd = std::get<RadialDensity>(nu);
  if (rd.dim != 1) {
    throw UnsupportedMeasure(
        "levy_integral: RadialDensity quadrature implemented for dim 1");
  }
  const double coarse = quad_pass(rd, rd.panels, g);
  const double fine = quad_pass(rd, 2 * rd.panels, g);
  const double delta = std::abs(fine - coarse) / std::max(std::abs(fine), 1e-300);
  const bool small = std::abs(fine) < 1e-14 && std::abs(coarse) < 1e-14;
  return {fine, delta < 1e-6 || small, 2 * rd.panels * 8, delta};
}

double levy_integral(const LevyMeasure& nu,
                     const std::function<double(const Eigen::VectorXd&)>& g) {
  auto res = try_levy_integral(nu, g);
  if (!res.converged) {
    std::ostringstream os;
    os << "levy_integral: refinement to " << res.nodes_used
       << " nodes still changes the result by " << res.refinement_delta
       << " relative";
    throw NumericError(os.str());
  }
  return res.value;
}

MomentDiagnostic exp_moment_finite(const LevyMeasure& nu, int coord) {
  if (std::holds_alternative<FiniteAtomic>(nu)) {
    return {true, "finite atomic measure: finite sum"};
  }
  const auto& rd = std::get<RadialDensity>(nu);
  if (rd.dim != 1 || coord != 0) {
    throw UnsupportedMeasure("exp_moment_finite: density tail test is 1-d");
  }
  auto shells = tail_shells(rd, [](double y) { return std::exp(y); }, 9);
  return shells_converge(shells, "int_{|y|>=1} e^y nu(dy)");
}

MomentDiagnostic finite_variation(const LevyMeasure& nu) {
  if (std::holds_alternative<FiniteAtomic>(nu)) {
    return {true, "finite atomic measure: finite sum"};
  }
  const auto& rd = std::get<RadialDensity>(nu);
  if (rd.dim != 1) {
    throw UnsupportedMeasure("finite_variation: density test is 1-d");
  }
  // behaviour near 0 decides: shrink the exclusion radius and test whether
  // the increments of int (1 ^ |y|) nu keep contracting
  auto value_at = [&](double rmin) {
    RadialDensity probe = rd;
    probe.r_min = rmin;
    return quad_pass(probe, probe.panels, [](const Eigen::VectorXd& yy) {
      return std::min(1.0, std::abs(yy(0)));
    });
  };
  const double v1 = value_at(rd.r_min);
  const double v2 = value_at(rd.r_min * 0.25);
  const double v3 = value_at(rd.r_min * 0.0625);
  const double d12 = std::abs(v2 - v1), d23 = std::abs(v3 - v2);
  const bool fin = std::isfinite(v3) &&
                   (d23 <= 0.9 * d12 + 1e-12 * (1.0 + std::abs(v3)));
  std::ostringstream os;
  os << "int (1^|y|) nu under exclusion shrink: " << v1 << " -> " << v2
     << " -> " << v3;
  return {fin, os.str()};
}

}  // namespace levymin
