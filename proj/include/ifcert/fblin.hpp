#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <random>
#include <utility>

#include "ifcert/bounds.hpp"
#include "ifcert/errors.hpp"
#include "ifcert/linalg.hpp"
#include "ifcert/oracle.hpp"

namespace ifcert {

// Discrete-time feedback linearization data: a coordinate change phi, the
// control map w(x, u) -> v, and the target linear pair z+ = A z + B v around
// the equilibrium (xstar, ustar). R is the radius of interest for phi.
struct FblinProblem {
  SquareMap phi;
  MapOracle w;
  Mat A;
  Mat B;
  Vec xstar;
  Vec ustar;
  std::function<Vec(const Vec&, const Vec&)> plant;  // optional; f(x*, u*) = x*
  double R = 1.0;
};

inline void fblin_validate(const FblinProblem& p) {
  const int n = static_cast<int>(p.xstar.size());
  const int m = static_cast<int>(p.ustar.size());
  if (n <= 0 || m <= 0) throw ValidationError("fblin: empty equilibrium");
  if (p.phi.n != n) throw ValidationError("fblin: phi dimension does not match xstar");
  if (p.w.n != n || p.w.m != m || p.w.k != m)
    throw ValidationError("fblin: control map must take (x in R^n, u in R^m) to R^m");
  if (p.A.rows() != n || p.A.cols() != n) throw ValidationError("fblin: A must be n x n");
  if (p.B.rows() != n || p.B.cols() != m) throw ValidationError("fblin: B must be n x m");
  if (!(p.R > 0.0)) throw ValidationError("fblin: R must be positive");
  if (p.plant) {
    Vec fx = p.plant(p.xstar, p.ustar);
    double tol = 1e-9 * (1.0 + vec_norm(p.xstar, NormSpec::Inf));
    if (fx.size() != n || vec_norm(fx - p.xstar, NormSpec::Inf) > tol)
      throw ValidationError("fblin: supplied plant does not fix the equilibrium");
  }
}

inline Vec fblin_vstar(const FblinProblem& p) { return p.w.eval(p.xstar, p.ustar); }

// Radius P_phi on which phi stays a diffeomorphism, and radius P_phi_prime of
// a ball around phi(xstar) guaranteed inside the image. eps_x / eps_y of the
// returned certificate carry the pair.
inline BoundCertificate state_domain(const FblinProblem& p, NormSpec norm = NormSpec::Inf,
                                     double tau = kDefaultShrinkTau) {
  fblin_validate(p);
  BoundCertificate domain =
      ift_c1_certify(p.phi, p.xstar, IftMode::Forward, p.R, IftObjective::LargestX, norm, tau);
  BoundCertificate image =
      ift_c1_certify(p.phi, p.xstar, IftMode::Forward, p.R, IftObjective::MaxImage, norm, tau);

  // both radii satisfy the strict modulus condition, so the larger one still
  // bounds a diffeomorphism neighborhood
  double p_phi = std::max(domain.eps_x, image.eps_x);

  BoundCertificate cert;
  cert.method = Method::IftC1;
  cert.eps_x = p_phi;
  cert.eps_y = image.eps_y;
  cert.uniqueness = true;
  cert.certified = domain.certified && image.certified;
  cert.shrink_tau = tau;
  cert.norm = norm;
  cert.constants["M"] = domain.constants.at("M");
  cert.constants["R"] = p.R;
  cert.constants["P_phi"] = p_phi;
  cert.constants["P_phi_prime"] = image.eps_y;
  cert.constants["r_at_max_image"] = image.eps_x;
  cert.constants["clamped_at_R"] = domain.constants.at("clamped_at_R");
  cert.x0 = p.xstar;
  cert.y0 = domain.y0;
  cert.w0 = domain.w0;
  return cert;
}

// Largest target radius eps_v so that every (x, v) with ||x - x*|| <= eps_x,
// ||v - v*|| <= eps_v admits a unique u in B(u*, eps_u) solving w(x, u) = v:
//   eps_v < eps_u (1/M_W_u - l_W_u) - (L_W_x + l_W_x) eps_x,  M_W_u l_W_u < 1.
inline BoundCertificate control_domain(const FblinProblem& p, double eps_x, double eps_u,
                                       NormSpec norm = NormSpec::Inf,
                                       double tau = kDefaultShrinkTau) {
  check_shrink_tau(tau);
  fblin_validate(p);
  if (!(eps_x > 0.0) || !(eps_u > 0.0))
    throw ValidationError("control_domain: eps_x and eps_u must be positive");

  Mat ju = p.w.jac_y(p.xstar, p.ustar);
  double m;
  try {
    m = inverse_op_norm(ju, norm);
  } catch (const Singular&) {
    throw SingularJacobianY("control map jacobian in u is singular at the equilibrium");
  }
  double big_l = op_norm(p.w.jac_x(p.xstar, p.ustar), norm);

  Bound lip_x = p.w.lip_bound(BallPair{p.xstar, p.ustar, eps_x, 0.0, norm}, LipWhich::JX);
  Bound lip_u = p.w.lip_bound(BallPair{p.xstar, p.ustar, eps_x, eps_u, norm}, LipWhich::JY);

  if (!(m * lip_u.value < 1.0))
    throw NoFeasibleRegion("control jacobian varies too much over the requested balls");
  double sup = eps_u * (1.0 / m - lip_u.value) - (big_l + lip_x.value) * eps_x;
  if (!(sup > 0.0))
    throw NoFeasibleRegion("no positive target radius for these (eps_x, eps_u)");

  BoundCertificate cert;
  cert.method = Method::ImftC1;
  cert.eps_x = eps_x;
  cert.eps_y = sup * (1.0 - tau);
  cert.uniqueness = true;
  cert.certified =
      lip_x.provenance == Provenance::Analytic && lip_u.provenance == Provenance::Analytic;
  cert.shrink_tau = tau;
  cert.norm = norm;
  cert.constants["M_W_u"] = m;
  cert.constants["L_W_x"] = big_l;
  cert.constants["l_W_x"] = lip_x.value;
  cert.constants["l_W_u"] = lip_u.value;
  cert.constants["eps_u"] = eps_u;
  cert.constants["eps_v_sup"] = sup;
  cert.x0 = p.xstar;
  cert.y0 = p.ustar;
  cert.w0 = fblin_vstar(p);
  return cert;
}

struct InvarianceBound {
  double eps_v = 0.0;
  double rho_z = 0.0;
  double P_phi_prime = 0.0;
  double A_norm = 0.0;
  double B_norm = 0.0;
  int sim_runs = 0;
  int sim_steps = 0;
  double sim_max_deviation = 0.0;
  bool sim_contained = false;
};

struct SimOptions {
  int runs = 100;
  int steps = 10000;
  unsigned seed = 0;
};

namespace detail {

inline Vec fblin_random_in_ball(std::mt19937& rng, int dim, double radius, NormSpec norm) {
  Vec v(dim);
  if (norm == NormSpec::Inf) {
    std::uniform_real_distribution<double> u(-radius, radius);
    for (int i = 0; i < dim; ++i) v(i) = u(rng);
    return v;
  }
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < dim; ++i) v(i) = g(rng);
  double len = v.norm();
  if (len == 0.0) return Vec::Zero(dim);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double scale = radius * std::pow(u(rng), 1.0 / dim) / len;
  return v * scale;
}

}  // namespace detail

// Trajectory containment: any v-sequence within eps_v of v* keeps one step of
// z+ = A z + B v inside the certified image ball B(phi(x*), P_phi_prime) when
// the state starts within rho_z. The closed-loop simulation records how far
// random admissible sequences actually wander.
inline InvarianceBound invariance_bound(const FblinProblem& p, double rho_z,
                                        NormSpec norm = NormSpec::Inf,
                                        double tau = kDefaultShrinkTau, SimOptions sim = {}) {
  check_shrink_tau(tau);
  BoundCertificate state = state_domain(p, norm, tau);
  const double p_prime = state.eps_y;
  if (!(rho_z > 0.0) || !(rho_z < p_prime))
    throw ValidationError("invariance_bound: rho_z must lie in (0, P_phi_prime)");
  const double a_norm = op_norm(p.A, norm);
  const double b_norm = op_norm(p.B, norm);
  if (b_norm == 0.0) throw DivisionByZeroB("invariance_bound: B is zero");
  if (a_norm * rho_z >= p_prime)
    throw NoFeasibleRegion("||A|| rho_z already exhausts the image ball");

  InvarianceBound out;
  out.eps_v = (p_prime - a_norm * rho_z) / b_norm * (1.0 - tau);
  out.rho_z = rho_z;
  out.P_phi_prime = p_prime;
  out.A_norm = a_norm;
  out.B_norm = b_norm;
  out.sim_runs = sim.runs;
  out.sim_steps = sim.steps;

  const int n = static_cast<int>(p.xstar.size());
  const int m = static_cast<int>(p.ustar.size());
  std::mt19937 rng(sim.seed);
  double worst = 0.0;
  for (int run = 0; run < sim.runs; ++run) {
    Vec dz = Vec::Zero(n);
    for (int k = 0; k < sim.steps; ++k) {
      Vec dv = detail::fblin_random_in_ball(rng, m, out.eps_v, norm);
      dz = p.A * dz + p.B * dv;
      worst = std::max(worst, vec_norm(dz, norm));
    }
  }
  out.sim_max_deviation = worst;
  out.sim_contained = worst <= rho_z;
  return out;
}

struct LinearizationDomain {
  BoundCertificate state;
  BoundCertificate control;
  InvarianceBound invariance;
  double eps_x = 0.0;
  double eps_u = 0.0;
  double eps_v = 0.0;
};

// Intersection of the three certificates: x-ball capped by the diffeomorphism
// domain, u-ball as requested, v-ball limited by both the feedback map and the
// trajectory containment.
inline LinearizationDomain linearization_domain(const FblinProblem& p, double eps_x,
                                                double eps_u,
                                                std::optional<double> rho_z = std::nullopt,
                                                NormSpec norm = NormSpec::Inf,
                                                double tau = kDefaultShrinkTau,
                                                SimOptions sim = {}) {
  LinearizationDomain out;
  out.state = state_domain(p, norm, tau);
  out.eps_x = std::min(eps_x, out.state.eps_x);
  out.eps_u = eps_u;
  out.control = control_domain(p, out.eps_x, eps_u, norm, tau);
  double rz = rho_z ? *rho_z : 0.5 * out.state.eps_y;
  out.invariance = invariance_bound(p, rz, norm, tau, sim);
  out.eps_v = std::min(out.control.eps_y, out.invariance.eps_v);
  return out;
}

}  // namespace ifcert
