#pragma once

#include <utility>
#include <vector>

#include "ifcert/linalg.hpp"

namespace ifcert {

struct AreProblem {
  Mat A0, B0, Q, R;
  Mat P0;  // stabilizing solution
  Mat Ac;  // A0 - B0 R^-1 B0^T P0
};

struct AreConstants {
  double M_P = 0.0;  // norm of the inverted P-derivative (closed-loop Lyapunov operator)
  double L_A = 0.0;  // norm of the A-derivative nu -> nu^T P0 + P0 nu
  bool exact = false;
};

struct AreModuli {
  double l_A = 0.0;
  double l_P = 0.0;
};

// Feasible (rho_A, rho_P) description for the perturbed ARE:
//   rho_A < rho_P (1/M_P - 2 sigma rho_P) / (L_A + 2 rho_P)
//   rho_A < 1/(2 M_P) - sigma rho_P
//   rho_P < pd_radius
struct AreRegion {
  double M_P = 0.0;
  double L_A = 0.0;
  double sigma = 0.0;      // norm of B0 R^-1 B0^T
  double pd_radius = 0.0;  // symmetric Inf-ball radius kept inside the pd cone
  double coeff_rhs_p = 0.0;  // 1/M_P
  double coeff_cap = 0.0;    // 1/(2 M_P)

  double max_rho_A(double rho_P) const {
    if (!(rho_P > 0.0)) throw ValidationError("are region: rho_P must be positive");
    if (rho_P >= pd_radius)
      throw NoFeasibleRegion("are region: rho_P leaves the positive definite cone");
    double slope = coeff_rhs_p - 2.0 * sigma * rho_P;
    double cap = coeff_cap - sigma * rho_P;
    if (slope <= 0.0 || cap <= 0.0)
      throw NoFeasibleRegion("are region: contraction condition fails at this rho_P");
    return std::min(rho_P * slope / (L_A + 2.0 * rho_P), cap);
  }

  std::vector<std::pair<double, double>> frontier(int count) const {
    if (count < 1) throw ValidationError("are region: frontier needs at least one sample");
    double sup_p = pd_radius;
    if (sigma > 0.0) sup_p = std::min(sup_p, coeff_cap / sigma);
    std::vector<std::pair<double, double>> pts;
    for (int i = 1; i <= count; ++i) {
      double rho_p = sup_p * static_cast<double>(i) / (count + 1);
      pts.emplace_back(max_rho_A(rho_p) * (1.0 - 1e-6), rho_p);
    }
    return pts;
  }
};

inline AreProblem are_problem(const Mat& A0, const Mat& B0, const Mat& Q, const Mat& R) {
  AreProblem p;
  p.A0 = A0;
  p.B0 = B0;
  p.Q = Q;
  p.R = R;
  p.P0 = solve_are(A0, B0, Q, R);
  Mat S = B0.cols() > 0 ? Mat(B0 * R.inverse() * B0.transpose())
                        : Mat(Mat::Zero(A0.rows(), A0.rows()));
  p.Ac = A0 - S * p.P0;
  return p;
}

namespace detail {

// sup over vertex perturbations (each row of nu a signed unit coordinate) of
// the diagonal l1 mass of nu^T P0 + P0 nu
inline double are_la_enumerated(const Mat& P0) {
  const int n = static_cast<int>(P0.rows());
  std::vector<int> pick(n, 0);
  double best = 0.0;
  for (;;) {
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += std::abs(P0(pick[k], k));
    best = std::max(best, 2.0 * s);
    int at = 0;
    while (at < n && ++pick[at] == n) pick[at++] = 0;
    if (at == n) break;
  }
  return best;
}

}  // namespace detail

inline AreConstants are_constants(const AreProblem& p, NormSpec n = NormSpec::Inf) {
  AreConstants c;
  if (n == NormSpec::Two) {
    bool exact = false;
    c.M_P = lyapunov_inverse_norm(p.Ac, NormSpec::Two, &exact);
    c.L_A = 2.0 * op_norm(p.P0, NormSpec::Two);
    c.exact = false;
    return c;
  }
  bool exact = false;
  c.M_P = lyapunov_inverse_norm(p.Ac, NormSpec::Inf, &exact);
  const int dim = static_cast<int>(p.P0.rows());
  if (dim <= 4) {
    c.L_A = detail::are_la_enumerated(p.P0);
    c.exact = exact;
  } else {
    double s = 0.0;
    for (int k = 0; k < dim; ++k) s += p.P0.col(k).cwiseAbs().maxCoeff();
    c.L_A = 2.0 * s;
    c.exact = false;
  }
  return c;
}

inline double are_sigma(const AreProblem& p, NormSpec n = NormSpec::Inf) {
  if (p.B0.cols() == 0) return 0.0;
  return op_norm(Mat(p.B0 * p.R.inverse() * p.B0.transpose()), n);
}

// The A-derivative is independent of A, so its modulus vanishes; the
// P-derivative difference is bounded by the operator expansion
// 2||A - A0|| + 2||S|| ||P - P0||.
inline AreModuli are_moduli(const AreProblem& p, double rho_A, double rho_P,
                            NormSpec n = NormSpec::Inf) {
  if (!(rho_A > 0.0) || !(rho_P > 0.0))
    throw ValidationError("are moduli: radii must be positive");
  AreModuli m;
  m.l_A = 0.0;
  m.l_P = 2.0 * rho_A + 2.0 * are_sigma(p, n) * rho_P;
  return m;
}

inline AreRegion are_robust_region(const AreProblem& p, NormSpec n = NormSpec::Inf) {
  AreConstants c = are_constants(p, n);
  AreRegion r;
  r.M_P = c.M_P;
  r.L_A = c.L_A;
  r.sigma = are_sigma(p, n);
  // symmetric E with ||E||_inf < lambda_min keeps P0 + E positive definite,
  // since ||E||_2 <= ||E||_inf for symmetric E
  r.pd_radius = eig_min_sym(p.P0);
  r.coeff_rhs_p = 1.0 / c.M_P;
  r.coeff_cap = 0.5 / c.M_P;
  return r;
}

}  // namespace ifcert
