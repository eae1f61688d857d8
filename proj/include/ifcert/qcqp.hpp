#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "ifcert/bounds.hpp"
#include "ifcert/linalg.hpp"

namespace ifcert {

// Quadratic system F(x) = Q(x) + L x = u with Q(x)_i = x^T Q_i x, constrained
// to the polyhedron A x <= b.
struct QcqpProblem {
  int n = 0;
  std::vector<Mat> Qi;
  Mat L;
  Mat A;  // may have zero rows
  Vec b;
  Vec u0;
  std::optional<Vec> x0;
};

inline void qcqp_validate(const QcqpProblem& p) {
  if (p.n < 1) throw ValidationError("qcqp: n must be positive");
  if (static_cast<int>(p.Qi.size()) != p.n)
    throw ValidationError("qcqp: need one quadratic matrix per output component");
  for (const Mat& q : p.Qi) {
    if (q.rows() != p.n || q.cols() != p.n)
      throw ValidationError("qcqp: quadratic matrix has wrong shape");
    if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + q.cwiseAbs().maxCoeff()))
      throw ValidationError("qcqp: quadratic matrices must be symmetric");
  }
  if (p.L.rows() != p.n || p.L.cols() != p.n)
    throw ValidationError("qcqp: linear term has wrong shape");
  if (p.A.rows() != p.b.size() || (p.A.rows() > 0 && p.A.cols() != p.n))
    throw ValidationError("qcqp: polyhedron shape mismatch");
  if (p.u0.size() != p.n) throw ValidationError("qcqp: u0 has wrong dimension");
  if (p.x0) {
    if (p.x0->size() != p.n) throw ValidationError("qcqp: x0 has wrong dimension");
  }
}

inline bool qcqp_inside_polyhedron(const QcqpProblem& p, const Vec& x) {
  if (p.A.rows() == 0) return true;
  return ((p.A * x - p.b).array() <= 0.0).all();
}

inline Vec qcqp_eval(const QcqpProblem& p, const Vec& x) {
  Vec out = p.L * x;
  for (int i = 0; i < p.n; ++i) out(i) += x.dot(p.Qi[static_cast<size_t>(i)] * x);
  return out;
}

inline Mat qcqp_jacobian(const QcqpProblem& p, const Vec& x) {
  Mat J = p.L;
  for (int i = 0; i < p.n; ++i)
    J.row(i) += 2.0 * (p.Qi[static_cast<size_t>(i)] * x).transpose();
  return J;
}

inline Vec qcqp_nominal_solve(const QcqpProblem& p, const Vec& seed, int max_iter = 200) {
  qcqp_validate(p);
  if (seed.size() != p.n) throw ValidationError("qcqp: seed has wrong dimension");
  if (!seed.allFinite()) throw NonFinite("qcqp: seed is not finite");
  if (!qcqp_inside_polyhedron(p, seed))
    throw OutsidePolyhedron("qcqp: seed violates the polyhedron");

  Vec x = seed;
  double res = (qcqp_eval(p, x) - p.u0).cwiseAbs().maxCoeff();
  for (int iter = 0; iter < max_iter; ++iter) {
    if (res <= 1e-9) return x;
    Vec r = qcqp_eval(p, x) - p.u0;
    Vec dx = solve_linear(qcqp_jacobian(p, x), Vec(-r));
    double alpha = 1.0;
    for (;;) {
      Vec cand = x + alpha * dx;
      double cres = (qcqp_eval(p, cand) - p.u0).cwiseAbs().maxCoeff();
      if (qcqp_inside_polyhedron(p, cand) && cres < res) {
        x = cand;
        res = cres;
        break;
      }
      alpha *= 0.5;
      if (alpha < 1e-12)
        throw OutsidePolyhedron("qcqp: damping failed to keep the iterate admissible");
    }
  }
  if (res <= 1e-9) return x;
  throw NoConvergence("qcqp: Newton did not reach the residual tolerance");
}

// Exact check that the Inf-ball B(x0, eps) stays inside Ax <= b.
inline bool qcqp_ball_in_polyhedron(const QcqpProblem& p, const Vec& x0, double eps) {
  if (p.A.rows() == 0) return true;
  Vec ax = p.A * x0;
  for (Eigen::Index i = 0; i < p.A.rows(); ++i) {
    double spread = p.A.row(i).cwiseAbs().sum();
    if (ax(i) + eps * spread > p.b(i)) return false;
  }
  return true;
}

enum class KxxMode { AbsSum, SpectralScaled, ExactBox, ExactBilinear };

namespace detail {

// Exact max of |x^T Q x| over the unit Inf-ball by enumerating active-set
// patterns: each coordinate clamped at -1, +1, or left free and solved
// stationary. Exponential (3^n), guarded by the caller.
inline double box_quad_max(const Mat& Q) {
  const int n = static_cast<int>(Q.rows());
  double best = 0.0;
  std::vector<int> pat(static_cast<size_t>(n), -1);
  const std::uint64_t total = [&] {
    std::uint64_t t = 1;
    for (int i = 0; i < n; ++i) t *= 3;
    return t;
  }();
  for (std::uint64_t code = 0; code < total; ++code) {
    std::uint64_t c = code;
    std::vector<int> fixed, free_idx;
    Vec x = Vec::Zero(n);
    for (int i = 0; i < n; ++i) {
      int digit = static_cast<int>(c % 3);
      c /= 3;
      if (digit == 0) {
        free_idx.push_back(i);
      } else {
        x(i) = digit == 1 ? 1.0 : -1.0;
        fixed.push_back(i);
      }
    }
    if (!free_idx.empty()) {
      const int f = static_cast<int>(free_idx.size());
      Mat qff(f, f);
      Vec rhs = Vec::Zero(f);
      for (int a = 0; a < f; ++a) {
        for (int bidx = 0; bidx < f; ++bidx) qff(a, bidx) = Q(free_idx[a], free_idx[bidx]);
        for (int fi : fixed) rhs(a) -= Q(free_idx[a], fi) * x(fi);
      }
      Eigen::FullPivLU<Mat> lu(qff);
      if (!lu.isInvertible()) continue;
      Vec sol = lu.solve(rhs);
      if (sol.cwiseAbs().maxCoeff() > 1.0 + 1e-12) continue;
      for (int a = 0; a < f; ++a) x(free_idx[a]) = sol(a);
    }
    best = std::max(best, std::abs(x.dot(Q * x)));
  }
  return best;
}

inline double kxx_bound_of(const std::vector<Mat>& Qs, int n, KxxMode mode) {
  double best = 0.0;
  switch (mode) {
    case KxxMode::AbsSum:
      for (const Mat& q : Qs) best = std::max(best, q.cwiseAbs().sum());
      return 2.0 * best;
    case KxxMode::SpectralScaled:
      for (const Mat& q : Qs) best = std::max(best, op_norm(q, NormSpec::Two));
      return 2.0 * n * best;
    case KxxMode::ExactBox:
      if (n > 12) throw Unsupported("ExactBox curvature bound needs n <= 12");
      for (const Mat& q : Qs) best = std::max(best, box_quad_max(q));
      return 2.0 * best;
    case KxxMode::ExactBilinear:
      if (n > 20) throw Unsupported("ExactBilinear curvature bound needs n <= 20");
      return 2.0 * bilinear_inf_norm(Qs);
  }
  return 0.0;
}

}  // namespace detail

inline double qcqp_kxx_bound(const QcqpProblem& p, KxxMode mode = KxxMode::AbsSum) {
  return detail::kxx_bound_of(p.Qi, p.n, mode);
}

struct MarginReport {
  double eps_x = 0.0;
  double r_u = 0.0;
  double Mx = 0.0;
  double Kxx = 0.0;
  double Lx_const = 0.0;
  bool preconditioned = false;
  bool ball_in_polyhedron = false;
  // preconditioned runs also carry the transformed-metric radius and the
  // conversion divisor (the Inf norm of DF(x0)^{-1})
  double r_u_transformed = 0.0;
  double metric_conversion = 1.0;
  Vec x0;
};

inline Vec qcqp_default_interior_seed(const QcqpProblem& p) {
  std::vector<Vec> candidates;
  if (p.x0) candidates.push_back(*p.x0);
  candidates.push_back(Vec::Zero(p.n));
  candidates.push_back(p.u0);
  // box rows (+-e_i) yield per-coordinate bounds; try their midpoint too
  Vec lo = Vec::Constant(p.n, -1e30), hi = Vec::Constant(p.n, 1e30);
  bool boxish = p.A.rows() > 0;
  for (Eigen::Index r = 0; r < p.A.rows() && boxish; ++r) {
    int nz = 0, col = -1;
    for (int j = 0; j < p.n; ++j)
      if (p.A(r, j) != 0.0) {
        ++nz;
        col = j;
      }
    if (nz != 1) {
      boxish = false;
      break;
    }
    double coef = p.A(r, col);
    double bound = p.b(r) / coef;
    if (coef > 0.0) hi(col) = std::min(hi(col), bound);
    else lo(col) = std::max(lo(col), bound);
  }
  if (boxish && (lo.array() <= hi.array()).all() && lo.allFinite() && hi.allFinite())
    candidates.push_back(Vec(0.5 * (lo + hi)));
  for (const Vec& c : candidates)
    if (qcqp_inside_polyhedron(p, c)) return c;
  throw OutsidePolyhedron("qcqp: no admissible Newton seed found");
}

inline MarginReport qcqp_margin(const QcqpProblem& p, double eps_x, bool preconditioned,
                                std::optional<KxxMode> mode = std::nullopt) {
  qcqp_validate(p);
  if (!(eps_x > 0.0)) throw ValidationError("qcqp: eps_x must be positive");
  Vec x0 = p.x0 ? *p.x0 : qcqp_nominal_solve(p, qcqp_default_interior_seed(p));

  Mat J = qcqp_jacobian(p, x0);
  double mx;
  try {
    mx = inverse_op_norm(J, NormSpec::Inf);
  } catch (const Singular&) {
    throw SingularJacobian("qcqp: jacobian singular at the nominal solution");
  }
  double lx = op_norm(J, NormSpec::Inf);

  MarginReport rep;
  rep.eps_x = eps_x;
  rep.Lx_const = lx;
  rep.preconditioned = preconditioned;
  rep.x0 = x0;

  double m_eff, k_eff;
  if (preconditioned) {
    Mat jinv = inverse(J);
    std::vector<Mat> qbar(static_cast<size_t>(p.n));
    for (int i = 0; i < p.n; ++i) {
      Mat q = Mat::Zero(p.n, p.n);
      for (int j = 0; j < p.n; ++j) q += jinv(i, j) * p.Qi[static_cast<size_t>(j)];
      qbar[static_cast<size_t>(i)] = q;
    }
    m_eff = 1.0;  // D(Jinv (F - u0))(x0) = I by construction
    k_eff = detail::kxx_bound_of(qbar, p.n, mode.value_or(KxxMode::ExactBox));
    rep.metric_conversion = mx;
  } else {
    m_eff = mx;
    k_eff = detail::kxx_bound_of(p.Qi, p.n, mode.value_or(KxxMode::AbsSum));
    rep.metric_conversion = 1.0;
  }
  rep.Mx = m_eff;
  rep.Kxx = k_eff;

  if (k_eff > 0.0 && eps_x >= 1.0 / (m_eff * k_eff))
    throw EpsTooLarge("qcqp: eps_x reaches the uniqueness cap 1/(Mx Kxx)");
  if (!qcqp_ball_in_polyhedron(p, x0, eps_x))
    throw BallNotInPolyhedron("qcqp: B(x0, eps_x) leaves the constraint polyhedron");
  rep.ball_in_polyhedron = true;

  double r = eps_x * (2.0 - m_eff * k_eff * eps_x) / (2.0 * m_eff);
  if (preconditioned) {
    rep.r_u_transformed = r;
    rep.r_u = r / mx;
  } else {
    rep.r_u_transformed = r;
    rep.r_u = r;
  }
  return rep;
}

// MapOracle view of the implicit system g(u, x) = F(x) - u with the theorem
// roles swapped: the parameter is u, the solved variable is x.
inline MapOracle qcqp_oracle(const QcqpProblem& p) {
  MapOracle o;
  o.n = p.n;
  o.m = p.n;
  o.k = p.n;
  QcqpProblem copy = p;
  o.eval = [copy](const Vec& u, const Vec& x) { return Vec(qcqp_eval(copy, x) - u); };
  o.jac_x = [copy](const Vec&, const Vec&) { return Mat(-Mat::Identity(copy.n, copy.n)); };
  o.jac_y = [copy](const Vec&, const Vec& x) { return qcqp_jacobian(copy, x); };
  o.hess_bound = [copy](const BallPair&, HessWhich which, NormSpec) {
    // second derivatives live only in the solved variable
    double v = which == HessWhich::YY ? qcqp_kxx_bound(copy, KxxMode::AbsSum) : 0.0;
    return Bound{v, Provenance::Analytic};
  };
  o.lip_bound = [copy](const BallPair& ball, LipWhich which) {
    // d/dx jacobian is the constant bilinear map; modulus is linear in radius
    double v = which == LipWhich::JY ? qcqp_kxx_bound(copy, KxxMode::AbsSum) * ball.Ry : 0.0;
    return Bound{v, Provenance::Analytic};
  };
  return o;
}

// Forward-map view x -> F(x) with global curvature constants.
inline SquareMap qcqp_square(const QcqpProblem& p, KxxMode mode = KxxMode::AbsSum) {
  qcqp_validate(p);
  SquareMap s;
  s.n = p.n;
  QcqpProblem copy = p;
  s.eval = [copy](const Vec& x) { return qcqp_eval(copy, x); };
  s.jac = [copy](const Vec& x) { return qcqp_jacobian(copy, x); };
  double k = qcqp_kxx_bound(p, mode);
  s.hess_bound = [k](const Vec&, double, NormSpec) { return Bound{k, Provenance::Analytic}; };
  s.lip_jac = [k](const Vec&, double r) { return Bound{k * r, Provenance::Analytic}; };
  return s;
}

}  // namespace ifcert
