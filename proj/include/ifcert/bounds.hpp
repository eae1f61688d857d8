#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ifcert/linalg.hpp"
#include "ifcert/oracle.hpp"

namespace ifcert {

inline constexpr double kDefaultShrinkTau = 1e-9;

inline void check_shrink_tau(double tau) {
  if (!(tau > 0.0) || tau > 1e-3)
    throw ValidationError("shrink_tau must lie in (0, 1e-3]");
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool empty() const { return !(lo < hi); }
  static Interval none() { return {0.0, 0.0}; }
};

enum class Method {
  ImftC2,
  IftC2,
  ImftC1,
  IftC1,
  ImftC0,
  Directional,
  BaselineAMR,
  Holtzman,
};

inline std::string method_name(Method m) {
  switch (m) {
    case Method::ImftC2: return "ImftC2";
    case Method::IftC2: return "IftC2";
    case Method::ImftC1: return "ImftC1";
    case Method::IftC1: return "IftC1";
    case Method::ImftC0: return "ImftC0";
    case Method::Directional: return "Directional";
    case Method::BaselineAMR: return "BaselineAMR";
    case Method::Holtzman: return "Holtzman";
  }
  return "Unknown";
}

struct ImftConstants {
  double My = 0.0;
  double Lx = 0.0;
  double Kxx = 0.0, Kxy = 0.0, Kyy = 0.0;
  double Rx = 0.0, Ry = 0.0;
  NormSpec norm = NormSpec::Inf;
  bool certified = false;
};

struct BoundCertificate {
  Method method = Method::ImftC2;
  double eps_x = 0.0;
  double eps_y = 0.0;
  bool uniqueness = true;
  bool certified = false;
  double shrink_tau = kDefaultShrinkTau;
  NormSpec norm = NormSpec::Inf;
  std::map<std::string, double> constants;
  // center data kept so a certificate can be replayed by the verifier
  Vec x0, y0, w0;
};

struct SubspaceSpec {
  enum class Kind { CoordSubset, Basis };
  Kind kind = Kind::CoordSubset;
  std::vector<int> indices;
  Mat basis;

  static SubspaceSpec coord_subset(std::vector<int> idx) {
    SubspaceSpec w;
    w.kind = Kind::CoordSubset;
    w.indices = std::move(idx);
    return w;
  }
  static SubspaceSpec from_basis(Mat b) {
    SubspaceSpec w;
    w.kind = Kind::Basis;
    w.basis = std::move(b);
    return w;
  }
};

// ---------------------------------------------------------------------------
// Moduli of continuity: monotone nondecreasing, zero at zero. Tabulated
// versions interpolate piecewise-linearly and clamp beyond the table.

class Modulus {
 public:
  static Modulus zero() {
    Modulus m;
    m.fn_ = [](double) { return 0.0; };
    return m;
  }
  static Modulus analytic(std::function<double(double)> f,
                          double domain_max = std::numeric_limits<double>::infinity()) {
    Modulus m;
    m.fn_ = std::move(f);
    m.domain_max_ = domain_max;
    return m;
  }
  static Modulus table(const std::vector<std::pair<double, double>>& pts) {
    if (pts.size() < 2) throw ValidationError("modulus table needs at least two points");
    if (pts.front().first != 0.0)
      throw ValidationError("modulus table must start at r = 0");
    for (size_t i = 0; i < pts.size(); ++i) {
      if (!std::isfinite(pts[i].first) || !std::isfinite(pts[i].second))
        throw ValidationError("modulus table has non-finite entries");
      if (pts[i].second < 0.0) throw ValidationError("modulus table has negative values");
      if (i > 0) {
        if (pts[i].first <= pts[i - 1].first)
          throw ValidationError("modulus table abscissae must increase strictly");
        if (pts[i].second < pts[i - 1].second)
          throw ValidationError("modulus table is not monotone nondecreasing");
      }
    }
    Modulus m;
    m.domain_max_ = pts.back().first;
    m.fn_ = [pts](double r) {
      if (r <= pts.front().first) return pts.front().second;
      if (r >= pts.back().first) return pts.back().second;
      size_t i = 1;
      while (pts[i].first < r) ++i;
      double t = (r - pts[i - 1].first) / (pts[i].first - pts[i - 1].first);
      return pts[i - 1].second + t * (pts[i].second - pts[i - 1].second);
    };
    return m;
  }

  double operator()(double r) const { return fn_(r); }
  double domain_max() const { return domain_max_; }

 private:
  std::function<double(double)> fn_;
  double domain_max_ = std::numeric_limits<double>::infinity();
};

class Modulus2 {
 public:
  static Modulus2 zero() {
    Modulus2 m;
    m.fn_ = [](double, double) { return 0.0; };
    return m;
  }
  static Modulus2 analytic(std::function<double(double, double)> f) {
    Modulus2 m;
    m.fn_ = std::move(f);
    return m;
  }
  static Modulus2 table(const std::vector<double>& rs, const std::vector<double>& es,
                        const Mat& values) {
    if (rs.size() < 2 || es.size() < 2)
      throw ValidationError("2-d modulus table needs at least a 2x2 grid");
    if (values.rows() != static_cast<Eigen::Index>(rs.size()) ||
        values.cols() != static_cast<Eigen::Index>(es.size()))
      throw ValidationError("2-d modulus table shape mismatch");
    if (rs.front() != 0.0 || es.front() != 0.0)
      throw ValidationError("2-d modulus table must start at 0 in both arguments");
    for (size_t i = 1; i < rs.size(); ++i)
      if (rs[i] <= rs[i - 1]) throw ValidationError("2-d modulus r-grid must increase");
    for (size_t j = 1; j < es.size(); ++j)
      if (es[j] <= es[j - 1]) throw ValidationError("2-d modulus e-grid must increase");
    for (Eigen::Index i = 0; i < values.rows(); ++i)
      for (Eigen::Index j = 0; j < values.cols(); ++j) {
        if (!std::isfinite(values(i, j)) || values(i, j) < 0.0)
          throw ValidationError("2-d modulus table has invalid entries");
        if (i > 0 && values(i, j) < values(i - 1, j))
          throw ValidationError("2-d modulus table not monotone in the first argument");
        if (j > 0 && values(i, j) < values(i, j - 1))
          throw ValidationError("2-d modulus table not monotone in the second argument");
      }
    Modulus2 m;
    m.domain_max_r_ = rs.back();
    m.domain_max_e_ = es.back();
    m.fn_ = [rs, es, values](double r, double e) {
      auto locate = [](const std::vector<double>& g, double v, double& t) -> size_t {
        if (v <= g.front()) {
          t = 0.0;
          return 1;
        }
        if (v >= g.back()) {
          t = 1.0;
          return g.size() - 1;
        }
        size_t i = 1;
        while (g[i] < v) ++i;
        t = (v - g[i - 1]) / (g[i] - g[i - 1]);
        return i;
      };
      double tr, te;
      size_t i = locate(rs, r, tr);
      size_t j = locate(es, e, te);
      double v00 = values(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j - 1));
      double v10 = values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - 1));
      double v01 = values(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j));
      double v11 = values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      return (1 - tr) * (1 - te) * v00 + tr * (1 - te) * v10 + (1 - tr) * te * v01 +
             tr * te * v11;
    };
    return m;
  }

  double operator()(double r, double e) const { return fn_(r, e); }
  double domain_max_r() const { return domain_max_r_; }
  double domain_max_e() const { return domain_max_e_; }

 private:
  std::function<double(double, double)> fn_;
  double domain_max_r_ = std::numeric_limits<double>::infinity();
  double domain_max_e_ = std::numeric_limits<double>::infinity();
};

// ---------------------------------------------------------------------------
// C^2 implicit-map bounds.
//
// Feasible pairs (eps_x, eps_y) are those with
//   (a)  Kxx/2 eps_x^2 + Kxy eps_x eps_y + Kyy/2 eps_y^2 < eps_y/My - Lx eps_x
//   (b)  Kxy eps_x + Kyy eps_y < 1/My
// together with 0 < eps_x < Rx, 0 < eps_y < Ry.

inline bool imft_c2_pair_feasible(const ImftConstants& c, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || a > c.Rx || b > c.Ry || !(c.My > 0.0)) return false;
  double lhs = 0.5 * c.Kxx * a * a + c.Kxy * a * b + 0.5 * c.Kyy * b * b;
  double rhs = b / c.My - c.Lx * a;
  return lhs < rhs && c.Kxy * a + c.Kyy * b < 1.0 / c.My;
}

inline Interval imft_c2_feasible(const ImftConstants& c, double eps_x) {
  if (!(c.My > 0.0) || !(eps_x > 0.0)) return Interval::none();
  const double a = eps_x;
  const double inv_my = 1.0 / c.My;
  const double slack_b = inv_my - c.Kxy * a;  // condition (b) reads Kyy*eps_y < slack_b
  if (!(slack_b > 0.0)) return Interval::none();

  // condition (a) as A eps_y^2 + B eps_y + C < 0
  const double A = 0.5 * c.Kyy;
  const double B = c.Kxy * a - inv_my;
  const double C = 0.5 * c.Kxx * a * a + c.Lx * a;

  double lo, hi;
  if (A > 0.0) {
    const double disc = B * B - 4.0 * A * C;
    if (!(disc > 0.0)) return Interval::none();
    const double sq = std::sqrt(disc);
    // B < 0 here because slack_b > 0, so the stable root pair is
    const double q = -0.5 * (B - sq);  // = (sq - B)/2 > 0
    double r_hi = q / A;
    double r_lo = C / q;  // product of roots = C/A, C >= 0
    lo = std::max(r_lo, 0.0);
    hi = std::min(r_hi, slack_b / c.Kyy);
  } else {
    // Kyy = 0: linear condition B eps_y + C < 0 with B = -slack_b < 0
    lo = C / slack_b;
    hi = std::numeric_limits<double>::infinity();
  }
  hi = std::min(hi, c.Ry);
  if (!(lo < hi)) return Interval::none();
  return Interval{lo, hi};
}

namespace detail {

// Largest t in (0, t_max] with pred(t) true, assuming the feasible set is an
// interval anchored at 0+. Returns 0 when even a tiny probe fails.
inline double sup_feasible(const std::function<bool(double)>& pred, double t_max,
                           int max_iter = 200, double rel_tol = 1e-12) {
  if (!(t_max > 0.0)) return 0.0;
  const double probe = t_max * 1e-12;
  if (!pred(probe)) return 0.0;
  if (pred(t_max)) return t_max;
  double lo = probe, hi = t_max;
  for (int i = 0; i < max_iter && (hi - lo) > rel_tol * t_max; ++i) {
    double mid = 0.5 * (lo + hi);
    (pred(mid) ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace detail

inline double imft_c2_sup_x(const ImftConstants& c) {
  return detail::sup_feasible(
      [&](double a) { return !imft_c2_feasible(c, a).empty(); }, c.Rx);
}

inline double imft_c2_sup_x_given_y(const ImftConstants& c, double eps_y) {
  return detail::sup_feasible(
      [&](double a) { return imft_c2_pair_feasible(c, a, eps_y); }, c.Rx);
}

struct Objective {
  enum class Kind { FixXMaxY, FixYMaxX, MaxX };
  Kind kind = Kind::MaxX;
  double value = 0.0;

  static Objective fix_x_max_y(double eps_x) { return {Kind::FixXMaxY, eps_x}; }
  static Objective fix_y_max_x(double eps_y) { return {Kind::FixYMaxX, eps_y}; }
  static Objective max_x() { return {Kind::MaxX, 0.0}; }
};

inline ImftConstants imft_constants_from_oracle(const MapOracle& o, const Vec& x0,
                                                const Vec& y0, const BallPair& ball) {
  if (o.k != o.m)
    throw ValidationError("implicit-map certify needs a square jac_y (k == m)");
  Mat jy = o.jac_y(x0, y0);
  double my;
  try {
    my = inverse_op_norm(jy, ball.norm);
  } catch (const Singular&) {
    throw SingularJacobianY("jac_y is singular at the expansion point");
  }
  double lx = op_norm(o.jac_x(x0, y0), ball.norm);
  Bound kxx = o.hess_bound(ball, HessWhich::XX, ball.norm);
  Bound kxy = o.hess_bound(ball, HessWhich::XY, ball.norm);
  Bound kyy = o.hess_bound(ball, HessWhich::YY, ball.norm);
  ImftConstants c;
  c.My = my;
  c.Lx = lx;
  c.Kxx = kxx.value;
  c.Kxy = kxy.value;
  c.Kyy = kyy.value;
  c.Rx = ball.Rx;
  c.Ry = ball.Ry;
  c.norm = ball.norm;
  c.certified = kxx.provenance == Provenance::Analytic &&
                kxy.provenance == Provenance::Analytic &&
                kyy.provenance == Provenance::Analytic;
  return c;
}

namespace detail {

inline void put_imft_constants(BoundCertificate& cert, const ImftConstants& c) {
  cert.constants["My"] = c.My;
  cert.constants["Lx"] = c.Lx;
  cert.constants["Kxx"] = c.Kxx;
  cert.constants["Kxy"] = c.Kxy;
  cert.constants["Kyy"] = c.Kyy;
  cert.constants["Rx"] = c.Rx;
  cert.constants["Ry"] = c.Ry;
}

// pick eps_y inside the open interval, hugging the top
inline double shrink_into(const Interval& iv, double tau) {
  double top = iv.hi * (1.0 - tau);
  if (top > iv.lo) return top;
  return 0.5 * (iv.lo + iv.hi);
}

}  // namespace detail

inline BoundCertificate imft_c2_certify(const MapOracle& o, const Vec& x0, const Vec& y0,
                                        const BallPair& ball, const Objective& objective,
                                        double tau = kDefaultShrinkTau) {
  check_shrink_tau(tau);
  ImftConstants c = imft_constants_from_oracle(o, x0, y0, ball);

  double eps_x = 0.0, eps_y = 0.0;
  switch (objective.kind) {
    case Objective::Kind::FixXMaxY: {
      eps_x = objective.value;
      if (!(eps_x > 0.0) || !(eps_x < ball.Rx))
        throw ValidationError("FixXMaxY needs 0 < eps_x < Rx");
      Interval iv = imft_c2_feasible(c, eps_x);
      if (iv.empty())
        throw NoFeasibleRegion("no feasible eps_y at the requested eps_x");
      eps_y = detail::shrink_into(iv, tau);
      break;
    }
    case Objective::Kind::FixYMaxX: {
      eps_y = objective.value;
      if (!(eps_y > 0.0) || !(eps_y < ball.Ry))
        throw ValidationError("FixYMaxX needs 0 < eps_y < Ry");
      double sup = imft_c2_sup_x_given_y(c, eps_y);
      if (!(sup > 0.0))
        throw NoFeasibleRegion("no feasible eps_x at the requested eps_y");
      eps_x = sup * (1.0 - tau);
      break;
    }
    case Objective::Kind::MaxX: {
      double sup = imft_c2_sup_x(c);
      if (!(sup > 0.0)) throw NoFeasibleRegion("constants admit no feasible pair");
      eps_x = sup * (1.0 - tau);
      Interval iv = imft_c2_feasible(c, eps_x);
      if (iv.empty()) {
        // retreat further from the supremum if shrinking was not enough
        eps_x = sup * 0.5;
        iv = imft_c2_feasible(c, eps_x);
        if (iv.empty()) throw NoFeasibleRegion("constants admit no feasible pair");
      }
      eps_y = detail::shrink_into(iv, tau);
      break;
    }
  }

  if (!imft_c2_pair_feasible(c, eps_x, eps_y))
    throw NoFeasibleRegion("certified pair failed the strict inequalities");

  BoundCertificate cert;
  cert.method = Method::ImftC2;
  cert.eps_x = eps_x;
  cert.eps_y = eps_y;
  cert.uniqueness = true;
  cert.certified = c.certified;
  cert.shrink_tau = tau;
  cert.norm = ball.norm;
  detail::put_imft_constants(cert, c);
  cert.x0 = x0;
  cert.y0 = y0;
  cert.w0 = o.eval(x0, y0);
  return cert;
}

// ---------------------------------------------------------------------------
// C^2 inverse-map constants.

struct IftConstants {
  double P = 0.0;
  double Pp = 0.0;
  double N = 0.0;
  double Q = 0.0;
  double Qp = 0.0;
};

inline IftConstants ift_c2_constants(double L, double M, double K, double R) {
  if (!(M > 0.0)) throw NonPositiveM("inverse-map bound needs M > 0");
  if (K < 0.0 || L < 0.0 || !(R > 0.0))
    throw ValidationError("inverse-map bound needs K, L >= 0 and R > 0");
  IftConstants out;
  out.P = (K == 0.0) ? R : std::min(1.0 / (M * K), R);
  out.Pp = out.P * (2.0 - M * K * out.P) / (2.0 * M);
  out.N = 8.0 * M * M * M * K;
  double q = std::min(out.P / (2.0 * M), out.P);
  if (out.N * L > 0.0) q = std::min(q, 1.0 / (out.N * L));
  out.Q = q;
  out.Qp = (L == 0.0) ? R : std::min(out.Q * (2.0 - L * out.N * out.Q) / L, R);
  return out;
}

inline IftConstants baseline_amr(double L, double M, double K, double R) {
  if (!(M > 0.0)) throw NonPositiveM("baseline bound needs M > 0");
  if (K < 0.0 || L < 0.0 || !(R > 0.0))
    throw ValidationError("baseline bound needs K, L >= 0 and R > 0");
  IftConstants out;
  out.P = (K == 0.0) ? R : std::min(1.0 / (2.0 * K * M), R);
  out.Pp = out.P / (2.0 * M);
  out.N = 8.0 * M * M * M * K;
  double q = std::min(out.P / (2.0 * M), out.P);
  if (out.N * L > 0.0) q = std::min(q, 1.0 / (2.0 * out.N * L));
  out.Q = q;
  out.Qp = (L == 0.0) ? R : std::min(out.Q / (2.0 * L), R);
  return out;
}

namespace detail {

inline void put_ift_constants(BoundCertificate& cert, double L, double M, double K, double R,
                              const IftConstants& k) {
  cert.constants["L"] = L;
  cert.constants["M"] = M;
  cert.constants["K"] = K;
  cert.constants["R"] = R;
  cert.constants["P"] = k.P;
  cert.constants["P_prime"] = k.Pp;
  cert.constants["N"] = k.N;
  cert.constants["Q"] = k.Q;
  cert.constants["Q_prime"] = k.Qp;
}

}  // namespace detail

inline BoundCertificate ift_c2_certify(const SquareMap& o, const Vec& x0, double R,
                                       NormSpec norm = NormSpec::Inf,
                                       double tau = kDefaultShrinkTau) {
  check_shrink_tau(tau);
  Mat j = o.jac(x0);
  double m;
  try {
    m = inverse_op_norm(j, norm);
  } catch (const Singular&) {
    throw SingularJacobian("jacobian is singular at the expansion point");
  }
  double l = op_norm(j, norm);
  Bound kb = o.hess_bound(x0, R, norm);
  IftConstants k = ift_c2_constants(l, m, kb.value, R);

  BoundCertificate cert;
  cert.method = Method::IftC2;
  cert.eps_x = k.P;
  cert.eps_y = k.Pp * (1.0 - tau);
  cert.uniqueness = true;
  cert.certified = kb.provenance == Provenance::Analytic;
  cert.shrink_tau = tau;
  cert.norm = norm;
  detail::put_ift_constants(cert, l, m, kb.value, R, k);
  cert.x0 = x0;
  cert.y0 = o.eval(x0);
  cert.w0 = cert.y0;
  return cert;
}

// ---------------------------------------------------------------------------
// C^1 implicit-map bound: with moduli of continuity l_x (jac_x, y frozen) and
// l_y (jac_y over both balls), a pair (eps_x, eps_y) is admissible when
//   My * l_y(eps_x, eps_y) <= alpha < 1
//   (Lx + l_x(eps_x)) eps_x < eps_y (1/My - l_y(eps_x, eps_y))

inline BoundCertificate imft_c1_certify(const MapOracle& o, const Vec& x0, const Vec& y0,
                                        const BallPair& ball, double alpha,
                                        double tau = kDefaultShrinkTau) {
  check_shrink_tau(tau);
  if (!(alpha > 0.0) || !(alpha < 1.0))
    throw ValidationError("alpha must lie in (0, 1)");
  if (o.k != o.m)
    throw ValidationError("implicit-map certify needs a square jac_y (k == m)");
  Mat jy = o.jac_y(x0, y0);
  double my;
  try {
    my = inverse_op_norm(jy, ball.norm);
  } catch (const Singular&) {
    throw SingularJacobianY("jac_y is singular at the expansion point");
  }
  double lx_norm = op_norm(o.jac_x(x0, y0), ball.norm);

  const double eps_x = ball.Rx;
  BallPair x_only{x0, y0, eps_x, 0.0, ball.norm};
  Bound lip_x = o.lip_bound(x_only, LipWhich::JX);

  bool lip_y_analytic = true;
  auto lip_y = [&](double ey) {
    BallPair b{x0, y0, eps_x, ey, ball.norm};
    Bound r = o.lip_bound(b, LipWhich::JY);
    if (r.provenance != Provenance::Analytic) lip_y_analytic = false;
    return r.value;
  };

  // cap from the contraction condition; l_y is monotone in eps_y
  double cap = detail::sup_feasible([&](double ey) { return my * lip_y(ey) <= alpha; },
                                    ball.Ry, 200, 1e-12);
  if (!(cap > 0.0))
    throw NoFeasibleRegion("contraction condition fails for every eps_y");

  auto gap = [&](double ey) {
    return ey * (1.0 / my - lip_y(ey)) - (lx_norm + lip_x.value) * eps_x;
  };

  // the gap need not be monotone; scan a grid from the top for the largest
  // feasible point, then refine the crossing by bisection
  const int kGrid = 256;
  double best = -1.0, prev_bad = -1.0;
  for (int i = kGrid; i >= 1; --i) {
    double ey = cap * static_cast<double>(i) / kGrid;
    if (gap(ey) > 0.0) {
      best = ey;
      break;
    }
    prev_bad = ey;
  }
  if (best < 0.0) throw NoFeasibleRegion("no eps_y satisfies the C1 inequality");
  if (prev_bad > 0.0) {
    double lo = best, hi = prev_bad;
    for (int i = 0; i < 100 && (hi - lo) > 1e-14 * cap; ++i) {
      double mid = 0.5 * (lo + hi);
      (gap(mid) > 0.0 ? lo : hi) = mid;
    }
    best = lo;
  }
  double eps_y = best * (1.0 - tau);
  if (!(gap(eps_y) > 0.0)) eps_y = best;

  BoundCertificate cert;
  cert.method = Method::ImftC1;
  cert.eps_x = eps_x;
  cert.eps_y = eps_y;
  cert.uniqueness = true;
  cert.certified = lip_x.provenance == Provenance::Analytic && lip_y_analytic;
  cert.shrink_tau = tau;
  cert.norm = ball.norm;
  cert.constants["My"] = my;
  cert.constants["Lx"] = lx_norm;
  cert.constants["alpha"] = alpha;
  cert.constants["l_x"] = lip_x.value;
  cert.constants["l_y"] = lip_y(eps_y);
  cert.constants["eps_y_cap"] = cap;
  cert.x0 = x0;
  cert.y0 = y0;
  cert.w0 = o.eval(x0, y0);
  return cert;
}

// ---------------------------------------------------------------------------
// C^1 inverse-map bound.

enum class IftMode { Forward, Inverse };
enum class IftObjective { LargestX, MaxImage };

namespace detail {

struct C1Forward {
  double eps_x = 0.0;
  double eps_y = 0.0;
  double eps_y_sup = 0.0;
  bool clamped = false;
};

// modulus l is monotone; image radius g(r) = r (1 - M l(r)) / M
inline C1Forward ift_c1_forward(double M, const std::function<double(double)>& l, double R,
                                IftObjective obj, double tau) {
  auto ok = [&](double r) { return M * l(r) < 1.0; };
  double r_stop = sup_feasible(ok, R, 200, 1e-14);
  if (!(r_stop > 0.0)) throw NoFeasibleRegion("modulus too large near the center");
  C1Forward out;
  out.clamped = ok(R);
  auto image = [&](double r) { return r * (1.0 - M * l(r)) / M; };
  if (obj == IftObjective::LargestX) {
    out.eps_x = out.clamped ? R : r_stop * (1.0 - tau);
    out.eps_y_sup = image(out.eps_x);
    out.eps_y = out.eps_y_sup;
  } else {
    const int kGrid = 512;
    int best_i = 1;
    double best_v = -std::numeric_limits<double>::infinity();
    for (int i = 1; i <= kGrid; ++i) {
      double r = r_stop * static_cast<double>(i) / kGrid;
      double v = image(r);
      if (v > best_v) {  // plain > keeps the smallest maximizer on plateaus
        best_v = v;
        best_i = i;
      }
    }
    double lo = r_stop * static_cast<double>(std::max(1, best_i - 1)) / kGrid;
    double hi = r_stop * static_cast<double>(std::min(kGrid, best_i + 1)) / kGrid;
    for (int it = 0; it < 200 && (hi - lo) > 1e-14 * r_stop; ++it) {
      double m1 = lo + (hi - lo) / 3.0;
      double m2 = hi - (hi - lo) / 3.0;
      if (image(m1) < image(m2)) lo = m1;
      else hi = m2;
    }
    out.eps_x = 0.5 * (lo + hi);
    out.eps_y_sup = image(out.eps_x);
    out.eps_y = out.eps_y_sup * (1.0 - tau);
  }
  if (!(out.eps_y > 0.0) && !(out.eps_y_sup > 0.0))
    throw NoFeasibleRegion("image radius collapsed to zero");
  return out;
}

}  // namespace detail

inline BoundCertificate ift_c1_certify(const SquareMap& o, const Vec& x0, IftMode mode,
                                       double R = 1.0,
                                       IftObjective objective = IftObjective::LargestX,
                                       NormSpec norm = NormSpec::Inf,
                                       double tau = kDefaultShrinkTau) {
  check_shrink_tau(tau);
  if (!(R > 0.0)) throw ValidationError("R must be positive");
  Mat j = o.jac(x0);
  double m;
  try {
    m = inverse_op_norm(j, norm);
  } catch (const Singular&) {
    throw SingularJacobian("jacobian is singular at the expansion point");
  }

  bool lip_analytic = true;
  std::map<double, double> memo;
  auto l = [&](double r) {
    auto it = memo.find(r);
    if (it != memo.end()) return it->second;
    Bound b = o.lip_jac(x0, r);
    if (b.provenance != Provenance::Analytic) lip_analytic = false;
    memo[r] = b.value;
    return b.value;
  };

  BoundCertificate cert;
  cert.shrink_tau = tau;
  cert.norm = norm;
  cert.uniqueness = true;
  cert.method = Method::IftC1;
  cert.x0 = x0;
  cert.y0 = o.eval(x0);
  cert.w0 = cert.y0;

  if (mode == IftMode::Forward) {
    detail::C1Forward fw = detail::ift_c1_forward(m, l, R, objective, tau);
    cert.eps_x = fw.eps_x;
    cert.eps_y = fw.eps_y;
    cert.certified = lip_analytic;
    cert.constants["M"] = m;
    cert.constants["R"] = R;
    cert.constants["l_at_eps_x"] = l(fw.eps_x);
    cert.constants["eps_y_sup"] = fw.eps_y_sup;
    cert.constants["clamped_at_R"] = fw.clamped ? 1.0 : 0.0;
    cert.constants["mode"] = 0.0;
    return cert;
  }

  // Inverse mode: bound the modulus of Df^{-1} on the image side. With
  // rho(r') = r' (1 - M l(r')) / M the increasing branch inverts by bisection,
  // and ||Df(x)^{-1} - Df(x0)^{-1}|| <= M^2 l(r') / (1 - M l(r')).
  auto ok = [&](double r) { return m * l(r) < 1.0; };
  double r_stop = detail::sup_feasible(ok, R, 200, 1e-14);
  if (!(r_stop > 0.0)) throw NoFeasibleRegion("modulus too large near the center");
  auto image = [&](double r) { return r * (1.0 - m * l(r)) / m; };
  // smallest argmax of image() on (0, r_stop]
  detail::C1Forward peak = detail::ift_c1_forward(m, l, R, IftObjective::MaxImage, tau);
  const double r_peak = peak.eps_x;
  const double rho_max = peak.eps_y_sup;
  auto r_of_rho = [&](double rho) {
    double lo = 0.0, hi = r_peak;
    for (int i = 0; i < 200 && (hi - lo) > 1e-15 * r_peak; ++i) {
      double mid = 0.5 * (lo + hi);
      (image(mid) < rho ? lo : hi) = mid;
    }
    return hi;
  };
  auto l_g = [&](double rho) {
    if (!(rho > 0.0)) return 0.0;
    double rp = r_of_rho(std::min(rho, rho_max));
    double mlr = m * l(rp);
    if (mlr >= 1.0) return std::numeric_limits<double>::infinity();
    return m * m * l(rp) / (1.0 - mlr);
  };
  double mg = op_norm(j, norm);
  detail::C1Forward fw = detail::ift_c1_forward(mg, l_g, rho_max, objective, tau);
  cert.eps_x = fw.eps_x;
  cert.eps_y = fw.eps_y;
  cert.certified = lip_analytic;
  cert.constants["M"] = mg;
  cert.constants["M_forward"] = m;
  cert.constants["R"] = R;
  cert.constants["rho_max"] = rho_max;
  cert.constants["eps_y_sup"] = fw.eps_y_sup;
  cert.constants["clamped_at_R"] = fw.clamped ? 1.0 : 0.0;
  cert.constants["mode"] = 1.0;
  return cert;
}

// ---------------------------------------------------------------------------
// C^0 existence-only bound: largest eps <= eps_cap with
//   k1 (g2(delta) + g3(delta, eps)) <= eps.

inline BoundCertificate imft_c0_certify(double k1, const Modulus& g2, const Modulus2& g3,
                                        double delta, double eps_cap) {
  if (k1 < 0.0) throw ValidationError("k1 must be nonnegative");
  if (!(delta > 0.0) || !(eps_cap > 0.0))
    throw ValidationError("delta and eps must be positive");
  auto feasible = [&](double e) { return k1 * (g2(delta) + g3(delta, e)) <= e; };

  double best = -1.0;
  if (feasible(eps_cap)) {
    best = eps_cap;
  } else {
    const int kGrid = 512;
    double bad_above = eps_cap;
    for (int i = kGrid - 1; i >= 1; --i) {
      double e = eps_cap * static_cast<double>(i) / kGrid;
      if (feasible(e)) {
        best = e;
        break;
      }
      bad_above = e;
    }
    if (best >= 0.0) {
      double lo = best, hi = bad_above;
      for (int i = 0; i < 100 && (hi - lo) > 1e-14 * eps_cap; ++i) {
        double mid = 0.5 * (lo + hi);
        (feasible(mid) ? lo : hi) = mid;
      }
      best = lo;
    }
  }
  if (best < 0.0) throw NoFeasibleRegion("no eps satisfies the existence inequality");

  BoundCertificate cert;
  cert.method = Method::ImftC0;
  cert.eps_x = delta;
  cert.eps_y = best;
  cert.uniqueness = false;
  cert.certified = true;  // the inequality is closed, no shrink needed
  cert.shrink_tau = 0.0;
  cert.constants["k1"] = k1;
  cert.constants["delta"] = delta;
  cert.constants["g2_at_delta"] = g2(delta);
  cert.constants["g3_at_pair"] = g3(delta, best);
  return cert;
}

// ---------------------------------------------------------------------------
// Directional inverse-map bound: perturb the image only inside the subspace W.

inline BoundCertificate directional_certify(const SquareMap& o, const Vec& x0, double R,
                                            const SubspaceSpec& W, double eps_x = -1.0,
                                            NormSpec norm = NormSpec::Inf,
                                            double tau = kDefaultShrinkTau) {
  check_shrink_tau(tau);
  if (!(R > 0.0)) throw ValidationError("R must be positive");
  Mat j = o.jac(x0);
  Mat jinv;
  try {
    jinv = inverse(j);
  } catch (const Singular&) {
    throw SingularJacobian("jacobian is singular at the expansion point");
  }
  double m = op_norm(jinv, norm);
  double l = op_norm(j, norm);
  Bound kb = o.hess_bound(x0, R, norm);
  const double k = kb.value;

  double m_w = 0.0;
  bool m_w_exact = true;
  if (W.kind == SubspaceSpec::Kind::CoordSubset) {
    if (W.indices.empty()) throw ValidationError("coordinate subspace must be nonempty");
    m_w = subspace_columns_norm(jinv, W.indices, norm);
  } else {
    const Mat& b = W.basis;
    if (b.rows() != jinv.cols() || b.cols() < 1)
      throw ValidationError("basis shape does not match the map dimension");
    Eigen::FullPivLU<Mat> lu(b);
    if (lu.rank() != b.cols())
      throw ValidationError("basis columns are not independent");
    // heuristic vertex sampling over the W unit ball {Bc : ||Bc|| <= 1}
    m_w_exact = false;
    const int d = static_cast<int>(b.cols());
    auto probe = [&](const Vec& cdir) {
      Vec w = b * cdir;
      double s = vec_norm(w, norm);
      if (s < 1e-300) return 0.0;
      return vec_norm(Vec(jinv * (w / s)), norm);
    };
    if (d <= 14) {
      const std::uint64_t combos = 1ull << (d - 1);
      for (std::uint64_t mask = 0; mask < combos; ++mask) {
        Vec cdir(d);
        cdir(0) = 1.0;
        for (int t = 1; t < d; ++t) cdir(t) = (mask >> (t - 1)) & 1 ? 1.0 : -1.0;
        m_w = std::max(m_w, probe(cdir));
      }
    }
    for (std::uint64_t s = 1; s <= 512; ++s)
      m_w = std::max(m_w, probe(detail::halton_box(s, d, 11)));
  }
  if (!(m_w > 0.0)) throw ValidationError("subspace norm degenerate");

  const double p_cap = (k == 0.0) ? R : std::min(1.0 / (m * k), R);
  if (eps_x < 0.0) eps_x = p_cap * (1.0 - tau);
  if (eps_x > p_cap) throw EpsTooLarge("eps_x exceeds min{1/(MK), R}");
  if (!(eps_x > 0.0)) throw ValidationError("eps_x must be positive");
  const double r_w = eps_x * (2.0 - eps_x * m * k) / (2.0 * m_w);

  BoundCertificate cert;
  cert.method = Method::Directional;
  cert.eps_x = eps_x;
  cert.eps_y = r_w;
  cert.uniqueness = true;
  cert.certified = kb.provenance == Provenance::Analytic && m_w_exact;
  cert.shrink_tau = tau;
  cert.norm = norm;
  cert.constants["M"] = m;
  cert.constants["K"] = k;
  cert.constants["L"] = l;
  cert.constants["R"] = R;
  cert.constants["M_W"] = m_w;
  cert.constants["P"] = p_cap;
  cert.x0 = x0;
  cert.y0 = o.eval(x0);
  cert.w0 = cert.y0;
  return cert;
}

// ---------------------------------------------------------------------------
// Fixed-point feasibility check in the style of the classical C^0 statement:
//   k1 g1(delta, eps) <= alpha < 1   and   k1 g2(delta) <= eps (1 - alpha).

struct HoltzmanResult {
  bool feasible = false;
  double margin = 0.0;
};

inline HoltzmanResult holtzman_check(double k1, const Modulus2& g1, const Modulus& g2,
                                     double delta, double eps, double alpha) {
  double slack1 = alpha - k1 * g1(delta, eps);
  double slack2 = eps * (1.0 - alpha) - k1 * g2(delta);
  HoltzmanResult out;
  out.margin = std::min(slack1, slack2);
  out.feasible = alpha < 1.0 && slack1 >= 0.0 && slack2 >= 0.0;
  return out;
}

}  // namespace ifcert
