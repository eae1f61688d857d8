#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ifcert/bounds.hpp"
#include "ifcert/oracle.hpp"
#include "ifcert/powerflow.hpp"
#include "ifcert/qcqp.hpp"

// Named certified instances used by the soundness suite. Each fixture carries
// an oracle with analytic curvature bounds, the ball the certificate is
// requested on, and the objective; fixture_certify runs the implicit-map
// certification and always yields certified = true on these instances.

namespace ifcert {

struct Fixture {
  std::string name;
  MapOracle oracle;
  BallPair ball;
  Objective objective;
};

inline BoundCertificate fixture_certify(const Fixture& f,
                                        double tau = kDefaultShrinkTau) {
  return imft_c2_certify(f.oracle, f.ball.x0, f.ball.y0, f.ball, f.objective, tau);
}

namespace detail {

// Lift an Inf-norm bilinear bound to a valid Two-norm one for a k-component map.
inline double lift_bilinear(double v_inf, int k, NormSpec norm) {
  return norm == NormSpec::Inf ? v_inf : v_inf * std::sqrt(static_cast<double>(k));
}

inline Vec vec1(double a) {
  Vec v(1);
  v << a;
  return v;
}

inline Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

}  // namespace detail

// The box-constrained quadratic instance the margin routines are exercised on.
inline QcqpProblem fixture_qcqp_problem() {
  QcqpProblem p;
  p.n = 2;
  Mat q1 = Mat::Zero(2, 2), q2 = Mat::Zero(2, 2);
  q1(0, 0) = 1.0;
  q2(1, 1) = 1.0;
  p.Qi = {q1, q2};
  p.L = Mat(2, 2);
  p.L << 1.0, -3.0, 2.0, -1.0;
  p.A = Mat(4, 2);
  p.A << 1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0;
  p.b = Vec(4);
  p.b << 3.0, -0.5, 3.0, -0.5;
  p.u0 = detail::vec2(-2.0, 4.0);
  return p;
}

// Slack bus plus one unloaded PQ bus over a purely reactive line.
inline PowerCase fixture_two_bus_case() {
  static const char* text = R"(function mpc = case2pq
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1	0	230	1	1.1	0.9;
	2	1	0	0	0	0	1	1	0	230	1	1.1	0.9;
];
mpc.gen = [
	1	0	0	100	-100	1	100	1	100	0;
];
mpc.branch = [
	1	2	0	0.1	0	100	100	100	0	0	1;
];
)";
  return parse_case(text);
}

// Riccati residual of the double integrator as an implicit map: the input is
// the plant matrix written out row-wise, the unknown is the upper triangle of
// the symmetric solution, and the equilibrium is the exact closed-form pair.
inline MapOracle fixture_are_oracle() {
  MapOracle o;
  o.n = 4;
  o.m = 3;
  o.k = 3;
  o.eval = [](const Vec& a, const Vec& p) {
    Vec g(3);
    g(0) = 2.0 * (a(0) * p(0) + a(2) * p(1)) - p(1) * p(1) + 1.0;
    g(1) = a(0) * p(1) + a(2) * p(2) + a(1) * p(0) + a(3) * p(1) - p(1) * p(2);
    g(2) = 2.0 * (a(1) * p(1) + a(3) * p(2)) - p(2) * p(2) + 1.0;
    return g;
  };
  o.jac_x = [](const Vec&, const Vec& p) {
    Mat j(3, 4);
    j << 2.0 * p(0), 0.0, 2.0 * p(1), 0.0,
         p(1), p(0), p(2), p(1),
         0.0, 2.0 * p(1), 0.0, 2.0 * p(2);
    return j;
  };
  o.jac_y = [](const Vec& a, const Vec& p) {
    Mat j(3, 3);
    j << 2.0 * a(0), 2.0 * a(2) - 2.0 * p(1), 0.0,
         a(1), a(0) + a(3) - p(2), a(2) - p(1),
         0.0, 2.0 * a(1), 2.0 * a(3) - 2.0 * p(2);
    return j;
  };
  o.hess_bound = [](const BallPair& ball, HessWhich which, NormSpec norm) {
    double v = 0.0;
    if (which == HessWhich::YY) v = 2.0;
    if (which == HessWhich::XY) v = 4.0;
    return Bound{detail::lift_bilinear(v, 3, norm), Provenance::Analytic};
  };
  o.lip_bound = [](const BallPair& ball, LipWhich which) {
    // jac_x depends on p alone, so it is constant at frozen p0
    double v = which == LipWhich::JY ? 4.0 * ball.Rx + 2.0 * ball.Ry : 0.0;
    return Bound{v, Provenance::Analytic};
  };
  return o;
}

namespace detail {

inline Fixture fixture_linear1d() {
  MapOracle o;
  o.n = 1;
  o.m = 1;
  o.k = 1;
  o.eval = [](const Vec& x, const Vec& y) { return vec1(2.0 * y(0) - x(0)); };
  o.jac_x = [](const Vec&, const Vec&) { return Mat::Constant(1, 1, -1.0); };
  o.jac_y = [](const Vec&, const Vec&) { return Mat::Constant(1, 1, 2.0); };
  o.hess_bound = [](const BallPair&, HessWhich, NormSpec) {
    return Bound{0.0, Provenance::Analytic};
  };
  o.lip_bound = [](const BallPair&, LipWhich) {
    return Bound{0.0, Provenance::Analytic};
  };
  return {"linear1d", o, BallPair{vec1(0.0), vec1(0.0), 1.0, 1.0, NormSpec::Inf},
          Objective::fix_x_max_y(0.5)};
}

inline Fixture fixture_sqrt1d() {
  MapOracle o;
  o.n = 1;
  o.m = 1;
  o.k = 1;
  o.eval = [](const Vec& x, const Vec& y) { return vec1(y(0) * y(0) - x(0)); };
  o.jac_x = [](const Vec&, const Vec&) { return Mat::Constant(1, 1, -1.0); };
  o.jac_y = [](const Vec&, const Vec& y) { return Mat::Constant(1, 1, 2.0 * y(0)); };
  o.hess_bound = [](const BallPair&, HessWhich which, NormSpec) {
    return Bound{which == HessWhich::YY ? 2.0 : 0.0, Provenance::Analytic};
  };
  o.lip_bound = [](const BallPair& ball, LipWhich which) {
    return Bound{which == LipWhich::JY ? 2.0 * ball.Ry : 0.0, Provenance::Analytic};
  };
  return {"sqrt1d", o, BallPair{vec1(1.0), vec1(1.0), 0.5, 0.75, NormSpec::Inf},
          Objective::fix_x_max_y(0.3)};
}

inline Fixture fixture_cubic1d() {
  MapOracle o;
  o.n = 1;
  o.m = 1;
  o.k = 1;
  o.eval = [](const Vec& x, const Vec& y) {
    return vec1(y(0) * y(0) * y(0) + y(0) - x(0));
  };
  o.jac_x = [](const Vec&, const Vec&) { return Mat::Constant(1, 1, -1.0); };
  o.jac_y = [](const Vec&, const Vec& y) {
    return Mat::Constant(1, 1, 3.0 * y(0) * y(0) + 1.0);
  };
  o.hess_bound = [](const BallPair& ball, HessWhich which, NormSpec) {
    double v = which == HessWhich::YY
                   ? 6.0 * (std::abs(ball.y0(0)) + ball.Ry)
                   : 0.0;
    return Bound{v, Provenance::Analytic};
  };
  o.lip_bound = [](const BallPair& ball, LipWhich which) {
    double edge = std::abs(ball.y0(0)) + ball.Ry;
    double v = which == LipWhich::JY
                   ? 3.0 * (edge * edge - ball.y0(0) * ball.y0(0))
                   : 0.0;
    return Bound{v, Provenance::Analytic};
  };
  return {"cubic1d", o, BallPair{vec1(0.0), vec1(0.0), 1.0, 0.5, NormSpec::Inf},
          Objective::fix_x_max_y(0.05)};
}

inline Fixture fixture_sincos1d() {
  MapOracle o;
  o.n = 1;
  o.m = 1;
  o.k = 1;
  o.eval = [](const Vec& x, const Vec& y) {
    return vec1(y(0) + 0.3 * std::sin(y(0)) - x(0));
  };
  o.jac_x = [](const Vec&, const Vec&) { return Mat::Constant(1, 1, -1.0); };
  o.jac_y = [](const Vec&, const Vec& y) {
    return Mat::Constant(1, 1, 1.0 + 0.3 * std::cos(y(0)));
  };
  o.hess_bound = [](const BallPair&, HessWhich which, NormSpec) {
    return Bound{which == HessWhich::YY ? 0.3 : 0.0, Provenance::Analytic};
  };
  o.lip_bound = [](const BallPair& ball, LipWhich which) {
    double v = which == LipWhich::JY ? 0.3 * std::min(2.0, ball.Ry) : 0.0;
    return Bound{v, Provenance::Analytic};
  };
  return {"sincos1d", o, BallPair{vec1(0.0), vec1(0.0), 2.0, 2.0, NormSpec::Inf},
          Objective::fix_x_max_y(0.5)};
}

inline Fixture fixture_affine2d() {
  Mat a(2, 2);
  a << 2.0, 1.0, 0.0, 2.0;
  MapOracle o;
  o.n = 2;
  o.m = 2;
  o.k = 2;
  o.eval = [a](const Vec& x, const Vec& y) { return Vec(a * y - x); };
  o.jac_x = [](const Vec&, const Vec&) { return Mat(-Mat::Identity(2, 2)); };
  o.jac_y = [a](const Vec&, const Vec&) { return a; };
  o.hess_bound = [](const BallPair&, HessWhich, NormSpec) {
    return Bound{0.0, Provenance::Analytic};
  };
  o.lip_bound = [](const BallPair&, LipWhich) {
    return Bound{0.0, Provenance::Analytic};
  };
  return {"affine2d", o, BallPair{Vec::Zero(2), Vec::Zero(2), 1.0, 1.0, NormSpec::Inf},
          Objective::fix_x_max_y(0.5)};
}

// Scalar angle turning a plane vector: f(x, y) = R(x) y - R(0) y0.
inline Fixture fixture_rot2d() {
  auto rot = [](double t) {
    Mat r(2, 2);
    r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
    return r;
  };
  auto drot = [](double t) {
    Mat r(2, 2);
    r << -std::sin(t), -std::cos(t), std::cos(t), -std::sin(t);
    return r;
  };
  MapOracle o;
  o.n = 1;
  o.m = 2;
  o.k = 2;
  o.eval = [rot](const Vec& x, const Vec& y) {
    Vec target(2);
    target << 1.0, 0.0;
    return Vec(rot(x(0)) * y - target);
  };
  o.jac_x = [drot](const Vec& x, const Vec& y) { return Mat(drot(x(0)) * y); };
  o.jac_y = [rot](const Vec& x, const Vec&) { return rot(x(0)); };
  o.hess_bound = [](const BallPair& ball, HessWhich which, NormSpec norm) {
    const double root2 = std::sqrt(2.0);
    double v = 0.0;
    if (which == HessWhich::XX)
      v = root2 * (ball.y0.lpNorm<Eigen::Infinity>() + ball.Ry);
    if (which == HessWhich::XY) v = root2;
    return Bound{detail::lift_bilinear(v, 2, norm), Provenance::Analytic};
  };
  o.lip_bound = [](const BallPair& ball, LipWhich which) {
    double arc = ball.Rx + 0.5 * ball.Rx * ball.Rx;
    double v = which == LipWhich::JY
                   ? arc
                   : arc * ball.y0.lpNorm<Eigen::Infinity>();
    return Bound{v, Provenance::Analytic};
  };
  return {"rot2d", o,
          BallPair{vec1(0.0), vec2(1.0, 0.0), 0.4, 0.5, NormSpec::Inf},
          Objective::fix_x_max_y(0.1)};
}

inline Fixture fixture_qcqp_paper() {
  QcqpProblem p = fixture_qcqp_problem();
  Vec seed(2);
  seed << 1.0, 1.0;
  Vec x0 = qcqp_nominal_solve(p, seed);
  return {"qcqp_paper", qcqp_oracle(p),
          BallPair{p.u0, x0, 2.0, 1.0, NormSpec::Inf},
          Objective::fix_y_max_x(0.86)};
}

inline Fixture fixture_pf2bus() {
  PfQcqp pf = build_pf_qcqp(fixture_two_bus_case());
  Vec x0 = pf_nominal_solve(pf);
  return {"pf2bus", qcqp_oracle(pf.qcqp),
          BallPair{pf.qcqp.u0, x0, 2.0, 0.5, NormSpec::Inf},
          Objective::fix_y_max_x(0.2)};
}

inline Fixture fixture_are_di() {
  const double s3 = std::sqrt(3.0);
  Vec a0(4);
  a0 << 0.0, 1.0, 0.0, 0.0;
  Vec p0(3);
  p0 << s3, 1.0, s3;
  return {"are_di", fixture_are_oracle(),
          BallPair{a0, p0, 0.1, 0.5, NormSpec::Inf},
          Objective::fix_x_max_y(0.002)};
}

// Input-to-virtual-control map of a gain-scheduled channel with a state tilt.
inline Fixture fixture_fblin_w() {
  MapOracle o;
  o.n = 2;
  o.m = 1;
  o.k = 1;
  o.eval = [](const Vec& x, const Vec& u) {
    double g = 1.0 + 0.2 * x(0);
    return vec1(g * g * u(0) - 0.532 * x(1));
  };
  o.jac_x = [](const Vec& x, const Vec& u) {
    Mat j(1, 2);
    j << 0.4 * (1.0 + 0.2 * x(0)) * u(0), -0.532;
    return j;
  };
  o.jac_y = [](const Vec& x, const Vec&) {
    double g = 1.0 + 0.2 * x(0);
    return Mat::Constant(1, 1, g * g);
  };
  o.hess_bound = [](const BallPair& ball, HessWhich which, NormSpec) {
    double v = 0.0;
    if (which == HessWhich::XX)
      v = 0.08 * (std::abs(ball.y0(0)) + ball.Ry);
    if (which == HessWhich::XY)
      v = 0.4 * (1.0 + 0.2 * (std::abs(ball.x0(0)) + ball.Rx));
    return Bound{v, Provenance::Analytic};
  };
  o.lip_bound = [](const BallPair& ball, LipWhich which) {
    double v = which == LipWhich::JY
                   ? 0.4 * ball.Rx + 0.04 * ball.Rx * ball.Rx
                   : 0.0;
    return Bound{v, Provenance::Analytic};
  };
  return {"fblin_w", o, BallPair{Vec::Zero(2), vec1(0.0), 0.5, 1.5, NormSpec::Inf},
          Objective::fix_x_max_y(0.2)};
}

inline Fixture fixture_ift_scalar() {
  MapOracle o;
  o.n = 1;
  o.m = 1;
  o.k = 1;
  o.eval = [](const Vec& w, const Vec& y) {
    return vec1(y(0) + 0.5 * y(0) * y(0) - w(0));
  };
  o.jac_x = [](const Vec&, const Vec&) { return Mat::Constant(1, 1, -1.0); };
  o.jac_y = [](const Vec&, const Vec& y) { return Mat::Constant(1, 1, 1.0 + y(0)); };
  o.hess_bound = [](const BallPair&, HessWhich which, NormSpec) {
    return Bound{which == HessWhich::YY ? 1.0 : 0.0, Provenance::Analytic};
  };
  o.lip_bound = [](const BallPair& ball, LipWhich which) {
    return Bound{which == LipWhich::JY ? ball.Ry : 0.0, Provenance::Analytic};
  };
  return {"ift_scalar", o, BallPair{vec1(0.0), vec1(0.0), 0.1, 0.8, NormSpec::Inf},
          Objective::fix_x_max_y(0.05)};
}

inline Fixture fixture_ift2d() {
  MapOracle o;
  o.n = 2;
  o.m = 2;
  o.k = 2;
  o.eval = [](const Vec& w, const Vec& y) {
    return vec2(y(0) + 0.1 * y(1) * y(1) - w(0), y(1) + 0.1 * y(0) * y(0) - w(1));
  };
  o.jac_x = [](const Vec&, const Vec&) { return Mat(-Mat::Identity(2, 2)); };
  o.jac_y = [](const Vec&, const Vec& y) {
    Mat j(2, 2);
    j << 1.0, 0.2 * y(1), 0.2 * y(0), 1.0;
    return j;
  };
  o.hess_bound = [](const BallPair&, HessWhich which, NormSpec norm) {
    double v = which == HessWhich::YY ? 0.2 : 0.0;
    return Bound{detail::lift_bilinear(v, 2, norm), Provenance::Analytic};
  };
  o.lip_bound = [](const BallPair& ball, LipWhich which) {
    return Bound{which == LipWhich::JY ? 0.2 * ball.Ry : 0.0, Provenance::Analytic};
  };
  return {"ift2d", o, BallPair{Vec::Zero(2), Vec::Zero(2), 0.5, 1.0, NormSpec::Inf},
          Objective::fix_x_max_y(0.3)};
}

}  // namespace detail

inline std::vector<Fixture> fixture_corpus() {
  return {detail::fixture_linear1d(), detail::fixture_sqrt1d(),
          detail::fixture_cubic1d(),  detail::fixture_sincos1d(),
          detail::fixture_affine2d(), detail::fixture_rot2d(),
          detail::fixture_qcqp_paper(), detail::fixture_pf2bus(),
          detail::fixture_are_di(),  detail::fixture_fblin_w(),
          detail::fixture_ift_scalar(), detail::fixture_ift2d()};
}

}  // namespace ifcert
