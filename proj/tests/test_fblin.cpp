#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "ifcert/fblin.hpp"

using namespace ifcert;

namespace {

SquareMap identity_map(int n) {
  SquareMap s;
  s.n = n;
  s.eval = [](const Vec& x) { return x; };
  s.jac = [n](const Vec&) { return Mat(Mat::Identity(n, n)); };
  s.hess_bound = [](const Vec&, double, NormSpec) { return Bound{0.0, Provenance::Analytic}; };
  s.lip_jac = [](const Vec&, double) { return Bound{0.0, Provenance::Analytic}; };
  return s;
}

// f(x) = x + x^2/2, scalar; Df varies with slope one
SquareMap half_square_map() {
  SquareMap s;
  s.n = 1;
  s.eval = [](const Vec& x) {
    Vec v(1);
    v(0) = x(0) + 0.5 * x(0) * x(0);
    return v;
  };
  s.jac = [](const Vec& x) {
    Mat j(1, 1);
    j(0, 0) = 1.0 + x(0);
    return j;
  };
  s.hess_bound = [](const Vec&, double, NormSpec) { return Bound{1.0, Provenance::Analytic}; };
  s.lip_jac = [](const Vec&, double r) { return Bound{r, Provenance::Analytic}; };
  return s;
}

SquareMap linear_map(const Mat& m) {
  SquareMap s;
  s.n = static_cast<int>(m.rows());
  s.eval = [m](const Vec& x) { return Vec(m * x); };
  s.jac = [m](const Vec&) { return m; };
  s.hess_bound = [](const Vec&, double, NormSpec) { return Bound{0.0, Provenance::Analytic}; };
  s.lip_jac = [](const Vec&, double) { return Bound{0.0, Provenance::Analytic}; };
  return s;
}

// w(x, u) = (1 + x1)^2 u with exact moduli around any center
MapOracle paper_w() {
  MapOracle o;
  o.n = 2;
  o.m = 1;
  o.k = 1;
  o.eval = [](const Vec& x, const Vec& u) {
    Vec v(1);
    double s = 1.0 + x(0);
    v(0) = s * s * u(0);
    return v;
  };
  o.jac_x = [](const Vec& x, const Vec& u) {
    Mat j(1, 2);
    j << 2.0 * (1.0 + x(0)) * u(0), 0.0;
    return j;
  };
  o.jac_y = [](const Vec& x, const Vec&) {
    Mat j(1, 1);
    double s = 1.0 + x(0);
    j(0, 0) = s * s;
    return j;
  };
  o.hess_bound = [](const BallPair& b, HessWhich which, NormSpec) {
    if (which == HessWhich::YY) return Bound{0.0, Provenance::Analytic};
    if (which == HessWhich::XY) return Bound{2.0 * (std::abs(1.0 + b.x0(0)) + b.Rx), Provenance::Analytic};
    return Bound{2.0 * (std::abs(b.y0(0)) + b.Ry), Provenance::Analytic};
  };
  o.lip_bound = [](const BallPair& b, LipWhich which) {
    if (which == LipWhich::JX) return Bound{2.0 * std::abs(b.y0(0)) * b.Rx, Provenance::Analytic};
    double c = std::abs(1.0 + b.x0(0));
    return Bound{b.Rx * (2.0 * c + b.Rx), Provenance::Analytic};
  };
  return o;
}

MapOracle linear_w(const Mat& c, int n) {
  MapOracle o;
  o.n = n;
  o.m = static_cast<int>(c.cols());
  o.k = static_cast<int>(c.rows());
  o.eval = [c](const Vec&, const Vec& u) { return Vec(c * u); };
  o.jac_x = [c, n](const Vec&, const Vec&) { return Mat(Mat::Zero(c.rows(), n)); };
  o.jac_y = [c](const Vec&, const Vec&) { return c; };
  o.hess_bound = [](const BallPair&, HessWhich, NormSpec) {
    return Bound{0.0, Provenance::Analytic};
  };
  o.lip_bound = [](const BallPair&, LipWhich) { return Bound{0.0, Provenance::Analytic}; };
  return o;
}

FblinProblem paper_problem(double R = 1.0) {
  FblinProblem p;
  p.phi = identity_map(2);
  p.w = paper_w();
  p.A = Mat(2, 2);
  p.A << 0, 1, 0, 0;
  p.B = Mat(2, 1);
  p.B << 0, 1;
  p.xstar = Vec::Zero(2);
  p.ustar = Vec::Zero(1);
  p.R = R;
  return p;
}

}  // namespace

TEST_CASE("state domain: identity coordinate change is global up to R", "[fblin]") {
  FblinProblem p = paper_problem(3.0);
  BoundCertificate cert = state_domain(p);
  REQUIRE(cert.eps_x == 3.0);
  REQUIRE(cert.eps_y == Catch::Approx(3.0).epsilon(1e-6));
  REQUIRE(cert.constants.at("clamped_at_R") == 1.0);
  REQUIRE(cert.constants.at("M") == Catch::Approx(1.0));
  REQUIRE(cert.constants.at("P_phi") == cert.eps_x);
  REQUIRE(cert.constants.at("P_phi_prime") == cert.eps_y);
  REQUIRE(cert.certified);
  REQUIRE(cert.uniqueness);
}

TEST_CASE("state domain: scalar quadratic map certifies radius one", "[fblin]") {
  FblinProblem p;
  p.phi = half_square_map();
  p.w = linear_w(Mat::Identity(1, 1), 1);
  p.A = Mat::Identity(1, 1) * 0.5;
  p.B = Mat::Identity(1, 1);
  p.xstar = Vec::Zero(1);
  p.ustar = Vec::Zero(1);
  p.R = 2.0;

  BoundCertificate cert = state_domain(p);
  REQUIRE(cert.eps_x == Catch::Approx(1.0).epsilon(1e-6));
  REQUIRE(cert.eps_x < 1.0);
  REQUIRE(cert.eps_y == Catch::Approx(0.25).epsilon(1e-6));
  REQUIRE(cert.constants.at("r_at_max_image") == Catch::Approx(0.5).epsilon(1e-6));
  REQUIRE(cert.constants.at("clamped_at_R") == 0.0);

  p.R = 0.75;  // clamp before the modulus condition binds
  BoundCertificate clamped = state_domain(p);
  REQUIRE(clamped.eps_x == 0.75);
  REQUIRE(clamped.eps_y == Catch::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("state domain: linear change scales the image by the inverse gain", "[fblin]") {
  Mat m(2, 2);
  m << 2, 1, 0, 2;
  FblinProblem p = paper_problem(1.5);
  p.phi = linear_map(m);
  BoundCertificate cert = state_domain(p);
  REQUIRE(cert.eps_x == 1.5);
  // ||inv(m)||_inf = 0.75
  REQUIRE(cert.eps_y == Catch::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("state domain rejects a singular coordinate jacobian", "[fblin]") {
  Mat m(2, 2);
  m << 1, 2, 2, 4;
  FblinProblem p = paper_problem();
  p.phi = linear_map(m);
  REQUIRE_THROWS_AS(state_domain(p), SingularJacobian);
}

TEST_CASE("control domain: paper map at rho_x 0.2 yields 0.56 rho_u", "[fblin]") {
  FblinProblem p = paper_problem();
  BoundCertificate cert = control_domain(p, 0.2, 1.0);
  REQUIRE(cert.constants.at("eps_v_sup") == Catch::Approx(0.56).margin(1e-12));
  REQUIRE(cert.eps_y == Catch::Approx(0.56 * (1.0 - cert.shrink_tau)).margin(1e-12));
  REQUIRE(cert.constants.at("M_W_u") == 1.0);
  REQUIRE(cert.constants.at("L_W_x") == 0.0);
  REQUIRE(cert.constants.at("l_W_x") == 0.0);
  REQUIRE(cert.constants.at("l_W_u") == Catch::Approx(0.44).margin(1e-12));
  REQUIRE(cert.certified);

  BoundCertificate scaled = control_domain(p, 0.2, 2.5);
  REQUIRE(scaled.constants.at("eps_v_sup") == Catch::Approx(1.4).margin(1e-12));
}

TEST_CASE("control domain: linear-in-u map passes eps_u over the gain", "[fblin]") {
  Mat c(2, 2);
  c << 2, 0, 0, 4;
  FblinProblem p = paper_problem();
  p.w = linear_w(c, 2);
  p.B = Mat::Zero(2, 2);
  p.B(0, 1) = 1.0;
  p.B(1, 0) = 1.0;
  p.ustar = Vec::Zero(2);

  BoundCertificate cert = control_domain(p, 0.01, 1.0);
  REQUIRE(cert.constants.at("M_W_u") == Catch::Approx(0.5));
  REQUIRE(cert.constants.at("eps_v_sup") == Catch::Approx(2.0).margin(1e-12));
  BoundCertificate wide = control_domain(p, 10.0, 1.0);
  REQUIRE(wide.constants.at("eps_v_sup") == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("control domain guards", "[fblin]") {
  FblinProblem p = paper_problem();
  REQUIRE_THROWS_AS(control_domain(p, 0.45, 1.0), NoFeasibleRegion);
  REQUIRE_THROWS_AS(control_domain(p, 0.4143, 1.0), NoFeasibleRegion);
  REQUIRE_THROWS_AS(control_domain(p, 0.0, 1.0), ValidationError);
  REQUIRE_THROWS_AS(control_domain(p, 0.2, -1.0), ValidationError);

  MapOracle w = paper_w();
  FblinProblem singular = paper_problem();
  singular.w = w;
  singular.xstar << -1.0, 0.0;  // (1 + x1)^2 vanishes
  REQUIRE_THROWS_AS(control_domain(singular, 0.1, 1.0), SingularJacobianY);
}

TEST_CASE("control domain feasibility frontier sits below sqrt(2) - 1", "[fblin]") {
  FblinProblem p = paper_problem();
  const double frontier = std::sqrt(2.0) - 1.0;
  double largest_feasible = 0.0;
  for (int i = 1; i <= 60; ++i) {
    double rho_x = 0.01 * i;
    bool feasible = true;
    try {
      control_domain(p, rho_x, 1.0);
    } catch (const NoFeasibleRegion&) {
      feasible = false;
    }
    REQUIRE(feasible == (rho_x * (2.0 + rho_x) < 1.0));
    if (feasible) largest_feasible = rho_x;
  }
  REQUIRE(largest_feasible < frontier);
  REQUIRE(largest_feasible > frontier - 0.011);
}

TEST_CASE("analytic control moduli dominate sampled ones", "[fblin]") {
  MapOracle o = paper_w();
  Vec xs = Vec::Zero(2), us = Vec::Zero(1);
  for (double rx : {0.1, 0.2, 0.35}) {
    for (double ru : {0.5, 1.0}) {
      BallPair ball{xs, us, rx, ru, NormSpec::Inf};
      Bound exact_u = o.lip_bound(ball, LipWhich::JY);
      Bound sampled_u = sampled_lip_bound(o, ball, LipWhich::JY, 400, 1.0);
      REQUIRE(sampled_u.value <= exact_u.value + 1e-12);
      BallPair frozen{xs, us, rx, 0.0, NormSpec::Inf};
      Bound exact_x = o.lip_bound(frozen, LipWhich::JX);
      Bound sampled_x = sampled_lip_bound(o, frozen, LipWhich::JX, 400, 1.0);
      REQUIRE(sampled_x.value <= exact_x.value + 1e-12);
    }
  }
}

TEST_CASE("feedback map: 500 sampled pairs solve uniquely in the control ball", "[fblin]") {
  FblinProblem p = paper_problem();
  const double eps_x = 0.2, eps_u = 1.0;
  BoundCertificate cert = control_domain(p, eps_x, eps_u);

  std::mt19937 rng(42);
  std::uniform_real_distribution<double> ux(-eps_x, eps_x);
  std::uniform_real_distribution<double> uv(-cert.eps_y, cert.eps_y);
  int failures = 0;
  for (int s = 0; s < 500; ++s) {
    Vec x(2);
    x << ux(rng), ux(rng);
    Vec v(1);
    v << uv(rng);

    // multistart damped Newton on u -> w(x, u) - v
    std::vector<double> roots;
    for (double start : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
      double u = start;
      bool converged = false;
      for (int it = 0; it < 100; ++it) {
        Vec uu(1);
        uu << u;
        double r = (p.w.eval(x, uu) - v)(0);
        if (std::abs(r) < 1e-13) {
          converged = true;
          break;
        }
        double j = p.w.jac_y(x, uu)(0, 0);
        double step = r / j;
        double t = 1.0;
        while (t > 1e-8) {
          Vec trial(1);
          trial << u - t * step;
          if (std::abs((p.w.eval(x, trial) - v)(0)) < std::abs(r)) break;
          t *= 0.5;
        }
        u -= t * step;
      }
      if (!converged || std::abs(u) > eps_u) continue;
      bool dup = false;
      for (double r0 : roots) dup = dup || std::abs(r0 - u) < 1e-7;
      if (!dup) roots.push_back(u);
    }

    double expected = v(0) / ((1.0 + x(0)) * (1.0 + x(0)));
    if (roots.size() != 1 || std::abs(roots[0] - expected) > 1e-9) ++failures;
  }
  REQUIRE(failures == 0);
}

TEST_CASE("invariance: nilpotent shift certifies half the image ball", "[fblin]") {
  FblinProblem p = paper_problem(1.0);
  InvarianceBound inv = invariance_bound(p, 0.5);
  REQUIRE(inv.P_phi_prime == Catch::Approx(1.0).epsilon(1e-6));
  REQUIRE(inv.A_norm == 1.0);
  REQUIRE(inv.B_norm == 1.0);
  REQUIRE(inv.eps_v == Catch::Approx(0.5).margin(1e-6));
  REQUIRE(inv.eps_v < 0.5);
  REQUIRE(inv.sim_runs == 100);
  REQUIRE(inv.sim_steps == 10000);
  REQUIRE(inv.sim_max_deviation > 0.0);
  REQUIRE(inv.sim_max_deviation <= 0.5);
  REQUIRE(inv.sim_contained);
}

TEST_CASE("invariance guards", "[fblin]") {
  FblinProblem p = paper_problem(1.0);
  REQUIRE_THROWS_AS(invariance_bound(p, 0.0), ValidationError);
  double p_prime = state_domain(p).eps_y;
  REQUIRE_THROWS_AS(invariance_bound(p, p_prime), ValidationError);

  FblinProblem zero_b = paper_problem(1.0);
  zero_b.B = Mat::Zero(2, 1);
  REQUIRE_THROWS_AS(invariance_bound(zero_b, 0.5), DivisionByZeroB);

  FblinProblem fast = paper_problem(1.0);
  fast.A << 0, 2, 0, 0;
  REQUIRE_THROWS_AS(invariance_bound(fast, 0.6), NoFeasibleRegion);
}

TEST_CASE("linearization domain: paper system is nonempty at rho_x 0.2", "[fblin]") {
  FblinProblem p = paper_problem(1.0);
  LinearizationDomain ld = linearization_domain(p, 0.2, 1.0, 0.5);
  REQUIRE(ld.eps_x == 0.2);
  REQUIRE(ld.eps_u == 1.0);
  REQUIRE(ld.control.eps_y / ld.eps_u <= 0.56);
  REQUIRE(ld.control.eps_y / ld.eps_u == Catch::Approx(0.56).margin(1e-6));
  REQUIRE(ld.eps_v == Catch::Approx(0.5).margin(1e-6));
  REQUIRE(ld.state.eps_x == 1.0);
  REQUIRE(ld.invariance.sim_contained);
}

TEST_CASE("linearization domain: fully linear system clamps at R", "[fblin]") {
  FblinProblem p;
  p.phi = identity_map(2);
  p.w = linear_w(Mat::Identity(2, 2), 2);
  p.A = Mat::Identity(2, 2) * 0.5;
  p.B = Mat::Identity(2, 2);
  p.xstar = Vec::Zero(2);
  p.ustar = Vec::Zero(2);
  p.R = 2.0;

  LinearizationDomain ld = linearization_domain(p, 5.0, 1.0);
  REQUIRE(ld.eps_x == 2.0);  // capped by the state domain
  REQUIRE(ld.state.constants.at("clamped_at_R") == 1.0);
  REQUIRE(ld.control.eps_y == Catch::Approx(1.0).epsilon(1e-6));
  REQUIRE(ld.eps_v == Catch::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("linearization domain shrinks with the state ball", "[fblin]") {
  auto domain_for = [](double R) {
    FblinProblem p;
    p.phi = half_square_map();
    p.w = linear_w(Mat::Identity(1, 1), 1);
    p.A = Mat::Identity(1, 1) * 0.5;
    p.B = Mat::Identity(1, 1);
    p.xstar = Vec::Zero(1);
    p.ustar = Vec::Zero(1);
    p.R = R;
    return linearization_domain(p, 0.05, 1.0, 0.1);
  };
  LinearizationDomain big = domain_for(0.75);
  LinearizationDomain mid = domain_for(0.4);
  LinearizationDomain small = domain_for(0.2);
  REQUIRE(big.state.eps_y > mid.state.eps_y);
  REQUIRE(mid.state.eps_y > small.state.eps_y);
  REQUIRE(big.eps_v > mid.eps_v);
  REQUIRE(mid.eps_v > small.eps_v);
  REQUIRE(big.eps_x == 0.05);
}

TEST_CASE("problem validation", "[fblin]") {
  FblinProblem p = paper_problem();
  p.A = Mat::Zero(3, 2);
  REQUIRE_THROWS_AS(state_domain(p), ValidationError);

  FblinProblem with_plant = paper_problem();
  with_plant.plant = [](const Vec& x, const Vec&) { return x; };
  REQUIRE_NOTHROW(state_domain(with_plant));

  with_plant.plant = [](const Vec& x, const Vec&) { return Vec((x.array() + 1.0).matrix()); };
  REQUIRE_THROWS_AS(state_domain(with_plant), ValidationError);
}
