#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <string>

#include "ifcert/fixtures.hpp"
#include "ifcert/riccati.hpp"
#include "ifcert/verify.hpp"

using namespace ifcert;

namespace {

double rel_gap(const Mat& got, const Mat& want) {
  double scale = std::max(1.0, want.cwiseAbs().maxCoeff());
  return (got - want).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

TEST_CASE("corpus enumerates the expected instances", "[fixtures]") {
  auto corpus = fixture_corpus();
  REQUIRE(corpus.size() >= 10);

  std::map<std::string, std::pair<int, int>> dims;
  for (const auto& f : corpus) dims[f.name] = {f.oracle.n, f.oracle.m};

  REQUIRE(dims.size() == corpus.size());
  REQUIRE(dims.at("linear1d") == std::make_pair(1, 1));
  REQUIRE(dims.at("sqrt1d") == std::make_pair(1, 1));
  REQUIRE(dims.at("cubic1d") == std::make_pair(1, 1));
  REQUIRE(dims.at("sincos1d") == std::make_pair(1, 1));
  REQUIRE(dims.at("affine2d") == std::make_pair(2, 2));
  REQUIRE(dims.at("rot2d") == std::make_pair(1, 2));
  REQUIRE(dims.at("qcqp_paper") == std::make_pair(2, 2));
  REQUIRE(dims.at("pf2bus") == std::make_pair(2, 2));
  REQUIRE(dims.at("are_di") == std::make_pair(4, 3));
  REQUIRE(dims.at("fblin_w") == std::make_pair(2, 1));
  REQUIRE(dims.at("ift_scalar") == std::make_pair(1, 1));
  REQUIRE(dims.at("ift2d") == std::make_pair(2, 2));

  for (const auto& f : corpus) {
    INFO(f.name);
    REQUIRE(f.oracle.k == f.oracle.m);
    REQUIRE(f.ball.x0.size() == f.oracle.n);
    REQUIRE(f.ball.y0.size() == f.oracle.m);
    REQUIRE(f.ball.Rx > 0.0);
    REQUIRE(f.ball.Ry > 0.0);
  }
}

TEST_CASE("every fixture certifies with analytic constants", "[fixtures]") {
  for (const auto& f : fixture_corpus()) {
    INFO(f.name);
    BoundCertificate cert = fixture_certify(f);
    REQUIRE(cert.certified);
    REQUIRE(cert.uniqueness);
    REQUIRE(cert.method == Method::ImftC2);
    REQUIRE(cert.eps_x > 0.0);
    REQUIRE(cert.eps_y > 0.0);
    REQUIRE(cert.eps_x <= f.ball.Rx);
    REQUIRE(cert.eps_y <= f.ball.Ry);
    REQUIRE(cert.w0.lpNorm<Eigen::Infinity>() <= 1e-7);

    BoundCertificate again = fixture_certify(f);
    REQUIRE(again.eps_x == cert.eps_x);
    REQUIRE(again.eps_y == cert.eps_y);
  }
}

TEST_CASE("finite differences confirm every fixture jacobian", "[fixtures]") {
  for (const auto& f : fixture_corpus()) {
    INFO(f.name);
    const MapOracle& o = f.oracle;
    for (int s = 0; s < 4; ++s) {
      Vec x = s == 0 ? f.ball.x0
                     : detail::sample_in_ball(f.ball.x0, 0.5 * f.ball.Rx,
                                              f.ball.norm, static_cast<std::uint64_t>(s));
      Vec y = s == 0 ? f.ball.y0
                     : detail::sample_in_ball(f.ball.y0, 0.5 * f.ball.Ry,
                                              f.ball.norm, static_cast<std::uint64_t>(s), 7);
      Mat jx = o.jac_x(x, y);
      Mat jy = o.jac_y(x, y);
      Mat jx_fd = fd_jacobian([&](const Vec& t) { return o.eval(t, y); }, x);
      Mat jy_fd = fd_jacobian([&](const Vec& t) { return o.eval(x, t); }, y);
      REQUIRE(rel_gap(jx_fd, jx) <= 1e-6);
      REQUIRE(rel_gap(jy_fd, jy) <= 1e-6);
    }
  }
}

TEST_CASE("sampled curvature stays below the analytic bounds", "[fixtures]") {
  for (const auto& f : fixture_corpus()) {
    INFO(f.name);
    for (HessWhich which : {HessWhich::XX, HessWhich::XY, HessWhich::YY}) {
      Bound analytic = f.oracle.hess_bound(f.ball, which, f.ball.norm);
      REQUIRE(analytic.provenance == Provenance::Analytic);
      Bound sampled = sampled_hess_bound(f.oracle, f.ball, which, f.ball.norm, 200, 1.0);
      INFO("which=" << static_cast<int>(which) << " sampled=" << sampled.value
                    << " analytic=" << analytic.value);
      REQUIRE(sampled.value <= analytic.value * (1.0 + 1e-6) + 1e-9);
    }
  }
}

TEST_CASE("sampled jacobian moduli stay below the analytic bounds", "[fixtures]") {
  for (const auto& f : fixture_corpus()) {
    INFO(f.name);
    for (LipWhich which : {LipWhich::JX, LipWhich::JY}) {
      Bound analytic = f.oracle.lip_bound(f.ball, which);
      REQUIRE(analytic.provenance == Provenance::Analytic);
      Bound sampled = sampled_lip_bound(f.oracle, f.ball, which, 200, 1.0);
      INFO("which=" << static_cast<int>(which) << " sampled=" << sampled.value
                    << " analytic=" << analytic.value);
      REQUIRE(sampled.value <= analytic.value * (1.0 + 1e-6) + 1e-9);
    }
  }
}

TEST_CASE("certificate replay finds one root per sampled input", "[fixtures]") {
  for (const auto& f : fixture_corpus()) {
    INFO(f.name);
    BoundCertificate cert = fixture_certify(f);
    VerifyReport rep = certificate_verify(cert, f.oracle, 500, 20);
    INFO("existence=" << rep.existence_failures
                      << " uniqueness=" << rep.uniqueness_failures
                      << " worst=" << rep.worst_residual);
    REQUIRE(rep.samples == 500);
    REQUIRE(rep.existence_failures == 0);
    REQUIRE(rep.uniqueness_failures == 0);
    REQUIRE(rep.worst_residual <= 1e-8);
  }
}

TEST_CASE("plane fixtures have degree matching the jacobian sign", "[fixtures]") {
  int checked = 0;
  for (const auto& f : fixture_corpus()) {
    if (f.oracle.m != 2) continue;
    INFO(f.name);
    BoundCertificate cert = fixture_certify(f);
    Vec x0 = cert.x0, y0 = cert.y0, w0 = cert.w0;
    auto g = [&](const Vec& y) { return Vec(f.oracle.eval(x0, y) - w0); };
    Box box{Vec(y0.array() - cert.eps_y), Vec(y0.array() + cert.eps_y)};
    int deg = degree_2d(g, box);
    double det = f.oracle.jac_y(x0, y0).determinant();
    int want = det > 0.0 ? 1 : -1;
    REQUIRE((deg == 1 || deg == -1));
    REQUIRE(deg == want);
    ++checked;
  }
  REQUIRE(checked == 5);
}

TEST_CASE("affine comparison homotopy holds at the certified radii", "[fixtures]") {
  for (const auto& f : fixture_corpus()) {
    INFO(f.name);
    BoundCertificate cert = fixture_certify(f);
    Vec x0 = cert.x0, y0 = cert.y0, w0 = cert.w0;
    Mat j0 = f.oracle.jac_y(x0, y0);
    auto f1 = [&](const Vec& y) { return Vec(f.oracle.eval(x0, y) - w0); };
    auto f2 = [&](const Vec& y) { return Vec(j0 * (y - y0)); };
    auto sampler = [&](int i) {
      return detail::sample_on_sphere(y0, cert.eps_y, cert.norm,
                                      static_cast<std::uint64_t>(i));
    };
    HomotopyCheck hc = homotopy_boundary_check(f1, f2, sampler, 256, cert.norm);
    INFO("min_slack=" << hc.min_slack);
    REQUIRE(hc.pass);
    REQUIRE(hc.min_slack > 0.0);
  }
}

TEST_CASE("closed-form riccati center agrees with the dense solver", "[fixtures]") {
  Mat A0(2, 2), B0(2, 1);
  A0 << 0.0, 1.0, 0.0, 0.0;
  B0 << 0.0, 1.0;
  AreProblem p = are_problem(A0, B0, Mat::Identity(2, 2), Mat::Identity(1, 1));

  auto corpus = fixture_corpus();
  const Fixture* are = nullptr;
  for (const auto& f : corpus)
    if (f.name == "are_di") are = &f;
  REQUIRE(are != nullptr);

  Vec p0 = are->ball.y0;
  REQUIRE(p0(0) == Catch::Approx(p.P0(0, 0)).margin(1e-10));
  REQUIRE(p0(1) == Catch::Approx(p.P0(0, 1)).margin(1e-10));
  REQUIRE(p0(2) == Catch::Approx(p.P0(1, 1)).margin(1e-10));

  // residual components of the embedded oracle vanish at the solver's answer
  Vec ph(3);
  ph << p.P0(0, 0), p.P0(0, 1), p.P0(1, 1);
  Vec g = are->oracle.eval(are->ball.x0, ph);
  REQUIRE(g.lpNorm<Eigen::Infinity>() <= 1e-8);
}
