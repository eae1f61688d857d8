#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "ifcert/powerflow.hpp"

using namespace ifcert;

namespace {

std::string read_file(const std::string& name) {
  std::string path = std::string(IFCERT_DATA_DIR) + "/" + name;
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kTwoBusPv = R"(function mpc = twobus_pv
mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1	0	230	1	1.1	0.9;
	2	2	0	0	0	0	1	1	0	230	1	1.1	0.9;
];
mpc.gen = [
	1	0	0	100	-100	1	100	1	100	0;
	2	0	0	100	-100	1	100	1	100	0;
];
mpc.branch = [
	1	2	0	0.1	0	100	100	100	0	0	1;
];
)";

}  // namespace

TEST_CASE("parser reads the shipped cases", "[powerflow]") {
  PowerCase c5 = parse_case(read_file("case5.m"));
  REQUIRE(c5.buses.size() == 5);
  REQUIRE(c5.branches.size() == 6);
  REQUIRE(c5.gens.size() == 5);
  REQUIRE(c5.base_mva == 100.0);
  REQUIRE(c5.buses[1].Pd == 300.0);
  REQUIRE(c5.buses[1].Qd == 98.61);
  REQUIRE(c5.buses[3].type == BusType::Slack);

  PowerCase c9 = parse_case(read_file("case9.m"));
  REQUIRE(c9.buses.size() == 9);
  REQUIRE(c9.branches.size() == 9);
  REQUIRE(c9.gens.size() == 3);
  REQUIRE(c9.gens[0].Vg == 1.04);

  PowerCase c2 = parse_case(read_file("case2pq.m"));
  REQUIRE(c2.buses.size() == 2);
  REQUIRE(c2.branches.size() == 1);
}

TEST_CASE("parser reports truncation with a line number", "[powerflow]") {
  std::string text = "mpc.baseMVA = 100;\nmpc.bus = [\n\t1\t3\t0\t0\t0\t0\t1\t1;\n";
  try {
    parse_case(text);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    REQUIRE(e.line >= 3);
    REQUIRE(std::string(e.what()).find("unterminated") != std::string::npos);
  }
}

TEST_CASE("parser rejects malformed structure", "[powerflow]") {
  // two slack buses
  std::string two_slack = R"(mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1;
	2	3	0	0	0	0	1	1;
];
mpc.gen = [ 1	0	0	0	0	1	100	1; ];
mpc.branch = [ 1	2	0.1	0.1	0	0	0	0	0	0	1; ];
)";
  REQUIRE_THROWS_AS(parse_case(two_slack), ValidationError);

  std::string dangling = R"(mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1;
	2	1	0	0	0	0	1	1;
];
mpc.gen = [ 1	0	0	0	0	1	100	1; ];
mpc.branch = [ 1	7	0.1	0.1	0	0	0	0	0	0	1; ];
)";
  REQUIRE_THROWS_AS(parse_case(dangling), ValidationError);

  std::string tapped = R"(mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1;
	2	1	0	0	0	0	1	1;
];
mpc.gen = [ 1	0	0	0	0	1	100	1; ];
mpc.branch = [ 1	2	0.1	0.1	0	0	0	0	0.98	0	1; ];
)";
  REQUIRE_THROWS_AS(parse_case(tapped), ValidationError);

  std::string disconnected = R"(mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1;
	2	1	0	0	0	0	1	1;
	3	1	0	0	0	0	1	1;
];
mpc.gen = [ 1	0	0	0	0	1	100	1; ];
mpc.branch = [ 1	2	0.1	0.1	0	0	0	0	0	0	1; ];
)";
  REQUIRE_THROWS_AS(parse_case(disconnected), ValidationError);

  std::string bad_number = "mpc.baseMVA = 1f0;\n";
  REQUIRE_THROWS_AS(parse_case(bad_number), ParseError);
}

TEST_CASE("parser skips unknown tables and honors status columns", "[powerflow]") {
  std::string text = R"(function mpc = c
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1	0	230	1	1.1	0.9;
	2	1	0	0	0	0	1	1	0	230	1	1.1	0.9;
];
mpc.gen = [
	1	0	0	100	-100	1	100	1	100	0;
	2	50	0	100	-100	1	100	0	100	0;
];
mpc.branch = [
	1	2	0	0.1	0	100	100	100	0	0	1;
	1	2	0	0.2	0	100	100	100	0	0	0;
];
mpc.gencost = [
	2	0	0	3	0.11	5	0;
];
)";
  std::vector<std::string> warnings;
  PowerCase c = parse_case(text, &warnings);
  REQUIRE(c.gens.size() == 1);     // out-of-service gen dropped
  REQUIRE(c.branches.size() == 1); // out-of-service branch dropped
  REQUIRE(warnings.size() == 1);
  REQUIRE(warnings[0] == "skipped mpc.gencost");
}

TEST_CASE("serialize then parse is the identity on the kept fields", "[powerflow]") {
  PowerCase a = parse_case(read_file("case5.m"));
  PowerCase b = parse_case(serialize_case(a));
  REQUIRE(a.base_mva == b.base_mva);
  REQUIRE(a.buses.size() == b.buses.size());
  for (size_t i = 0; i < a.buses.size(); ++i) {
    REQUIRE(a.buses[i].id == b.buses[i].id);
    REQUIRE(a.buses[i].type == b.buses[i].type);
    REQUIRE(a.buses[i].Pd == b.buses[i].Pd);
    REQUIRE(a.buses[i].Qd == b.buses[i].Qd);
    REQUIRE(a.buses[i].Gs == b.buses[i].Gs);
    REQUIRE(a.buses[i].Bs == b.buses[i].Bs);
    REQUIRE(a.buses[i].Vm == b.buses[i].Vm);
  }
  REQUIRE(a.gens.size() == b.gens.size());
  for (size_t i = 0; i < a.gens.size(); ++i) {
    REQUIRE(a.gens[i].bus == b.gens[i].bus);
    REQUIRE(a.gens[i].Pg == b.gens[i].Pg);
    REQUIRE(a.gens[i].Qg == b.gens[i].Qg);
    REQUIRE(a.gens[i].Vg == b.gens[i].Vg);
  }
  REQUIRE(a.branches.size() == b.branches.size());
  for (size_t i = 0; i < a.branches.size(); ++i) {
    REQUIRE(a.branches[i].from == b.branches[i].from);
    REQUIRE(a.branches[i].to == b.branches[i].to);
    REQUIRE(a.branches[i].r == b.branches[i].r);
    REQUIRE(a.branches[i].x == b.branches[i].x);
    REQUIRE(a.branches[i].b == b.branches[i].b);
  }
}

TEST_CASE("ybus of a single reactive branch", "[powerflow]") {
  PowerCase c = parse_case(read_file("case2pq.m"));
  PfYbus y = build_ybus(c);
  REQUIRE(y.G.cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(y.B(0, 1) == Catch::Approx(10.0));
  REQUIRE(y.B(1, 0) == Catch::Approx(10.0));
  REQUIRE(y.B(0, 0) == Catch::Approx(-10.0));
  REQUIRE(y.B(1, 1) == Catch::Approx(-10.0));
}

TEST_CASE("ybus with no branches is the shunt diagonal", "[powerflow]") {
  std::string text = R"(mpc.baseMVA = 100;
mpc.bus = [ 1	3	0	0	5	-20	1	1; ];
mpc.gen = [ 1	0	0	0	0	1	100	1; ];
mpc.branch = [ ];
)";
  PowerCase c = parse_case(text);
  PfYbus y = build_ybus(c);
  REQUIRE(y.G(0, 0) == Catch::Approx(0.05));
  REQUIRE(y.B(0, 0) == Catch::Approx(-0.2));
}

TEST_CASE("ybus rejects a zero impedance branch", "[powerflow]") {
  PowerCase c = parse_case(read_file("case2pq.m"));
  c.branches[0].x = 0.0;
  REQUIRE_THROWS_AS(build_ybus(c), ZeroImpedanceBranch);
}

TEST_CASE("case9 ybus matches a direct complex construction", "[powerflow]") {
  PowerCase c = parse_case(read_file("case9.m"));
  PfYbus y = build_ybus(c);
  using C = std::complex<double>;
  Eigen::Matrix<C, Eigen::Dynamic, Eigen::Dynamic> Y(9, 9);
  Y.setZero();
  for (const auto& br : c.branches) {
    C ys = 1.0 / C(br.r, br.x);
    int f = br.from - 1, t = br.to - 1;
    Y(f, f) += ys + C(0.0, br.b / 2.0);
    Y(t, t) += ys + C(0.0, br.b / 2.0);
    Y(f, t) -= ys;
    Y(t, f) -= ys;
  }
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) {
      REQUIRE(y.G(i, j) == Catch::Approx(Y(i, j).real()).margin(1e-10));
      REQUIRE(y.B(i, j) == Catch::Approx(Y(i, j).imag()).margin(1e-10));
    }
}

TEST_CASE("qcqp assembly of the two bus PQ fixture", "[powerflow]") {
  PowerCase c = parse_case(read_file("case2pq.m"));
  PfQcqp pf = build_pf_qcqp(c);
  REQUIRE(pf.qcqp.n == 2);
  REQUIRE(pf.slack_id == 1);
  REQUIRE(pf.v0 == 1.0);
  REQUIRE(pf.p_row_bus == std::vector<int>{2});
  REQUIRE(pf.q_row_bus == std::vector<int>{2});
  REQUIRE(pf.v_row_bus.empty());

  // p component: 10*f2, pure slack coupling
  REQUIRE(pf.qcqp.Qi[0].cwiseAbs().maxCoeff() < 1e-14);
  REQUIRE(pf.qcqp.L(0, 0) == Catch::Approx(0.0).margin(1e-14));
  REQUIRE(pf.qcqp.L(0, 1) == Catch::Approx(10.0));
  // q component: 10 e2^2 + 10 f2^2 - 10 e2
  Mat qq(2, 2);
  qq << 10.0, 0.0, 0.0, 10.0;
  REQUIRE((pf.qcqp.Qi[1] - qq).cwiseAbs().maxCoeff() < 1e-14);
  REQUIRE(pf.qcqp.L(1, 0) == Catch::Approx(-10.0));
  REQUIRE(pf.qcqp.L(1, 1) == Catch::Approx(0.0).margin(1e-14));
  REQUIRE(pf.qcqp.u0.cwiseAbs().maxCoeff() == 0.0);

  Vec x0 = pf_nominal_solve(pf);
  REQUIRE(x0(0) == Catch::Approx(1.0).margin(1e-9));
  REQUIRE(x0(1) == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("voltage magnitude rows are identity diagonals", "[powerflow]") {
  PowerCase c = parse_case(kTwoBusPv);
  PfQcqp pf = build_pf_qcqp(c);
  REQUIRE(pf.v_row_bus == std::vector<int>{2});
  const Mat& qv = pf.qcqp.Qi[1];
  Mat expect = Mat::Identity(2, 2);
  REQUIRE((qv - expect).cwiseAbs().maxCoeff() == 0.0);
  // flat profile solves the zero-injection case exactly
  Vec flat = pf_flat_start(pf);
  REQUIRE((qcqp_eval(pf.qcqp, flat) - pf.qcqp.u0).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("case5 nominal solution", "[powerflow]") {
  PowerCase c = parse_case(read_file("case5.m"));
  PfQcqp pf = build_pf_qcqp(c);
  Vec x0 = pf_nominal_solve(pf);
  Vec expect(8);
  expect << 0.99836847, 0.98917438, 0.99996309, 0.99742575, 0.05709985, -0.01310906,
      -0.00859143, 0.07170689;
  REQUIRE((x0 - expect).cwiseAbs().maxCoeff() < 1e-6);
  REQUIRE((qcqp_eval(pf.qcqp, x0) - pf.qcqp.u0).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("case9 nominal solution", "[powerflow]") {
  PowerCase c = parse_case(read_file("case9.m"));
  PfQcqp pf = build_pf_qcqp(c);
  Vec x0 = pf_nominal_solve(pf);
  Vec expect(16);
  expect << 1.01158485, 1.0216048, 1.02502072, 1.01055792, 1.03174482, 1.01580069,
      1.02360846, 0.9932191, 0.16529091, 0.08335849, -0.0396781, -0.06512662, 0.03542925,
      0.01289923, 0.06654724, -0.06925764;
  REQUIRE((x0 - expect).cwiseAbs().maxCoeff() < 1e-6);
  // PV magnitude rows hold at the setpoints
  REQUIRE(x0(0) * x0(0) + x0(8) * x0(8) == Catch::Approx(1.025 * 1.025).margin(1e-9));
}

TEST_CASE("power balance at the solved profiles", "[powerflow]") {
  for (const char* name : {"case5.m", "case9.m"}) {
    PowerCase c = parse_case(read_file(name));
    PfYbus y = build_ybus(c);
    PfQcqp pf = build_pf_qcqp(c);
    Vec x0 = pf_nominal_solve(pf);

    const int n = static_cast<int>(y.bus_ids.size());
    Vec e(n), f(n);
    for (int i = 0; i < n; ++i) {
      int id = y.bus_ids[i];
      if (id == pf.slack_id) {
        e(i) = pf.v0;
        f(i) = 0.0;
      } else {
        e(i) = x0(pf.e_col.at(id));
        f(i) = x0(pf.f_col.at(id));
      }
    }
    auto [p, q] = pf_net_injections(y, e, f);

    // the non-slack net injections must equal the scheduled values
    for (size_t r = 0; r < pf.p_row_bus.size(); ++r) {
      int i = static_cast<int>(std::lower_bound(y.bus_ids.begin(), y.bus_ids.end(),
                                                pf.p_row_bus[r]) -
                               y.bus_ids.begin());
      REQUIRE(p(i) == Catch::Approx(pf.qcqp.u0(static_cast<int>(r))).margin(1e-7));
    }

    // sum of injections equals series plus shunt losses
    double losses = 0.0;
    std::map<int, int> idx;
    for (int i = 0; i < n; ++i) idx[y.bus_ids[i]] = i;
    for (const auto& br : c.branches) {
      double den = br.r * br.r + br.x * br.x;
      int a = idx[br.from], b = idx[br.to];
      std::complex<double> va(e(a), f(a)), vb(e(b), f(b));
      std::complex<double> iser = (va - vb) * std::complex<double>(br.r / den, -br.x / den);
      losses += br.r * std::norm(iser);
    }
    for (const auto& bus : c.buses) losses += bus.Gs / c.base_mva *
        (e(idx[bus.id]) * e(idx[bus.id]) + f(idx[bus.id]) * f(idx[bus.id]));
    REQUIRE(p.sum() == Catch::Approx(losses).margin(1e-6));
  }
}

TEST_CASE("margin row for the two bus fixture", "[powerflow]") {
  PowerCase c = parse_case(read_file("case2pq.m"));
  PfMarginRow row = pf_margin_row(c);
  REQUIRE(row.restrict_k == 2);
  REQUIRE(row.M_F == Catch::Approx(0.1).margin(1e-12));
  REQUIRE(row.M_F_prime == Catch::Approx(0.1).margin(1e-12));
  REQUIRE(row.K_bar == Catch::Approx(4.0).margin(1e-12));
  REQUIRE(row.rho_x == Catch::Approx(0.25).margin(1e-12));
  REQUIRE(row.r_u == Catch::Approx(1.25).margin(1e-10));

  // 200 sampled targets inside the certified ball all solve inside the x ball
  PfQcqp pf = build_pf_qcqp(c);
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int failures = 0;
  for (int s = 0; s < 200; ++s) {
    QcqpProblem q = pf.qcqp;
    for (int j = 0; j < q.n; ++j) q.u0(j) += row.r_u * 0.999 * u(rng);
    try {
      Vec x = qcqp_nominal_solve(q, row.x0);
      if ((x - row.x0).cwiseAbs().maxCoeff() >= row.rho_x) ++failures;
    } catch (const std::exception&) {
      ++failures;
    }
  }
  REQUIRE(failures == 0);
}

TEST_CASE("case5 margin row", "[powerflow]") {
  PowerCase c = parse_case(read_file("case5.m"));
  PfMarginRow row = pf_margin_row(c, 5);
  REQUIRE(row.M_F == Catch::Approx(0.515441).epsilon(1e-4));
  REQUIRE(row.M_F_prime == Catch::Approx(0.051730).epsilon(1e-4));
  REQUIRE(row.K_bar == Catch::Approx(10.269036).epsilon(1e-4));
  REQUIRE(row.rho_x == Catch::Approx(0.097380).epsilon(1e-4));
  REQUIRE(row.r_u == Catch::Approx(0.941233).epsilon(1e-4));
}

TEST_CASE("case9 margin row", "[powerflow]") {
  PowerCase c = parse_case(read_file("case9.m"));
  PfMarginRow row = pf_margin_row(c, 5);
  REQUIRE(row.M_F == Catch::Approx(1.380180).epsilon(1e-4));
  REQUIRE(row.M_F_prime == Catch::Approx(0.796750).epsilon(1e-4));
  REQUIRE(row.K_bar == Catch::Approx(38.491899).epsilon(1e-4));
  REQUIRE(row.rho_x == Catch::Approx(0.025979).epsilon(1e-4));
  REQUIRE(row.r_u == Catch::Approx(0.016303).epsilon(1e-4));

  REQUIRE(row.M_F == Catch::Approx(1.3802).epsilon(0.02));
  REQUIRE(row.M_F_prime == Catch::Approx(0.7968).epsilon(0.02));
  REQUIRE(row.K_bar == Catch::Approx(39.065).epsilon(0.02));
  REQUIRE(row.rho_x == Catch::Approx(0.0256).epsilon(0.02));
  REQUIRE(row.r_u == Catch::Approx(0.0161).epsilon(0.02));
}

TEST_CASE("margin rows survive sampled solvability checks", "[powerflow]") {
  for (const char* name : {"case5.m", "case9.m"}) {
    PowerCase c = parse_case(read_file(name));
    PfMarginRow row = pf_margin_row(c, 5);
    PfQcqp pf = build_pf_qcqp(c);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int failures = 0;
    for (int s = 0; s < 100; ++s) {
      QcqpProblem q = pf.qcqp;
      for (int j = 0; j < row.restrict_k; ++j) q.u0(j) += row.r_u * 0.999 * u(rng);
      try {
        Vec x = qcqp_nominal_solve(q, row.x0);
        if ((x - row.x0).cwiseAbs().maxCoeff() >= row.rho_x) ++failures;
      } catch (const std::exception&) {
        ++failures;
      }
    }
    REQUIRE(failures == 0);
  }
}

TEST_CASE("margin row validates the restriction count", "[powerflow]") {
  PowerCase c = parse_case(read_file("case2pq.m"));
  REQUIRE_THROWS_AS(pf_margin_row(c, 0), ValidationError);
  REQUIRE_THROWS_AS(pf_margin_row(c, 3), ValidationError);
}
