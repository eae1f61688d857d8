#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ifcert/bounds.hpp"
#include "ifcert/errors.hpp"
#include "ifcert/expr.hpp"
#include "ifcert/fblin.hpp"
#include "ifcert/oracle.hpp"
#include "ifcert/powerflow.hpp"
#include "ifcert/qcqp.hpp"
#include "ifcert/report.hpp"
#include "ifcert/riccati.hpp"
#include "ifcert/verify.hpp"

using namespace ifcert;

namespace {

// ---------------------------------------------------------------------------
// JSON input plumbing.

Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

Vec vec_from_json(const Json& j) {
  if (!j.is_array()) throw ValidationError("expected a numeric array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

Mat mat_from_json(const Json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ValidationError("expected an array of numeric rows");
  Mat m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
  for (size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != j[0].size()) throw ValidationError("ragged matrix rows");
    for (size_t c = 0; c < j[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
  }
  return m;
}

const Json& need(const Json& j, const std::string& key) {
  if (!j.contains(key)) throw ValidationError("missing key '" + key + "'");
  return j.at(key);
}

std::string slurp_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

QcqpProblem qcqp_from_json(const Json& j) {
  QcqpProblem p;
  p.n = need(j, "n").get<int>();
  for (const auto& qi : need(j, "Qi")) p.Qi.push_back(mat_from_json(qi));
  p.L = mat_from_json(need(j, "L"));
  if (j.contains("A")) {
    p.A = mat_from_json(j.at("A"));
    p.b = vec_from_json(need(j, "b"));
  } else {
    p.A = Mat::Zero(0, p.n);
    p.b = Vec::Zero(0);
  }
  p.u0 = vec_from_json(need(j, "u0"));
  if (j.contains("x0")) p.x0 = vec_from_json(j.at("x0"));
  return p;
}

AreProblem are_from_json(const Json& j) {
  return are_problem(mat_from_json(need(j, "A0")), mat_from_json(need(j, "B0")),
                     mat_from_json(need(j, "Q")), mat_from_json(need(j, "R")));
}

// ---------------------------------------------------------------------------
// Map registry: named oracles addressable from problem files.

int half_index(int r, int c, int n) {
  // upper-triangle (r <= c) flattened row by row
  return r * n - r * (r - 1) / 2 + (c - r);
}

Mat sym_from_half(const Vec& h, int n) {
  Mat p(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = r; c < n; ++c) p(r, c) = p(c, r) = h(half_index(r, c, n));
  return p;
}

// Riccati residual as an implicit map: x stacks the plant matrix row by row,
// y is the upper triangle of the symmetric unknown. Curvature is sampled, so
// certificates built on it are flagged non-certified.
MapOracle are_registry_oracle(const AreProblem& prob, int bound_samples) {
  const int n = static_cast<int>(prob.A0.rows());
  const Mat S = prob.B0 * solve_linear(prob.R, prob.B0.transpose());
  const Mat Q = prob.Q;
  const int k = n * (n + 1) / 2;

  MapOracle o;
  o.n = n * n;
  o.m = k;
  o.k = k;
  auto unstack = [n](const Vec& a) {
    Mat m(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) m(r, c) = a(r * n + c);
    return m;
  };
  auto to_half = [n, k](const Mat& m) {
    Vec h(k);
    for (int r = 0; r < n; ++r)
      for (int c = r; c < n; ++c) h(half_index(r, c, n)) = m(r, c);
    return h;
  };
  o.eval = [=](const Vec& a, const Vec& ph) {
    Mat A = unstack(a);
    Mat P = sym_from_half(ph, n);
    Mat F = A.transpose() * P + P * A - P * S * P + Q;
    return to_half(F);
  };
  o.jac_x = [=](const Vec&, const Vec& ph) {
    Mat P = sym_from_half(ph, n);
    Mat J(k, n * n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        Mat E = Mat::Zero(n, n);
        E(r, c) = 1.0;
        Mat D = E.transpose() * P + P * E;
        J.col(r * n + c) = to_half(D);
      }
    return J;
  };
  o.jac_y = [=](const Vec& a, const Vec& ph) {
    Mat A = unstack(a);
    Mat P = sym_from_half(ph, n);
    Mat J(k, k);
    for (int r = 0; r < n; ++r)
      for (int c = r; c < n; ++c) {
        Mat H = Mat::Zero(n, n);
        H(r, c) = H(c, r) = 1.0;
        Mat D = A.transpose() * H + H * A - H * S * P - P * S * H;
        J.col(half_index(r, c, n)) = to_half(D);
      }
    return J;
  };
  MapOracle base = o;
  o.hess_bound = make_sampled_hess_provider(base, bound_samples);
  o.lip_bound = [base, bound_samples](const BallPair& ball, LipWhich which) {
    return sampled_lip_bound(base, ball, which, bound_samples);
  };
  return o;
}

MapOracle oracle_from_ref(const Json& ref) {
  std::string type = need(ref, "type").get<std::string>();
  if (type == "expr") {
    int nx = need(ref, "nx").get<int>();
    int ny = need(ref, "ny").get<int>();
    std::vector<std::string> comps;
    for (const auto& c : need(ref, "components")) comps.push_back(c.get<std::string>());
    std::string yprefix = ref.value("yprefix", std::string("y"));
    int samples = ref.value("samples", 200);
    return expr::make_expr_oracle(nx, ny, comps, yprefix, samples);
  }
  if (type == "qcqp") return qcqp_oracle(qcqp_from_json(need(ref, "problem")));
  if (type == "powerflow") {
    std::string text = ref.contains("case_text")
                           ? need(ref, "case_text").get<std::string>()
                           : slurp_file(need(ref, "case").get<std::string>());
    PfQcqp pf = build_pf_qcqp(parse_case(text));
    return qcqp_oracle(pf.qcqp);
  }
  if (type == "are")
    return are_registry_oracle(are_from_json(need(ref, "problem")), ref.value("samples", 200));
  throw ValidationError("unknown map type '" + type + "'");
}

SquareMap square_from_ref(const Json& ref) {
  std::string type = need(ref, "type").get<std::string>();
  if (type == "expr") {
    int n = need(ref, "n").get<int>();
    std::vector<std::string> comps;
    for (const auto& c : need(ref, "components")) comps.push_back(c.get<std::string>());
    return expr::make_expr_square(n, comps, ref.value("samples", 200));
  }
  if (type == "qcqp") return qcqp_square(qcqp_from_json(need(ref, "problem")));
  throw ValidationError("square maps come from 'expr' or 'qcqp' refs");
}

// ---------------------------------------------------------------------------
// Option parsing shared across commands.

Objective objective_from_string(const std::string& s) {
  if (s == "maxx") return Objective::max_x();
  auto colon = s.find(':');
  if (colon != std::string::npos) {
    double v = std::stod(s.substr(colon + 1));
    std::string head = s.substr(0, colon);
    if (head == "fix-x") return Objective::fix_x_max_y(v);
    if (head == "fix-y") return Objective::fix_y_max_x(v);
  }
  throw ValidationError("objective must be maxx, fix-x:V or fix-y:V");
}

Objective objective_from_json(const Json& j) {
  std::string kind = need(j, "kind").get<std::string>();
  if (kind == "max_x") return Objective::max_x();
  double v = need(j, "value").get<double>();
  if (kind == "fix_x_max_y") return Objective::fix_x_max_y(v);
  if (kind == "fix_y_max_x") return Objective::fix_y_max_x(v);
  throw ValidationError("objective kind must be fix_x_max_y, fix_y_max_x or max_x");
}

std::string objective_name(const Objective& o) {
  switch (o.kind) {
    case Objective::Kind::FixXMaxY: return "fix-x:" + detail::csv_number(o.value);
    case Objective::Kind::FixYMaxX: return "fix-y:" + detail::csv_number(o.value);
    default: return "maxx";
  }
}

struct Sweep {
  double lo = 0.0, hi = 0.0;
  int count = 0;
};

Sweep sweep_from_string(const std::string& s) {
  // eps_x:a:b:n
  std::istringstream in(s);
  std::string head, a, b, n;
  if (!std::getline(in, head, ':') || head != "eps_x" || !std::getline(in, a, ':') ||
      !std::getline(in, b, ':') || !std::getline(in, n, ':'))
    throw ValidationError("sweep must look like eps_x:a:b:n");
  Sweep sw{std::stod(a), std::stod(b), std::stoi(n)};
  if (sw.count < 1 || !(sw.lo > 0.0) || !(sw.hi >= sw.lo))
    throw ValidationError("sweep needs 0 < a <= b and n >= 1");
  return sw;
}

void require_csv_for_sweep(const std::string& sweep_flag, const std::string& csv_path) {
  if (!sweep_flag.empty() && csv_path.empty())
    throw ValidationError("--sweep needs --csv for the curve output");
}

int emit_report(const Json& report, const std::string& path) {
  std::string text = report_dump(report);
  if (path.empty())
    std::cout << text;
  else
    write_text_file(path, text);
  return 0;
}

// ---------------------------------------------------------------------------
// Commands.

struct CommonOpts {
  std::string input;
  std::string report_path;
  std::string norm = "inf";
  double tau = kDefaultShrinkTau;
  std::uint64_t seed = 0;
};

struct VerifyOpts {
  bool enabled = false;
  int samples = 500;
  int seeds = 20;
};

Json common_config(const std::string& command, const CommonOpts& c) {
  Json cfg;
  cfg["command"] = command;
  cfg["input"] = c.input;
  cfg["norm"] = c.norm;
  cfg["shrink_tau"] = c.tau;
  cfg["seed"] = c.seed;
  return cfg;
}

int run_imft(const CommonOpts& common, const std::string& method,
             const std::string& objective_flag, double alpha, const VerifyOpts& verify,
             const std::string& sweep_flag, const std::string& csv_path) {
  require_csv_for_sweep(sweep_flag, csv_path);
  Json input = load_json(common.input);
  MapOracle oracle = oracle_from_ref(need(input, "map"));
  Vec x0 = vec_from_json(need(input, "x0"));
  Vec y0 = vec_from_json(need(input, "y0"));
  NormSpec norm = norm_from_name(input.value("norm", common.norm));
  BallPair ball{x0, y0, need(input, "Rx").get<double>(), need(input, "Ry").get<double>(), norm};

  Objective objective = Objective::max_x();
  if (!objective_flag.empty())
    objective = objective_from_string(objective_flag);
  else if (input.contains("objective"))
    objective = objective_from_json(input.at("objective"));

  Json cfg = common_config("imft", common);
  cfg["norm"] = norm_name(norm);
  cfg["method"] = method;
  cfg["objective"] = objective_name(objective);
  if (method == "c1") cfg["alpha"] = alpha;
  cfg["verify"] = verify.enabled;
  if (verify.enabled) {
    cfg["samples"] = verify.samples;
    cfg["seeds"] = verify.seeds;
  }
  if (!sweep_flag.empty()) cfg["sweep"] = sweep_flag;
  if (!csv_path.empty()) cfg["csv"] = csv_path;

  Json report;
  report["config"] = cfg;
  try {
    BoundCertificate cert =
        method == "c1" ? imft_c1_certify(oracle, x0, y0, ball, alpha, common.tau)
                       : imft_c2_certify(oracle, x0, y0, ball, objective, common.tau);
    report["certificate"] = certificate_json(cert);
    if (verify.enabled) {
      VerifyReport rep = certificate_verify(cert, oracle, verify.samples, verify.seeds);
      report["verification"] = verify_report_json(rep);
    }
  } catch (const NoFeasibleRegion& e) {
    report["certificate"] = empty_certificate_json();
    report["error"] = e.what();
    emit_report(report, common.report_path);
    return 2;
  }

  if (!sweep_flag.empty()) {
    Sweep sw = sweep_from_string(sweep_flag);
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i < sw.count; ++i) {
      double ex = sw.count == 1 ? sw.lo : sw.lo + (sw.hi - sw.lo) * i / (sw.count - 1);
      try {
        BoundCertificate c =
            imft_c2_certify(oracle, x0, y0, ball, Objective::fix_x_max_y(ex), common.tau);
        pts.push_back({ex, c.eps_y});
      } catch (const NoFeasibleRegion&) {
        // infeasible sweep points are omitted from the curve
      }
    }
    write_text_file(csv_path, curve_csv("eps_x", "eps_y", pts));
    report["sweep_points"] = static_cast<int>(pts.size());
  }

  return emit_report(report, common.report_path);
}

int run_ift(const CommonOpts& common, const std::string& method, const std::string& mode_flag,
            const std::string& objective_flag, double radius_flag, const VerifyOpts& verify) {
  Json input = load_json(common.input);
  SquareMap square = square_from_ref(need(input, "map"));
  Vec x0 = vec_from_json(need(input, "x0"));
  NormSpec norm = norm_from_name(input.value("norm", common.norm));
  double R = radius_flag > 0.0 ? radius_flag : input.value("R", 1.0);

  std::string mode_name = !mode_flag.empty() ? mode_flag : input.value("mode", std::string("forward"));
  if (mode_name != "forward" && mode_name != "inverse")
    throw ValidationError("mode must be forward or inverse");
  IftMode mode = mode_name == "inverse" ? IftMode::Inverse : IftMode::Forward;

  std::string obj_name =
      !objective_flag.empty() ? objective_flag : input.value("objective", std::string("largest-x"));
  IftObjective objective;
  if (obj_name == "largest-x")
    objective = IftObjective::LargestX;
  else if (obj_name == "max-image")
    objective = IftObjective::MaxImage;
  else
    throw ValidationError("objective must be largest-x or max-image");

  Json cfg = common_config("ift", common);
  cfg["norm"] = norm_name(norm);
  cfg["method"] = method;
  cfg["mode"] = mode_name;
  cfg["objective"] = obj_name;
  cfg["R"] = R;
  cfg["verify"] = verify.enabled;
  if (verify.enabled) {
    cfg["samples"] = verify.samples;
    cfg["seeds"] = verify.seeds;
  }

  Json report;
  report["config"] = cfg;
  try {
    BoundCertificate cert = method == "c2"
                                ? ift_c2_certify(square, x0, R, norm, common.tau)
                                : ift_c1_certify(square, x0, mode, R, objective, norm, common.tau);
    report["certificate"] = certificate_json(cert);
    if (verify.enabled) {
      VerifyReport rep;
      if (method == "c1" && mode == IftMode::Inverse) {
        // the inverse branch stays inside its w-domain ball on the covered x-ball
        rep.samples = verify.samples;
        for (int i = 0; i < verify.samples; ++i) {
          Vec x = detail::sample_in_ball(cert.x0, cert.eps_y, cert.norm,
                                         static_cast<std::uint64_t>(i));
          Vec d = square.eval(x) - cert.w0;
          double dist = cert.norm == NormSpec::Inf ? d.lpNorm<Eigen::Infinity>() : d.norm();
          if (dist > cert.eps_x) ++rep.existence_failures;
          rep.worst_residual = std::max(rep.worst_residual, std::max(0.0, dist - cert.eps_x));
        }
      } else {
        // image-side replay: g(w, z) = f(z) - w around (w0, x0); every target
        // within eps_y has a unique preimage within eps_x
        const int n = square.n;
        MapOracle wrapped;
        wrapped.n = n;
        wrapped.m = n;
        wrapped.k = n;
        wrapped.eval = [&](const Vec& w, const Vec& z) { return Vec(square.eval(z) - w); };
        wrapped.jac_x = [n](const Vec&, const Vec&) { return Mat(-Mat::Identity(n, n)); };
        wrapped.jac_y = [&](const Vec&, const Vec& z) { return square.jac(z); };
        BoundCertificate replay = cert;
        replay.x0 = cert.w0;
        replay.y0 = x0;
        replay.w0 = Vec::Zero(n);
        replay.eps_x = cert.eps_y;
        replay.eps_y = cert.eps_x;
        rep = certificate_verify(replay, wrapped, verify.samples, verify.seeds);
      }
      report["verification"] = verify_report_json(rep);
    }
  } catch (const NoFeasibleRegion& e) {
    report["certificate"] = empty_certificate_json();
    report["error"] = e.what();
    emit_report(report, common.report_path);
    return 2;
  }
  return emit_report(report, common.report_path);
}

KxxMode kxx_mode_from_string(const std::string& s) {
  if (s == "abs-sum") return KxxMode::AbsSum;
  if (s == "spectral-scaled") return KxxMode::SpectralScaled;
  if (s == "exact-box") return KxxMode::ExactBox;
  if (s == "exact-bilinear") return KxxMode::ExactBilinear;
  throw ValidationError("kxx-mode must be abs-sum, spectral-scaled, exact-box or exact-bilinear");
}

int run_qcqp(const CommonOpts& common, double eps_x, bool preconditioned,
             const std::string& kxx_mode_flag, const std::string& sweep_flag,
             const std::string& csv_path) {
  require_csv_for_sweep(sweep_flag, csv_path);
  Json input = load_json(common.input);
  QcqpProblem p = qcqp_from_json(input.contains("problem") ? input.at("problem") : input);
  std::optional<KxxMode> mode;
  if (!kxx_mode_flag.empty()) mode = kxx_mode_from_string(kxx_mode_flag);

  Json cfg = common_config("qcqp", common);
  cfg.erase("shrink_tau");
  cfg["eps_x"] = eps_x;
  cfg["preconditioned"] = preconditioned;
  cfg["kxx_mode"] = kxx_mode_flag.empty() ? Json() : Json(kxx_mode_flag);
  if (!sweep_flag.empty()) cfg["sweep"] = sweep_flag;
  if (!csv_path.empty()) cfg["csv"] = csv_path;

  Json report;
  report["config"] = cfg;

  if (sweep_flag.empty() && !(eps_x > 0.0))
    throw ValidationError("qcqp needs --eps-x or --sweep");

  if (eps_x > 0.0) {
    MarginReport m = qcqp_margin(p, eps_x, preconditioned, mode);
    report["margin"] = margin_report_json(m);
  }

  if (!sweep_flag.empty()) {
    Sweep sw = sweep_from_string(sweep_flag);
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i < sw.count; ++i) {
      double ex = sw.count == 1 ? sw.lo : sw.lo + (sw.hi - sw.lo) * i / (sw.count - 1);
      try {
        MarginReport m = qcqp_margin(p, ex, preconditioned, mode);
        pts.push_back({ex, m.r_u});
      } catch (const EpsTooLarge&) {
        // beyond the invertibility cap; omitted from the curve
      } catch (const BallNotInPolyhedron&) {
        // omitted likewise
      }
    }
    write_text_file(csv_path, curve_csv("eps_x", "r_u", pts));
    report["sweep_points"] = static_cast<int>(pts.size());
  }

  return emit_report(report, common.report_path);
}

int run_powerflow(const CommonOpts& common, const std::string& case_path, int restrict_u,
                  const std::string& csv_path) {
  PowerCase c = parse_case(slurp_file(case_path));
  std::optional<int> restrict;
  if (restrict_u > 0) restrict = restrict_u;

  Json cfg = common_config("powerflow", common);
  cfg.erase("input");
  cfg.erase("shrink_tau");
  cfg["case"] = case_path;
  cfg["restrict_u"] = restrict_u > 0 ? Json(restrict_u) : Json();
  if (!csv_path.empty()) cfg["csv"] = csv_path;

  PfMarginRow row = pf_margin_row(c, restrict);

  Json report;
  report["config"] = cfg;
  Json jr;
  jr["M_F"] = row.M_F;
  jr["M_F_prime"] = row.M_F_prime;
  jr["K_bar"] = row.K_bar;
  jr["rho_x"] = row.rho_x;
  jr["r_u"] = row.r_u;
  jr["restrict_k"] = row.restrict_k;
  jr["x0"] = vec_json(row.x0);
  report["row"] = jr;

  if (!csv_path.empty()) {
    std::string label = case_path;
    auto slash = label.find_last_of('/');
    if (slash != std::string::npos) label = label.substr(slash + 1);
    auto dot = label.rfind('.');
    if (dot != std::string::npos) label = label.substr(0, dot);
    write_text_file(csv_path, pf_margin_csv(label, row));
  }
  return emit_report(report, common.report_path);
}

int run_riccati(const CommonOpts& common, int frontier_count, double rho_p,
                const std::string& csv_path) {
  Json input = load_json(common.input);
  AreProblem p = are_from_json(input);
  NormSpec norm = norm_from_name(input.value("norm", common.norm));

  Json cfg = common_config("riccati", common);
  cfg.erase("shrink_tau");
  cfg["norm"] = norm_name(norm);
  cfg["frontier"] = frontier_count;
  if (rho_p > 0.0) cfg["rho_p"] = rho_p;
  if (!csv_path.empty()) cfg["csv"] = csv_path;

  AreRegion region = are_robust_region(p, norm);
  auto frontier = region.frontier(frontier_count);

  Json report;
  report["config"] = cfg;
  report["region"] = are_region_json(region, frontier);

  int code = 0;
  if (rho_p > 0.0) {
    try {
      report["max_rho_A"] = region.max_rho_A(rho_p);
    } catch (const NoFeasibleRegion& e) {
      report["max_rho_A"] = Json();
      report["error"] = e.what();
      code = 2;
    }
  }

  if (!csv_path.empty()) write_text_file(csv_path, curve_csv("rho_A", "rho_P", frontier));
  emit_report(report, common.report_path);
  return code;
}

int run_fblin(const CommonOpts& common, double eps_x, double eps_u, double rho_z,
              int sim_runs, int sim_steps) {
  Json input = load_json(common.input);
  FblinProblem p;
  p.phi = square_from_ref(need(input, "phi"));
  p.w = oracle_from_ref(need(input, "w"));
  p.A = mat_from_json(need(input, "A"));
  p.B = mat_from_json(need(input, "B"));
  p.xstar = vec_from_json(need(input, "xstar"));
  p.ustar = vec_from_json(need(input, "ustar"));
  p.R = input.value("R", 1.0);
  NormSpec norm = norm_from_name(input.value("norm", common.norm));

  Json cfg = common_config("fblin", common);
  cfg["norm"] = norm_name(norm);
  cfg["eps_x"] = eps_x;
  cfg["eps_u"] = eps_u;
  cfg["rho_z"] = rho_z > 0.0 ? Json(rho_z) : Json();
  cfg["sim_runs"] = sim_runs;
  cfg["sim_steps"] = sim_steps;

  SimOptions sim;
  sim.runs = sim_runs;
  sim.steps = sim_steps;
  sim.seed = static_cast<unsigned>(common.seed);

  Json report;
  report["config"] = cfg;
  try {
    std::optional<double> rz;
    if (rho_z > 0.0) rz = rho_z;
    LinearizationDomain ld = linearization_domain(p, eps_x, eps_u, rz, norm, common.tau, sim);
    report["domain"] = linearization_json(ld);
  } catch (const NoFeasibleRegion& e) {
    report["domain"] = Json();
    report["certificate"] = empty_certificate_json();
    report["error"] = e.what();
    emit_report(report, common.report_path);
    return 2;
  }
  return emit_report(report, common.report_path);
}

int run_verify(const CommonOpts& common, int samples, int seeds, bool with_degree) {
  Json input = load_json(common.input);
  MapOracle oracle = oracle_from_ref(need(input, "map"));
  BoundCertificate cert;
  cert.method = Method::ImftC2;
  cert.x0 = vec_from_json(need(input, "x0"));
  cert.y0 = vec_from_json(need(input, "y0"));
  cert.eps_x = need(input, "eps_x").get<double>();
  cert.eps_y = need(input, "eps_y").get<double>();
  cert.norm = norm_from_name(input.value("norm", common.norm));
  cert.uniqueness = input.value("uniqueness", true);
  cert.w0 = input.contains("w0") ? vec_from_json(input.at("w0"))
                                 : oracle.eval(cert.x0, cert.y0);

  Json cfg = common_config("verify", common);
  cfg.erase("shrink_tau");
  cfg["norm"] = norm_name(cert.norm);
  cfg["samples"] = samples;
  cfg["seeds"] = seeds;
  cfg["degree"] = with_degree;

  VerifyReport rep = certificate_verify(cert, oracle, samples, seeds);
  if (with_degree) {
    if (oracle.m != 2)
      throw ValidationError("--degree needs a two-dimensional solved variable");
    Vec x0 = cert.x0, y0 = cert.y0, w0 = cert.w0;
    auto g = [&](const Vec& y) { return Vec(oracle.eval(x0, y) - w0); };
    Box box{Vec(y0.array() - cert.eps_y), Vec(y0.array() + cert.eps_y)};
    rep.degree = degree_2d(g, box);
  }

  Json report;
  report["config"] = cfg;
  report["verification"] = verify_report_json(rep);
  return emit_report(report, common.report_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"certified implicit/inverse-map neighborhood bounds"};
  app.require_subcommand(1);

  CommonOpts common;
  VerifyOpts verify;
  std::string method_imft = "c2", method_ift = "c1";
  std::string objective_flag, sweep_flag, csv_path, mode_flag;
  std::string kxx_mode_flag, case_path;
  double alpha = 0.9, eps_x = 0.0, eps_u = 0.0, rho_z = 0.0, rho_p = 0.0, radius = 0.0;
  int restrict_u = 0, frontier_count = 25, sim_runs = 100, sim_steps = 10000;
  int v_samples = 500, v_seeds = 20;
  bool preconditioned = false, with_degree = false;

  auto add_common = [&](CLI::App* cmd, bool with_input = true) {
    if (with_input) cmd->add_option("--input,-i", common.input, "problem file")->required();
    cmd->add_option("--report,-o", common.report_path, "report JSON path (stdout when absent)");
    cmd->add_option("--norm", common.norm, "inf or two")->check(CLI::IsMember({"inf", "two"}));
    cmd->add_option("--tau", common.tau, "relative shrink applied to open bounds");
    cmd->add_option("--seed", common.seed, "seed echoed for reproducibility");
  };

  CLI::App* imft = app.add_subcommand("imft", "certify an implicit-map neighborhood");
  add_common(imft);
  imft->add_option("--method", method_imft, "c2 or c1")->check(CLI::IsMember({"c2", "c1"}));
  imft->add_option("--objective", objective_flag, "maxx, fix-x:V or fix-y:V");
  imft->add_option("--alpha", alpha, "contraction level for the c1 route");
  imft->add_flag("--verify", verify.enabled, "replay the certificate by sampling");
  imft->add_option("--samples", verify.samples, "verification sample count");
  imft->add_option("--seeds", verify.seeds, "Newton multistarts per sample");
  imft->add_option("--sweep", sweep_flag, "eps_x:a:b:n margin curve");
  imft->add_option("--csv", csv_path, "curve CSV path");

  CLI::App* ift = app.add_subcommand("ift", "certify an inverse-map neighborhood");
  add_common(ift);
  ift->add_option("--method", method_ift, "c1 or c2")->check(CLI::IsMember({"c1", "c2"}));
  ift->add_option("--mode", mode_flag, "forward or inverse");
  ift->add_option("--objective", objective_flag, "largest-x or max-image");
  ift->add_option("--radius", radius, "expansion radius override");
  ift->add_flag("--verify", verify.enabled, "replay the certificate by sampling");
  ift->add_option("--samples", verify.samples, "verification sample count");
  ift->add_option("--seeds", verify.seeds, "Newton multistarts per sample");

  CLI::App* qcqp = app.add_subcommand("qcqp", "robustness margin for a quadratic system");
  add_common(qcqp);
  qcqp->add_option("--eps-x", eps_x, "solution-ball radius");
  qcqp->add_flag("--preconditioned", preconditioned, "work in the transformed metric");
  qcqp->add_option("--kxx-mode", kxx_mode_flag,
                   "abs-sum, spectral-scaled, exact-box or exact-bilinear");
  qcqp->add_option("--sweep", sweep_flag, "eps_x:a:b:n margin curve");
  qcqp->add_option("--csv", csv_path, "curve CSV path");

  CLI::App* pf = app.add_subcommand("powerflow", "margin row for a power-flow case");
  add_common(pf, false);
  pf->add_option("--case", case_path, "MATPOWER-style case file")->required();
  pf->add_option("--restrict-u", restrict_u, "restrict injections to the first k coordinates");
  pf->add_option("--csv", csv_path, "row CSV path");

  CLI::App* riccati = app.add_subcommand("riccati", "perturbation region for a Riccati solution");
  add_common(riccati);
  riccati->add_option("--frontier", frontier_count, "frontier sample count");
  riccati->add_option("--rho-p", rho_p, "query the admissible plant perturbation at this rho_P");
  riccati->add_option("--csv", csv_path, "frontier CSV path");

  CLI::App* fblin = app.add_subcommand("fblin", "linearizing feedback domain bounds");
  add_common(fblin);
  fblin->add_option("--eps-x", eps_x, "state ball radius")->required();
  fblin->add_option("--eps-u", eps_u, "input ball radius")->required();
  fblin->add_option("--rho-z", rho_z, "invariant deviation radius");
  fblin->add_option("--sim-runs", sim_runs, "falsification trajectories");
  fblin->add_option("--sim-steps", sim_steps, "steps per trajectory");

  CLI::App* verify_cmd = app.add_subcommand("verify", "replay a stored certificate");
  add_common(verify_cmd);
  verify_cmd->add_option("--samples", v_samples, "sample count");
  verify_cmd->add_option("--seeds", v_seeds, "Newton multistarts per sample");
  verify_cmd->add_flag("--degree", with_degree, "compute the boundary winding number");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand(imft))
      return run_imft(common, method_imft, objective_flag, alpha, verify, sweep_flag, csv_path);
    if (app.got_subcommand(ift))
      return run_ift(common, method_ift, mode_flag, objective_flag, radius, verify);
    if (app.got_subcommand(qcqp))
      return run_qcqp(common, eps_x, preconditioned, kxx_mode_flag, sweep_flag, csv_path);
    if (app.got_subcommand(pf))
      return run_powerflow(common, case_path, restrict_u, csv_path);
    if (app.got_subcommand(riccati))
      return run_riccati(common, frontier_count, rho_p, csv_path);
    if (app.got_subcommand(fblin))
      return run_fblin(common, eps_x, eps_u, rho_z, sim_runs, sim_steps);
    if (app.got_subcommand(verify_cmd))
      return run_verify(common, v_samples, v_seeds, with_degree);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no command\n";
  return 1;
}
