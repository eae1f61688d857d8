#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ifcert/bounds.hpp"
#include "ifcert/errors.hpp"
#include "ifcert/fblin.hpp"
#include "ifcert/powerflow.hpp"
#include "ifcert/qcqp.hpp"
#include "ifcert/riccati.hpp"
#include "ifcert/verify.hpp"

namespace ifcert {

using Json = nlohmann::ordered_json;

inline std::string norm_name(NormSpec n) { return n == NormSpec::Inf ? "inf" : "two"; }

inline NormSpec norm_from_name(const std::string& s) {
  if (s == "inf") return NormSpec::Inf;
  if (s == "two") return NormSpec::Two;
  throw ValidationError("unknown norm '" + s + "' (expected inf or two)");
}

inline Json certificate_json(const BoundCertificate& cert) {
  Json j;
  j["method"] = method_name(cert.method);
  j["eps_x"] = cert.eps_x;
  j["eps_y"] = cert.eps_y;
  Json c = Json::object();
  for (const auto& [key, value] : cert.constants) c[key] = value;
  j["constants"] = c;
  j["certified"] = cert.certified;
  j["norm"] = norm_name(cert.norm);
  j["uniqueness"] = cert.uniqueness;
  return j;
}

// an "empty certificate" stands in when the region is infeasible
inline Json empty_certificate_json() {
  Json j;
  j["method"] = nullptr;
  j["eps_x"] = nullptr;
  j["eps_y"] = nullptr;
  j["constants"] = Json::object();
  j["certified"] = false;
  j["norm"] = nullptr;
  j["uniqueness"] = nullptr;
  return j;
}

inline Json verify_report_json(const VerifyReport& rep) {
  Json j;
  j["samples"] = rep.samples;
  j["existence_failures"] = rep.existence_failures;
  j["uniqueness_failures"] = rep.uniqueness_failures;
  j["worst_residual"] = rep.worst_residual;
  if (rep.degree)
    j["degree"] = *rep.degree;
  else
    j["degree"] = nullptr;
  return j;
}

inline Json vec_json(const Vec& v) {
  Json arr = Json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

inline Json margin_report_json(const MarginReport& m) {
  Json j;
  j["eps_x"] = m.eps_x;
  j["r_u"] = m.r_u;
  j["Mx"] = m.Mx;
  j["Kxx"] = m.Kxx;
  j["Lx"] = m.Lx_const;
  j["preconditioned"] = m.preconditioned;
  j["ball_in_polyhedron"] = m.ball_in_polyhedron;
  j["r_u_transformed"] = m.r_u_transformed;
  j["metric_conversion"] = m.metric_conversion;
  j["x0"] = vec_json(m.x0);
  return j;
}

inline Json are_region_json(const AreRegion& region, const std::vector<std::pair<double, double>>& frontier) {
  Json j;
  j["M_P"] = region.M_P;
  j["L_A"] = region.L_A;
  j["sigma"] = region.sigma;
  j["pd_radius"] = region.pd_radius;
  j["coeff_rhs_p"] = region.coeff_rhs_p;
  j["coeff_cap"] = region.coeff_cap;
  j["inequalities"] = Json::array({
      "L_A*rho_A + 2*rho_P*(rho_A + sigma*rho_P) < coeff_rhs_p*rho_P",
      "sigma*rho_P + rho_A < coeff_cap",
      "rho_P < pd_radius",
  });
  Json pts = Json::array();
  for (const auto& [ra, rp] : frontier) pts.push_back(Json::array({ra, rp}));
  j["frontier"] = pts;
  return j;
}

inline Json invariance_json(const InvarianceBound& inv) {
  Json j;
  j["eps_v"] = inv.eps_v;
  j["rho_z"] = inv.rho_z;
  j["P_phi_prime"] = inv.P_phi_prime;
  j["A_norm"] = inv.A_norm;
  j["B_norm"] = inv.B_norm;
  j["sim_runs"] = inv.sim_runs;
  j["sim_steps"] = inv.sim_steps;
  j["sim_max_deviation"] = inv.sim_max_deviation;
  j["sim_contained"] = inv.sim_contained;
  return j;
}

inline Json linearization_json(const LinearizationDomain& ld) {
  Json j;
  j["eps_x"] = ld.eps_x;
  j["eps_u"] = ld.eps_u;
  j["eps_v"] = ld.eps_v;
  j["state"] = certificate_json(ld.state);
  j["control"] = certificate_json(ld.control);
  j["invariance"] = invariance_json(ld.invariance);
  return j;
}

// ---------------------------------------------------------------------------
// CSV: RFC 4180, CRLF line endings, %.17g numbers so files round-trip.

namespace detail {

inline std::string csv_escape(const std::string& field) {
  bool needs_quote = field.find_first_of(",\"\r\n") != std::string::npos;
  if (!needs_quote) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += "\"\"";
    else out += ch;
  }
  out += "\"";
  return out;
}

inline std::string csv_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

class CsvWriter {
 public:
  void row(const std::vector<std::string>& fields) {
    for (size_t i = 0; i < fields.size(); ++i) {
      if (i) text_ += ',';
      text_ += detail::csv_escape(fields[i]);
    }
    text_ += "\r\n";
  }
  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

inline std::string pf_margin_csv(const std::string& case_name, const PfMarginRow& row) {
  CsvWriter w;
  w.row({"case", "M_F", "M_F_prime", "K_bar", "rho_x", "r_u"});
  w.row({case_name, detail::csv_number(row.M_F), detail::csv_number(row.M_F_prime),
         detail::csv_number(row.K_bar), detail::csv_number(row.rho_x),
         detail::csv_number(row.r_u)});
  return w.text();
}

inline std::string curve_csv(const std::string& x_name, const std::string& y_name,
                             const std::vector<std::pair<double, double>>& points) {
  CsvWriter w;
  w.row({x_name, y_name});
  for (const auto& [x, y] : points) w.row({detail::csv_number(x), detail::csv_number(y)});
  return w.text();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  out << text;
}

inline std::string report_dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace ifcert
