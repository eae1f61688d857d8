#pragma once

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <map>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "ifcert/bounds.hpp"
#include "ifcert/qcqp.hpp"

namespace ifcert {

enum class BusType { PQ = 1, PV = 2, Slack = 3 };

struct PowerCase {
  double base_mva = 100.0;
  struct Bus {
    int id = 0;
    BusType type = BusType::PQ;
    double Pd = 0.0, Qd = 0.0;  // MW / MVAr
    double Gs = 0.0, Bs = 0.0;  // shunt, MW / MVAr at V = 1
    double Vm = 1.0;
  };
  struct Gen {
    int bus = 0;
    double Pg = 0.0, Qg = 0.0;
    double Vg = 1.0;
  };
  struct Branch {
    int from = 0, to = 0;
    double r = 0.0, x = 0.0, b = 0.0;
  };
  std::vector<Bus> buses;
  std::vector<Gen> gens;
  std::vector<Branch> branches;
};

// Admittance matrix split into real and imaginary parts, indexed by position
// of the bus id in ascending order.
struct PfYbus {
  Mat G, B;
  std::vector<int> bus_ids;
};

struct PfQcqp {
  QcqpProblem qcqp;
  std::vector<int> bus_ids;  // ascending, slack included
  int slack_id = 0;
  double v0 = 1.0;           // slack voltage magnitude
  std::vector<int> p_row_bus, q_row_bus, v_row_bus;
  std::map<int, int> e_col, f_col;  // bus id -> state column
};

struct PfMarginRow {
  double M_F = 0.0;
  double M_F_prime = 0.0;
  double K_bar = 0.0;
  double rho_x = 0.0;
  double r_u = 0.0;
  int restrict_k = 0;
  Vec x0;
};

namespace detail {

inline std::string pf_trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline double pf_number(const std::string& tok, int line) {
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0')
    throw ParseError(line, "bad number '" + tok + "'");
  return v;
}

struct PfTableRow {
  std::vector<double> vals;
  int line = 0;
};

// Reads rows of whitespace separated numbers, one row per ';', until the
// closing '];'. `first` is the remainder of the line holding the '['.
inline std::vector<PfTableRow> pf_read_table(const std::vector<std::string>& lines, size_t& i,
                                             std::string first, const std::string& name) {
  std::vector<PfTableRow> rows;
  std::vector<double> pending;
  int pending_line = static_cast<int>(i) + 1;
  bool closed = false;
  std::string chunk = first;
  for (;;) {
    std::istringstream ss(chunk);
    std::string tok;
    while (ss >> tok) {
      while (!tok.empty()) {
        if (tok[0] == ']') {
          closed = true;
          tok.clear();
          break;
        }
        size_t semi = tok.find_first_of(";]");
        std::string head = semi == std::string::npos ? tok : tok.substr(0, semi);
        if (!head.empty()) {
          if (pending.empty()) pending_line = static_cast<int>(i) + 1;
          pending.push_back(pf_number(head, static_cast<int>(i) + 1));
        }
        if (semi == std::string::npos) {
          tok.clear();
        } else if (tok[semi] == ';') {
          if (!pending.empty()) {
            rows.push_back({pending, pending_line});
            pending.clear();
          }
          tok = tok.substr(semi + 1);
        } else {
          closed = true;
          tok.clear();
        }
      }
      if (closed) break;
    }
    if (closed) break;
    ++i;
    if (i >= lines.size())
      throw ParseError(static_cast<int>(lines.size()),
                       "unterminated table mpc." + name);
    chunk = lines[i];
    size_t pc = chunk.find('%');
    if (pc != std::string::npos) chunk = chunk.substr(0, pc);
  }
  if (!pending.empty()) rows.push_back({pending, pending_line});
  return rows;
}

}  // namespace detail

inline void validate_case(const PowerCase& c) {
  if (!(c.base_mva > 0.0)) throw ValidationError("case: baseMVA must be positive");
  if (c.buses.empty()) throw ValidationError("case: no buses");
  std::map<int, const PowerCase::Bus*> by_id;
  int slacks = 0;
  for (const auto& bus : c.buses) {
    if (by_id.count(bus.id)) throw ValidationError("case: duplicate bus id");
    by_id[bus.id] = &bus;
    if (bus.type == BusType::Slack) ++slacks;
  }
  if (slacks != 1) throw ValidationError("case: exactly one slack bus required");
  std::map<int, int> gens_at;
  for (const auto& g : c.gens) {
    if (!by_id.count(g.bus)) throw ValidationError("case: generator at unknown bus");
    ++gens_at[g.bus];
  }
  for (const auto& bus : c.buses)
    if (bus.type == BusType::PV && gens_at[bus.id] == 0)
      throw ValidationError("case: PV bus without an in-service generator");
  std::map<int, std::vector<int>> adj;
  for (const auto& br : c.branches) {
    if (!by_id.count(br.from) || !by_id.count(br.to))
      throw ValidationError("case: dangling branch endpoint");
    if (br.from == br.to) throw ValidationError("case: branch with equal endpoints");
    adj[br.from].push_back(br.to);
    adj[br.to].push_back(br.from);
  }
  std::map<int, bool> seen;
  std::queue<int> todo;
  todo.push(c.buses.front().id);
  seen[c.buses.front().id] = true;
  while (!todo.empty()) {
    int at = todo.front();
    todo.pop();
    for (int nxt : adj[at])
      if (!seen[nxt]) {
        seen[nxt] = true;
        todo.push(nxt);
      }
  }
  if (static_cast<int>(seen.size()) != static_cast<int>(c.buses.size()))
    throw ValidationError("case: network graph is disconnected");
}

inline PowerCase parse_case(const std::string& text,
                            std::vector<std::string>* warnings = nullptr) {
  std::vector<std::string> lines;
  {
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) lines.push_back(line);
  }
  PowerCase c;
  bool have_base = false;
  std::vector<detail::PfTableRow> bus_rows, gen_rows, branch_rows;
  bool have_bus = false, have_gen = false, have_branch = false;

  for (size_t i = 0; i < lines.size(); ++i) {
    std::string line = lines[i];
    size_t pc = line.find('%');
    if (pc != std::string::npos) line = line.substr(0, pc);
    line = detail::pf_trim(line);
    if (line.empty()) continue;
    if (line.rfind("function", 0) == 0) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos || line.rfind("mpc.", 0) != 0) continue;
    std::string name = detail::pf_trim(line.substr(4, eq - 4));
    std::string rhs = detail::pf_trim(line.substr(eq + 1));
    if (name == "baseMVA") {
      if (!rhs.empty() && rhs.back() == ';') rhs.pop_back();
      c.base_mva = detail::pf_number(detail::pf_trim(rhs), static_cast<int>(i) + 1);
      have_base = true;
      continue;
    }
    size_t br = rhs.find('[');
    if (br == std::string::npos) continue;  // scalar or string field, skip
    auto rows = detail::pf_read_table(lines, i, rhs.substr(br + 1), name);
    if (name == "bus") {
      bus_rows = rows;
      have_bus = true;
    } else if (name == "gen") {
      gen_rows = rows;
      have_gen = true;
    } else if (name == "branch") {
      branch_rows = rows;
      have_branch = true;
    } else if (warnings) {
      warnings->push_back("skipped mpc." + name);
    }
  }

  if (!have_base) throw ParseError(1, "missing mpc.baseMVA");
  if (!have_bus) throw ParseError(1, "missing mpc.bus table");
  if (!have_gen) throw ParseError(1, "missing mpc.gen table");
  if (!have_branch) throw ParseError(1, "missing mpc.branch table");

  for (const auto& row : bus_rows) {
    if (row.vals.size() < 8) throw ParseError(row.line, "bus row needs at least 8 columns");
    PowerCase::Bus bus;
    bus.id = static_cast<int>(row.vals[0]);
    int t = static_cast<int>(row.vals[1]);
    if (t < 1 || t > 3) throw ValidationError("case: bus type must be 1, 2 or 3");
    bus.type = static_cast<BusType>(t);
    bus.Pd = row.vals[2];
    bus.Qd = row.vals[3];
    bus.Gs = row.vals[4];
    bus.Bs = row.vals[5];
    bus.Vm = row.vals[7];
    c.buses.push_back(bus);
  }
  for (const auto& row : gen_rows) {
    if (row.vals.size() < 6) throw ParseError(row.line, "gen row needs at least 6 columns");
    bool status = row.vals.size() < 8 || row.vals[7] != 0.0;
    if (!status) continue;
    PowerCase::Gen g;
    g.bus = static_cast<int>(row.vals[0]);
    g.Pg = row.vals[1];
    g.Qg = row.vals[2];
    g.Vg = row.vals[5];
    c.gens.push_back(g);
  }
  for (const auto& row : branch_rows) {
    if (row.vals.size() < 5) throw ParseError(row.line, "branch row needs at least 5 columns");
    bool status = row.vals.size() < 11 || row.vals[10] != 0.0;
    if (!status) continue;
    double ratio = row.vals.size() > 8 ? row.vals[8] : 0.0;
    double angle = row.vals.size() > 9 ? row.vals[9] : 0.0;
    if ((ratio != 0.0 && ratio != 1.0) || angle != 0.0)
      throw ValidationError("case: transformer taps and phase shifts are out of scope");
    PowerCase::Branch b;
    b.from = static_cast<int>(row.vals[0]);
    b.to = static_cast<int>(row.vals[1]);
    b.r = row.vals[2];
    b.x = row.vals[3];
    b.b = row.vals[4];
    c.branches.push_back(b);
  }

  validate_case(c);
  return c;
}

inline std::string serialize_case(const PowerCase& c) {
  std::ostringstream out;
  out.precision(17);
  out << "function mpc = exported_case\n";
  out << "mpc.baseMVA = " << c.base_mva << ";\n";
  out << "mpc.bus = [\n";
  for (const auto& bus : c.buses)
    out << "\t" << bus.id << "\t" << static_cast<int>(bus.type) << "\t" << bus.Pd << "\t"
        << bus.Qd << "\t" << bus.Gs << "\t" << bus.Bs << "\t1\t" << bus.Vm
        << "\t0\t0\t1\t1.1\t0.9;\n";
  out << "];\n";
  out << "mpc.gen = [\n";
  for (const auto& g : c.gens)
    out << "\t" << g.bus << "\t" << g.Pg << "\t" << g.Qg << "\t0\t0\t" << g.Vg << "\t"
        << c.base_mva << "\t1\t0\t0;\n";
  out << "];\n";
  out << "mpc.branch = [\n";
  for (const auto& b : c.branches)
    out << "\t" << b.from << "\t" << b.to << "\t" << b.r << "\t" << b.x << "\t" << b.b
        << "\t0\t0\t0\t0\t0\t1;\n";
  out << "];\n";
  return out.str();
}

inline PfYbus build_ybus(const PowerCase& c) {
  validate_case(c);
  PfYbus y;
  for (const auto& bus : c.buses) y.bus_ids.push_back(bus.id);
  std::sort(y.bus_ids.begin(), y.bus_ids.end());
  const int n = static_cast<int>(y.bus_ids.size());
  std::map<int, int> idx;
  for (int i = 0; i < n; ++i) idx[y.bus_ids[i]] = i;
  y.G = Mat::Zero(n, n);
  y.B = Mat::Zero(n, n);
  for (const auto& br : c.branches) {
    if (br.r == 0.0 && br.x == 0.0)
      throw ZeroImpedanceBranch("ybus: branch with zero series impedance");
    double den = br.r * br.r + br.x * br.x;
    double g = br.r / den, b = -br.x / den;  // 1/(r+jx)
    int f = idx[br.from], t = idx[br.to];
    y.G(f, f) += g;
    y.G(t, t) += g;
    y.B(f, f) += b + br.b / 2.0;
    y.B(t, t) += b + br.b / 2.0;
    y.G(f, t) -= g;
    y.G(t, f) -= g;
    y.B(f, t) -= b;
    y.B(t, f) -= b;
  }
  for (const auto& bus : c.buses) {
    int i = idx[bus.id];
    y.G(i, i) += bus.Gs / c.base_mva;
    y.B(i, i) += bus.Bs / c.base_mva;
  }
  return y;
}

// Net complex injections S_i = V_i * conj(sum_k Y_ik V_k) at every bus, for a
// full voltage profile in the Ybus ordering.
inline std::pair<Vec, Vec> pf_net_injections(const PfYbus& y, const Vec& e, const Vec& f) {
  Vec ire = y.G * e - y.B * f;
  Vec iim = y.G * f + y.B * e;
  Vec p = e.cwiseProduct(ire) + f.cwiseProduct(iim);
  Vec q = f.cwiseProduct(ire) - e.cwiseProduct(iim);
  return {p, q};
}

inline PfQcqp build_pf_qcqp(const PowerCase& c) {
  PfYbus y = build_ybus(c);
  PfQcqp pf;
  pf.bus_ids = y.bus_ids;
  const int n_all = static_cast<int>(pf.bus_ids.size());
  std::map<int, int> idx;
  for (int i = 0; i < n_all; ++i) idx[pf.bus_ids[i]] = i;

  std::map<int, const PowerCase::Bus*> bus_of;
  for (const auto& bus : c.buses) bus_of[bus.id] = &bus;
  std::map<int, double> pg, qg;
  std::map<int, double> vg;
  for (const auto& g : c.gens) {
    pg[g.bus] += g.Pg;
    qg[g.bus] += g.Qg;
    if (!vg.count(g.bus)) vg[g.bus] = g.Vg;
  }

  std::vector<int> nonslack;
  for (int id : pf.bus_ids) {
    if (bus_of[id]->type == BusType::Slack) {
      pf.slack_id = id;
      pf.v0 = vg.count(id) ? vg[id] : bus_of[id]->Vm;
    } else {
      nonslack.push_back(id);
    }
  }
  const int N = static_cast<int>(nonslack.size());
  for (int j = 0; j < N; ++j) {
    pf.e_col[nonslack[j]] = j;
    pf.f_col[nonslack[j]] = N + j;
  }

  for (int id : nonslack) pf.p_row_bus.push_back(id);
  for (int id : nonslack)
    if (bus_of[id]->type == BusType::PQ) pf.q_row_bus.push_back(id);
  for (int id : nonslack)
    if (bus_of[id]->type == BusType::PV) pf.v_row_bus.push_back(id);

  const int dim = 2 * N;
  QcqpProblem& p = pf.qcqp;
  p.n = dim;
  p.L = Mat::Zero(dim, dim);
  p.A = Mat::Zero(0, dim);
  p.b = Vec::Zero(0);
  p.u0 = Vec::Zero(dim);

  auto add_sym = [](Mat& Q, int a, int b, double cval) {
    if (a == b) {
      Q(a, a) += cval;
    } else {
      Q(a, b) += cval / 2.0;
      Q(b, a) += cval / 2.0;
    }
  };

  int row = 0;
  int slack_i = idx[pf.slack_id];
  for (int id : pf.p_row_bus) {
    Mat Q = Mat::Zero(dim, dim);
    int bi = idx[id];
    int ei = pf.e_col[id], fi = pf.f_col[id];
    for (int kid : nonslack) {
      int bk = idx[kid];
      int ek = pf.e_col[kid], fk = pf.f_col[kid];
      double g = y.G(bi, bk), b = y.B(bi, bk);
      add_sym(Q, ei, ek, g);
      add_sym(Q, ei, fk, -b);
      add_sym(Q, fi, fk, g);
      add_sym(Q, fi, ek, b);
    }
    p.L(row, ei) += pf.v0 * y.G(bi, slack_i);
    p.L(row, fi) += pf.v0 * y.B(bi, slack_i);
    p.Qi.push_back(Q);
    double load = bus_of[id]->Pd;
    p.u0(row) = ((pg.count(id) ? pg[id] : 0.0) - load) / c.base_mva;
    ++row;
  }
  for (int id : pf.q_row_bus) {
    Mat Q = Mat::Zero(dim, dim);
    int bi = idx[id];
    int ei = pf.e_col[id], fi = pf.f_col[id];
    for (int kid : nonslack) {
      int bk = idx[kid];
      int ek = pf.e_col[kid], fk = pf.f_col[kid];
      double g = y.G(bi, bk), b = y.B(bi, bk);
      add_sym(Q, fi, ek, g);
      add_sym(Q, fi, fk, -b);
      add_sym(Q, ei, fk, -g);
      add_sym(Q, ei, ek, -b);
    }
    p.L(row, ei) -= pf.v0 * y.B(bi, slack_i);
    p.L(row, fi) += pf.v0 * y.G(bi, slack_i);
    p.Qi.push_back(Q);
    p.u0(row) = ((qg.count(id) ? qg[id] : 0.0) - bus_of[id]->Qd) / c.base_mva;
    ++row;
  }
  for (int id : pf.v_row_bus) {
    Mat Q = Mat::Zero(dim, dim);
    Q(pf.e_col[id], pf.e_col[id]) = 1.0;
    Q(pf.f_col[id], pf.f_col[id]) = 1.0;
    p.Qi.push_back(Q);
    double setpoint = vg.count(id) ? vg[id] : bus_of[id]->Vm;
    p.u0(row) = setpoint * setpoint;
    ++row;
  }
  qcqp_validate(p);
  return pf;
}

inline Vec pf_flat_start(const PfQcqp& pf) {
  const int N = static_cast<int>(pf.e_col.size());
  Vec x = Vec::Zero(2 * N);
  for (const auto& [id, col] : pf.e_col) {
    (void)id;
    x(col) = 1.0;
  }
  return x;
}

inline Vec pf_nominal_solve(const PfQcqp& pf) {
  return qcqp_nominal_solve(pf.qcqp, pf_flat_start(pf), 50);
}

// One row of the margin table: inverse-jacobian norms, the curvature bound of
// the preconditioned map, and the radii they certify. The perturbation is
// restricted to the first k components of u (rows ordered P, then Q, then V,
// bus ids ascending inside each block).
inline PfMarginRow pf_margin_row(const PowerCase& c,
                                 std::optional<int> restrict_first_k_u = std::nullopt) {
  PfQcqp pf = build_pf_qcqp(c);
  PfMarginRow row;
  row.x0 = pf_nominal_solve(pf);
  const int dim = pf.qcqp.n;
  int k = restrict_first_k_u.value_or(dim);
  if (k < 1 || k > dim)
    throw ValidationError("margin row: restriction count out of range");
  row.restrict_k = k;

  Mat J = qcqp_jacobian(pf.qcqp, row.x0);
  Mat Jinv = inverse(J);
  row.M_F = op_norm(Jinv, NormSpec::Inf);

  std::vector<int> cols(k);
  for (int i = 0; i < k; ++i) cols[i] = i;
  BoundCertificate dir = directional_certify(qcqp_square(pf.qcqp), row.x0, 1.0,
                                             SubspaceSpec::coord_subset(cols));
  row.M_F_prime = dir.constants.at("M_W");

  std::vector<Mat> qbar(dim, Mat::Zero(dim, dim));
  for (int i = 0; i < dim; ++i)
    for (int r = 0; r < dim; ++r)
      if (Jinv(i, r) != 0.0) qbar[i] += Jinv(i, r) * pf.qcqp.Qi[r];
  KxxMode mode = dim <= 20 ? KxxMode::ExactBilinear : KxxMode::AbsSum;
  row.K_bar = detail::kxx_bound_of(qbar, dim, mode);

  // uniqueness cap of the preconditioned map (M = 1), clipped to the voltage
  // tolerance box |x - x0| < 1
  row.rho_x = row.K_bar > 0.0 ? std::min(1.0 / row.K_bar, 1.0) : 1.0;
  row.r_u = row.rho_x * (2.0 - row.rho_x * row.K_bar) / (2.0 * row.M_F_prime);
  return row;
}

}  // namespace ifcert
