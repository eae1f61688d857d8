#pragma once

#include <cctype>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ifcert/oracle.hpp"

namespace ifcert {
namespace expr {

// Minimal arithmetic expression grammar: +, -, *, /, ^ with integer powers,
// sin, cos, exp, parentheses, numeric literals, named variables.

struct Node;
using NodePtr = std::shared_ptr<const Node>;

enum class Op { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp };

struct Node {
  Op op;
  double value = 0.0;      // Const
  std::string name;        // Var
  int exponent = 0;        // Pow
  NodePtr a, b;

  static NodePtr constant(double v) {
    auto n = std::make_shared<Node>();
    n->op = Op::Const;
    n->value = v;
    return n;
  }
  static NodePtr var(std::string name) {
    auto n = std::make_shared<Node>();
    n->op = Op::Var;
    n->name = std::move(name);
    return n;
  }
  static NodePtr unary(Op op, NodePtr a) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->a = std::move(a);
    return n;
  }
  static NodePtr binary(Op op, NodePtr a, NodePtr b) {
    if (op == Op::Add && a->op == Op::Const && a->value == 0.0) return b;
    if (op == Op::Add && b->op == Op::Const && b->value == 0.0) return a;
    if (op == Op::Sub && b->op == Op::Const && b->value == 0.0) return a;
    if (op == Op::Mul && a->op == Op::Const) {
      if (a->value == 0.0) return constant(0.0);
      if (a->value == 1.0) return b;
    }
    if (op == Op::Mul && b->op == Op::Const) {
      if (b->value == 0.0) return constant(0.0);
      if (b->value == 1.0) return a;
    }
    if (op == Op::Div && a->op == Op::Const && a->value == 0.0) return constant(0.0);
    if (a->op == Op::Const && b->op == Op::Const) {
      switch (op) {
        case Op::Add: return constant(a->value + b->value);
        case Op::Sub: return constant(a->value - b->value);
        case Op::Mul: return constant(a->value * b->value);
        case Op::Div: return constant(a->value / b->value);
        default: break;
      }
    }
    auto n = std::make_shared<Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
  }
  static NodePtr pow(NodePtr a, int e) {
    if (e == 0) return constant(1.0);
    if (e == 1) return a;
    auto n = std::make_shared<Node>();
    n->op = Op::Pow;
    n->a = std::move(a);
    n->exponent = e;
    return n;
  }
};

using Env = std::map<std::string, double>;

inline double eval(const NodePtr& n, const Env& env) {
  switch (n->op) {
    case Op::Const: return n->value;
    case Op::Var: {
      auto it = env.find(n->name);
      if (it == env.end()) throw ValidationError("expr: unbound variable " + n->name);
      return it->second;
    }
    case Op::Add: return eval(n->a, env) + eval(n->b, env);
    case Op::Sub: return eval(n->a, env) - eval(n->b, env);
    case Op::Mul: return eval(n->a, env) * eval(n->b, env);
    case Op::Div: return eval(n->a, env) / eval(n->b, env);
    case Op::Pow: return std::pow(eval(n->a, env), n->exponent);
    case Op::Neg: return -eval(n->a, env);
    case Op::Sin: return std::sin(eval(n->a, env));
    case Op::Cos: return std::cos(eval(n->a, env));
    case Op::Exp: return std::exp(eval(n->a, env));
  }
  throw ValidationError("expr: corrupt node");
}

inline NodePtr diff(const NodePtr& n, const std::string& var) {
  switch (n->op) {
    case Op::Const: return Node::constant(0.0);
    case Op::Var: return Node::constant(n->name == var ? 1.0 : 0.0);
    case Op::Add: return Node::binary(Op::Add, diff(n->a, var), diff(n->b, var));
    case Op::Sub: return Node::binary(Op::Sub, diff(n->a, var), diff(n->b, var));
    case Op::Mul:
      return Node::binary(Op::Add, Node::binary(Op::Mul, diff(n->a, var), n->b),
                          Node::binary(Op::Mul, n->a, diff(n->b, var)));
    case Op::Div:
      return Node::binary(
          Op::Div,
          Node::binary(Op::Sub, Node::binary(Op::Mul, diff(n->a, var), n->b),
                       Node::binary(Op::Mul, n->a, diff(n->b, var))),
          Node::pow(n->b, 2));
    case Op::Pow:
      return Node::binary(Op::Mul,
                          Node::binary(Op::Mul, Node::constant(n->exponent),
                                       Node::pow(n->a, n->exponent - 1)),
                          diff(n->a, var));
    case Op::Neg: return Node::unary(Op::Neg, diff(n->a, var));
    case Op::Sin: return Node::binary(Op::Mul, Node::unary(Op::Cos, n->a), diff(n->a, var));
    case Op::Cos:
      return Node::binary(Op::Mul, Node::unary(Op::Neg, Node::unary(Op::Sin, n->a)),
                          diff(n->a, var));
    case Op::Exp: return Node::binary(Op::Mul, Node::unary(Op::Exp, n->a), diff(n->a, var));
  }
  throw ValidationError("expr: corrupt node");
}

namespace detail {

struct Parser {
  const std::string& src;
  size_t pos = 0;

  explicit Parser(const std::string& s) : src(s) {}

  [[noreturn]] void fail(const std::string& reason) const {
    throw ParseError(1, reason + " (column " + std::to_string(pos + 1) + " of '" + src + "')");
  }

  void skip_ws() {
    while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
  }

  bool eat(char c) {
    skip_ws();
    if (pos < src.size() && src[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }

  NodePtr parse() {
    NodePtr e = expr();
    skip_ws();
    if (pos != src.size()) fail("unexpected trailing input");
    return e;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (eat('+')) lhs = Node::binary(Op::Add, lhs, term());
      else if (eat('-')) lhs = Node::binary(Op::Sub, lhs, term());
      else return lhs;
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (eat('*')) lhs = Node::binary(Op::Mul, lhs, unary());
      else if (eat('/')) lhs = Node::binary(Op::Div, lhs, unary());
      else return lhs;
    }
  }

  NodePtr unary() {
    if (eat('-')) return Node::unary(Op::Neg, unary());
    if (eat('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = atom();
    if (eat('^')) {
      skip_ws();
      bool neg = eat('-');
      skip_ws();
      size_t start = pos;
      while (pos < src.size() && std::isdigit(static_cast<unsigned char>(src[pos]))) ++pos;
      if (start == pos) fail("expected integer exponent after '^'");
      int e = std::stoi(src.substr(start, pos - start));
      return Node::pow(base, neg ? -e : e);
    }
    return base;
  }

  NodePtr atom() {
    skip_ws();
    if (pos >= src.size()) fail("unexpected end of expression");
    char c = src[pos];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      size_t consumed = 0;
      double v = 0.0;
      try {
        v = std::stod(src.substr(pos), &consumed);
      } catch (const std::exception&) {
        fail("bad numeric literal");
      }
      pos += consumed;
      return Node::constant(v);
    }
    if (c == '(') {
      ++pos;
      NodePtr inner = expr();
      if (!eat(')')) fail("expected ')'");
      return inner;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos;
      while (pos < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
        ++pos;
      std::string name = src.substr(start, pos - start);
      if (eat('(')) {
        NodePtr arg = expr();
        if (!eat(')')) fail("expected ')' after function argument");
        if (name == "sin") return Node::unary(Op::Sin, arg);
        if (name == "cos") return Node::unary(Op::Cos, arg);
        if (name == "exp") return Node::unary(Op::Exp, arg);
        fail("unknown function '" + name + "'");
      }
      return Node::var(name);
    }
    fail(std::string("unexpected character '") + c + "'");
  }
};

}  // namespace detail

inline NodePtr parse(const std::string& text) { return detail::Parser(text).parse(); }

// Compiled vector map with analytic (symbolic) Jacobians; the curvature and
// Lipschitz bounds come from sampling and are flagged non-certified.
struct ExprSystem {
  int nx = 0, ny = 0;
  std::vector<NodePtr> components;
  std::vector<std::vector<NodePtr>> dx;  // [comp][xvar]
  std::vector<std::vector<NodePtr>> dy;  // [comp][yvar]
  std::vector<std::string> xnames, ynames;
};

inline std::string block_var_name(const std::string& prefix, int idx) {
  return prefix + std::to_string(idx + 1);
}

inline NodePtr rename_vars(const NodePtr& n, const std::map<std::string, std::string>& table) {
  switch (n->op) {
    case Op::Const: return n;
    case Op::Var: {
      auto it = table.find(n->name);
      return it == table.end() ? n : Node::var(it->second);
    }
    case Op::Pow: return Node::pow(rename_vars(n->a, table), n->exponent);
    case Op::Neg:
    case Op::Sin:
    case Op::Cos:
    case Op::Exp: return Node::unary(n->op, rename_vars(n->a, table));
    default:
      return Node::binary(n->op, rename_vars(n->a, table), rename_vars(n->b, table));
  }
}

inline ExprSystem compile_system(int nx, int ny, const std::vector<std::string>& comps,
                                 const std::string& yprefix = "y") {
  ExprSystem sys;
  sys.nx = nx;
  sys.ny = ny;
  for (int j = 0; j < nx; ++j) sys.xnames.push_back(block_var_name("x", j));
  for (int j = 0; j < ny; ++j) sys.ynames.push_back(block_var_name(yprefix, j));
  // scalar blocks may be written without an index: x for x1, y/u for y1/u1
  std::map<std::string, std::string> aliases;
  if (nx == 1) aliases["x"] = sys.xnames[0];
  if (ny == 1) aliases[yprefix] = sys.ynames[0];
  for (const auto& text : comps) {
    NodePtr node = rename_vars(parse(text), aliases);
    sys.components.push_back(node);
    std::vector<NodePtr> gx, gy;
    for (const auto& name : sys.xnames) gx.push_back(diff(node, name));
    for (const auto& name : sys.ynames) gy.push_back(diff(node, name));
    sys.dx.push_back(std::move(gx));
    sys.dy.push_back(std::move(gy));
  }
  return sys;
}

inline Env make_env(const ExprSystem& sys, const Vec& x, const Vec& y) {
  Env env;
  for (int j = 0; j < sys.nx; ++j) env[sys.xnames[static_cast<size_t>(j)]] = x(j);
  for (int j = 0; j < sys.ny; ++j) env[sys.ynames[static_cast<size_t>(j)]] = y(j);
  return env;
}

// Build a MapOracle from component expressions over variables x1..xn, y1..ym
// (u1..um when yprefix = "u"; aliases x/y/u work in the scalar case).
inline MapOracle make_expr_oracle(int nx, int ny, const std::vector<std::string>& comps,
                                  const std::string& yprefix = "y", int bound_samples = 200) {
  auto sys = std::make_shared<ExprSystem>(compile_system(nx, ny, comps, yprefix));
  const int k = static_cast<int>(comps.size());
  MapOracle o;
  o.n = nx;
  o.m = ny;
  o.k = k;
  o.eval = [sys](const Vec& x, const Vec& y) {
    Env env = make_env(*sys, x, y);
    Vec out(sys->components.size());
    for (size_t i = 0; i < sys->components.size(); ++i) out(static_cast<Eigen::Index>(i)) = eval(sys->components[i], env);
    return out;
  };
  o.jac_x = [sys](const Vec& x, const Vec& y) {
    Env env = make_env(*sys, x, y);
    Mat J(sys->components.size(), sys->nx);
    for (size_t i = 0; i < sys->components.size(); ++i)
      for (int j = 0; j < sys->nx; ++j) J(static_cast<Eigen::Index>(i), j) = eval(sys->dx[i][static_cast<size_t>(j)], env);
    return J;
  };
  o.jac_y = [sys](const Vec& x, const Vec& y) {
    Env env = make_env(*sys, x, y);
    Mat J(sys->components.size(), sys->ny);
    for (size_t i = 0; i < sys->components.size(); ++i)
      for (int j = 0; j < sys->ny; ++j) J(static_cast<Eigen::Index>(i), j) = eval(sys->dy[i][static_cast<size_t>(j)], env);
    return J;
  };
  MapOracle base = o;
  o.hess_bound = make_sampled_hess_provider(base, bound_samples);
  o.lip_bound = [base, bound_samples](const BallPair& ball, LipWhich which) {
    return sampled_lip_bound(base, ball, which, bound_samples);
  };
  return o;
}

// Square map f: R^n -> R^n over variables x1..xn.
inline SquareMap make_expr_square(int n, const std::vector<std::string>& comps,
                                  int bound_samples = 200) {
  MapOracle o = make_expr_oracle(n, 0, comps);
  SquareMap s;
  s.n = n;
  const Vec dummy = Vec::Zero(0);
  s.eval = [o, dummy](const Vec& x) { return o.eval(x, dummy); };
  s.jac = [o, dummy](const Vec& x) { return o.jac_x(x, dummy); };
  s.hess_bound = [o, dummy, bound_samples](const Vec& x0, double R, NormSpec norm) {
    BallPair ball{x0, dummy, R, 0.0, norm};
    return sampled_hess_bound(o, ball, HessWhich::XX, norm, bound_samples);
  };
  s.lip_jac = [o, dummy, bound_samples](const Vec& x0, double r) {
    BallPair ball{x0, dummy, r, 0.0, NormSpec::Inf};
    return sampled_lip_bound(o, ball, LipWhich::JX, bound_samples);
  };
  return s;
}

}  // namespace expr
}  // namespace ifcert
