#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "ifcert/bounds.hpp"
#include "ifcert/errors.hpp"
#include "ifcert/linalg.hpp"
#include "ifcert/oracle.hpp"

namespace ifcert {

struct VerifyReport {
  int samples = 0;
  int existence_failures = 0;
  int uniqueness_failures = 0;
  double worst_residual = 0.0;
  std::optional<int> degree;
};

// Damped Newton from low-discrepancy starts inside B(y0, eps_y). Roots are
// deduplicated at 1e-7 distance and anything resting outside the ball is
// dropped. An empty list is a legitimate answer.
inline std::vector<Vec> newton_in_ball(const std::function<Vec(const Vec&)>& f,
                                       const std::function<Mat(const Vec&)>& jac, const Vec& y0,
                                       double eps_y, int seeds,
                                       NormSpec norm = NormSpec::Inf) {
  if (seeds < 1) throw ValidationError("newton_in_ball: seeds must be >= 1");
  if (!(eps_y > 0.0)) throw ValidationError("newton_in_ball: eps_y must be positive");
  const int m = static_cast<int>(y0.size());
  const double ftol = 1e-11 * (1.0 + vec_norm(f(y0), NormSpec::Inf));

  std::vector<Vec> roots;
  for (int s = 0; s < seeds; ++s) {
    Vec y = s == 0 ? y0 : detail::sample_in_ball(y0, eps_y, norm, s);
    bool converged = false;
    for (int it = 0; it < 80; ++it) {
      Vec r = f(y);
      double rn = vec_norm(r, NormSpec::Inf);
      if (!std::isfinite(rn)) break;
      if (rn <= ftol) {
        converged = true;
        break;
      }
      Vec step;
      try {
        step = solve_linear(jac(y), r);
      } catch (const Singular&) {
        break;
      }
      double t = 1.0;
      Vec trial = y - step;
      while (t > 1e-10 && vec_norm(f(trial), NormSpec::Inf) >= rn) {
        t *= 0.5;
        trial = y - t * step;
      }
      if (t <= 1e-10) break;
      y = trial;
    }
    if (!converged) continue;
    if (vec_norm(y - y0, norm) > eps_y) continue;
    bool dup = false;
    for (const Vec& r0 : roots) dup = dup || vec_norm(y - r0, NormSpec::Inf) < 1e-7;
    if (!dup) roots.push_back(y);
  }
  std::sort(roots.begin(), roots.end(), [m](const Vec& a, const Vec& b) {
    for (int i = 0; i < m; ++i) {
      if (a(i) < b(i)) return true;
      if (a(i) > b(i)) return false;
    }
    return false;
  });
  return roots;
}

// Empirical check of a certificate: sample x in B(x0, eps_x) and count how
// often the promised root in B(y0, eps_y) is missing or fails to be unique.
// Uniqueness counting is skipped for existence-only certificates.
inline VerifyReport certificate_verify(const BoundCertificate& cert, const MapOracle& oracle,
                                       int x_samples, int seeds = 20) {
  if (x_samples < 1) throw ValidationError("certificate_verify: x_samples must be >= 1");
  if (cert.x0.size() == 0 || cert.y0.size() == 0 || cert.w0.size() == 0)
    throw ValidationError("certificate_verify: certificate lacks replay centers");

  VerifyReport rep;
  rep.samples = x_samples;
  for (int i = 0; i < x_samples; ++i) {
    Vec x = detail::sample_in_ball(cert.x0, cert.eps_x, cert.norm, i);
    auto f = [&](const Vec& y) { return Vec(oracle.eval(x, y) - cert.w0); };
    auto j = [&](const Vec& y) { return oracle.jac_y(x, y); };
    std::vector<Vec> roots = newton_in_ball(f, j, cert.y0, cert.eps_y, seeds, cert.norm);
    if (roots.empty()) {
      ++rep.existence_failures;
      continue;
    }
    if (cert.uniqueness && roots.size() > 1) ++rep.uniqueness_failures;
    for (const Vec& r : roots)
      rep.worst_residual = std::max(rep.worst_residual, vec_norm(f(r), NormSpec::Inf));
  }
  return rep;
}

struct HomotopyCheck {
  bool pass = false;
  double min_slack = 0.0;
};

// Strict Rouche-style test along a sampled boundary: f1 and f2 are linearly
// homotopic without a zero crossing if ||f1 - f2|| < ||f1|| everywhere.
inline HomotopyCheck homotopy_boundary_check(const std::function<Vec(const Vec&)>& f1,
                                             const std::function<Vec(const Vec&)>& f2,
                                             const std::function<Vec(int)>& boundary_sampler,
                                             int samples, NormSpec norm = NormSpec::Inf) {
  if (samples < 1) throw ValidationError("homotopy_boundary_check: samples must be >= 1");
  HomotopyCheck out;
  out.pass = true;
  out.min_slack = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    Vec x = boundary_sampler(i);
    Vec a = f1(x);
    double slack = vec_norm(a, norm) - vec_norm(Vec(a - f2(x)), norm);
    out.min_slack = std::min(out.min_slack, slack);
    if (!(slack > 0.0)) out.pass = false;
  }
  return out;
}

struct Box {
  Vec lo;
  Vec hi;
};

namespace detail {

inline Vec box_boundary_point(const Box& box, double t) {
  // positively oriented walk, t in [0, 1)
  const double x0 = box.lo(0), y0 = box.lo(1), x1 = box.hi(0), y1 = box.hi(1);
  double s = 4.0 * t;
  Vec p(2);
  if (s < 1.0) {
    p << x0 + (x1 - x0) * s, y0;
  } else if (s < 2.0) {
    p << x1, y0 + (y1 - y0) * (s - 1.0);
  } else if (s < 3.0) {
    p << x1 - (x1 - x0) * (s - 2.0), y1;
  } else {
    p << x0, y1 - (y1 - y0) * (s - 3.0);
  }
  return p;
}

}  // namespace detail

// Winding number of f along the positively oriented box boundary. The sample
// count doubles until every angular step is below pi/2; hitting the cap
// raises Inconclusive rather than risking a wrong integer. n = 1 uses the
// endpoint sign formula.
inline int degree_2d(const std::function<Vec(const Vec&)>& f, const Box& box,
                     int boundary_samples = 256) {
  const int n = static_cast<int>(box.lo.size());
  if (n != static_cast<int>(box.hi.size()))
    throw ValidationError("degree_2d: box corners disagree in dimension");
  if (n >= 3) throw Unsupported("degree_2d: only n <= 2 is supported");
  if (n < 1) throw ValidationError("degree_2d: empty box");
  for (int i = 0; i < n; ++i)
    if (!(box.lo(i) < box.hi(i))) throw ValidationError("degree_2d: box must have volume");

  if (n == 1) {
    Vec lo(1), hi(1);
    lo << box.lo(0);
    hi << box.hi(0);
    double fl = f(lo)(0), fh = f(hi)(0);
    if (std::abs(fl) <= 1e-10 || std::abs(fh) <= 1e-10)
      throw VanishesOnBoundary("degree_2d: f vanishes at an interval endpoint");
    int sl = fl > 0.0 ? 1 : -1;
    int sh = fh > 0.0 ? 1 : -1;
    return (sh - sl) / 2;
  }

  const int kCap = 1 << 20;
  int samples = std::max(boundary_samples, 16);
  const double pi = std::acos(-1.0);
  while (samples <= kCap) {
    double total = 0.0;
    bool refine = false;
    double prev_angle = 0.0;
    for (int i = 0; i <= samples; ++i) {
      Vec p = detail::box_boundary_point(box, static_cast<double>(i % samples) / samples);
      Vec v = f(p);
      double norm_v = std::hypot(v(0), v(1));
      if (norm_v <= 1e-10)
        throw VanishesOnBoundary("degree_2d: f vanishes on the sampled boundary");
      double ang = std::atan2(v(1), v(0));
      if (i > 0) {
        double d = ang - prev_angle;
        while (d > pi) d -= 2.0 * pi;
        while (d <= -pi) d += 2.0 * pi;
        if (std::abs(d) >= pi / 2.0) {
          refine = true;
          break;
        }
        total += d;
      }
      prev_angle = ang;
    }
    if (!refine) return static_cast<int>(std::lround(total / (2.0 * pi)));
    samples *= 2;
  }
  throw Inconclusive("degree_2d: angular steps stay too large at the sample cap");
}

}  // namespace ifcert
