#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <vector>

#include "ifcert/linalg.hpp"

namespace ifcert {

enum class Provenance { Analytic, Sampled };

struct Bound {
  double value = 0.0;
  Provenance provenance = Provenance::Analytic;
};

struct BallPair {
  Vec x0;
  Vec y0;
  double Rx = 0.0;
  double Ry = 0.0;
  NormSpec norm = NormSpec::Inf;
};

enum class HessWhich { XX, XY, YY };
enum class LipWhich { JX, JY };

// A map f(x, y) with first derivatives and certified bound providers over balls.
// hess_bound supplies the curvature constants K_xx, K_xy, K_yy; lip_bound the
// moduli l_x(Rx) (y frozen at y0) and l_y(Rx, Ry).
struct MapOracle {
  int n = 0;  // x dimension
  int m = 0;  // y dimension
  int k = 0;  // output dimension
  std::function<Vec(const Vec&, const Vec&)> eval;
  std::function<Mat(const Vec&, const Vec&)> jac_x;
  std::function<Mat(const Vec&, const Vec&)> jac_y;
  std::function<Bound(const BallPair&, HessWhich, NormSpec)> hess_bound;
  std::function<Bound(const BallPair&, LipWhich)> lip_bound;
};

// A square map f: R^n -> R^n for the inverse-function paths.
struct SquareMap {
  int n = 0;
  std::function<Vec(const Vec&)> eval;
  std::function<Mat(const Vec&)> jac;
  // K = bound on sup ||D^2 f|| over the ball B(x0, R)
  std::function<Bound(const Vec&, double, NormSpec)> hess_bound;
  // l(r) = bound on sup { ||Df(x) - Df(x0)|| : x in B(x0, r) }
  std::function<Bound(const Vec&, double)> lip_jac;
};

inline double default_fd_step(const Vec& at) {
  return std::cbrt(std::numeric_limits<double>::epsilon()) * (1.0 + vec_norm(at, NormSpec::Inf));
}

inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& at, double h = 0.0) {
  if (h <= 0.0) h = default_fd_step(at);
  Vec f0 = f(at);
  Mat J(f0.size(), at.size());
  for (Eigen::Index j = 0; j < at.size(); ++j) {
    Vec hi = at, lo = at;
    hi(j) += h;
    lo(j) -= h;
    Vec d = (f(hi) - f(lo)) / (2.0 * h);
    if (!d.allFinite()) throw NonFinite("fd_jacobian: non-finite evaluation");
    J.col(j) = d;
  }
  return J;
}

namespace detail {

inline const std::vector<int>& halton_primes() {
  static const std::vector<int> p = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41,
                                     43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101,
                                     103, 107, 109, 113, 127, 131, 137, 139, 149, 151};
  return p;
}

inline double halton(std::uint64_t index, int base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

// Low-discrepancy point in [-1, 1]^dim.
inline Vec halton_box(std::uint64_t index, int dim, int base_offset = 0) {
  const auto& primes = halton_primes();
  Vec p(dim);
  for (int j = 0; j < dim; ++j)
    p(j) = 2.0 * halton(index + 1, primes[(base_offset + j) % primes.size()]) - 1.0;
  return p;
}

// Point inside the ball B(center, R); exact for Inf, sphere-projected overflow for Two.
inline Vec sample_in_ball(const Vec& center, double R, NormSpec norm, std::uint64_t index,
                          int base_offset = 0) {
  Vec u = halton_box(index, static_cast<int>(center.size()), base_offset);
  if (norm == NormSpec::Two && u.norm() > 1.0) u /= u.norm();
  return center + R * u;
}

// Point on the boundary of B(center, R).
inline Vec sample_on_sphere(const Vec& center, double R, NormSpec norm, std::uint64_t index,
                            int base_offset = 0) {
  const int dim = static_cast<int>(center.size());
  if (dim == 0) return center;
  Vec u = halton_box(index, dim, base_offset);
  if (norm == NormSpec::Inf) {
    int face = static_cast<int>(index % static_cast<std::uint64_t>(2 * dim));
    u(face / 2) = (face % 2 == 0) ? 1.0 : -1.0;
  } else {
    double nrm = u.norm();
    if (nrm < 1e-12) {
      u.setZero();
      u(0) = 1.0;
    } else {
      u /= nrm;
    }
  }
  return center + R * u;
}

// Exact induced bilinear norm (Inf) of one k-indexed slice family:
// max_i sup { |u^T T_i v| : ||u||_inf, ||v||_inf <= 1 } = max_i max_{s = +-1} ||T_i s||_1.
inline double bilinear_inf_norm(const std::vector<Mat>& slices) {
  double best = 0.0;
  for (const Mat& t : slices) {
    const Eigen::Index cols = t.cols();
    if (cols == 0 || t.rows() == 0) continue;
    if (cols <= 20) {
      // gray-code walk over sign vectors with s(0) pinned to +1; each step
      // flips one sign, so t*s updates by a single column
      Vec s = Vec::Ones(cols);
      Vec v = t.rowwise().sum();
      best = std::max(best, v.cwiseAbs().sum());
      const std::uint64_t total = 1ull << (cols - 1);
      for (std::uint64_t i = 1; i < total; ++i) {
        int j = __builtin_ctzll(i) + 1;
        v -= 2.0 * s(j) * t.col(j);
        s(j) = -s(j);
        if ((i & 0xfffull) == 0) v = t * s;  // shed accumulated rounding
        best = std::max(best, v.cwiseAbs().sum());
      }
    } else {
      best = std::max(best, t.cwiseAbs().sum());
    }
  }
  return best;
}

// FD second-derivative slices T_i(a, b) = d^2 f_i / d a d b, differentiating the
// analytic first derivative in the `a` block.
inline std::vector<Mat> fd_hessian_slices(const MapOracle& o, const Vec& x, const Vec& y,
                                          HessWhich which) {
  const bool dx = which == HessWhich::XX;  // XY differentiates jac_y along x
  const Mat j0 = dx ? o.jac_x(x, y) : o.jac_y(x, y);
  const int k = static_cast<int>(j0.rows());
  const int bcols = static_cast<int>(j0.cols());
  const int arows = which == HessWhich::XX ? o.n : (which == HessWhich::XY ? o.n : o.m);
  // differentiate w.r.t. x for XX and XY, w.r.t. y for YY
  const bool wiggle_x = which != HessWhich::YY;
  Vec base = wiggle_x ? x : y;
  double h = default_fd_step(base);
  std::vector<Mat> slices(k, Mat::Zero(arows, bcols));
  for (int a = 0; a < arows; ++a) {
    Vec hi = base, lo = base;
    hi(a) += h;
    lo(a) -= h;
    Mat jhi = wiggle_x ? (dx ? o.jac_x(hi, y) : o.jac_y(hi, y)) : (dx ? o.jac_x(x, hi) : o.jac_y(x, hi));
    Mat jlo = wiggle_x ? (dx ? o.jac_x(lo, y) : o.jac_y(lo, y)) : (dx ? o.jac_x(x, lo) : o.jac_y(x, lo));
    Mat d = (jhi - jlo) / (2.0 * h);
    if (!d.allFinite()) throw NonFinite("fd hessian: non-finite evaluation");
    for (int i = 0; i < k; ++i) slices[static_cast<size_t>(i)].row(a) = d.row(i);
  }
  return slices;
}

}  // namespace detail

// Sampled estimate of sup ||d^2 f|| over the product ball: low-discrepancy
// points, half of the budget boundary-biased, inflated by the safety factor.
// Always flagged Sampled (non-certified).
inline Bound sampled_hess_bound(const MapOracle& o, const BallPair& ball, HessWhich which,
                                NormSpec norm, int samples, double safety = 1.1) {
  if (samples < 1) throw ValidationError("sampled_hess_bound: samples must be >= 1");
  double best = 0.0;
  for (int s = 0; s < samples; ++s) {
    const bool boundary = (s % 2 == 1);
    Vec x = boundary ? detail::sample_on_sphere(ball.x0, ball.Rx, ball.norm, s)
                     : detail::sample_in_ball(ball.x0, ball.Rx, ball.norm, s);
    Vec y = boundary ? detail::sample_on_sphere(ball.y0, ball.Ry, ball.norm, s, 7)
                     : detail::sample_in_ball(ball.y0, ball.Ry, ball.norm, s, 7);
    auto slices = detail::fd_hessian_slices(o, x, y, which);
    double v = norm == NormSpec::Inf ? detail::bilinear_inf_norm(slices) : 0.0;
    if (norm == NormSpec::Two) {
      for (const Mat& t : slices) v = std::max(v, op_norm(t, NormSpec::Two));
    }
    best = std::max(best, v);
  }
  return Bound{best * safety, Provenance::Sampled};
}

// Sampled Lipschitz moduli for the C1 paths: l_x(Rx) freezes y at y0.
inline Bound sampled_lip_bound(const MapOracle& o, const BallPair& ball, LipWhich which,
                               int samples, double safety = 1.1) {
  if (samples < 1) throw ValidationError("sampled_lip_bound: samples must be >= 1");
  const Mat jx0 = o.jac_x(ball.x0, ball.y0);
  const Mat jy0 = o.jac_y(ball.x0, ball.y0);
  double best = 0.0;
  for (int s = 0; s < samples; ++s) {
    const bool boundary = (s % 2 == 1);
    Vec x = boundary ? detail::sample_on_sphere(ball.x0, ball.Rx, ball.norm, s)
                     : detail::sample_in_ball(ball.x0, ball.Rx, ball.norm, s);
    if (which == LipWhich::JX) {
      best = std::max(best, op_norm(o.jac_x(x, ball.y0) - jx0, ball.norm));
    } else {
      Vec y = boundary ? detail::sample_on_sphere(ball.y0, ball.Ry, ball.norm, s, 7)
                       : detail::sample_in_ball(ball.y0, ball.Ry, ball.norm, s, 7);
      best = std::max(best, op_norm(o.jac_y(x, y) - jy0, ball.norm));
    }
  }
  return Bound{best * safety, Provenance::Sampled};
}

namespace detail {

struct CacheEntry {
  Vec x0, y0;
  double Rx, Ry, value;
  NormSpec norm;
};

struct MonotoneCache {
  std::mutex mtx;
  std::vector<CacheEntry> entries[3];
};

inline bool same_center(const CacheEntry& e, const BallPair& ball, NormSpec norm) {
  return e.norm == norm && e.x0.size() == ball.x0.size() && e.y0.size() == ball.y0.size() &&
         e.x0 == ball.x0 && e.y0 == ball.y0;
}

}  // namespace detail

// Wraps the sampled estimator with nested-ball caching: a bound sampled on a
// ball remains valid on any ball it contains, and the reported value is
// monotone nondecreasing in (Rx, Ry) for a fixed center.
inline std::function<Bound(const BallPair&, HessWhich, NormSpec)> make_sampled_hess_provider(
    const MapOracle& base, int samples, double safety = 1.1) {
  auto cache = std::make_shared<detail::MonotoneCache>();
  MapOracle copy = base;
  return [cache, copy, samples, safety](const BallPair& ball, HessWhich which,
                                        NormSpec norm) -> Bound {
    {
      std::lock_guard<std::mutex> lock(cache->mtx);
      auto& list = cache->entries[static_cast<int>(which)];
      double best = -1.0;
      for (const auto& e : list)
        if (detail::same_center(e, ball, norm) && e.Rx >= ball.Rx && e.Ry >= ball.Ry)
          best = best < 0.0 ? e.value : std::min(best, e.value);
      if (best >= 0.0) return Bound{best, Provenance::Sampled};
    }
    Bound raw = sampled_hess_bound(copy, ball, which, norm, samples, safety);
    std::lock_guard<std::mutex> lock(cache->mtx);
    auto& list = cache->entries[static_cast<int>(which)];
    double value = raw.value;
    for (const auto& e : list)
      if (detail::same_center(e, ball, norm) && e.Rx <= ball.Rx && e.Ry <= ball.Ry)
        value = std::max(value, e.value);
    list.push_back({ball.x0, ball.y0, ball.Rx, ball.Ry, value, norm});
    return Bound{value, Provenance::Sampled};
  };
}

}  // namespace ifcert
