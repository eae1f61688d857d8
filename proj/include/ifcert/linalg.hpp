#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ifcert/errors.hpp"

namespace ifcert {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class NormSpec { Inf, Two };

inline double vec_norm(const Vec& v, NormSpec n = NormSpec::Inf) {
  if (v.size() == 0) return 0.0;
  return n == NormSpec::Inf ? v.cwiseAbs().maxCoeff() : v.norm();
}

// Induced operator norm. Inf is exact (max row abs-sum); Two is reported as an
// upper bound (SVD value inflated by 1e-10 relative).
inline double op_norm(const Mat& M, NormSpec n = NormSpec::Inf) {
  if (M.size() == 0) return 0.0;
  if (n == NormSpec::Inf) return M.cwiseAbs().rowwise().sum().maxCoeff();
  Eigen::JacobiSVD<Mat> svd(M);
  return svd.singularValues()(0) * (1.0 + 1e-10);
}

namespace detail {

inline Eigen::FullPivLU<Mat> checked_lu(const Mat& M) {
  if (M.rows() != M.cols()) throw ValidationError("solve_linear: matrix not square");
  if (!M.allFinite()) throw NonFinite("solve_linear: non-finite entries");
  Eigen::FullPivLU<Mat> lu(M);
  const double scale = op_norm(M, NormSpec::Inf);
  const double minpiv = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
  if (!(minpiv > 1e-13 * scale) || scale == 0.0)
    throw Singular("pivot below 1e-13 * inf-norm threshold");
  return lu;
}

}  // namespace detail

inline Vec solve_linear(const Mat& M, const Vec& rhs) {
  auto lu = detail::checked_lu(M);
  Vec x = lu.solve(rhs);
  x += lu.solve(rhs - M * x);  // one refinement step
  const double res = vec_norm(rhs - M * x, NormSpec::Inf);
  if (!(res <= 1e-9 * (1.0 + vec_norm(rhs, NormSpec::Inf))))
    throw Singular("solve_linear: residual too large");
  return x;
}

inline Mat inverse(const Mat& M) {
  auto lu = detail::checked_lu(M);
  Mat inv = lu.inverse();
  inv += lu.solve(Mat::Identity(M.rows(), M.cols()) - M * inv);
  return inv;
}

inline double inverse_op_norm(const Mat& M, NormSpec n = NormSpec::Inf) {
  return op_norm(inverse(M), n);
}

// Lemma-style invertibility margin: every B with ||B|| < margin keeps M + B invertible.
inline double perturb_invert_margin(const Mat& M, NormSpec n = NormSpec::Inf) {
  return 1.0 / inverse_op_norm(M, n);
}

// Norm of M restricted to a coordinate subspace of its input: columns at `cols`.
inline double subspace_columns_norm(const Mat& M, const std::vector<int>& cols,
                                    NormSpec n = NormSpec::Inf) {
  Mat sub(M.rows(), static_cast<Eigen::Index>(cols.size()));
  for (size_t j = 0; j < cols.size(); ++j) {
    if (cols[j] < 0 || cols[j] >= M.cols())
      throw ValidationError("subspace_columns_norm: index out of range");
    sub.col(static_cast<Eigen::Index>(j)) = M.col(cols[j]);
  }
  return op_norm(sub, n);
}

inline bool is_hurwitz(const Mat& A, double strict_tol = 1e-10) {
  Eigen::EigenSolver<Mat> es(A, /*computeEigenvectors=*/false);
  return es.eigenvalues().real().maxCoeff() < -strict_tol;
}

inline double eig_min_sym(const Mat& S) {
  Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// Solve Ac^T mu + mu Ac = V on symmetric matrices via the vectorized system.
inline Mat solve_lyapunov(const Mat& Ac, const Mat& V) {
  const Eigen::Index n = Ac.rows();
  if (Ac.cols() != n || V.rows() != n || V.cols() != n)
    throw ValidationError("solve_lyapunov: dimension mismatch");
  if (!is_hurwitz(Ac)) throw NotHurwitz("solve_lyapunov: Ac is not Hurwitz");

  // vec(Ac^T mu) = (I (x) Ac^T) vec(mu); vec(mu Ac) = (Ac^T (x) I) vec(mu)
  Mat K = Mat::Zero(n * n, n * n);
  for (Eigen::Index j = 0; j < n; ++j)
    K.block(j * n, j * n, n, n) += Ac.transpose();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index r = 0; r < n; ++r)
        K(j * n + r, i * n + r) += Ac(i, j);

  Vec vecV(n * n);
  for (Eigen::Index j = 0; j < n; ++j) vecV.segment(j * n, n) = V.col(j);
  Vec vecMu = solve_linear(K, vecV);
  Mat mu(n, n);
  for (Eigen::Index j = 0; j < n; ++j) mu.col(j) = vecMu.segment(j * n, n);
  mu = 0.5 * (mu + mu.transpose()).eval();

  const double res = op_norm(Ac.transpose() * mu + mu * Ac - V, NormSpec::Inf);
  if (!(res <= 1e-8 * (1.0 + op_norm(V, NormSpec::Inf))))
    throw Singular("solve_lyapunov: residual too large");
  return mu;
}

namespace detail {

// d(i, idx) = diagonal entry i of the inverse Lyapunov image of the idx-th
// unit-entry symmetric basis element (E_jj, then E_jk + E_kj for j < k).
inline Mat lyapunov_inverse_diag_table(const Mat& Ac) {
  const Eigen::Index dim = Ac.rows();
  std::vector<Mat> basis;
  for (Eigen::Index j = 0; j < dim; ++j) {
    Mat b = Mat::Zero(dim, dim);
    b(j, j) = 1.0;
    basis.push_back(b);
  }
  for (Eigen::Index j = 0; j < dim; ++j)
    for (Eigen::Index k = j + 1; k < dim; ++k) {
      Mat b = Mat::Zero(dim, dim);
      b(j, k) = b(k, j) = 1.0;
      basis.push_back(b);
    }
  Mat d(dim, static_cast<Eigen::Index>(basis.size()));
  for (size_t idx = 0; idx < basis.size(); ++idx)
    d.col(static_cast<Eigen::Index>(idx)) = solve_lyapunov(Ac, basis[idx]).diagonal();
  return d;
}

inline double lyapunov_inverse_norm_overapprox(const Mat& Ac) {
  return lyapunov_inverse_diag_table(Ac).cwiseAbs().sum();
}

}  // namespace detail

// Norm of the inverse Lyapunov operator restricted to symmetric matrices,
// measured with unit-entry symmetric inputs and the diagonal absolute-sum of
// the output. Exact by sign enumeration for order <= 4 under Inf; a certified
// overapproximation (exact=false) otherwise.
inline double lyapunov_inverse_norm(const Mat& Ac, NormSpec n = NormSpec::Inf,
                                    bool* exact = nullptr) {
  const Eigen::Index dim = Ac.rows();
  if (!is_hurwitz(Ac)) throw NotHurwitz("lyapunov_inverse_norm: Ac is not Hurwitz");

  if (n == NormSpec::Two) {
    // induced 2-norm of the vectorized inverse operator; upper-bound flavor only
    Mat K = Mat::Zero(dim * dim, dim * dim);
    for (Eigen::Index j = 0; j < dim; ++j) K.block(j * dim, j * dim, dim, dim) += Ac.transpose();
    for (Eigen::Index i = 0; i < dim; ++i)
      for (Eigen::Index j = 0; j < dim; ++j)
        for (Eigen::Index r = 0; r < dim; ++r) K(j * dim + r, i * dim + r) += Ac(i, j);
    if (exact) *exact = false;
    return inverse_op_norm(K, NormSpec::Two);
  }

  Mat d = detail::lyapunov_inverse_diag_table(Ac);

  if (dim <= 4) {
    double best = 0.0;
    for (std::uint32_t bits = 0; bits < (1u << dim); ++bits) {
      Vec s(dim);
      for (Eigen::Index i = 0; i < dim; ++i) s(i) = (bits >> i) & 1u ? 1.0 : -1.0;
      best = std::max(best, (d.transpose() * s).cwiseAbs().sum());
    }
    if (exact) *exact = true;
    return best;
  }
  if (exact) *exact = false;
  return d.cwiseAbs().sum();
}

// Stabilizing solution of A^T P + P A + Q - P B R^-1 B^T P = 0 by
// Newton-Kleinman iteration; the initial gain comes from a Lyapunov-based
// stabilization when A itself is unstable.
inline Mat solve_are(const Mat& A, const Mat& B, const Mat& Q, const Mat& R) {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != m ||
      R.cols() != m)
    throw ValidationError("solve_are: dimension mismatch");
  if (m > 0 && !(eig_min_sym(R) > 0.0)) throw ValidationError("solve_are: R not positive definite");

  Mat Rinv = m > 0 ? inverse(R) : Mat(0, 0);
  Mat K = Mat::Zero(m, n);
  // near-marginal spectra make the K = 0 start numerically singular, so ask
  // for a real stability margin before trusting it
  const bool comfortably_stable = is_hurwitz(A, 1e-4 * (1.0 + op_norm(A, NormSpec::Inf)));
  if (!comfortably_stable && (m == 0 || B.isZero(0.0))) {
    if (!is_hurwitz(A))
      throw NoStabilizingSolution("solve_are: A unstable and B is zero");
  } else if (!comfortably_stable) {
    const double beta = op_norm(A, NormSpec::Inf) + 1.0;
    Mat shifted = A + beta * Mat::Identity(n, n);
    Mat X;
    try {
      X = solve_lyapunov(-shifted.transpose(), -2.0 * B * B.transpose());
      K = B.transpose() * inverse(X);
    } catch (const Singular&) {
      throw NoStabilizingSolution("solve_are: stabilizing gain construction failed");
    }
    if (!is_hurwitz(A - B * K))
      throw NoStabilizingSolution("solve_are: no stabilizing initial gain found");
  }

  Mat P = Mat::Zero(n, n);
  bool converged = false;
  for (int iter = 0; iter < 100; ++iter) {
    Mat Acl = A - B * K;
    Mat Pnew;
    try {
      Pnew = solve_lyapunov(Acl, -(Q + K.transpose() * R * K));
    } catch (const NotHurwitz&) {
      throw NoStabilizingSolution("solve_are: iteration lost stability");
    } catch (const Singular&) {
      throw NoStabilizingSolution("solve_are: iteration hit a singular Lyapunov solve");
    }
    double change = op_norm(Pnew - P, NormSpec::Inf);
    P = Pnew;
    if (m > 0) K = Rinv * B.transpose() * P;
    if (change <= 1e-13 * (1.0 + op_norm(P, NormSpec::Inf))) {
      converged = true;
      break;
    }
  }
  if (!converged) throw NoStabilizingSolution("solve_are: iteration did not converge");

  Mat S = m > 0 ? Mat(B * Rinv * B.transpose()) : Mat::Zero(n, n);
  Mat residual = A.transpose() * P + P * A + Q - P * S * P;
  if (!(op_norm(residual, NormSpec::Inf) <= 1e-8 * (1.0 + op_norm(Q, NormSpec::Inf))))
    throw NoStabilizingSolution("solve_are: residual too large");
  if (!(eig_min_sym(P) > 0.0))
    throw NoStabilizingSolution("solve_are: solution not positive definite");
  if (!is_hurwitz(A - S * P, 0.0))
    throw NoStabilizingSolution("solve_are: closed loop not Hurwitz");
  return P;
}

}  // namespace ifcert
