#pragma once

// Dense non-negative least squares, Lawson-Hanson active set.
//
//   minimise ||A x - b||^2  subject to  x >= 0
//
// Sized for the small systems used by the configuration search (6 rows, at
// most 24 columns) but works for any dense m x n problem. When A has
// compile-time maximum dimensions every temporary stays on the stack.

#include <Eigen/Core>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "thrustopt/errors.hpp"

namespace thrustopt {

struct NnlsOptions {
  /// Relative optimality tolerance; gradients are compared against
  /// tol * max(|A^T b|_inf, 1).
  double tol = 1e-10;
  /// Cap on least-squares subproblem solves; 0 selects 3 * n.
  int max_iterations = 0;
};

template <int MaxCols = Eigen::Dynamic>
struct NnlsSolution {
  using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, MaxCols, 1>;
  Vector x;
  double residual_norm_sq = 0.0;
  int iterations = 0;
};

/// Thrown when the iteration cap is hit; carries the last feasible iterate.
class NnlsConvergenceError : public std::runtime_error {
 public:
  NnlsConvergenceError(std::vector<double> best_x, double residual_norm_sq, int iterations)
      : std::runtime_error("nnls: iteration cap of " + std::to_string(iterations) +
                           " reached"),
        best_x_(std::move(best_x)),
        residual_norm_sq_(residual_norm_sq) {}

  [[nodiscard]] const std::vector<double>& best_x() const { return best_x_; }
  [[nodiscard]] double residual_norm_sq() const { return residual_norm_sq_; }

 private:
  std::vector<double> best_x_;
  double residual_norm_sq_;
};

namespace detail {

// Gradient scale used by the stopping rule and the KKT checks.
template <typename DerivedA, typename DerivedB>
double nnls_scale(const Eigen::MatrixBase<DerivedA>& A, const Eigen::MatrixBase<DerivedB>& b) {
  const double s = (A.transpose() * b).cwiseAbs().maxCoeff();
  return s > 0.0 ? s : 1.0;
}

}  // namespace detail

template <typename DerivedA, typename DerivedB>
NnlsSolution<DerivedA::MaxColsAtCompileTime> nnls_solve(const Eigen::MatrixBase<DerivedA>& A,
                                                        const Eigen::MatrixBase<DerivedB>& b,
                                                        const NnlsOptions& opts = {}) {
  constexpr int kMaxRows = DerivedA::MaxRowsAtCompileTime;
  constexpr int kMaxCols = DerivedA::MaxColsAtCompileTime;
  using ColVec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxCols, 1>;
  using RowVec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxRows, 1>;
  using SubMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxRows,
                               kMaxCols>;
  using IdxVec = Eigen::Matrix<int, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxCols, 1>;

  const Eigen::Index m = A.rows();
  const Eigen::Index n = A.cols();
  if (m < 1 || n < 1) throw DomainError("nnls_solve: empty matrix");
  if (b.size() != m) throw DomainError("nnls_solve: rhs length does not match row count");
  if (!(opts.tol > 0.0)) throw DomainError("nnls_solve: tolerance must be positive");
  if (!A.allFinite() || !b.allFinite()) throw DomainError("nnls_solve: non-finite input");

  const int max_iter = opts.max_iterations > 0 ? opts.max_iterations : static_cast<int>(3 * n);
  const double grad_tol = opts.tol * detail::nnls_scale(A, b);

  ColVec x = ColVec::Zero(n);
  ColVec z(n);
  RowVec resid = b;
  ColVec w = A.transpose() * resid;
  // passive[k] != 0 <=> column k is in the passive (free) set.
  IdxVec passive = IdxVec::Zero(n);
  // Columns rejected as numerically dependent since the last x update.
  IdxVec blocked = IdxVec::Zero(n);

  SubMat sub(m, n);
  IdxVec cols(n);
  int iterations = 0;

  // Solves the unconstrained LS over the passive set into z; returns false
  // if the passive columns are numerically rank deficient.
  auto solve_passive = [&]() -> bool {
    Eigen::Index p = 0;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (passive(k)) cols(p++) = static_cast<int>(k);
    }
    sub.resize(m, p);
    for (Eigen::Index j = 0; j < p; ++j) sub.col(j) = A.col(cols(j));
    Eigen::ColPivHouseholderQR<SubMat> qr(sub);
    qr.setThreshold(1e-12);
    z.setZero();
    if (qr.rank() < p) return false;
    const ColVec zp = qr.solve(b);
    for (Eigen::Index j = 0; j < p; ++j) z(cols(j)) = zp(j);
    return true;
  };

  auto fail = [&]() {
    std::vector<double> best(x.data(), x.data() + x.size());
    throw NnlsConvergenceError(std::move(best), (A * x - b).squaredNorm(), iterations);
  };

  while (true) {
    // Pick the most promising free-able column; strict > keeps the lowest
    // index on ties.
    Eigen::Index enter = -1;
    double best = grad_tol;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (!passive(k) && !blocked(k) && w(k) > best) {
        best = w(k);
        enter = k;
      }
    }
    if (enter < 0) break;

    passive(enter) = 1;
    if (++iterations > max_iter) fail();
    if (!solve_passive() || z(enter) <= 0.0) {
      // Column adds no usable direction given the current passive set.
      passive(enter) = 0;
      blocked(enter) = 1;
      continue;
    }

    // Inner loop: step back toward feasibility until all passive z > 0.
    while (true) {
      bool feasible = true;
      double alpha = 1.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        if (passive(k) && z(k) <= 0.0) {
          feasible = false;
          alpha = std::min(alpha, x(k) / (x(k) - z(k)));
        }
      }
      if (feasible) {
        x = z;
        break;
      }
      x += alpha * (z - x);
      for (Eigen::Index k = 0; k < n; ++k) {
        if (passive(k) && x(k) <= 0.0) {
          passive(k) = 0;
          x(k) = 0.0;
        }
      }
      if (++iterations > max_iter) fail();
      if (!solve_passive()) fail();
    }

    blocked.setZero();
    resid = b - A * x;
    w = A.transpose() * resid;
    if (passive.minCoeff() > 0) break;
  }

  NnlsSolution<kMaxCols> out;
  out.x = x;
  out.residual_norm_sq = (A * x - b).squaredNorm();
  out.iterations = iterations;
  return out;
}

/// Worst violation of the NNLS optimality conditions, relative to the
/// gradient scale. Zero for an exact minimiser.
template <typename DerivedA, typename DerivedB, typename DerivedX>
double nnls_kkt_violation(const Eigen::MatrixBase<DerivedA>& A,
                          const Eigen::MatrixBase<DerivedB>& b,
                          const Eigen::MatrixBase<DerivedX>& x) {
  const double scale = detail::nnls_scale(A, b);
  const Eigen::VectorXd grad = A.transpose() * (A * x - b);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (x(k) < 0.0) worst = std::max(worst, -x(k));
    if (x(k) > 0.0) {
      worst = std::max(worst, std::abs(grad(k)) / scale);
    } else {
      worst = std::max(worst, -grad(k) / scale);
    }
  }
  return worst;
}

}  // namespace thrustopt
