#pragma once

// Dense reference matrices built directly from the Kronecker definitions.
// Nothing here calls the matrix-free operators or the fast transforms, so the
// results serve as an independent check of both. Requires Eigen.

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "colorot/grid.hpp"

namespace colorot::dense {

using Matrix = Eigen::MatrixXd;
using ComplexMatrix = Eigen::MatrixXcd;

/// n (e_{k+1} - e_k) rows, (n-1) x n.
inline Matrix difference(std::size_t n) {
  const auto sn = static_cast<Eigen::Index>(n);
  Matrix D = Matrix::Zero(sn - 1, sn);
  for (Eigen::Index k = 0; k + 1 < sn; ++k) {
    D(k, k) = -1.0;
    D(k, k + 1) = 1.0;
  }
  return static_cast<double>(n) * D;
}

/// Periodic difference, n x n: row 0 is e_0 - e_{n-1}, row k is e_k - e_{k-1}.
inline Matrix difference_periodic(std::size_t n) {
  const auto sn = static_cast<Eigen::Index>(n);
  Matrix D = Matrix::Zero(sn, sn);
  for (Eigen::Index k = 0; k < sn; ++k) {
    D(k, k) += 1.0;
    D(k, (k + sn - 1) % sn) -= 1.0;
  }
  return static_cast<double>(n) * D;
}

/// Averaging 1/2 (e_k + e_{k+1}), (n-1) x n.
inline Matrix average(std::size_t n) {
  const auto sn = static_cast<Eigen::Index>(n);
  Matrix S = Matrix::Zero(sn - 1, sn);
  for (Eigen::Index k = 0; k + 1 < sn; ++k) {
    S(k, k) = 0.5;
    S(k, k + 1) = 0.5;
  }
  return S;
}

/// Periodic averaging, n x n: row 0 is 1/2 (e_0 + e_{n-1}), row k 1/2 (e_{k-1} + e_k).
inline Matrix average_periodic(std::size_t n) {
  const auto sn = static_cast<Eigen::Index>(n);
  Matrix S = Matrix::Zero(sn, sn);
  for (Eigen::Index k = 0; k < sn; ++k) {
    S(k, k) += 0.5;
    S(k, (k + sn - 1) % sn) += 0.5;
  }
  return S;
}

/// C_n, the orthogonal DCT-II matrix.
inline Matrix dct_matrix(std::size_t n) {
  using std::numbers::pi;
  const auto sn = static_cast<Eigen::Index>(n);
  const double dn = static_cast<double>(n);
  Matrix C(sn, sn);
  for (Eigen::Index j = 0; j < sn; ++j) {
    const double eps = j == 0 ? 1.0 / std::sqrt(2.0) : 1.0;
    for (Eigen::Index k = 0; k < sn; ++k) {
      C(j, k) = std::sqrt(2.0 / dn) * eps *
                std::cos(static_cast<double>(j * (2 * k + 1)) * pi / (2.0 * dn));
    }
  }
  return C;
}

/// S_{n-1}, the orthogonal DST-I matrix of size (n-1) x (n-1).
inline Matrix dst_matrix(std::size_t n) {
  using std::numbers::pi;
  const auto m = static_cast<Eigen::Index>(n) - 1;
  const double dn = static_cast<double>(n);
  Matrix S(m, m);
  for (Eigen::Index j = 1; j <= m; ++j) {
    for (Eigen::Index k = 1; k <= m; ++k) {
      S(j - 1, k - 1) = std::sqrt(2.0 / dn) * std::sin(static_cast<double>(j * k) * pi / dn);
    }
  }
  return S;
}

/// F_n, the unitary DFT matrix.
inline ComplexMatrix dft_matrix(std::size_t n) {
  using std::numbers::pi;
  const auto sn = static_cast<Eigen::Index>(n);
  const double dn = static_cast<double>(n);
  ComplexMatrix F(sn, sn);
  for (Eigen::Index j = 0; j < sn; ++j) {
    for (Eigen::Index k = 0; k < sn; ++k) {
      F(j, k) = std::polar(1.0 / std::sqrt(dn), -2.0 * pi * static_cast<double>(j * k) / dn);
    }
  }
  return F;
}

inline Matrix kron(const Matrix& A, const Matrix& B) {
  Matrix K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    }
  }
  return K;
}

inline Matrix identity(std::size_t n) {
  return Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
}

/// I_{k} (x) ... (x) M (x) ... (x) I, with `factor` at position `axis` of a
/// column-major layout with the given extents (first axis rightmost).
inline Matrix lift(const std::vector<std::size_t>& extents, std::size_t axis,
                   const Matrix& factor) {
  Matrix result = Matrix::Identity(1, 1);
  for (std::size_t a = extents.size(); a-- > 0;) {
    result = kron(result, a == axis ? factor : identity(extents[a]));
  }
  return result;
}

/// Dense D_m, S_m, D_f, S_f and A = (D_m | D_f) for a grid.
struct Operators {
  Matrix Dm, Sm, Df, Sf, A;
};

inline Operators build_operators(const GridSpec& grid) {
  grid.validate();
  const std::size_t P = grid.time_steps;
  const Extents mid = grid.midpoint_extents();
  Operators ops;
  std::vector<Matrix> dm_blocks, sm_blocks;
  Eigen::Index m_cols = 0;
  for (std::size_t axis = 0; axis < grid.axes(); ++axis) {
    const std::size_t n = grid.spatial_dims[axis];
    const bool periodic = grid.boundary(axis) == BoundaryKind::Periodic;
    const Matrix D = periodic ? difference_periodic(n) : difference(n);
    const Matrix S = periodic ? average_periodic(n) : average(n);
    // factor maps faces -> cells along this axis; other axes are identities.
    std::vector<std::size_t> ext = mid;
    dm_blocks.push_back(lift(ext, axis, D.transpose()));
    sm_blocks.push_back(lift(ext, axis, S.transpose()));
    m_cols += dm_blocks.back().cols();
  }
  const Eigen::Index rows = static_cast<Eigen::Index>(grid.cells() * P);
  ops.Dm = Matrix::Zero(rows, m_cols);
  ops.Sm = Matrix::Zero(rows * static_cast<Eigen::Index>(grid.axes()), m_cols);
  Eigen::Index col = 0;
  for (std::size_t axis = 0; axis < grid.axes(); ++axis) {
    const Eigen::Index w = dm_blocks[axis].cols();
    ops.Dm.block(0, col, rows, w) = dm_blocks[axis];
    ops.Sm.block(static_cast<Eigen::Index>(axis) * rows, col, rows, w) = sm_blocks[axis];
    col += w;
  }
  const Matrix cells = identity(grid.cells());
  ops.Df = kron(difference(P).transpose(), cells);
  ops.Sf = kron(average(P).transpose(), cells);
  ops.A = Matrix(rows, m_cols + ops.Df.cols());
  ops.A << ops.Dm, ops.Df;
  return ops;
}

enum class OracleKind { PseudoInverse, PenalizedInverse };

inline constexpr std::size_t kOracleSizeCap = 2000;

/// PseudoInverse: (A A^T)^+ with the same 1e-12 relative zero threshold as the
/// spectral plan. PenalizedInverse: (lambda A^T A + I/tau)^{-1}.
inline Matrix dense_oracle(const GridSpec& grid, OracleKind kind, double lambda = 1.0,
                           double tau = 1.0) {
  const FieldSizes sizes = field_sizes(grid);
  const std::size_t n = kind == OracleKind::PseudoInverse ? sizes.midpoint_total : sizes.total();
  if (sizes.total() > kOracleSizeCap) {
    throw std::invalid_argument("dense_oracle: system size " + std::to_string(sizes.total()) +
                                " exceeds the cap of " + std::to_string(kOracleSizeCap));
  }
  const Matrix A = build_operators(grid).A;
  if (kind == OracleKind::PseudoInverse) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(A * A.transpose());
    const Eigen::VectorXd& d = eig.eigenvalues();
    const double cut = 1e-12 * d.cwiseAbs().maxCoeff();
    Eigen::VectorXd inv(d.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) inv(i) = std::abs(d(i)) <= cut ? 0.0 : 1.0 / d(i);
    return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  }
  if (!(lambda > 0.0) || !(tau > 0.0)) {
    throw std::invalid_argument("dense_oracle: lambda and tau must be positive");
  }
  const auto sn = static_cast<Eigen::Index>(n);
  Matrix M = lambda * A.transpose() * A + Matrix::Identity(sn, sn) / tau;
  return M.llt().solve(Matrix::Identity(sn, sn));
}

}  // namespace colorot::dense
