// SPDX-License-Identifier: Apache-2.0

#include "blockgs/dense.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace blockgs {

BlockGrid fused_block_product(const PanelList& left, const PanelList& right,
                              SyncLedger& ledger, std::string_view phase) {
  if (left.empty() || right.empty())
    throw DimensionError("fused_block_product needs at least one panel per side");
  const Index m = left.front().get().rows();
  for (const auto& panel : left)
    if (panel.get().rows() != m)
      throw DimensionError("fused_block_product: left panel row mismatch");
  for (const auto& panel : right)
    if (panel.get().rows() != m)
      throw DimensionError("fused_block_product: right panel row mismatch");

  BlockGrid grid;
  grid.grid_rows = left.size();
  grid.grid_cols = right.size();
  grid.entries.reserve(grid.grid_rows * grid.grid_cols);
  for (const auto& li : left)
    for (const auto& rj : right)
      grid.entries.emplace_back(li.get().transpose() * rj.get());

  ledger.charge(phase);
  return grid;
}

Matrix cholesky_upper(const Matrix& G) {
  if (G.rows() != G.cols())
    throw DimensionError("cholesky_upper needs a square matrix");
  const Index n = G.rows();
  const Matrix A = 0.5 * (G + G.transpose());
  Matrix R = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    double d = A(j, j);
    for (Index k = 0; k < j; ++k) d -= R(k, j) * R(k, j);
    if (!(d > 0.0)) throw NotPositiveDefinite(j, d);
    R(j, j) = std::sqrt(d);
    for (Index i = j + 1; i < n; ++i) {
      double v = A(j, i);
      for (Index k = 0; k < j; ++k) v -= R(k, j) * R(k, i);
      R(j, i) = v / R(j, j);
    }
  }
  return R;
}

Matrix tri_solve(const Matrix& R, const Matrix& B, Side side, bool transpose) {
  if (R.rows() != R.cols())
    throw DimensionError("tri_solve needs a square triangular factor");
  const Index n = R.rows();
  for (Index i = 0; i < n; ++i)
    if (R(i, i) == 0.0) throw SingularTriangular(i);

  const Index need = side == Side::Left ? B.rows() : B.cols();
  if (need != n) throw DimensionError("tri_solve dimension mismatch");

  Matrix X = B;
  if (side == Side::Left) {
    if (transpose)
      R.transpose().triangularView<Eigen::Lower>().solveInPlace(X);
    else
      R.triangularView<Eigen::Upper>().solveInPlace(X);
  } else {
    if (transpose)
      R.transpose().triangularView<Eigen::Lower>().solveInPlace<Eigen::OnTheRight>(X);
    else
      R.triangularView<Eigen::Upper>().solveInPlace<Eigen::OnTheRight>(X);
  }
  return X;
}

double spectral_norm(const Matrix& A) {
  if (A.rows() == 0 || A.cols() == 0) return 0.0;
  Eigen::BDCSVD<Matrix> svd(A);
  return svd.singularValues()(0);
}

double loss_of_orthogonality(const Matrix& Q) {
  if (Q.cols() > Q.rows())
    throw DimensionError("loss_of_orthogonality: Q has more columns than rows");
  if (Q.cols() == 0) return 0.0;
  const Index n = Q.cols();
  Matrix defect = Matrix::Identity(n, n) - Q.transpose() * Q;
  return spectral_norm(defect);
}

double relative_residual(const Matrix& X, const Matrix& Q, const Matrix& R) {
  if (Q.rows() != X.rows() || Q.cols() != R.rows() || R.cols() != X.cols())
    throw DimensionError("relative_residual dimension mismatch");
  const double nx = spectral_norm(X);
  if (nx == 0.0) throw ZeroMatrix("relative_residual: ||X|| = 0");
  return spectral_norm(X - Q * R) / nx;
}

double cond2(const Matrix& X) {
  if (X.rows() == 0 || X.cols() == 0)
    throw DimensionError("cond2 of an empty matrix");
  Eigen::BDCSVD<Matrix> svd(X);
  const auto& sigma = svd.singularValues();
  const double smax = sigma(0);
  const double smin = sigma(sigma.size() - 1);
  const double floor =
      kUnitRoundoff * smax * static_cast<double>(std::max(X.rows(), X.cols()));
  if (smin <= floor) throw SingularMatrix("cond2: numerically singular matrix");
  return smax / smin;
}

}  // namespace blockgs
