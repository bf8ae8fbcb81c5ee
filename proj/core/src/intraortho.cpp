// SPDX-License-Identifier: Apache-2.0

#include "blockgs/intraortho.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>

namespace blockgs {

namespace {

// Flip signs so diag(R) >= 0; the matching Q columns flip with it.
void normalize_signs(Matrix& Q, Matrix& R) {
  const Index n = std::min(R.rows(), R.cols());
  for (Index i = 0; i < n; ++i) {
    if (R(i, i) < 0.0) {
      R.row(i) = -R.row(i);
      Q.col(i) = -Q.col(i);
    }
  }
}

bool diag_full_rank(const Matrix& R) {
  double dmax = 0.0;
  const Index n = std::min(R.rows(), R.cols());
  for (Index i = 0; i < n; ++i) dmax = std::max(dmax, std::abs(R(i, i)));
  if (dmax == 0.0) return false;
  const double tol = static_cast<double>(n) * kUnitRoundoff * dmax;
  for (Index i = 0; i < n; ++i)
    if (std::abs(R(i, i)) <= tol) return false;
  return true;
}

// Householder thin QR without any ledger charge; shared by house_qr and the
// tsqr tree nodes.
QRFactorization house_qr_kernel(const Matrix& X) {
  if (X.rows() < X.cols())
    throw DimensionError("house_qr needs at least as many rows as columns");
  const Index n = X.cols();
  Eigen::HouseholderQR<Matrix> qr(X);
  QRFactorization f;
  f.Q = qr.householderQ() * Matrix::Identity(X.rows(), n);
  f.R = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  normalize_signs(f.Q, f.R);
  f.full_rank = diag_full_rank(f.R);
  return f;
}

struct TsqrNode {
  Matrix Q;  // rows x n
  Matrix R;  // n x n
};

TsqrNode tsqr_tree(const Matrix& X, const std::vector<Index>& offsets, Index lo,
                   Index hi) {
  if (hi - lo == 1) {
    QRFactorization leaf =
        house_qr_kernel(X.middleRows(offsets[lo], offsets[lo + 1] - offsets[lo]));
    return {std::move(leaf.Q), std::move(leaf.R)};
  }
  const Index mid = lo + (hi - lo) / 2;
  TsqrNode left = tsqr_tree(X, offsets, lo, mid);
  TsqrNode right = tsqr_tree(X, offsets, mid, hi);
  const Index n = X.cols();
  Matrix stacked(2 * n, n);
  stacked.topRows(n) = left.R;
  stacked.bottomRows(n) = right.R;
  QRFactorization combine = house_qr_kernel(stacked);
  TsqrNode node;
  node.R = std::move(combine.R);
  node.Q.resize(left.Q.rows() + right.Q.rows(), n);
  node.Q.topRows(left.Q.rows()) = left.Q * combine.Q.topRows(n);
  node.Q.bottomRows(right.Q.rows()) = right.Q * combine.Q.bottomRows(n);
  return node;
}

}  // namespace

int alpha1(IntraorthoKind kind) noexcept {
  switch (kind) {
    case IntraorthoKind::HouseQR:
    case IntraorthoKind::Tsqr:
      return 0;
    case IntraorthoKind::Mgs:
      return 1;
    case IntraorthoKind::CholQR:
    case IntraorthoKind::CholQRPythagorean:
      return 2;
  }
  return 2;
}

long sync_cost(IntraorthoKind kind, Index block_width) noexcept {
  switch (kind) {
    case IntraorthoKind::HouseQR:
    case IntraorthoKind::Tsqr:
    case IntraorthoKind::CholQR:
      return 1;
    case IntraorthoKind::Mgs:
      return block_width;
    case IntraorthoKind::CholQRPythagorean:
      return 0;
  }
  return 1;
}

std::string_view name(IntraorthoKind kind) noexcept {
  switch (kind) {
    case IntraorthoKind::HouseQR:
      return "houseqr";
    case IntraorthoKind::Tsqr:
      return "tsqr";
    case IntraorthoKind::Mgs:
      return "mgs";
    case IntraorthoKind::CholQR:
      return "cholqr";
    case IntraorthoKind::CholQRPythagorean:
      return "cholqr-pyth";
  }
  return "houseqr";
}

IntraorthoKind intraortho_from_name(std::string_view text) {
  if (text == "houseqr") return IntraorthoKind::HouseQR;
  if (text == "tsqr") return IntraorthoKind::Tsqr;
  if (text == "mgs") return IntraorthoKind::Mgs;
  if (text == "cholqr") return IntraorthoKind::CholQR;
  if (text == "cholqr-pyth") return IntraorthoKind::CholQRPythagorean;
  throw std::invalid_argument("unknown intraorthogonalization: " +
                              std::string(text));
}

QRFactorization house_qr(const Matrix& X, SyncLedger& ledger) {
  QRFactorization f = house_qr_kernel(X);
  ledger.charge(kPhaseIntraortho);
  return f;
}

QRFactorization tsqr(const Matrix& X, Index row_blocks, SyncLedger& ledger) {
  if (X.rows() < X.cols())
    throw DimensionError("tsqr needs at least as many rows as columns");
  if (row_blocks < 1) throw DimensionError("tsqr needs row_blocks >= 1");

  // Every leaf must hold at least cols(X) rows.
  const Index n = std::max<Index>(X.cols(), 1);
  const Index blocks = std::min<Index>(row_blocks, std::max<Index>(X.rows() / n, 1));

  std::vector<Index> offsets(blocks + 1);
  for (Index b = 0; b <= blocks; ++b) offsets[b] = b * X.rows() / blocks;

  TsqrNode root = tsqr_tree(X, offsets, 0, blocks);
  QRFactorization f;
  f.Q = std::move(root.Q);
  f.R = std::move(root.R);
  normalize_signs(f.Q, f.R);
  f.full_rank = diag_full_rank(f.R);
  ledger.charge(kPhaseIntraortho);
  return f;
}

QRFactorization mgs(const Matrix& X, SyncLedger& ledger) {
  if (X.rows() < X.cols())
    throw DimensionError("mgs needs at least as many rows as columns");
  const Index n = X.cols();
  QRFactorization f;
  f.Q = X;
  f.R = Matrix::Zero(n, n);
  for (Index k = 0; k < n; ++k) {
    for (Index j = 0; j < k; ++j) {
      const double coeff = f.Q.col(j).dot(f.Q.col(k));
      f.R(j, k) = coeff;
      f.Q.col(k) -= coeff * f.Q.col(j);
    }
    const double nrm = f.Q.col(k).norm();
    if (nrm == 0.0)
      throw RankDeficient("mgs: column " + std::to_string(k) + " has zero norm");
    f.R(k, k) = nrm;
    f.Q.col(k) /= nrm;
  }
  if (n > 0) ledger.charge(kPhaseIntraortho, n);
  return f;
}

QRFactorization chol_qr(const Matrix& X, SyncLedger& ledger) {
  if (X.rows() < X.cols())
    throw DimensionError("chol_qr needs at least as many rows as columns");
  Matrix gram = X.transpose() * X;
  ledger.charge(kPhaseIntraortho);
  QRFactorization f;
  f.R = cholesky_upper(gram);
  f.Q = tri_solve(f.R, X, Side::Right);
  return f;
}

QRFactorization intraortho(const IntraorthoConfig& io, const Matrix& X,
                           SyncLedger& ledger) {
  switch (io.kind) {
    case IntraorthoKind::HouseQR:
      return house_qr(X, ledger);
    case IntraorthoKind::Tsqr:
      return tsqr(X, io.tsqr_row_blocks, ledger);
    case IntraorthoKind::Mgs:
      return mgs(X, ledger);
    case IntraorthoKind::CholQR:
      return chol_qr(X, ledger);
    case IntraorthoKind::CholQRPythagorean:
      throw std::invalid_argument(
          "cholqr-pyth is only usable fused inside the one-sync loop");
  }
  throw std::invalid_argument("unknown intraorthogonalization kind");
}

PythagoreanStep pythagorean_chol_step(const Matrix& V, const Matrix& T,
                                      const Matrix& S_proj, SyncLedger&) {
  if (T.rows() != T.cols() || T.rows() != V.cols())
    throw DimensionError("pythagorean_chol_step: T must be cols(V) square");
  Matrix arg = T;
  if (S_proj.size() > 0) {
    if (S_proj.cols() != V.cols())
      throw DimensionError("pythagorean_chol_step: S_proj column mismatch");
    arg -= S_proj.transpose() * S_proj;
  }
  PythagoreanStep step;
  step.S_diag = cholesky_upper(arg);
  step.U = tri_solve(step.S_diag, V, Side::Right);
  return step;
}

}  // namespace blockgs
