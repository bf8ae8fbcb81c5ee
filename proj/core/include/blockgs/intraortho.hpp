// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCKGS_INTRAORTHO_HPP
#define BLOCKGS_INTRAORTHO_HPP

#include "blockgs/dense.hpp"

namespace blockgs {

//
// Intraorthogonalization menu: the QR routines applied to a single m x s
// block inside the block Gram-Schmidt drivers.  Each routine carries a
// declared synchronization cost and a stability exponent alpha1, the power
// of kappa(X) in its loss-of-orthogonality bound O(u) kappa^alpha1(X).
//

enum class IntraorthoKind { HouseQR, Tsqr, Mgs, CholQR, CholQRPythagorean };

/// Stability exponent: HouseQR 0, TSQR 0, MGS 1, CholQR(+Pythagorean) 2.
int alpha1(IntraorthoKind kind) noexcept;

/// Logical reductions charged per call for a block of the given width.
long sync_cost(IntraorthoKind kind, Index block_width) noexcept;

std::string_view name(IntraorthoKind kind) noexcept;
IntraorthoKind intraortho_from_name(std::string_view text);

struct IntraorthoConfig {
  IntraorthoKind kind = IntraorthoKind::HouseQR;
  Index tsqr_row_blocks = 8;
};

/// Householder thin QR with diag(R) >= 0.  Charged one synchronization: the
/// drivers use it as a stand-in for a one-reduction tree QR, so the sync
/// tables stay comparable.  Rank-deficient input is reported through the
/// full_rank flag, not thrown.
QRFactorization house_qr(const Matrix& X, SyncLedger& ledger);

/// Tall-skinny QR over a balanced binary tree of contiguous row panels with
/// Householder leaves; Q is assembled explicitly.  One synchronization for
/// the whole tree.
QRFactorization tsqr(const Matrix& X, Index row_blocks, SyncLedger& ledger);

/// Column-by-column modified Gram-Schmidt; one reduction per column.
/// Throws RankDeficient on an exactly zero column norm.
QRFactorization mgs(const Matrix& X, SyncLedger& ledger);

/// Cholesky QR: R = chol(X^T X), Q = X R^{-1}; one synchronization.
/// Propagates NotPositiveDefinite once O(u) kappa^2(X) is too large.
QRFactorization chol_qr(const Matrix& X, SyncLedger& ledger);

/// Dispatch through the configured kind.  CholQRPythagorean is not callable
/// here: it only exists fused inside the one-sync driver loop.
QRFactorization intraortho(const IntraorthoConfig& io, const Matrix& X,
                           SyncLedger& ledger);

struct PythagoreanStep {
  Matrix U;
  Matrix S_diag;
};

/// The synchronization-free half of the one-sync loop: given the projected
/// block V = X - Q S_proj, the precomputed Gram T = X^T X and the projection
/// coefficients S_proj, forms
///     S_diag = chol(T - S_proj^T S_proj),   U = V S_diag^{-1}.
/// Charges nothing; both inner products were produced by an earlier fused
/// reduction.  NotPositiveDefinite here is the kappa^2-regime failure mode.
PythagoreanStep pythagorean_chol_step(const Matrix& V, const Matrix& T,
                                      const Matrix& S_proj, SyncLedger& ledger);

}  // namespace blockgs

#endif  // BLOCKGS_INTRAORTHO_HPP
