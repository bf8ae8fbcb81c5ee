// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCKGS_BCGS_HPP
#define BLOCKGS_BCGS_HPP

#include "blockgs/dense.hpp"
#include "blockgs/intraortho.hpp"

#include <cmath>
#include <optional>

namespace blockgs {

//
// Block Gram-Schmidt drivers.
//
// Six variants of reorthogonalized block classical Gram-Schmidt, named by
// their synchronization structure:
//
//   PIP_IRO   two reductions per block column, Pythagorean inner products
//   IP_1S     one reduction per block column (lazy projection + fused Gram)
//   IP_2S     two reductions per block column, stable per-block QR
//   ADAPTIVE  IP_1S until the projected block degrades, then IP_2S
//   BCGS2     classic two-pass reorthogonalized BCGS, four reductions
//   A_1S      earlier one-sync scheme without the Pythagorean correction;
//             kept as an instability foil
//

enum class OrthoVariant { PIP_IRO, IP_1S, IP_2S, ADAPTIVE, BCGS2, A_1S };

std::string_view name(OrthoVariant variant) noexcept;
OrthoVariant variant_from_name(std::string_view text);

inline const double kDefaultSwitchConst = std::sqrt(3.0);

struct BcgsOptions {
  IntraorthoConfig io_a;  // first intraorthogonalization
  IntraorthoConfig io_1;  // per-block stable IO (IP_2S, ADAPTIVE, BCGS2 second pass)
  double switch_const = kDefaultSwitchConst;
};

enum class BcgsStatus { Completed, Breakdown };

/// Per-iteration quantities of the block drivers.  Z and P are the delayed
/// pieces: produced by one fused reduction, consumed by the next iteration's
/// lazy projection.  T is the Gram of the block one step ahead, fused into
/// the same reduction by the one-sync loop.
struct BcgsWorkspace {
  Matrix S_cols;  // projection coefficients of the current block
  Matrix Y_cols;  // correction coefficients from the fused reduction
  Matrix Omega;   // U^T U
  Matrix P;       // U^T X_next
  Matrix Z;       // Q^T X_next
  Matrix T;       // X_next^T X_next (one-sync loop only)
  Matrix U;       // projected, intraorthonormalized block
  Matrix Y_diag;  // upper Cholesky factor of Omega - Y_cols^T Y_cols
  Matrix S_diag;  // upper factor from the first intraorthogonalization
};

struct BcgsReport {
  QRFactorization factorization;
  SyncLedger ledger;
  std::optional<Index> switch_block;  // 0-based block where ADAPTIVE handed off
  std::vector<double> per_block_loo;  // LOO of the prefix after each block
  BcgsStatus status = BcgsStatus::Completed;
  Index blocks_completed = 0;
  Index breakdown_block = -1;  // first block not completed
  std::string message;
};

/// Recovers the projection column S_{1:k,k+1} = Q_k^T X_{k+1} without a new
/// reduction, from quantities the previous fused product already produced:
///     [ Z_prev ; Y_diag_prev^{-T} (P_prev - Y_cols_prev^T Z_prev) ].
/// Z_prev may have zero rows (no blocks before the delayed one).
Matrix lazy_s_column(const Matrix& Z_prev, const Matrix& P_prev,
                     const Matrix& Y_cols_prev, const Matrix& Y_diag_prev);

/// Switching test on the s x s Gram block Omega = U^T U: true when
/// const^2 lambda_min(Omega) <= lambda_max(Omega), i.e. the estimated
/// kappa(U) has reached const.  A nonpositive lambda_min always switches.
/// Small symmetric eigenproblem only; costs no synchronization.
bool switch_check(const Matrix& omega, double switch_const);

BcgsReport bcgs_pip_iro(const Matrix& X, const BlockPartition& part,
                        const IntraorthoConfig& io_a, SyncLedger& ledger);

BcgsReport bcgs_ip_1s(const Matrix& X, const BlockPartition& part,
                      const IntraorthoConfig& io_a, SyncLedger& ledger);

BcgsReport bcgs_ip_2s(const Matrix& X, const BlockPartition& part,
                      const IntraorthoConfig& io_a, const IntraorthoConfig& io_1,
                      SyncLedger& ledger);

BcgsReport bcgs_adaptive(const Matrix& X, const BlockPartition& part,
                         const IntraorthoConfig& io_a,
                         const IntraorthoConfig& io_1, double switch_const,
                         SyncLedger& ledger);

BcgsReport bcgs_iro(const Matrix& X, const BlockPartition& part,
                    const IntraorthoConfig& io_1, const IntraorthoConfig& io_2,
                    SyncLedger& ledger);

BcgsReport bcgs_iro_a_1s(const Matrix& X, const BlockPartition& part,
                         const IntraorthoConfig& io_a, SyncLedger& ledger);

/// Dispatch helper for sweeps and the command line.
BcgsReport run_variant(OrthoVariant variant, const Matrix& X,
                       const BlockPartition& part, const BcgsOptions& opts,
                       SyncLedger& ledger);

}  // namespace blockgs

#endif  // BLOCKGS_BCGS_HPP
