// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCKGS_TESTBED_HPP
#define BLOCKGS_TESTBED_HPP

#include "blockgs/bcgs.hpp"
#include "blockgs/dense.hpp"

#include <Eigen/SparseCore>

#include <cstdint>
#include <iosfwd>
#include <string>

namespace blockgs {

//
// Test-matrix generators, Matrix Market ingestion and the condition-number
// sweep harness behind the experiment CLI.
//

enum class MatrixClass { Default, Glued, Monomial, Piled };

std::string_view name(MatrixClass cls) noexcept;
MatrixClass matrix_class_from_name(std::string_view text);

struct MatrixClassParams {
  MatrixClass matrix_class = MatrixClass::Default;
  Index rows = 0;    // m
  Index blocks = 0;  // p
  Index width = 0;   // s
  double kappa_target = 1.0;
  std::uint64_t seed = 0;
};

/// X = U diag(sigma) V^T with random orthogonal factors and singular values
/// geometrically spaced from 1 down to 1/kappa_target.
Matrix gen_default(const MatrixClassParams& params);

/// Same SVD recomposition, but the singular values sit on per-block
/// plateaus: conditioning jumps between block groups while columns stay
/// strongly mixed, so trailing block prefixes grow progressively harder.
Matrix gen_glued(const MatrixClassParams& params);

/// Krylov-panel mimic: block k holds [v, Av, ..., A^{s-1}v] for a fixed
/// diagonal operator with spectrum spread over [1, kappa_target] and a
/// fresh random seed vector per block; columns are normalized.  Naturally
/// ill-conditioned; the measured condition number is recorded, not hit.
Matrix gen_monomial(const MatrixClassParams& params);

/// Running pile: block k is the column-normalized sum of all previous
/// random increments plus a shrinking fresh one, so every block is
/// correlated with the pile before it and conditioning grows with k.
Matrix gen_piled(const MatrixClassParams& params);

Matrix generate_matrix(const MatrixClassParams& params);

//
// Matrix Market
//

struct MatrixMarketData {
  Eigen::SparseMatrix<double> matrix;
  double frobenius_norm = 0.0;
  bool symmetric_storage = false;  // input stored one triangle (now expanded)
  Matrix dense() const { return Matrix(matrix); }
};

/// Reads a Matrix Market file (coordinate or array, real or integer,
/// general or symmetric).  Symmetric storage is expanded.  Throws
/// ParseError with the offending line number.
MatrixMarketData read_matrix_market(const std::string& path);

/// Writes X in Matrix Market array format with enough digits to round-trip
/// exactly.
void write_matrix_market_array(const std::string& path, const Matrix& X);

//
// Sweeps
//

struct SweepRow {
  MatrixClass matrix_class;
  double kappa_target = 0.0;
  double kappa_measured = 0.0;
  OrthoVariant variant;
  IntraorthoKind io_a;
  IntraorthoKind io_1;
  double loo = 0.0;
  double rel_residual = 0.0;
  long sync_total = 0;
  std::string status;  // "ok" or "breakdown"
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

/// One factorization per (kappa, variant) grid point with recorded LOO,
/// residual and sync totals.  A breakdown becomes a loo = +inf sentinel
/// row, never a crash.  Deterministic for a fixed seed.
SweepResult kappa_sweep(MatrixClass cls, const std::vector<OrthoVariant>& variants,
                        const std::vector<double>& kappa_grid,
                        const BlockPartition& part, const BcgsOptions& opts,
                        std::uint64_t seed);

/// CSV with the canonical column set:
/// class,kappa_target,kappa_measured,variant,io_a,io_1,loo,rel_residual,sync_total,status
void write_sweep_csv(std::ostream& out, const SweepResult& result);

/// Scientific-notation float formatting shared by all CSV writers.
std::string csv_double(double value);

}  // namespace blockgs

#endif  // BLOCKGS_TESTBED_HPP
