// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCKGS_DENSE_HPP
#define BLOCKGS_DENSE_HPP

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace blockgs {

// All dense data is carried as column-major 64-bit matrices.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Unit roundoff of IEEE binary64.
inline constexpr double kUnitRoundoff = std::numeric_limits<double>::epsilon();

//
// Errors
//

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Thrown by Cholesky-based kernels when a pivot is not strictly positive.
/// Carries the index of the first failing pivot.
class NotPositiveDefinite : public std::runtime_error {
public:
  NotPositiveDefinite(Index pivot, double value)
      : std::runtime_error("cholesky pivot " + std::to_string(pivot) +
                           " is not positive (" + std::to_string(value) + ")"),
        pivot_(pivot) {}
  Index pivot() const noexcept { return pivot_; }

private:
  Index pivot_;
};

class SingularTriangular : public std::runtime_error {
public:
  explicit SingularTriangular(Index index)
      : std::runtime_error("triangular factor has zero diagonal entry " +
                           std::to_string(index)),
        index_(index) {}
  Index index() const noexcept { return index_; }

private:
  Index index_;
};

struct RankDeficient : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ZeroMatrix : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularMatrix : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the 1-based line number of the offence.
class ParseError : public std::runtime_error {
public:
  ParseError(std::string message, long line)
      : std::runtime_error(std::move(message) + " (line " +
                           std::to_string(line) + ")"),
        line_(line) {}
  long line() const noexcept { return line_; }

private:
  long line_;
};

struct BreakdownError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

//
// SyncLedger
//
// Monotone counter of logical global-reduction events.  One increment
// stands for one all-to-all reduction (a fused block inner product or a
// tree QR), independent of how many panels it carries.  The breakdown
// keeps per-phase subtotals so callers can report counts with or without
// setup work.
//
class SyncLedger {
public:
  void charge(std::string_view phase, long count = 1) {
    if (count <= 0) throw std::invalid_argument("ledger charge must be positive");
    total_ += count;
    for (auto& entry : breakdown_) {
      if (entry.first == phase) {
        entry.second += count;
        return;
      }
    }
    breakdown_.emplace_back(std::string(phase), count);
  }

  long total() const noexcept { return total_; }

  long phase_total(std::string_view phase) const noexcept {
    for (const auto& entry : breakdown_)
      if (entry.first == phase) return entry.second;
    return 0;
  }

  const std::vector<std::pair<std::string, long>>& breakdown() const noexcept {
    return breakdown_;
  }

private:
  long total_ = 0;
  std::vector<std::pair<std::string, long>> breakdown_;
};

// Ledger phase labels shared by the library.
inline constexpr std::string_view kPhaseSetup = "setup";
inline constexpr std::string_view kPhaseFused = "fused";
inline constexpr std::string_view kPhaseProjection = "projection";
inline constexpr std::string_view kPhaseIntraortho = "intraortho";

//
// BlockPartition
//
// Describes the block-column layout of an m x n matrix: p block columns of
// width s, except that the first block may be one column wider (the Krylov
// case, where the leading block also holds the seed vector).
//
struct BlockPartition {
  Index rows = 0;        // m
  Index blocks = 0;      // p
  Index width = 0;       // s
  Index lead_width = 0;  // width of the first block, s or s+1

  static BlockPartition uniform(Index m, Index p, Index s) {
    BlockPartition part{m, p, s, s};
    part.validate();
    return part;
  }

  static BlockPartition with_lead(Index m, Index p, Index s, Index lead) {
    BlockPartition part{m, p, s, lead};
    part.validate();
    return part;
  }

  Index cols() const noexcept { return lead_width + (blocks - 1) * width; }

  Index block_width(Index k) const noexcept { return k == 0 ? lead_width : width; }

  /// Column offset of block k, 0-based.
  Index offset(Index k) const noexcept {
    return k == 0 ? 0 : lead_width + (k - 1) * width;
  }

  void validate() const {
    if (rows < 1 || blocks < 1 || width < 1 || lead_width < 1)
      throw DimensionError("block partition dimensions must be positive");
    if (cols() > rows)
      throw DimensionError("block partition has more columns than rows");
  }
};

//
// QRFactorization
//
// Thin QR pair.  All routines in this library normalize signs so that
// diag(R) >= 0; a zero diagonal entry marks rank deficiency, flagged via
// full_rank rather than thrown.
//
struct QRFactorization {
  Matrix Q;
  Matrix R;
  bool full_rank = true;
};

//
// Fused block products
//

using PanelRef = std::reference_wrapper<const Matrix>;
using PanelList = std::vector<PanelRef>;

/// Grid of block inner products [L_i^T R_j], row-major over (i, j).
struct BlockGrid {
  std::vector<Matrix> entries;
  std::size_t grid_rows = 0;
  std::size_t grid_cols = 0;

  Matrix& at(std::size_t i, std::size_t j) { return entries[i * grid_cols + j]; }
  const Matrix& at(std::size_t i, std::size_t j) const {
    return entries[i * grid_cols + j];
  }
};

/// Computes every pairwise product L_i^T R_j of the given panels in one
/// logical reduction: the ledger is charged exactly once no matter how many
/// panels are fused.  Each grid entry equals the standalone product of the
/// same panels, bit for bit.
BlockGrid fused_block_product(const PanelList& left, const PanelList& right,
                              SyncLedger& ledger,
                              std::string_view phase = kPhaseFused);

//
// Factorization kernels
//

/// Upper Cholesky factor of a symmetric positive definite G: returns R with
/// R^T R = (G + G^T)/2 and positive diagonal.  The input is symmetrized
/// first; the Gram arguments arising in the block algorithms are symmetric
/// only to roundoff.  Throws NotPositiveDefinite with the failing pivot.
Matrix cholesky_upper(const Matrix& G);

enum class Side { Left, Right };

/// Triangular solve with an upper-triangular R.  Side::Left solves
/// op(R) X = B, Side::Right solves X op(R) = B, with op either the identity
/// or the transpose.  Never forms an explicit inverse.  Throws
/// SingularTriangular on a zero diagonal entry.
Matrix tri_solve(const Matrix& R, const Matrix& B, Side side,
                 bool transpose = false);

//
// Metrics (all 2-norms via SVD of the small defect matrices)
//

/// Largest singular value.
double spectral_norm(const Matrix& A);

/// || I - Q^T Q ||_2.
double loss_of_orthogonality(const Matrix& Q);

/// || X - Q R ||_2 / || X ||_2.  Throws ZeroMatrix when ||X|| = 0.
double relative_residual(const Matrix& X, const Matrix& Q, const Matrix& R);

/// sigma_max / sigma_min via full SVD; desk scale only.  Throws
/// SingularMatrix when sigma_min <= u * sigma_max * max(m, n).
double cond2(const Matrix& X);

}  // namespace blockgs

#endif  // BLOCKGS_DENSE_HPP
