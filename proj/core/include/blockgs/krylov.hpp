// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCKGS_KRYLOV_HPP
#define BLOCKGS_KRYLOV_HPP

#include "blockgs/bcgs.hpp"
#include "blockgs/dense.hpp"
#include "blockgs/intraortho.hpp"

#include <Eigen/SparseCore>

#include <memory>
#include <optional>

namespace blockgs {

//
// s-step Arnoldi with low-synchronization block orthogonalization, and the
// s-step GMRES driver built on it.
//

class LinearOperator {
public:
  virtual ~LinearOperator() = default;
  virtual Index rows() const = 0;
  /// Y = A * X, column by column; linear to roundoff.
  virtual Matrix apply(const Matrix& X) const = 0;
  /// Precomputed Frobenius norm of the stored operator.
  virtual double frobenius_norm() const = 0;
};

class DenseOperator final : public LinearOperator {
public:
  explicit DenseOperator(Matrix A) : A_(std::move(A)), fro_(A_.norm()) {
    if (A_.rows() != A_.cols())
      throw DimensionError("DenseOperator needs a square matrix");
  }
  Index rows() const override { return A_.rows(); }
  Matrix apply(const Matrix& X) const override { return A_ * X; }
  double frobenius_norm() const override { return fro_; }
  const Matrix& matrix() const { return A_; }

private:
  Matrix A_;
  double fro_;
};

class SparseOperator final : public LinearOperator {
public:
  explicit SparseOperator(Eigen::SparseMatrix<double> A)
      : A_(std::move(A)), fro_(A_.norm()) {
    if (A_.rows() != A_.cols())
      throw DimensionError("SparseOperator needs a square matrix");
  }
  Index rows() const override { return A_.rows(); }
  Matrix apply(const Matrix& X) const override { return A_ * X; }
  double frobenius_norm() const override { return fro_; }
  const Eigen::SparseMatrix<double>& matrix() const { return A_; }

private:
  Eigen::SparseMatrix<double> A_;
  double fro_;
};

class IdentityOperator final : public LinearOperator {
public:
  explicit IdentityOperator(Index n) : n_(n) {}
  Index rows() const override { return n_; }
  Matrix apply(const Matrix& X) const override { return X; }
  double frobenius_norm() const override {
    return std::sqrt(static_cast<double>(n_));
  }

private:
  Index n_;
};

//
// Krylov basis generation
//

enum class BasisKind { Monomial, NewtonShifted };
enum class ColumnScaling { None, UnitNorm };

struct BasisPolicy {
  BasisKind kind = BasisKind::Monomial;
  std::vector<double> shifts;  // NewtonShifted: >= s-1 values, or empty to
                               // take Leja-ordered Ritz values after the
                               // first block step
  ColumnScaling scaling = ColumnScaling::UnitNorm;
};

struct GeneratedPanel {
  Matrix B;      // Krylov basis columns
  Matrix Zprec;  // M_R^{-1} B, kept for the solution update
  Matrix X;      // M_L^{-1} A M_R^{-1} B, the block to orthogonalize
};

/// Builds one s-column basis panel from the given seed (the last column of
/// the previous U panel) and applies the preconditioned operator to it.
/// Monomial: b_{j+1} = A b_j; Newton: b_{j+1} = (A - theta_j I) b_j.
/// Throws BreakdownError on an exactly zero column (lucky breakdown).
GeneratedPanel generate_panel(const LinearOperator& A,
                              const LinearOperator* left_prec,
                              const LinearOperator* right_prec,
                              const Vector& seed, Index s,
                              const BasisPolicy& policy);

/// Greedy Leja ordering: first the largest magnitude, then repeatedly the
/// point maximizing the product of distances to those already chosen.
std::vector<double> leja_order(std::vector<double> values);

//
// Givens least-squares machinery
//

/// Incremental QR of the Hessenberg-like matrix H by Givens rotations,
/// carried column by column: stored rotations are applied to each new
/// column, one new rotation zeroes its subdiagonal, and the rotated
/// right-hand side keeps |g_last| as the implied LS residual.
struct GivensLs {
  std::vector<double> cos_v;
  std::vector<double> sin_v;
  Matrix T;  // upper triangular factor, grows by s columns per block step
  Vector g;  // rotated right-hand side beta * G_1^T
  Index cols = 0;

  void initialize(double beta, Index capacity);
  void append_columns(const Matrix& H_cols);
  double ls_residual() const { return std::abs(g(cols)); }
  /// Solve T y = g for the current dimension.
  Vector solve() const;
};

//
// GMRES state and driver
//

struct GmresHistoryRow {
  Index block_step;  // k, 1-based
  Index vectors;     // k * s single-vector iterations
  double backward_error;
  double ls_residual;
  long sync_total;  // ledger total at the time of the row
};

struct GmresOptions {
  Index s = 2;
  OrthoVariant variant = OrthoVariant::IP_2S;
  IntraorthoConfig io_1;  // per-block stable IO (IP_2S/ADAPTIVE/BCGS2)
  double switch_const = kDefaultSwitchConst;
  BasisPolicy basis;
  double tol = 1e-12;
  Index max_block_steps = 0;  // 0: m / s
};

struct GmresState {
  // wiring
  const LinearOperator* A = nullptr;
  const LinearOperator* left_prec = nullptr;   // applies M_L^{-1}
  const LinearOperator* right_prec = nullptr;  // applies M_R^{-1}
  GmresOptions opts;
  Vector b;
  Vector x0;

  // Krylov data
  std::vector<Matrix> basis_panels;  // B
  std::vector<Matrix> prec_panels;   // M_R^{-1} B
  Matrix Q;                          // m x (1 + k s) after k completed steps
  Matrix Rfac;                       // (1 + k s) square
  Index block_steps = 0;    // steps that extended the orthonormal basis
  Index emitted_steps = 0;  // trailing step that produced coefficient-only
                            // R columns during a breakdown (0 or 1)
  double beta = 0.0;

  GivensLs ls;
  std::vector<GmresHistoryRow> history;
  SyncLedger ledger;

  bool halted = false;
  bool converged = false;
  std::string halt_reason;
  std::optional<Index> switch_block;  // 1-based block step of the handoff
  std::vector<double> newton_shifts;

  // carry between steps
  Matrix X_cur;   // preconditioned panel awaiting orthogonalization
  Matrix S_col;   // its projection coefficients (bootstrap or lazy)
  Matrix T_cur;   // X_cur^T X_cur (one-sync variants)
  Matrix B_cur;   // basis columns matching X_cur
  Matrix Zp_cur;  // preconditioned basis columns matching X_cur
  bool switched = false;

  Index steps_total() const { return block_steps + emitted_steps; }
  Index h_cols() const { return steps_total() * opts.s; }
  Index active_cols() const { return 1 + block_steps * opts.s; }
  Matrix q_active() const { return Q.leftCols(active_cols()); }
  /// The Hessenberg-like H is R with its first column dropped.
  Matrix hessenberg() const { return Rfac.block(0, 1, h_cols() + 1, h_cols()); }
};

/// Sets up r, beta, Q_1 and the first basis panel.  The norm of r and the
/// direct projection that bootstraps the lazy chain are charged to the
/// "setup" phase; sync tables quote loop-phase counts only.
GmresState gmres_init(const LinearOperator& A, const Vector& b, const Vector& x0,
                      const GmresOptions& opts,
                      const LinearOperator* left_prec = nullptr,
                      const LinearOperator* right_prec = nullptr);

/// One block step of the s-step Arnoldi process with the configured
/// variant: basis generation is interleaved between the per-block IO and
/// the fused reduction, seeding from the last column of U (which equals
/// Q_{k+1} in exact arithmetic).  On a breakdown the step still emits the
/// projection coefficients as R columns with a zero diagonal block, so a
/// lucky breakdown keeps the solution reachable, and marks the state
/// halted.  Returns true when the step produced R columns, false once
/// nothing more can be done.
bool arnoldi_step(GmresState& state);

/// Sync points in the table convention: everything except first-column
/// setup.
long gmres_sync_points(const GmresState& state);

/// || b - A x || / (||A||_F ||x|| + ||b||) with the operator's stored
/// Frobenius norm.
double gmres_backward_error(const LinearOperator& A, const Vector& b,
                            const Vector& x);

struct GmresResult {
  Vector x;
  double backward_error = 1.0;
  GmresState state;
};

/// Iterates arnoldi_step and the Givens update, evaluating the stopping
/// criterion on the explicitly reconstructed iterate x0 + Z y after every
/// block step; returns the first iterate meeting tol, otherwise the best
/// one seen before halting or exhausting max_block_steps.
GmresResult sstep_gmres(const LinearOperator& A, const Vector& b,
                        const Vector& x0, const GmresOptions& opts,
                        const LinearOperator* left_prec = nullptr,
                        const LinearOperator* right_prec = nullptr);

}  // namespace blockgs

#endif  // BLOCKGS_KRYLOV_HPP
