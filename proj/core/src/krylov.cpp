// SPDX-License-Identifier: Apache-2.0

#include "blockgs/krylov.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace blockgs {

namespace {

Matrix scale_column(Vector col, ColumnScaling scaling) {
  if (col.norm() == 0.0)
    throw BreakdownError("basis generation produced a zero column");
  if (scaling == ColumnScaling::UnitNorm) col /= col.norm();
  return col;
}

}  // namespace

GeneratedPanel generate_panel(const LinearOperator& A,
                              const LinearOperator* left_prec,
                              const LinearOperator* right_prec,
                              const Vector& seed, Index s,
                              const BasisPolicy& policy) {
  if (s < 1) throw DimensionError("generate_panel needs s >= 1");
  if (seed.size() != A.rows())
    throw DimensionError("generate_panel: seed length mismatch");
  if (policy.kind == BasisKind::NewtonShifted &&
      static_cast<Index>(policy.shifts.size()) < s - 1)
    throw std::invalid_argument("NewtonShifted needs at least s-1 shifts");

  GeneratedPanel out;
  out.B.resize(A.rows(), s);
  out.B.col(0) = scale_column(seed, policy.scaling);
  for (Index j = 1; j < s; ++j) {
    Vector next = A.apply(out.B.col(j - 1));
    if (policy.kind == BasisKind::NewtonShifted)
      next -= policy.shifts[(j - 1) % policy.shifts.size()] * out.B.col(j - 1);
    out.B.col(j) = scale_column(std::move(next), policy.scaling);
  }
  out.Zprec = right_prec ? right_prec->apply(out.B) : out.B;
  out.X = A.apply(out.Zprec);
  if (left_prec) out.X = left_prec->apply(out.X);
  return out;
}

std::vector<double> leja_order(std::vector<double> values) {
  std::vector<double> out;
  out.reserve(values.size());
  while (!values.empty()) {
    std::size_t pick = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < values.size(); ++i) {
      double score = 0.0;
      if (out.empty()) {
        score = std::abs(values[i]);
      } else {
        for (double chosen : out) {
          const double d = std::abs(values[i] - chosen);
          score += d > 0.0 ? std::log(d) : -1e300;
        }
      }
      if (score > best) {
        best = score;
        pick = i;
      }
    }
    out.push_back(values[pick]);
    values.erase(values.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return out;
}

void GivensLs::initialize(double beta, Index capacity) {
  T = Matrix::Zero(capacity, capacity);
  g = Vector::Zero(capacity + 1);
  g(0) = beta;
  cos_v.clear();
  sin_v.clear();
  cols = 0;
}

void GivensLs::append_columns(const Matrix& H_cols) {
  for (Index t = 0; t < H_cols.cols(); ++t) {
    const Index j = cols;
    if (H_cols.rows() < j + 2)
      throw DimensionError("givens update: column too short for its subdiagonal");
    Vector h = H_cols.col(t).head(j + 2);
    for (Index i = 0; i < j; ++i) {
      const double hi = h(i);
      const double hnext = h(i + 1);
      h(i) = cos_v[i] * hi + sin_v[i] * hnext;
      h(i + 1) = -sin_v[i] * hi + cos_v[i] * hnext;
    }
    const double a = h(j);
    const double b = h(j + 1);
    const double r = std::hypot(a, b);
    const double c = r == 0.0 ? 1.0 : a / r;
    const double s = r == 0.0 ? 0.0 : b / r;
    cos_v.push_back(c);
    sin_v.push_back(s);
    h(j) = r;
    T.block(0, j, j + 1, 1) = h.head(j + 1);
    const double g0 = g(j);
    const double g1 = g(j + 1);
    g(j) = c * g0 + s * g1;
    g(j + 1) = -s * g0 + c * g1;
    ++cols;
  }
}

Vector GivensLs::solve() const {
  // A zero pivot marks a column that added nothing (a dead panel after a
  // breakdown): solve on the leading nonsingular prefix, zero beyond it.
  Index r = cols;
  for (Index i = 0; i < cols; ++i) {
    if (T(i, i) == 0.0) {
      r = i;
      break;
    }
  }
  Vector y = Vector::Zero(cols);
  if (r > 0) {
    Matrix rhs = g.head(r);
    y.head(r) = tri_solve(T.topLeftCorner(r, r), rhs, Side::Left);
  }
  return y;
}

double gmres_backward_error(const LinearOperator& A, const Vector& b,
                            const Vector& x) {
  const Vector r = b - A.apply(x).col(0);
  const double denom = A.frobenius_norm() * x.norm() + b.norm();
  if (denom == 0.0) return 0.0;
  return r.norm() / denom;
}

long gmres_sync_points(const GmresState& state) {
  return state.ledger.total() - state.ledger.phase_total(kPhaseSetup);
}

namespace {

BasisPolicy effective_policy(const GmresState& st) {
  BasisPolicy policy = st.opts.basis;
  if (policy.kind == BasisKind::NewtonShifted && policy.shifts.empty()) {
    if (!st.newton_shifts.empty())
      policy.shifts = st.newton_shifts;
    else
      policy.kind = BasisKind::Monomial;  // before Ritz data exists
  }
  return policy;
}

// Writes the projection coefficients of a failed panel as R columns with a
// zero diagonal block: no new orthonormal columns, but the least-squares
// update can still consume whatever the panel explained.  This is what
// makes a lucky breakdown (solution inside the current panel) recoverable.
void emit_partial_columns(GmresState& st, const Matrix& upper,
                          std::string reason) {
  const Index prev = st.active_cols();
  const Index s = st.opts.s;
  if (upper.size() > 0) st.Rfac.block(0, prev, upper.rows(), s) = upper;
  st.emitted_steps += 1;
  st.halted = true;
  st.halt_reason = std::move(reason);
}

void commit_panel(GmresState& st, const Matrix& Q_panel, const Matrix& upper,
                  const Matrix& diag) {
  const Index prev = st.active_cols();
  const Index s = st.opts.s;
  st.Q.middleCols(prev, s) = Q_panel;
  st.Rfac.block(0, prev, prev, s) = upper;
  st.Rfac.block(prev, prev, s, s) = diag;
  st.block_steps += 1;
}

// One-sync step (IP_1S, and ADAPTIVE while the switch has not fired).
void step_one_sync(GmresState& st) {
  const Index s = st.opts.s;
  const Matrix Qa = st.q_active();
  const bool adaptive = st.opts.variant == OrthoVariant::ADAPTIVE;
  const Index this_step = st.steps_total() + 1;

  const Matrix V = st.X_cur - Qa * st.S_col;
  Matrix U, S_diag;
  try {
    PythagoreanStep ps = pythagorean_chol_step(V, st.T_cur, st.S_col, st.ledger);
    U = std::move(ps.U);
    S_diag = std::move(ps.S_diag);
  } catch (const NotPositiveDefinite& e) {
    if (!adaptive) {
      emit_partial_columns(st, st.S_col, e.what());
      return;
    }
    st.switched = true;
    st.switch_block = this_step;
    QRFactorization io = intraortho(st.opts.io_1, V, st.ledger);
    if (!io.full_rank) {
      emit_partial_columns(st, st.S_col, "rank-deficient panel at handoff");
      return;
    }
    U = std::move(io.Q);
    S_diag = std::move(io.R);
  }

  // Generate the next panel from the last column of U before the fused
  // reduction; Q_{k+1} is not formed yet at this point.
  GeneratedPanel next;
  bool have_next = true;
  try {
    next = generate_panel(*st.A, st.left_prec, st.right_prec, U.col(s - 1), s,
                          effective_policy(st));
  } catch (const BreakdownError&) {
    have_next = false;
  }

  BlockGrid fg;
  auto fuse = [&](bool with_T) {
    if (have_next) {
      if (with_T)
        return fused_block_product({std::cref(Qa), std::cref(U), std::cref(next.X)},
                                   {std::cref(U), std::cref(next.X)}, st.ledger);
      return fused_block_product({std::cref(Qa), std::cref(U)},
                                 {std::cref(U), std::cref(next.X)}, st.ledger);
    }
    return fused_block_product({std::cref(Qa), std::cref(U)}, {std::cref(U)},
                               st.ledger);
  };
  fg = fuse(!st.switched);

  if (adaptive && !st.switched &&
      switch_check(fg.at(1, 0), st.opts.switch_const)) {
    // Handoff: redo this panel with the stable IO and refresh both the
    // generated basis (it was seeded from the discarded U) and the fused
    // quantities.
    st.switched = true;
    st.switch_block = this_step;
    QRFactorization io = intraortho(st.opts.io_1, V, st.ledger);
    if (!io.full_rank) {
      emit_partial_columns(st, st.S_col, "rank-deficient panel at handoff");
      return;
    }
    U = std::move(io.Q);
    S_diag = std::move(io.R);
    have_next = true;
    try {
      next = generate_panel(*st.A, st.left_prec, st.right_prec, U.col(s - 1), s,
                            effective_policy(st));
    } catch (const BreakdownError&) {
      have_next = false;
    }
    fg = fuse(false);
  }

  const Matrix& Y_cols = fg.at(0, 0);
  const Matrix& omega = fg.at(1, 0);
  Matrix Y_diag;
  try {
    Y_diag = cholesky_upper(omega - Y_cols.transpose() * Y_cols);
  } catch (const NotPositiveDefinite& e) {
    emit_partial_columns(st, st.S_col + Y_cols * S_diag, e.what());
    return;
  }
  Matrix Q_panel = tri_solve(Y_diag, U - Qa * Y_cols, Side::Right);
  commit_panel(st, Q_panel, st.S_col + Y_cols * S_diag, Y_diag * S_diag);

  if (!have_next) {
    st.halted = true;
    st.halt_reason = "lucky breakdown in basis generation";
    return;
  }
  st.S_col = lazy_s_column(fg.at(0, 1), fg.at(1, 1), Y_cols, Y_diag);
  if (!st.switched) st.T_cur = fg.at(2, 1);
  st.B_cur = std::move(next.B);
  st.Zp_cur = std::move(next.Zprec);
  st.X_cur = std::move(next.X);
}

// Two-sync step (IP_2S, and ADAPTIVE after the handoff).
void step_two_sync(GmresState& st) {
  const Index s = st.opts.s;
  const Matrix Qa = st.q_active();

  const Matrix V = st.X_cur - Qa * st.S_col;
  QRFactorization io = intraortho(st.opts.io_1, V, st.ledger);
  if (!io.full_rank) {
    emit_partial_columns(st, st.S_col, "rank-deficient panel");
    return;
  }
  Matrix U = std::move(io.Q);
  Matrix S_diag = std::move(io.R);

  GeneratedPanel next;
  bool have_next = true;
  try {
    next = generate_panel(*st.A, st.left_prec, st.right_prec, U.col(s - 1), s,
                          effective_policy(st));
  } catch (const BreakdownError&) {
    have_next = false;
  }

  BlockGrid fg =
      have_next
          ? fused_block_product({std::cref(Qa), std::cref(U)},
                                {std::cref(U), std::cref(next.X)}, st.ledger)
          : fused_block_product({std::cref(Qa), std::cref(U)}, {std::cref(U)},
                                st.ledger);

  const Matrix& Y_cols = fg.at(0, 0);
  const Matrix& omega = fg.at(1, 0);
  Matrix Y_diag;
  try {
    Y_diag = cholesky_upper(omega - Y_cols.transpose() * Y_cols);
  } catch (const NotPositiveDefinite& e) {
    emit_partial_columns(st, st.S_col + Y_cols * S_diag, e.what());
    return;
  }
  Matrix Q_panel = tri_solve(Y_diag, U - Qa * Y_cols, Side::Right);
  commit_panel(st, Q_panel, st.S_col + Y_cols * S_diag, Y_diag * S_diag);

  if (!have_next) {
    st.halted = true;
    st.halt_reason = "lucky breakdown in basis generation";
    return;
  }
  st.S_col = lazy_s_column(fg.at(0, 1), fg.at(1, 1), Y_cols, Y_diag);
  st.B_cur = std::move(next.B);
  st.Zp_cur = std::move(next.Zprec);
  st.X_cur = std::move(next.X);
}

// Four-sync classic reorthogonalized step (BCGS2).
void step_bcgs2(GmresState& st) {
  const Index s = st.opts.s;
  const Matrix Qa = st.q_active();

  BlockGrid g1 = fused_block_product({std::cref(Qa)}, {std::cref(st.X_cur)},
                                     st.ledger, kPhaseProjection);
  const Matrix S_col = g1.at(0, 0);
  QRFactorization pass1 = intraortho(st.opts.io_1, st.X_cur - Qa * S_col,
                                     st.ledger);
  if (!pass1.full_rank) {
    emit_partial_columns(st, S_col, "rank-deficient panel");
    return;
  }

  GeneratedPanel next;
  bool have_next = true;
  try {
    next = generate_panel(*st.A, st.left_prec, st.right_prec,
                          pass1.Q.col(s - 1), s, effective_policy(st));
  } catch (const BreakdownError&) {
    have_next = false;
  }

  BlockGrid g2 = fused_block_product({std::cref(Qa)}, {std::cref(pass1.Q)},
                                     st.ledger, kPhaseProjection);
  const Matrix& Y_cols = g2.at(0, 0);
  QRFactorization pass2 = intraortho(st.opts.io_1, pass1.Q - Qa * Y_cols,
                                     st.ledger);
  if (!pass2.full_rank) {
    emit_partial_columns(st, S_col + Y_cols * pass1.R, "rank-deficient panel");
    return;
  }
  commit_panel(st, pass2.Q, S_col + Y_cols * pass1.R, pass2.R * pass1.R);

  if (!have_next) {
    st.halted = true;
    st.halt_reason = "lucky breakdown in basis generation";
    return;
  }
  st.B_cur = std::move(next.B);
  st.Zp_cur = std::move(next.Zprec);
  st.X_cur = std::move(next.X);
}

}  // namespace

GmresState gmres_init(const LinearOperator& A, const Vector& b, const Vector& x0,
                      const GmresOptions& opts, const LinearOperator* left_prec,
                      const LinearOperator* right_prec) {
  const Index m = A.rows();
  if (b.size() != m || x0.size() != m)
    throw DimensionError("gmres: right-hand side or initial guess size mismatch");
  if (opts.s < 1) throw DimensionError("gmres needs s >= 1");
  if (opts.variant == OrthoVariant::PIP_IRO || opts.variant == OrthoVariant::A_1S)
    throw std::invalid_argument(
        "s-step GMRES supports ip_1s, ip_2s, adaptive and bcgs2");
  if ((opts.variant == OrthoVariant::IP_2S ||
       opts.variant == OrthoVariant::ADAPTIVE) &&
      alpha1(opts.io_1.kind) > 1)
    throw std::invalid_argument("io_1 must have alpha1 <= 1");

  GmresState st;
  st.A = &A;
  st.left_prec = left_prec;
  st.right_prec = right_prec;
  st.opts = opts;
  if (st.opts.max_block_steps <= 0)
    st.opts.max_block_steps = std::max<Index>((m - 1) / opts.s, 1);
  st.b = b;
  st.x0 = x0;

  Vector r = b - A.apply(x0).col(0);
  if (left_prec) r = left_prec->apply(r).col(0);
  st.beta = r.norm();
  st.ledger.charge(kPhaseSetup);  // norm of the initial residual

  const Index capacity = 1 + st.opts.max_block_steps * opts.s;
  st.Q = Matrix::Zero(m, capacity);
  st.Rfac = Matrix::Zero(capacity, capacity);
  st.ls.initialize(st.beta, capacity);

  if (st.beta == 0.0) {
    st.converged = true;
    st.halted = true;
    st.halt_reason = "initial guess is exact";
    return st;
  }

  st.Q.col(0) = r / st.beta;
  st.Rfac(0, 0) = st.beta;

  GeneratedPanel first = generate_panel(A, left_prec, right_prec, st.Q.col(0),
                                        opts.s, effective_policy(st));
  st.B_cur = std::move(first.B);
  st.Zp_cur = std::move(first.Zprec);
  st.X_cur = std::move(first.X);

  // Bootstrap the projection chain for the lazy variants.  These direct
  // products exist only because the first column is special, so they are
  // booked as setup, like the norm above.
  const Matrix Q1 = st.Q.leftCols(1);
  if (opts.variant == OrthoVariant::IP_1S ||
      opts.variant == OrthoVariant::ADAPTIVE) {
    BlockGrid g = fused_block_product({std::cref(Q1), std::cref(st.X_cur)},
                                      {std::cref(st.X_cur)}, st.ledger,
                                      kPhaseSetup);
    st.S_col = g.at(0, 0);
    st.T_cur = g.at(1, 0);
  } else if (opts.variant == OrthoVariant::IP_2S) {
    BlockGrid g = fused_block_product({std::cref(Q1)}, {std::cref(st.X_cur)},
                                      st.ledger, kPhaseSetup);
    st.S_col = g.at(0, 0);
  }
  return st;
}

bool arnoldi_step(GmresState& st) {
  if (st.halted || st.converged) return false;
  if (st.steps_total() >= st.opts.max_block_steps) {
    st.halted = true;
    st.halt_reason = "max block steps reached";
    return false;
  }

  st.basis_panels.push_back(st.B_cur);
  st.prec_panels.push_back(st.Zp_cur);

  switch (st.opts.variant) {
    case OrthoVariant::IP_1S:
      step_one_sync(st);
      break;
    case OrthoVariant::ADAPTIVE:
      if (st.switched)
        step_two_sync(st);
      else
        step_one_sync(st);
      break;
    case OrthoVariant::IP_2S:
      step_two_sync(st);
      break;
    case OrthoVariant::BCGS2:
      step_bcgs2(st);
      break;
    default:
      throw std::invalid_argument("unsupported variant in arnoldi_step");
  }
  return true;
}

GmresResult sstep_gmres(const LinearOperator& A, const Vector& b,
                        const Vector& x0, const GmresOptions& opts,
                        const LinearOperator* left_prec,
                        const LinearOperator* right_prec) {
  GmresState st = gmres_init(A, b, x0, opts, left_prec, right_prec);
  GmresResult result;
  result.x = x0;
  result.backward_error = gmres_backward_error(A, b, x0);
  if (st.converged) {
    result.state = std::move(st);
    return result;
  }

  const Index s = st.opts.s;
  while (true) {
    const Index prev_h = st.ls.cols;
    if (!arnoldi_step(st)) break;

    const Index new_h = st.h_cols() - prev_h;
    const Matrix H_new = st.Rfac.block(0, prev_h + 1, prev_h + new_h + 1, new_h);
    st.ls.append_columns(H_new);

    if (st.opts.basis.kind == BasisKind::NewtonShifted &&
        st.opts.basis.shifts.empty() && st.newton_shifts.empty() &&
        st.block_steps >= 1) {
      // Ritz values of the first square Hessenberg block, Leja ordered.
      Matrix H_sq = st.Rfac.block(0, 1, s, s);
      Eigen::EigenSolver<Matrix> es(H_sq);
      std::vector<double> ritz(static_cast<std::size_t>(s));
      for (Index i = 0; i < s; ++i) ritz[static_cast<std::size_t>(i)] =
          es.eigenvalues()(i).real();
      st.newton_shifts = leja_order(std::move(ritz));
    }

    double candidate_error = result.backward_error;
    Vector candidate = result.x;
    try {
      const Vector y = st.ls.solve();
      Vector x = st.x0;
      for (std::size_t i = 0; i < st.prec_panels.size(); ++i)
        x += st.prec_panels[i] * y.segment(static_cast<Index>(i) * s, s);
      candidate = std::move(x);
      candidate_error = gmres_backward_error(A, b, candidate);
    } catch (const SingularTriangular&) {
      // dead least-squares system; keep the best iterate seen so far
    }

    st.history.push_back({st.steps_total(), st.h_cols(), candidate_error,
                          st.ls.ls_residual(), st.ledger.total()});
    if (candidate_error < result.backward_error) {
      result.x = candidate;
      result.backward_error = candidate_error;
    }
    if (candidate_error <= st.opts.tol) {
      st.converged = true;
      break;
    }
    if (st.halted) break;
  }
  result.state = std::move(st);
  return result;
}

}  // namespace blockgs
