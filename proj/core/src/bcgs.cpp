// SPDX-License-Identifier: Apache-2.0

#include "blockgs/bcgs.hpp"

#include <Eigen/Eigenvalues>

#include <utility>

namespace blockgs {

namespace {

// Shared progress bookkeeping for the block drivers.  Q and R are filled
// block column by block column, so a breakdown can still hand back the
// completed prefix.
struct DriverState {
  const Matrix& X;
  const BlockPartition& part;
  SyncLedger& ledger;
  Matrix Q;
  Matrix R;
  Index done_cols = 0;
  Index done_blocks = 0;
  std::vector<double> per_block_loo;

  DriverState(const Matrix& x, const BlockPartition& p, SyncLedger& l)
      : X(x), part(p), ledger(l) {
    part.validate();
    if (X.rows() != part.rows || X.cols() != part.cols())
      throw DimensionError("matrix does not match the block partition");
    Q = Matrix::Zero(part.rows, part.cols());
    R = Matrix::Zero(part.cols(), part.cols());
  }

  Matrix block(Index k) const {
    return X.middleCols(part.offset(k), part.block_width(k));
  }

  Matrix q_done() const { return Q.leftCols(done_cols); }

  void commit(const Matrix& Qk, const Matrix& R_upper, const Matrix& R_diag) {
    const Index w = Qk.cols();
    Q.middleCols(done_cols, w) = Qk;
    if (R_upper.size() > 0) R.block(0, done_cols, done_cols, w) = R_upper;
    R.block(done_cols, done_cols, w, w) = R_diag;
    done_cols += w;
    ++done_blocks;
    per_block_loo.push_back(loss_of_orthogonality(Q.leftCols(done_cols)));
  }
};

QRFactorization io_checked(const IntraorthoConfig& io, const Matrix& B,
                           SyncLedger& ledger) {
  QRFactorization f = intraortho(io, B, ledger);
  if (!f.full_rank)
    throw RankDeficient("intraorthogonalization produced a rank-deficient factor");
  return f;
}

template <typename Body>
BcgsReport run_driver(const Matrix& X, const BlockPartition& part,
                      SyncLedger& ledger, Body&& body) {
  DriverState st(X, part, ledger);
  BcgsReport report;
  try {
    body(st, report);
  } catch (const NotPositiveDefinite& e) {
    report.status = BcgsStatus::Breakdown;
    report.message = e.what();
  } catch (const RankDeficient& e) {
    report.status = BcgsStatus::Breakdown;
    report.message = e.what();
  } catch (const SingularTriangular& e) {
    report.status = BcgsStatus::Breakdown;
    report.message = e.what();
  }
  report.factorization.Q = st.Q.leftCols(st.done_cols);
  report.factorization.R = st.R.topLeftCorner(st.done_cols, st.done_cols);
  report.blocks_completed = st.done_blocks;
  if (report.status == BcgsStatus::Breakdown)
    report.breakdown_block = st.done_blocks;
  report.per_block_loo = st.per_block_loo;
  report.ledger = ledger;
  return report;
}

}  // namespace

std::string_view name(OrthoVariant variant) noexcept {
  switch (variant) {
    case OrthoVariant::PIP_IRO:
      return "pip_iro";
    case OrthoVariant::IP_1S:
      return "ip_1s";
    case OrthoVariant::IP_2S:
      return "ip_2s";
    case OrthoVariant::ADAPTIVE:
      return "adaptive";
    case OrthoVariant::BCGS2:
      return "bcgs2";
    case OrthoVariant::A_1S:
      return "a_1s";
  }
  return "pip_iro";
}

OrthoVariant variant_from_name(std::string_view text) {
  if (text == "pip_iro") return OrthoVariant::PIP_IRO;
  if (text == "ip_1s") return OrthoVariant::IP_1S;
  if (text == "ip_2s") return OrthoVariant::IP_2S;
  if (text == "adaptive") return OrthoVariant::ADAPTIVE;
  if (text == "bcgs2") return OrthoVariant::BCGS2;
  if (text == "a_1s") return OrthoVariant::A_1S;
  throw std::invalid_argument("unknown variant: " + std::string(text));
}

Matrix lazy_s_column(const Matrix& Z_prev, const Matrix& P_prev,
                     const Matrix& Y_cols_prev, const Matrix& Y_diag_prev) {
  if (Z_prev.rows() > 0 && Z_prev.cols() != P_prev.cols())
    throw DimensionError("lazy_s_column: Z and P column mismatch");
  Matrix correction = P_prev;
  if (Z_prev.rows() > 0) {
    if (Y_cols_prev.rows() != Z_prev.rows())
      throw DimensionError("lazy_s_column: Y_cols and Z row mismatch");
    correction -= Y_cols_prev.transpose() * Z_prev;
  }
  Matrix bottom = tri_solve(Y_diag_prev, correction, Side::Left, true);
  Matrix out(Z_prev.rows() + bottom.rows(), bottom.cols());
  if (Z_prev.rows() > 0) out.topRows(Z_prev.rows()) = Z_prev;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

bool switch_check(const Matrix& omega, double switch_const) {
  if (omega.rows() != omega.cols())
    throw DimensionError("switch_check needs a square Gram block");
  Matrix sym = 0.5 * (omega + omega.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  const auto& lambda = es.eigenvalues();
  const double lmin = lambda(0);
  const double lmax = lambda(lambda.size() - 1);
  if (!(lmin > 0.0)) return true;  // U numerically rank-deficient
  return switch_const * switch_const * lmin <= lmax;
}

BcgsReport bcgs_pip_iro(const Matrix& X, const BlockPartition& part,
                        const IntraorthoConfig& io_a, SyncLedger& ledger) {
  return run_driver(X, part, ledger, [&](DriverState& st, BcgsReport&) {
    QRFactorization first = io_checked(io_a, st.block(0), st.ledger);
    st.commit(first.Q, Matrix(), first.R);
    for (Index k = 1; k < st.part.blocks; ++k) {
      const Matrix Xk = st.block(k);
      const Matrix Qd = st.q_done();
      BlockGrid g1 = fused_block_product({std::cref(Qd), std::cref(Xk)},
                                         {std::cref(Xk)}, st.ledger);
      const Matrix& S_col = g1.at(0, 0);
      const Matrix& T = g1.at(1, 0);
      const Matrix V = Xk - Qd * S_col;
      PythagoreanStep ps = pythagorean_chol_step(V, T, S_col, st.ledger);
      BlockGrid g2 = fused_block_product({std::cref(Qd), std::cref(ps.U)},
                                         {std::cref(ps.U)}, st.ledger);
      const Matrix& Y_cols = g2.at(0, 0);
      const Matrix& omega = g2.at(1, 0);
      Matrix Y_diag = cholesky_upper(omega - Y_cols.transpose() * Y_cols);
      Matrix Qk = tri_solve(Y_diag, ps.U - Qd * Y_cols, Side::Right);
      st.commit(Qk, S_col + Y_cols * ps.S_diag, Y_diag * ps.S_diag);
    }
  });
}

BcgsReport bcgs_ip_1s(const Matrix& X, const BlockPartition& part,
                      const IntraorthoConfig& io_a, SyncLedger& ledger) {
  return run_driver(X, part, ledger, [&](DriverState& st, BcgsReport&) {
    QRFactorization first = io_checked(io_a, st.block(0), st.ledger);
    st.commit(first.Q, Matrix(), first.R);
    if (st.part.blocks == 1) return;

    // Bootstrap: the only direct projection of the run.  One fused
    // reduction yields both Q_1^T X_2 and T_2 = X_2^T X_2.
    BcgsWorkspace ws;
    Matrix X_cur = st.block(1);
    {
      const Matrix Qd = st.q_done();
      BlockGrid g = fused_block_product({std::cref(Qd), std::cref(X_cur)},
                                        {std::cref(X_cur)}, st.ledger);
      ws.S_cols = g.at(0, 0);
      ws.T = g.at(1, 0);
      Matrix V = X_cur - Qd * ws.S_cols;
      PythagoreanStep ps = pythagorean_chol_step(V, ws.T, ws.S_cols, st.ledger);
      ws.U = std::move(ps.U);
      ws.S_diag = std::move(ps.S_diag);
    }

    for (Index k = 1; k < st.part.blocks; ++k) {
      const Matrix Qd = st.q_done();
      const bool last = k == st.part.blocks - 1;
      Matrix X_next;
      if (!last) {
        X_next = st.block(k + 1);
        BlockGrid fg = fused_block_product(
            {std::cref(Qd), std::cref(ws.U), std::cref(X_next)},
            {std::cref(ws.U), std::cref(X_next)}, st.ledger);
        ws.Y_cols = fg.at(0, 0);
        ws.Omega = fg.at(1, 0);
        ws.Z = fg.at(0, 1);
        ws.P = fg.at(1, 1);
        ws.T = fg.at(2, 1);
      } else {
        BlockGrid fg = fused_block_product({std::cref(Qd), std::cref(ws.U)},
                                           {std::cref(ws.U)}, st.ledger);
        ws.Y_cols = fg.at(0, 0);
        ws.Omega = fg.at(1, 0);
      }
      ws.Y_diag = cholesky_upper(ws.Omega - ws.Y_cols.transpose() * ws.Y_cols);
      Matrix Qk = tri_solve(ws.Y_diag, ws.U - Qd * ws.Y_cols, Side::Right);
      st.commit(Qk, ws.S_cols + ws.Y_cols * ws.S_diag, ws.Y_diag * ws.S_diag);

      if (!last) {
        ws.S_cols = lazy_s_column(ws.Z, ws.P, ws.Y_cols, ws.Y_diag);
        Matrix V = X_next - st.q_done() * ws.S_cols;
        PythagoreanStep next =
            pythagorean_chol_step(V, ws.T, ws.S_cols, st.ledger);
        ws.U = std::move(next.U);
        ws.S_diag = std::move(next.S_diag);
      }
    }
  });
}

BcgsReport bcgs_ip_2s(const Matrix& X, const BlockPartition& part,
                      const IntraorthoConfig& io_a, const IntraorthoConfig& io_1,
                      SyncLedger& ledger) {
  if (alpha1(io_1.kind) > 1)
    throw std::invalid_argument("bcgs_ip_2s needs io_1 with alpha1 <= 1");
  return run_driver(X, part, ledger, [&](DriverState& st, BcgsReport&) {
    QRFactorization first = io_checked(io_a, st.block(0), st.ledger);
    st.commit(first.Q, Matrix(), first.R);
    if (st.part.blocks == 1) return;

    BcgsWorkspace ws;
    Matrix X_cur = st.block(1);
    {
      const Matrix Qd = st.q_done();
      BlockGrid g = fused_block_product({std::cref(Qd)}, {std::cref(X_cur)},
                                        st.ledger, kPhaseProjection);
      ws.S_cols = g.at(0, 0);
    }
    QRFactorization io =
        io_checked(io_1, X_cur - st.q_done() * ws.S_cols, st.ledger);
    ws.U = std::move(io.Q);
    ws.S_diag = std::move(io.R);

    for (Index k = 1; k < st.part.blocks; ++k) {
      const Matrix Qd = st.q_done();
      const bool last = k == st.part.blocks - 1;
      Matrix X_next;
      if (!last) {
        X_next = st.block(k + 1);
        BlockGrid fg =
            fused_block_product({std::cref(Qd), std::cref(ws.U)},
                                {std::cref(ws.U), std::cref(X_next)}, st.ledger);
        ws.Y_cols = fg.at(0, 0);
        ws.Omega = fg.at(1, 0);
        ws.Z = fg.at(0, 1);
        ws.P = fg.at(1, 1);
      } else {
        BlockGrid fg = fused_block_product({std::cref(Qd), std::cref(ws.U)},
                                           {std::cref(ws.U)}, st.ledger);
        ws.Y_cols = fg.at(0, 0);
        ws.Omega = fg.at(1, 0);
      }
      ws.Y_diag = cholesky_upper(ws.Omega - ws.Y_cols.transpose() * ws.Y_cols);
      Matrix Qk = tri_solve(ws.Y_diag, ws.U - Qd * ws.Y_cols, Side::Right);
      st.commit(Qk, ws.S_cols + ws.Y_cols * ws.S_diag, ws.Y_diag * ws.S_diag);

      if (!last) {
        ws.S_cols = lazy_s_column(ws.Z, ws.P, ws.Y_cols, ws.Y_diag);
        QRFactorization next =
            io_checked(io_1, X_next - st.q_done() * ws.S_cols, st.ledger);
        ws.U = std::move(next.Q);
        ws.S_diag = std::move(next.R);
      }
    }
  });
}

BcgsReport bcgs_adaptive(const Matrix& X, const BlockPartition& part,
                         const IntraorthoConfig& io_a,
                         const IntraorthoConfig& io_1, double switch_const,
                         SyncLedger& ledger) {
  if (alpha1(io_1.kind) > 1)
    throw std::invalid_argument("bcgs_adaptive needs io_1 with alpha1 <= 1");
  return run_driver(X, part, ledger, [&](DriverState& st, BcgsReport& report) {
    QRFactorization first = io_checked(io_a, st.block(0), st.ledger);
    st.commit(first.Q, Matrix(), first.R);
    if (st.part.blocks == 1) return;

    bool switched = false;
    auto mark_switch = [&](Index block) {
      switched = true;
      report.switch_block = block;
    };

    BcgsWorkspace ws;
    Matrix X_cur = st.block(1);
    Matrix V;
    {
      const Matrix Qd = st.q_done();
      BlockGrid g = fused_block_product({std::cref(Qd), std::cref(X_cur)},
                                        {std::cref(X_cur)}, st.ledger);
      ws.S_cols = g.at(0, 0);
      ws.T = g.at(1, 0);
      V = X_cur - Qd * ws.S_cols;
    }
    try {
      PythagoreanStep ps = pythagorean_chol_step(V, ws.T, ws.S_cols, st.ledger);
      ws.U = std::move(ps.U);
      ws.S_diag = std::move(ps.S_diag);
    } catch (const NotPositiveDefinite&) {
      mark_switch(1);
      QRFactorization io = io_checked(io_1, V, st.ledger);
      ws.U = std::move(io.Q);
      ws.S_diag = std::move(io.R);
    }

    for (Index k = 1; k < st.part.blocks; ++k) {
      const Matrix Qd = st.q_done();
      const bool last = k == st.part.blocks - 1;
      Matrix X_next;
      if (!last) X_next = st.block(k + 1);

      auto fuse = [&]() {
        if (last) {
          BlockGrid fg = fused_block_product({std::cref(Qd), std::cref(ws.U)},
                                             {std::cref(ws.U)}, st.ledger);
          ws.Y_cols = fg.at(0, 0);
          ws.Omega = fg.at(1, 0);
        } else if (!switched) {
          BlockGrid fg = fused_block_product(
              {std::cref(Qd), std::cref(ws.U), std::cref(X_next)},
              {std::cref(ws.U), std::cref(X_next)}, st.ledger);
          ws.Y_cols = fg.at(0, 0);
          ws.Omega = fg.at(1, 0);
          ws.Z = fg.at(0, 1);
          ws.P = fg.at(1, 1);
          ws.T = fg.at(2, 1);
        } else {
          BlockGrid fg =
              fused_block_product({std::cref(Qd), std::cref(ws.U)},
                                  {std::cref(ws.U), std::cref(X_next)},
                                  st.ledger);
          ws.Y_cols = fg.at(0, 0);
          ws.Omega = fg.at(1, 0);
          ws.Z = fg.at(0, 1);
          ws.P = fg.at(1, 1);
        }
      };
      fuse();

      if (!switched && switch_check(ws.Omega, switch_const)) {
        // The Pythagorean-normalized block has degraded: redo it with the
        // stable IO (its projected input V is still at hand) and refresh
        // the fused quantities against the replacement.
        mark_switch(k);
        QRFactorization io = io_checked(io_1, V, st.ledger);
        ws.U = std::move(io.Q);
        ws.S_diag = std::move(io.R);
        fuse();
      }

      ws.Y_diag = cholesky_upper(ws.Omega - ws.Y_cols.transpose() * ws.Y_cols);
      Matrix Qk = tri_solve(ws.Y_diag, ws.U - Qd * ws.Y_cols, Side::Right);
      st.commit(Qk, ws.S_cols + ws.Y_cols * ws.S_diag, ws.Y_diag * ws.S_diag);

      if (!last) {
        ws.S_cols = lazy_s_column(ws.Z, ws.P, ws.Y_cols, ws.Y_diag);
        V = X_next - st.q_done() * ws.S_cols;
        if (!switched) {
          try {
            PythagoreanStep ps =
                pythagorean_chol_step(V, ws.T, ws.S_cols, st.ledger);
            ws.U = std::move(ps.U);
            ws.S_diag = std::move(ps.S_diag);
          } catch (const NotPositiveDefinite&) {
            mark_switch(k + 1);
            QRFactorization io = io_checked(io_1, V, st.ledger);
            ws.U = std::move(io.Q);
            ws.S_diag = std::move(io.R);
          }
        } else {
          QRFactorization io = io_checked(io_1, V, st.ledger);
          ws.U = std::move(io.Q);
          ws.S_diag = std::move(io.R);
        }
      }
    }
  });
}

BcgsReport bcgs_iro(const Matrix& X, const BlockPartition& part,
                    const IntraorthoConfig& io_1, const IntraorthoConfig& io_2,
                    SyncLedger& ledger) {
  return run_driver(X, part, ledger, [&](DriverState& st, BcgsReport&) {
    QRFactorization first = io_checked(io_2, st.block(0), st.ledger);
    st.commit(first.Q, Matrix(), first.R);
    for (Index k = 1; k < st.part.blocks; ++k) {
      const Matrix Xk = st.block(k);
      const Matrix Qd = st.q_done();
      BlockGrid g1 = fused_block_product({std::cref(Qd)}, {std::cref(Xk)},
                                         st.ledger, kPhaseProjection);
      const Matrix& S_col = g1.at(0, 0);
      QRFactorization pass1 = io_checked(io_1, Xk - Qd * S_col, st.ledger);
      BlockGrid g2 = fused_block_product({std::cref(Qd)}, {std::cref(pass1.Q)},
                                         st.ledger, kPhaseProjection);
      const Matrix& Y_cols = g2.at(0, 0);
      QRFactorization pass2 = io_checked(io_2, pass1.Q - Qd * Y_cols, st.ledger);
      st.commit(pass2.Q, S_col + Y_cols * pass1.R, pass2.R * pass1.R);
    }
  });
}

BcgsReport bcgs_iro_a_1s(const Matrix& X, const BlockPartition& part,
                         const IntraorthoConfig& io_a, SyncLedger& ledger) {
  return run_driver(X, part, ledger, [&](DriverState& st, BcgsReport&) {
    QRFactorization first = io_checked(io_a, st.block(0), st.ledger);
    st.commit(first.Q, Matrix(), first.R);
    if (st.part.blocks == 1) return;

    // Block 2 enters the fused product raw; its projection coefficients are
    // recovered from the same reduction that normalizes it.  Every later
    // block gets one projection pass with lazily recovered coefficients and
    // a delayed correction, but no intraorthogonalization of its own.
    Matrix S_cur = Matrix::Zero(st.part.lead_width, st.part.width);
    Matrix V = st.block(1);
    for (Index k = 1; k < st.part.blocks; ++k) {
      const Matrix Qd = st.q_done();
      const bool last = k == st.part.blocks - 1;
      BlockGrid fg;
      Matrix X_next;
      if (!last) {
        X_next = st.block(k + 1);
        fg = fused_block_product({std::cref(Qd), std::cref(V)},
                                 {std::cref(V), std::cref(X_next)}, st.ledger);
      } else {
        fg = fused_block_product({std::cref(Qd), std::cref(V)}, {std::cref(V)},
                                 st.ledger);
      }
      const Matrix& Y_cols = fg.at(0, 0);
      const Matrix& omega = fg.at(1, 0);
      Matrix Y_diag = cholesky_upper(omega - Y_cols.transpose() * Y_cols);
      Matrix Qk = tri_solve(Y_diag, V - Qd * Y_cols, Side::Right);
      st.commit(Qk, S_cur + Y_cols, Y_diag);

      if (!last) {
        S_cur = lazy_s_column(fg.at(0, 1), fg.at(1, 1), Y_cols, Y_diag);
        V = X_next - st.q_done() * S_cur;
      }
    }
  });
}

BcgsReport run_variant(OrthoVariant variant, const Matrix& X,
                       const BlockPartition& part, const BcgsOptions& opts,
                       SyncLedger& ledger) {
  switch (variant) {
    case OrthoVariant::PIP_IRO:
      return bcgs_pip_iro(X, part, opts.io_a, ledger);
    case OrthoVariant::IP_1S:
      return bcgs_ip_1s(X, part, opts.io_a, ledger);
    case OrthoVariant::IP_2S:
      return bcgs_ip_2s(X, part, opts.io_a, opts.io_1, ledger);
    case OrthoVariant::ADAPTIVE:
      return bcgs_adaptive(X, part, opts.io_a, opts.io_1, opts.switch_const,
                           ledger);
    case OrthoVariant::BCGS2:
      return bcgs_iro(X, part, opts.io_a, opts.io_1, ledger);
    case OrthoVariant::A_1S:
      return bcgs_iro_a_1s(X, part, opts.io_a, ledger);
  }
  throw std::invalid_argument("unknown variant");
}

}  // namespace blockgs
