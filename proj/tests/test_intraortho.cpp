// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "blockgs/intraortho.hpp"
#include "blockgs/testbed.hpp"

#include <cmath>

using namespace blockgs;

namespace {

Matrix conditioned(Index m, Index n, double kappa, std::uint64_t seed) {
  MatrixClassParams params;
  params.matrix_class = MatrixClass::Default;
  params.rows = m;
  params.blocks = 1;
  params.width = n;
  params.kappa_target = kappa;
  params.seed = seed;
  return gen_default(params);
}

void check_factorization(const Matrix& X, const QRFactorization& f,
                         double loo_tol) {
  CHECK(loss_of_orthogonality(f.Q) <= loo_tol);
  CHECK(relative_residual(X, f.Q, f.R) <= 100.0 * kUnitRoundoff);
  for (Index i = 0; i < f.R.rows(); ++i) CHECK(f.R(i, i) >= 0.0);
}

}  // namespace

TEST_CASE("alpha1 and sync cost tables") {
  CHECK(alpha1(IntraorthoKind::HouseQR) == 0);
  CHECK(alpha1(IntraorthoKind::Tsqr) == 0);
  CHECK(alpha1(IntraorthoKind::Mgs) == 1);
  CHECK(alpha1(IntraorthoKind::CholQR) == 2);

  CHECK(sync_cost(IntraorthoKind::HouseQR, 7) == 1);
  CHECK(sync_cost(IntraorthoKind::Tsqr, 7) == 1);
  CHECK(sync_cost(IntraorthoKind::CholQR, 7) == 1);
  CHECK(sync_cost(IntraorthoKind::Mgs, 7) == 7);
  CHECK(sync_cost(IntraorthoKind::CholQRPythagorean, 7) == 0);

  CHECK(intraortho_from_name("houseqr") == IntraorthoKind::HouseQR);
  CHECK(name(IntraorthoKind::Mgs) == "mgs");
  CHECK_THROWS_AS(intraortho_from_name("qr"), std::invalid_argument);
}

TEST_CASE("house_qr basics") {
  SyncLedger ledger;
  Matrix eye = Matrix::Identity(4, 4);
  QRFactorization f = house_qr(eye, ledger);
  CHECK(f.Q.isApprox(eye));
  CHECK(f.R.isApprox(eye));
  CHECK(ledger.total() == 1);

  Matrix v(2, 1);
  v << 3, 4;
  f = house_qr(v, ledger);
  CHECK(f.R(0, 0) == doctest::Approx(5.0));
  CHECK(f.Q(0, 0) == doctest::Approx(0.6));
  CHECK(f.Q(1, 0) == doctest::Approx(0.8));
}

TEST_CASE("house_qr is unconditionally stable") {
  SyncLedger ledger;
  Matrix X = conditioned(80, 6, 1e12, 5);
  QRFactorization f = house_qr(X, ledger);
  CHECK(f.full_rank);
  check_factorization(X, f, 100.0 * kUnitRoundoff);
}

TEST_CASE("house_qr flags rank deficiency instead of throwing") {
  SyncLedger ledger;
  Matrix X(6, 3);
  X.setZero();
  X.col(0).setOnes();
  X.col(1).setOnes();  // exact copy of column 0
  X.col(2).setLinSpaced(6, 0.0, 1.0);
  QRFactorization f = house_qr(X, ledger);
  CHECK_FALSE(f.full_rank);
}

TEST_CASE("tsqr with one row block equals house_qr") {
  SyncLedger ledger;
  Matrix X = conditioned(64, 5, 1e4, 6);
  QRFactorization h = house_qr(X, ledger);
  QRFactorization t = tsqr(X, 1, ledger);
  const double tol = 10.0 * kUnitRoundoff * spectral_norm(X);
  CHECK(spectral_norm(t.R - h.R) <= tol);
  CHECK(spectral_norm(t.Q - h.Q) <= tol);
}

TEST_CASE("tsqr of stacked identities") {
  SyncLedger ledger;
  Matrix X(4, 2);
  X << 1, 0, 0, 1, 1, 0, 0, 1;  // [I2; I2]
  QRFactorization f = tsqr(X, 2, ledger);
  CHECK(ledger.total() == 1);
  Matrix expect = std::sqrt(2.0) * Matrix::Identity(2, 2);
  CHECK(spectral_norm(f.R - expect) <= 10.0 * kUnitRoundoff);
}

TEST_CASE("tsqr over a deeper tree") {
  SyncLedger ledger;
  Matrix X = conditioned(128, 4, 1e3, 7);
  QRFactorization f = tsqr(X, 8, ledger);
  CHECK(ledger.total() == 1);
  check_factorization(X, f, 100.0 * kUnitRoundoff);

  // R matches house_qr's R after sign normalization.
  QRFactorization h = house_qr(X, ledger);
  CHECK(spectral_norm(f.R - h.R) <= 100.0 * kUnitRoundoff * spectral_norm(X));
}

TEST_CASE("tsqr clamps leaf size and handles odd splits") {
  SyncLedger ledger;
  Matrix X = conditioned(30, 7, 10, 8);
  QRFactorization f = tsqr(X, 13, ledger);  // clamp: 30/7 = 4 leaves
  check_factorization(X, f, 100.0 * kUnitRoundoff);
}

TEST_CASE("mgs basics and sync cost") {
  SyncLedger ledger;
  Matrix eye = Matrix::Identity(3, 3);
  QRFactorization f = mgs(eye, ledger);
  CHECK(f.Q.isApprox(eye));
  CHECK(f.R.isApprox(eye));
  CHECK(ledger.total() == 3);  // one reduction per column
}

TEST_CASE("mgs loss of orthogonality grows like kappa") {
  SyncLedger ledger;
  Matrix X = conditioned(100, 8, 1e6, 9);
  QRFactorization f = mgs(X, ledger);
  const double kappa = cond2(X);
  CHECK(loss_of_orthogonality(f.Q) <= 1e3 * kUnitRoundoff * kappa);
  CHECK(relative_residual(X, f.Q, f.R) <= 100.0 * kUnitRoundoff);
}

TEST_CASE("mgs survives a tiny but nonzero column") {
  SyncLedger ledger;
  Matrix X(2, 2);
  X << 1, 1, 0, 1e-10;
  QRFactorization f = mgs(X, ledger);
  const double loo = loss_of_orthogonality(f.Q);
  CHECK(std::isfinite(loo));
  CHECK(loo <= 1e3 * kUnitRoundoff * cond2(X));

  Matrix Z = Matrix::Zero(3, 1);
  CHECK_THROWS_AS(mgs(Z, ledger), RankDeficient);
}

TEST_CASE("chol_qr on nearly orthonormal input") {
  SyncLedger ledger;
  Matrix X = conditioned(50, 4, 1.0, 10);  // orthonormal columns by construction
  QRFactorization f = chol_qr(X, ledger);
  CHECK(ledger.total() == 1);
  CHECK(spectral_norm(f.R - Matrix::Identity(4, 4)) <= 1e-12);
  CHECK(spectral_norm(f.Q - X) <= 1e-12);
}

TEST_CASE("chol_qr quadratic loss and breakdown regime") {
  SyncLedger ledger;
  Matrix X = conditioned(100, 6, 1e4, 11);
  QRFactorization f = chol_qr(X, ledger);
  const double kappa = cond2(X);
  CHECK(loss_of_orthogonality(f.Q) <= 100.0 * kUnitRoundoff * kappa * kappa);
  CHECK(relative_residual(X, f.Q, f.R) <= 100.0 * kUnitRoundoff);

  Matrix hard = conditioned(100, 6, 1e9, 13);
  CHECK_THROWS_AS(chol_qr(hard, ledger), NotPositiveDefinite);
}

TEST_CASE("pythagorean step with no projection equals chol_qr, sync free") {
  SyncLedger ledger;
  Matrix X = conditioned(60, 5, 100.0, 13);
  Matrix T = X.transpose() * X;
  Matrix empty_proj(0, 5);
  PythagoreanStep step = pythagorean_chol_step(X, T, empty_proj, ledger);
  CHECK(ledger.total() == 0);  // the sync-free step

  SyncLedger other;
  QRFactorization f = chol_qr(X, other);
  CHECK(spectral_norm(step.S_diag - f.R) <=
        1e-12 * spectral_norm(f.R));
  CHECK(spectral_norm(step.U - f.Q) <= 1e-12);
}

TEST_CASE("pythagorean step on a block already orthogonal to Q") {
  SyncLedger ledger;
  Matrix basis = conditioned(40, 8, 1.0, 14);  // orthonormal 40x8
  Matrix Q = basis.leftCols(4);
  Matrix X = basis.rightCols(4);  // exactly orthogonal to Q
  Matrix T = X.transpose() * X;
  Matrix S_proj = Q.transpose() * X;
  Matrix V = X - Q * S_proj;
  PythagoreanStep step = pythagorean_chol_step(V, T, S_proj, ledger);
  CHECK(spectral_norm(step.S_diag - Matrix::Identity(4, 4)) <= 1e-12);
  CHECK(spectral_norm(step.U - X) <= 1e-10);
}

TEST_CASE("pythagorean step agrees with the unfused oracle") {
  // Oracle: chol_qr of the explicitly projected block, no Pythagorean trick.
  SyncLedger ledger;
  Matrix full = conditioned(80, 10, 20.0, 15);
  SyncLedger tmp;
  Matrix Q = house_qr(full.leftCols(5), tmp).Q;
  Matrix X = full.rightCols(5);

  Matrix T = X.transpose() * X;
  Matrix S_proj = Q.transpose() * X;
  Matrix V = X - Q * S_proj;
  PythagoreanStep step = pythagorean_chol_step(V, T, S_proj, ledger);

  QRFactorization oracle = chol_qr(V, tmp);
  CHECK(spectral_norm(step.U - oracle.Q) <= 1e-10 * spectral_norm(oracle.Q));
  CHECK(spectral_norm(step.S_diag - oracle.R) <=
        1e-10 * spectral_norm(oracle.R));
}

TEST_CASE("pythagorean step reports the kappa^2 regime violation") {
  SyncLedger ledger;
  Matrix X = conditioned(80, 6, 1e10, 16);
  Matrix T = X.transpose() * X;
  Matrix empty_proj(0, 6);
  CHECK_THROWS_AS(pythagorean_chol_step(X, T, empty_proj, ledger),
                  NotPositiveDefinite);
}

TEST_CASE("every routine is backward stable on moderate inputs") {
  for (double kappa : {1.0, 1e2, 1e4, 1e6, 1e8}) {
    Matrix X = conditioned(90, 5, kappa, 17);
    SyncLedger ledger;
    check_factorization(X, house_qr(X, ledger), 100 * kUnitRoundoff);
    check_factorization(X, tsqr(X, 4, ledger), 100 * kUnitRoundoff);
    QRFactorization fm = mgs(X, ledger);
    CHECK(relative_residual(X, fm.Q, fm.R) <= 100.0 * kUnitRoundoff);
    if (kappa <= 1e6) {
      QRFactorization fc = chol_qr(X, ledger);
      CHECK(relative_residual(X, fc.Q, fc.R) <= 100.0 * kUnitRoundoff);
    }
  }
}

TEST_CASE("intraortho dispatch honors the declared sync costs") {
  Matrix X = conditioned(64, 4, 10.0, 18);
  for (IntraorthoKind kind : {IntraorthoKind::HouseQR, IntraorthoKind::Tsqr,
                              IntraorthoKind::Mgs, IntraorthoKind::CholQR}) {
    SyncLedger ledger;
    IntraorthoConfig io{kind, 4};
    intraortho(io, X, ledger);
    CHECK(ledger.total() == sync_cost(kind, X.cols()));
  }
  SyncLedger ledger;
  IntraorthoConfig io{IntraorthoKind::CholQRPythagorean, 4};
  CHECK_THROWS_AS(intraortho(io, X, ledger), std::invalid_argument);
}
