// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "blockgs/intraortho.hpp"
#include "blockgs/testbed.hpp"

namespace {

using namespace blockgs;

Matrix tall_matrix(Index m, Index n) {
  MatrixClassParams params;
  params.matrix_class = MatrixClass::Default;
  params.rows = m;
  params.blocks = 1;
  params.width = n;
  params.kappa_target = 1e3;
  params.seed = 99;
  return gen_default(params);
}

void BM_house_qr(benchmark::State& state) {
  const Matrix X = tall_matrix(state.range(0), state.range(1));
  for (auto _ : state) {
    SyncLedger ledger;
    QRFactorization f = house_qr(X, ledger);
    benchmark::DoNotOptimize(f.Q.data());
  }
}

void BM_tsqr(benchmark::State& state) {
  const Matrix X = tall_matrix(state.range(0), state.range(1));
  for (auto _ : state) {
    SyncLedger ledger;
    QRFactorization f = tsqr(X, 8, ledger);
    benchmark::DoNotOptimize(f.Q.data());
  }
}

void BM_mgs(benchmark::State& state) {
  const Matrix X = tall_matrix(state.range(0), state.range(1));
  for (auto _ : state) {
    SyncLedger ledger;
    QRFactorization f = mgs(X, ledger);
    benchmark::DoNotOptimize(f.Q.data());
  }
}

void BM_chol_qr(benchmark::State& state) {
  const Matrix X = tall_matrix(state.range(0), state.range(1));
  for (auto _ : state) {
    SyncLedger ledger;
    QRFactorization f = chol_qr(X, ledger);
    benchmark::DoNotOptimize(f.Q.data());
  }
}

// One fused reduction versus four separate products of the same panels.
void BM_fused_product(benchmark::State& state) {
  const Index m = state.range(0);
  const Matrix Q = tall_matrix(m, 16);
  const Matrix U = tall_matrix(m, 4);
  const Matrix X = tall_matrix(m, 4);
  for (auto _ : state) {
    SyncLedger ledger;
    BlockGrid grid = fused_block_product({std::cref(Q), std::cref(U)},
                                         {std::cref(U), std::cref(X)}, ledger);
    benchmark::DoNotOptimize(grid.at(0, 0).data());
  }
}

}  // namespace

BENCHMARK(BM_house_qr)->Args({4096, 8})->Args({16384, 16});
BENCHMARK(BM_tsqr)->Args({4096, 8})->Args({16384, 16});
BENCHMARK(BM_mgs)->Args({4096, 8})->Args({16384, 16});
BENCHMARK(BM_chol_qr)->Args({4096, 8})->Args({16384, 16});
BENCHMARK(BM_fused_product)->Arg(4096)->Arg(65536);

BENCHMARK_MAIN();
