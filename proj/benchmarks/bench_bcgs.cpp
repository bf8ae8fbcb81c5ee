// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "blockgs/bcgs.hpp"
#include "blockgs/testbed.hpp"

namespace {

using namespace blockgs;

Matrix bench_matrix(Index m, Index p, Index s, double kappa) {
  MatrixClassParams params;
  params.matrix_class = MatrixClass::Default;
  params.rows = m;
  params.blocks = p;
  params.width = s;
  params.kappa_target = kappa;
  params.seed = 1234;
  return gen_default(params);
}

void run_variant_bench(benchmark::State& state, OrthoVariant variant) {
  const Index m = state.range(0);
  const Index p = state.range(1);
  const Index s = state.range(2);
  const Matrix X = bench_matrix(m, p, s, 1e4);
  const BlockPartition part = BlockPartition::uniform(m, p, s);
  const BcgsOptions opts;
  long syncs = 0;
  for (auto _ : state) {
    SyncLedger ledger;
    BcgsReport report = run_variant(variant, X, part, opts, ledger);
    benchmark::DoNotOptimize(report.factorization.R.data());
    syncs = report.ledger.total();
  }
  state.counters["sync_points"] = static_cast<double>(syncs);
  state.counters["cols"] = static_cast<double>(part.cols());
}

void BM_pip_iro(benchmark::State& state) {
  run_variant_bench(state, OrthoVariant::PIP_IRO);
}
void BM_ip_1s(benchmark::State& state) {
  run_variant_bench(state, OrthoVariant::IP_1S);
}
void BM_ip_2s(benchmark::State& state) {
  run_variant_bench(state, OrthoVariant::IP_2S);
}
void BM_adaptive(benchmark::State& state) {
  run_variant_bench(state, OrthoVariant::ADAPTIVE);
}
void BM_bcgs2(benchmark::State& state) {
  run_variant_bench(state, OrthoVariant::BCGS2);
}
void BM_a_1s(benchmark::State& state) {
  run_variant_bench(state, OrthoVariant::A_1S);
}

}  // namespace

BENCHMARK(BM_pip_iro)->Args({512, 16, 4})->Args({2048, 16, 8});
BENCHMARK(BM_ip_1s)->Args({512, 16, 4})->Args({2048, 16, 8});
BENCHMARK(BM_ip_2s)->Args({512, 16, 4})->Args({2048, 16, 8});
BENCHMARK(BM_adaptive)->Args({512, 16, 4})->Args({2048, 16, 8});
BENCHMARK(BM_bcgs2)->Args({512, 16, 4})->Args({2048, 16, 8});
BENCHMARK(BM_a_1s)->Args({512, 16, 4})->Args({2048, 16, 8});

BENCHMARK_MAIN();
