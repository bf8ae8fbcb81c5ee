// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "blockgs/testbed.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace blockgs;

namespace {

MatrixClassParams make_params(MatrixClass cls, Index m, Index p, Index s,
                              double kappa, std::uint64_t seed) {
  MatrixClassParams params;
  params.matrix_class = cls;
  params.rows = m;
  params.blocks = p;
  params.width = s;
  params.kappa_target = kappa;
  params.seed = seed;
  return params;
}

double safe_cond(const Matrix& X) {
  try {
    return cond2(X);
  } catch (const SingularMatrix&) {
    return std::numeric_limits<double>::infinity();
  }
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("generators are deterministic under a fixed seed") {
  for (MatrixClass cls : {MatrixClass::Default, MatrixClass::Glued,
                          MatrixClass::Monomial, MatrixClass::Piled}) {
    MatrixClassParams params = make_params(cls, 60, 4, 3, 1e4, 42);
    Matrix a = generate_matrix(params);
    Matrix b = generate_matrix(params);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    params.seed = 43;
    Matrix c = generate_matrix(params);
    CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("gen_default hits the target condition number") {
  CHECK(safe_cond(gen_default(make_params(MatrixClass::Default, 50, 2, 4, 1.0,
                                          1))) == doctest::Approx(1.0));
  const double measured = safe_cond(
      gen_default(make_params(MatrixClass::Default, 100, 5, 4, 1e8, 2)));
  CHECK(measured >= 0.9e8);
  CHECK(measured <= 1.1e8);
}

TEST_CASE("gen_glued hits its target within a factor of ten") {
  const double measured = safe_cond(
      gen_glued(make_params(MatrixClass::Glued, 100, 5, 4, 1e6, 3)));
  CHECK(measured >= 1e5);
  CHECK(measured <= 1e7);
  CHECK(safe_cond(gen_glued(make_params(MatrixClass::Glued, 40, 1, 4, 1e6,
                                        4))) == doctest::Approx(1.0));
}

TEST_CASE("generated kappa is monotone in the target for default and glued") {
  for (MatrixClass cls : {MatrixClass::Default, MatrixClass::Glued}) {
    double prev = 0.0;
    for (double kappa : {1e2, 1e4, 1e6, 1e8}) {
      const double measured =
          safe_cond(generate_matrix(make_params(cls, 80, 4, 4, kappa, 5)));
      CHECK(measured > prev);
      prev = measured;
    }
  }
}

TEST_CASE("gen_monomial: width one is benign, conditioning grows with s") {
  const double k1 = safe_cond(
      gen_monomial(make_params(MatrixClass::Monomial, 80, 4, 1, 1e3, 6)));
  CHECK(k1 <= 1e3);  // independent random unit columns
  double prev = 0.0;
  for (Index s : {2, 4, 8}) {
    const double measured = safe_cond(
        gen_monomial(make_params(MatrixClass::Monomial, 120, 4, s, 1e3, 6)));
    CHECK(measured >= prev);
    prev = measured;
  }
}

TEST_CASE("gen_piled: prefix conditioning never decreases") {
  MatrixClassParams params = make_params(MatrixClass::Piled, 90, 6, 3, 1e8, 7);
  Matrix X = gen_piled(params);
  double prev = 0.0;
  for (Index k = 1; k <= 6; ++k) {
    const double measured = safe_cond(X.leftCols(3 * k));
    CHECK(measured >= prev * 0.5);
    prev = measured;
  }
  // p = 1 degenerates to a plain random block
  const double single = safe_cond(
      gen_piled(make_params(MatrixClass::Piled, 90, 1, 3, 1e8, 8)));
  CHECK(single < 1e3);
}

TEST_CASE("matrix market coordinate parsing") {
  auto path = temp_file("blockgs_mm_coord.mtx");
  {
    std::ofstream out(path);
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << "% a comment line\n";
    out << "2 2 2\n";
    out << "1 1 1.0\n";
    out << "2 2 2.0\n";
  }
  MatrixMarketData data = read_matrix_market(path.string());
  Matrix dense = data.dense();
  CHECK(dense(0, 0) == 1.0);
  CHECK(dense(1, 1) == 2.0);
  CHECK(dense(0, 1) == 0.0);
  CHECK(data.frobenius_norm == doctest::Approx(std::sqrt(5.0)));
  CHECK_FALSE(data.symmetric_storage);
}

TEST_CASE("matrix market symmetric storage expands to a symmetric operator") {
  auto path = temp_file("blockgs_mm_sym.mtx");
  {
    std::ofstream out(path);
    out << "%%MatrixMarket matrix coordinate real symmetric\n";
    out << "3 3 4\n";
    out << "1 1 2.0\n";
    out << "2 1 -1.0\n";
    out << "3 2 0.5\n";
    out << "3 3 4.0\n";
  }
  MatrixMarketData data = read_matrix_market(path.string());
  Matrix dense = data.dense();
  CHECK(data.symmetric_storage);
  CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(dense(0, 1) == -1.0);
  CHECK(dense(1, 2) == 0.5);
}

TEST_CASE("matrix market parse errors carry line numbers") {
  auto bad_header = temp_file("blockgs_mm_bad1.mtx");
  {
    std::ofstream out(bad_header);
    out << "%%NotMatrixMarket matrix coordinate real general\n1 1 1\n1 1 1.0\n";
  }
  CHECK_THROWS_AS(read_matrix_market(bad_header.string()), ParseError);

  auto bad_entry = temp_file("blockgs_mm_bad2.mtx");
  {
    std::ofstream out(bad_entry);
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << "2 2 2\n";
    out << "1 1 1.0\n";
    out << "5 1 2.0\n";  // row out of range, line 4
  }
  try {
    read_matrix_market(bad_entry.string());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
  }

  auto truncated = temp_file("blockgs_mm_bad3.mtx");
  {
    std::ofstream out(truncated);
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << "2 2 3\n";
    out << "1 1 1.0\n";
  }
  CHECK_THROWS_AS(read_matrix_market(truncated.string()), ParseError);

  auto complex_field = temp_file("blockgs_mm_bad4.mtx");
  {
    std::ofstream out(complex_field);
    out << "%%MatrixMarket matrix coordinate complex general\n";
    out << "1 1 1\n1 1 1.0 0.0\n";
  }
  CHECK_THROWS_AS(read_matrix_market(complex_field.string()), ParseError);
}

TEST_CASE("matrix market array round-trip is exact") {
  MatrixClassParams params = make_params(MatrixClass::Default, 12, 2, 3, 1e5, 9);
  Matrix X = gen_default(params);
  auto path = temp_file("blockgs_mm_roundtrip.mtx");
  write_matrix_market_array(path.string(), X);
  MatrixMarketData data = read_matrix_market(path.string());
  Matrix back = data.dense();
  REQUIRE(back.rows() == X.rows());
  REQUIRE(back.cols() == X.cols());
  CHECK((back - X).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("matrix market array symmetric packing") {
  auto path = temp_file("blockgs_mm_sym_array.mtx");
  {
    std::ofstream out(path);
    out << "%%MatrixMarket matrix array real symmetric\n";
    out << "2 2\n";
    out << "1.0\n2.0\n3.0\n";  // packed lower triangle: (1,1) (2,1) (2,2)
  }
  MatrixMarketData data = read_matrix_market(path.string());
  Matrix dense = data.dense();
  CHECK(dense(0, 0) == 1.0);
  CHECK(dense(1, 0) == 2.0);
  CHECK(dense(0, 1) == 2.0);
  CHECK(dense(1, 1) == 3.0);
}

TEST_CASE("fs_760_1 condition number when the file is available") {
  const std::filesystem::path path =
      std::filesystem::path(BLOCKGS_DATA_DIR) / "fs_760_1.mtx";
  if (!std::filesystem::exists(path)) {
    MESSAGE("fs_760_1.mtx not present; skipping");
    return;
  }
  MatrixMarketData data = read_matrix_market(path.string());
  CHECK(data.matrix.rows() == 760);
  const double kappa = cond2(data.dense());
  CHECK(kappa == doctest::Approx(5.49e3).epsilon(0.01));
}

TEST_CASE("kappa sweep records regimes and never crashes") {
  BlockPartition part = BlockPartition::uniform(120, 6, 4);
  BcgsOptions opts;
  std::vector<OrthoVariant> variants{OrthoVariant::PIP_IRO, OrthoVariant::IP_1S,
                                     OrthoVariant::IP_2S, OrthoVariant::ADAPTIVE,
                                     OrthoVariant::BCGS2, OrthoVariant::A_1S};

  SweepResult easy = kappa_sweep(MatrixClass::Default, variants, {1e1}, part,
                                 opts, 12);
  REQUIRE(easy.rows.size() == variants.size());
  for (const SweepRow& row : easy.rows) {
    CHECK(row.status == "ok");
    CHECK(row.loo <= 1e-13);
  }

  SweepResult hard = kappa_sweep(MatrixClass::Glued, variants, {1e10}, part,
                                 opts, 12);
  for (const SweepRow& row : hard.rows) {
    if (row.variant == OrthoVariant::IP_2S ||
        row.variant == OrthoVariant::ADAPTIVE ||
        row.variant == OrthoVariant::BCGS2) {
      CHECK(row.status == "ok");
      CHECK(row.loo <= 1e-13);
    }
    if (row.variant == OrthoVariant::IP_1S) {
      const bool degraded = row.status == "breakdown" || row.loo >= 1e-10;
      CHECK(degraded);
    }
  }
}

TEST_CASE("kappa sweep output is byte-identical across runs") {
  BlockPartition part = BlockPartition::uniform(60, 3, 3);
  BcgsOptions opts;
  std::vector<OrthoVariant> variants{OrthoVariant::IP_1S, OrthoVariant::IP_2S};
  std::ostringstream a, b;
  write_sweep_csv(a, kappa_sweep(MatrixClass::Default, variants, {1e2, 1e6},
                                 part, opts, 5));
  write_sweep_csv(b, kappa_sweep(MatrixClass::Default, variants, {1e2, 1e6},
                                 part, opts, 5));
  CHECK(a.str() == b.str());
  CHECK(a.str().find("class,kappa_target") == 0);
}

TEST_CASE("sweep rows below the regime boundary never report large loo") {
  // HouseQR-based variants under kappa 1e7 stay far below 1e-8.
  BlockPartition part = BlockPartition::uniform(100, 5, 4);
  BcgsOptions opts;
  std::vector<OrthoVariant> variants{OrthoVariant::IP_1S, OrthoVariant::IP_2S,
                                     OrthoVariant::ADAPTIVE, OrthoVariant::BCGS2};
  SweepResult sweep = kappa_sweep(MatrixClass::Default, variants,
                                  {1e2, 1e4, 1e6}, part, opts, 21);
  for (const SweepRow& row : sweep.rows) {
    REQUIRE(row.status == "ok");
    CHECK(row.loo <= 1e-8);
  }
}
