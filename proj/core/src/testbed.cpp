// SPDX-License-Identifier: Apache-2.0

#include "blockgs/testbed.hpp"

#include <Eigen/QR>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace blockgs {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Deterministic Gaussian stream built directly on mt19937_64 words, so the
// same seed gives the same matrix on every platform and standard library.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    spare_ = radius * std::sin(kTwoPi * u2);
    have_spare_ = true;
    return radius * std::cos(kTwoPi * u2);
  }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

Matrix gaussian_matrix(Index rows, Index cols, Rng& rng) {
  Matrix G(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) G(i, j) = rng.gaussian();
  return G;
}

Matrix random_orthogonal(Index rows, Index cols, Rng& rng) {
  Matrix G = gaussian_matrix(rows, cols, rng);
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ() * Matrix::Identity(rows, cols);
  Matrix R = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (Index i = 0; i < cols; ++i)
    if (R(i, i) < 0.0) Q.col(i) = -Q.col(i);
  return Q;
}

BlockPartition params_partition(const MatrixClassParams& params) {
  return BlockPartition::uniform(params.rows, params.blocks, params.width);
}

void check_params(const MatrixClassParams& params) {
  if (params.kappa_target < 1.0)
    throw DimensionError("kappa_target must be >= 1");
  params_partition(params).validate();
}

Matrix finished(Matrix X) {
  if (!X.allFinite())
    throw std::runtime_error("generator produced a non-finite entry");
  return X;
}

void normalize_columns(Matrix& X) {
  for (Index j = 0; j < X.cols(); ++j) {
    const double nrm = X.col(j).norm();
    if (nrm > 0.0) X.col(j) /= nrm;
  }
}

std::string lower(std::string text) {
  for (char& c : text) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return text;
}

}  // namespace

std::string_view name(MatrixClass cls) noexcept {
  switch (cls) {
    case MatrixClass::Default:
      return "default";
    case MatrixClass::Glued:
      return "glued";
    case MatrixClass::Monomial:
      return "monomial";
    case MatrixClass::Piled:
      return "piled";
  }
  return "default";
}

MatrixClass matrix_class_from_name(std::string_view text) {
  if (text == "default") return MatrixClass::Default;
  if (text == "glued") return MatrixClass::Glued;
  if (text == "monomial") return MatrixClass::Monomial;
  if (text == "piled") return MatrixClass::Piled;
  throw std::invalid_argument("unknown matrix class: " + std::string(text));
}

Matrix gen_default(const MatrixClassParams& params) {
  check_params(params);
  const Index n = params_partition(params).cols();
  Rng rng(params.seed);
  Matrix U = random_orthogonal(params.rows, n, rng);
  Matrix V = random_orthogonal(n, n, rng);
  Vector sigma(n);
  for (Index i = 0; i < n; ++i)
    sigma(i) = n == 1 ? 1.0
                      : std::pow(params.kappa_target,
                                 -static_cast<double>(i) /
                                     static_cast<double>(n - 1));
  return finished(U * sigma.asDiagonal() * V.transpose());
}

Matrix gen_glued(const MatrixClassParams& params) {
  check_params(params);
  const BlockPartition part = params_partition(params);
  const Index n = part.cols();
  Rng rng(params.seed);
  Matrix U = random_orthogonal(params.rows, n, rng);
  Matrix V = random_orthogonal(n, n, rng);
  Vector sigma(n);
  for (Index k = 0; k < part.blocks; ++k) {
    const double level =
        part.blocks == 1
            ? 1.0
            : std::pow(params.kappa_target,
                       -static_cast<double>(k) /
                           static_cast<double>(part.blocks - 1));
    for (Index j = 0; j < part.block_width(k); ++j)
      sigma(part.offset(k) + j) = level;
  }
  return finished(U * sigma.asDiagonal() * V.transpose());
}

Matrix gen_monomial(const MatrixClassParams& params) {
  check_params(params);
  const BlockPartition part = params_partition(params);
  Rng rng(params.seed);
  // Four geometric plateau levels over [1, kappa_target].  Each application
  // of the operator then amplifies the top level by kappa^(1/3), which makes
  // the power columns collapse toward the leading eigenspace at a rate the
  // kappa knob controls directly.
  constexpr Index kLevels = 4;
  Vector lambda(params.rows);
  for (Index i = 0; i < params.rows; ++i) {
    const Index level = std::min(i * kLevels / params.rows, kLevels - 1);
    lambda(i) = std::pow(params.kappa_target,
                         static_cast<double>(level) /
                             static_cast<double>(kLevels - 1));
  }
  Matrix X(params.rows, part.cols());
  for (Index k = 0; k < part.blocks; ++k) {
    const Index w = part.block_width(k);
    Vector v = gaussian_matrix(params.rows, 1, rng);
    v /= v.norm();
    for (Index j = 0; j < w; ++j) {
      X.col(part.offset(k) + j) = v;
      v = lambda.asDiagonal() * v;
      v /= v.norm();
    }
  }
  return finished(X);
}

Matrix gen_piled(const MatrixClassParams& params) {
  check_params(params);
  const BlockPartition part = params_partition(params);
  Rng rng(params.seed);
  const double decay =
      part.blocks == 1
          ? 1.0
          : std::pow(params.kappa_target,
                     -1.0 / static_cast<double>(part.blocks - 1));
  Matrix X(params.rows, part.cols());
  Matrix pile = gaussian_matrix(params.rows, part.lead_width, rng);
  double scale = 1.0;
  for (Index k = 0; k < part.blocks; ++k) {
    const Index w = part.block_width(k);
    if (k > 0) {
      scale *= decay;
      pile += scale * gaussian_matrix(params.rows, w, rng);
    }
    Matrix block = pile;
    normalize_columns(block);
    X.middleCols(part.offset(k), w) = block;
  }
  return finished(X);
}

Matrix generate_matrix(const MatrixClassParams& params) {
  switch (params.matrix_class) {
    case MatrixClass::Default:
      return gen_default(params);
    case MatrixClass::Glued:
      return gen_glued(params);
    case MatrixClass::Monomial:
      return gen_monomial(params);
    case MatrixClass::Piled:
      return gen_piled(params);
  }
  throw std::invalid_argument("unknown matrix class");
}

namespace {

struct MmHeader {
  bool coordinate = false;
  bool symmetric = false;
};

MmHeader parse_banner(const std::string& line) {
  std::istringstream ss(line);
  std::string banner, object, format, field, symmetry;
  ss >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket")
    throw ParseError("missing %%MatrixMarket banner", 1);
  object = lower(object);
  format = lower(format);
  field = lower(field);
  symmetry = lower(symmetry);
  if (object != "matrix") throw ParseError("only matrix objects supported", 1);
  MmHeader header;
  if (format == "coordinate")
    header.coordinate = true;
  else if (format != "array")
    throw ParseError("format must be coordinate or array", 1);
  if (field != "real" && field != "integer")
    throw ParseError("field must be real or integer", 1);
  if (symmetry == "symmetric")
    header.symmetric = true;
  else if (symmetry != "general")
    throw ParseError("symmetry must be general or symmetric", 1);
  return header;
}

bool next_data_line(std::istream& in, std::string& line, long& lineno) {
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos) continue;
    if (line[pos] == '%') continue;
    return true;
  }
  return false;
}

double parse_value(const std::string& token, long lineno) {
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    if (!std::isfinite(v)) throw ParseError("non-finite matrix entry", lineno);
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    throw ParseError("malformed numeric value '" + token + "'", lineno);
  }
}

}  // namespace

MatrixMarketData read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'", 0);

  std::string line;
  long lineno = 0;
  if (!std::getline(in, line)) throw ParseError("empty file", 1);
  ++lineno;
  const MmHeader header = parse_banner(line);

  if (!next_data_line(in, line, lineno))
    throw ParseError("missing size line", lineno);

  std::istringstream size_line(line);
  long rows = 0, cols = 0, nnz = 0;
  if (header.coordinate) {
    if (!(size_line >> rows >> cols >> nnz))
      throw ParseError("malformed coordinate size line", lineno);
  } else {
    if (!(size_line >> rows >> cols))
      throw ParseError("malformed array size line", lineno);
  }
  if (rows < 1 || cols < 1) throw ParseError("non-positive dimensions", lineno);
  if (header.symmetric && rows != cols)
    throw ParseError("symmetric matrix must be square", lineno);

  std::vector<Eigen::Triplet<double>> triplets;
  if (header.coordinate) {
    triplets.reserve(static_cast<std::size_t>(header.symmetric ? 2 * nnz : nnz));
    for (long e = 0; e < nnz; ++e) {
      if (!next_data_line(in, line, lineno))
        throw ParseError("unexpected end of file in entry list", lineno);
      std::istringstream entry(line);
      long i = 0, j = 0;
      std::string value_token;
      if (!(entry >> i >> j >> value_token))
        throw ParseError("malformed coordinate entry", lineno);
      if (i < 1 || i > rows || j < 1 || j > cols)
        throw ParseError("coordinate entry out of range", lineno);
      const double v = parse_value(value_token, lineno);
      triplets.emplace_back(static_cast<int>(i - 1), static_cast<int>(j - 1), v);
      if (header.symmetric && i != j)
        triplets.emplace_back(static_cast<int>(j - 1), static_cast<int>(i - 1), v);
    }
  } else {
    // Array format stores column-major values; the symmetric flavor packs
    // only the entries on or below the diagonal.
    for (long j = 0; j < cols; ++j) {
      const long start = header.symmetric ? j : 0;
      for (long i = start; i < rows; ++i) {
        if (!next_data_line(in, line, lineno))
          throw ParseError("unexpected end of file in array data", lineno);
        std::istringstream entry(line);
        std::string value_token;
        if (!(entry >> value_token))
          throw ParseError("malformed array entry", lineno);
        const double v = parse_value(value_token, lineno);
        if (v != 0.0) {
          triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
          if (header.symmetric && i != j)
            triplets.emplace_back(static_cast<int>(j), static_cast<int>(i), v);
        }
      }
    }
  }

  MatrixMarketData data;
  data.symmetric_storage = header.symmetric;
  data.matrix.resize(static_cast<int>(rows), static_cast<int>(cols));
  data.matrix.setFromTriplets(triplets.begin(), triplets.end());
  data.matrix.makeCompressed();
  data.frobenius_norm = data.matrix.norm();
  return data;
}

void write_matrix_market_array(const std::string& path, const Matrix& X) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "%%MatrixMarket matrix array real general\n";
  out << X.rows() << " " << X.cols() << "\n";
  char buf[48];
  for (Index j = 0; j < X.cols(); ++j) {
    for (Index i = 0; i < X.rows(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", X(i, j));
      out << buf << "\n";
    }
  }
  if (!out) throw std::runtime_error("write failure on '" + path + "'");
}

SweepResult kappa_sweep(MatrixClass cls, const std::vector<OrthoVariant>& variants,
                        const std::vector<double>& kappa_grid,
                        const BlockPartition& part, const BcgsOptions& opts,
                        std::uint64_t seed) {
  SweepResult result;
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < kappa_grid.size(); ++g) {
    MatrixClassParams params;
    params.matrix_class = cls;
    params.rows = part.rows;
    params.blocks = part.blocks;
    params.width = part.width;
    params.kappa_target = kappa_grid[g];
    params.seed = seed + 1001 * static_cast<std::uint64_t>(g);
    const Matrix X = generate_matrix(params);

    double kappa_measured = inf;
    try {
      kappa_measured = cond2(X);
    } catch (const SingularMatrix&) {
      // numerically singular: keep the sentinel
    }

    for (OrthoVariant variant : variants) {
      SweepRow row;
      row.matrix_class = cls;
      row.kappa_target = params.kappa_target;
      row.kappa_measured = kappa_measured;
      row.variant = variant;
      row.io_a = opts.io_a.kind;
      row.io_1 = opts.io_1.kind;
      SyncLedger ledger;
      BcgsReport report = run_variant(variant, X, part, opts, ledger);
      row.sync_total = report.ledger.total();
      if (report.status == BcgsStatus::Completed) {
        row.loo = loss_of_orthogonality(report.factorization.Q);
        row.rel_residual =
            relative_residual(X, report.factorization.Q, report.factorization.R);
        row.status = "ok";
      } else {
        row.loo = inf;
        row.rel_residual = inf;
        row.status = "breakdown";
      }
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

std::string csv_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", value);
  return buf;
}

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  out << "class,kappa_target,kappa_measured,variant,io_a,io_1,loo,"
         "rel_residual,sync_total,status\n";
  for (const SweepRow& row : result.rows) {
    out << name(row.matrix_class) << ',' << csv_double(row.kappa_target) << ','
        << csv_double(row.kappa_measured) << ',' << name(row.variant) << ','
        << name(row.io_a) << ',' << name(row.io_1) << ','
        << csv_double(row.loo) << ',' << csv_double(row.rel_residual) << ','
        << row.sync_total << ',' << row.status << '\n';
  }
}

}  // namespace blockgs
