// SPDX-License-Identifier: Apache-2.0
//
// blockgs-cli: batch experiment runner.
//
//   qr-sweep   condition-number sweep of the block orthogonalization
//              variants over a generated matrix class, CSV out
//   gmres      s-step GMRES solve of a Matrix Market system, convergence
//              history CSV plus a one-line summary
//   matgen     write a generated test matrix in Matrix Market array format
//
// Exit codes: 0 success, 1 usage error, 2 I/O or parse error, 3 numerical
// breakdown in a non-sweep command.

#include <CLI11.hpp>

#include "blockgs/bcgs.hpp"
#include "blockgs/krylov.hpp"
#include "blockgs/testbed.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

namespace {

using namespace blockgs;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitBreakdown = 3;

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

std::vector<OrthoVariant> parse_variants(const std::string& text) {
  if (text == "all") {
    return {OrthoVariant::PIP_IRO, OrthoVariant::IP_1S, OrthoVariant::IP_2S,
            OrthoVariant::ADAPTIVE, OrthoVariant::BCGS2, OrthoVariant::A_1S};
  }
  std::vector<OrthoVariant> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(variant_from_name(item));
  }
  if (out.empty()) throw std::invalid_argument("empty variant list");
  return out;
}

std::ostream& open_output(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw std::runtime_error("cannot open '" + path + "' for writing");
  return file;
}

std::string trim(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = text.find_last_not_of(" \t\r");
  return text.substr(first, last - first + 1);
}

// Flat key=value config support: a `--config FILE` anywhere after the
// subcommand is expanded into the equivalent long options, but only for
// keys the command line does not already carry, so flags win on conflict.
// Unknown keys fall through to the parser and are rejected there.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size())
        throw std::invalid_argument("--config needs a file argument");
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                 args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
  }
  if (path.empty()) return args;

  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::string line;
  while (std::getline(in, line)) {
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line is not key=value: " + stripped);
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config line has an empty key: " + stripped);
    const std::string flag = "--" + key;
    bool present = false;
    for (const std::string& arg : args)
      if (arg == flag || arg.rfind(flag + "=", 0) == 0) present = true;
    if (!present) {
      args.push_back(flag);
      if (!value.empty()) args.push_back(value);
    }
  }
  return args;
}

struct SweepArgs {
  std::string matrix_class = "default";
  long m = 200;
  long p = 10;
  long s = 5;
  std::string kappas = "1e2,1e4,1e6,1e8,1e10";
  std::string variants = "all";
  std::string io_a = "houseqr";
  std::string io_1 = "houseqr";
  double switch_const = kDefaultSwitchConst;
  long tsqr_row_blocks = 8;
  unsigned long long seed = 1;
  std::string output = "-";
};

int cmd_qr_sweep(const SweepArgs& args) {
  const MatrixClass cls = matrix_class_from_name(args.matrix_class);
  const std::vector<double> grid = parse_doubles(args.kappas);
  if (grid.empty()) throw CLI::ValidationError("--kappas", "empty grid");
  const std::vector<OrthoVariant> variants = parse_variants(args.variants);

  BlockPartition part = BlockPartition::uniform(args.m, args.p, args.s);
  BcgsOptions opts;
  opts.io_a = {intraortho_from_name(args.io_a), args.tsqr_row_blocks};
  opts.io_1 = {intraortho_from_name(args.io_1), args.tsqr_row_blocks};
  opts.switch_const = args.switch_const;

  SweepResult result = kappa_sweep(cls, variants, grid, part, opts, args.seed);

  std::ofstream file;
  std::ostream& out = open_output(args.output, file);
  write_sweep_csv(out, result);
  return kExitOk;
}

struct GmresArgs {
  std::string matrix;
  long s = 2;
  std::string variant = "adaptive";
  std::string io_1 = "houseqr";
  double switch_const = kDefaultSwitchConst;
  double tol = 1e-12;
  long max_iter = 0;  // single-vector iterations; 0 = dimension bound
  long tsqr_row_blocks = 8;
  std::string basis = "monomial";
  bool no_column_scaling = false;
  std::string output;
};

int cmd_gmres(const GmresArgs& args) {
  MatrixMarketData data = read_matrix_market(args.matrix);
  SparseOperator A(data.matrix);
  const Index m = A.rows();
  Vector b = Vector::Ones(m);
  Vector x0 = Vector::Zero(m);

  GmresOptions opts;
  opts.s = args.s;
  opts.variant = variant_from_name(args.variant);
  opts.io_1 = {intraortho_from_name(args.io_1), args.tsqr_row_blocks};
  opts.switch_const = args.switch_const;
  opts.tol = args.tol;
  if (args.max_iter > 0)
    opts.max_block_steps = std::max<long>(args.max_iter / args.s, 1);
  if (args.basis == "monomial")
    opts.basis.kind = BasisKind::Monomial;
  else if (args.basis == "newton")
    opts.basis.kind = BasisKind::NewtonShifted;
  else
    throw CLI::ValidationError("--basis", "must be monomial or newton");
  opts.basis.scaling =
      args.no_column_scaling ? ColumnScaling::None : ColumnScaling::UnitNorm;

  GmresResult result = sstep_gmres(A, b, x0, opts);

  if (!args.output.empty()) {
    std::ofstream file;
    std::ostream& out = open_output(args.output, file);
    out << "block_step,vectors,backward_error,ls_residual,sync_total\n";
    for (const auto& row : result.state.history) {
      out << row.block_step << ',' << row.vectors << ','
          << csv_double(row.backward_error) << ',' << csv_double(row.ls_residual)
          << ',' << row.sync_total << '\n';
    }
  }

  const GmresState& st = result.state;
  std::ostringstream phases;
  if (st.switch_block.has_value()) {
    const long d = static_cast<long>(*st.switch_block);
    const long total = static_cast<long>(st.steps_total());
    phases << " iterations_split=" << (d - 1) * args.s << "+"
           << (total - d + 1) * args.s << " switch_block=" << d;
  } else if (opts.variant == OrthoVariant::ADAPTIVE) {
    phases << " iterations_split=" << st.h_cols() << "+0 switch_block=-";
  }

  std::cout << "matrix=" << args.matrix << " variant=" << name(opts.variant)
            << " s=" << args.s
            << " status=" << (st.converged ? "converged" : "halted")
            << " backward_error=" << csv_double(result.backward_error)
            << " iterations=" << st.h_cols() << " blocks=" << st.steps_total()
            << " sync_points=" << gmres_sync_points(st) << phases.str();
  if (!st.halt_reason.empty() && !st.converged)
    std::cout << " reason=\"" << st.halt_reason << "\"";
  std::cout << "\n";

  return st.converged ? kExitOk : kExitBreakdown;
}

struct MatgenArgs {
  std::string matrix_class = "default";
  long m = 200;
  long p = 10;
  long s = 5;
  double kappa = 1e4;
  unsigned long long seed = 1;
  std::string output;
};

int cmd_matgen(const MatgenArgs& args) {
  MatrixClassParams params;
  params.matrix_class = matrix_class_from_name(args.matrix_class);
  params.rows = args.m;
  params.blocks = args.p;
  params.width = args.s;
  params.kappa_target = args.kappa;
  params.seed = args.seed;
  Matrix X = generate_matrix(params);
  write_matrix_market_array(args.output, X);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-synchronization block Gram-Schmidt experiment runner"};
  app.require_subcommand(1);
  app.footer(
      "Each subcommand also accepts --config FILE with flat key=value lines\n"
      "mirroring the long options; command-line flags win on conflict.");

  SweepArgs sweep;
  CLI::App* sc_sweep =
      app.add_subcommand("qr-sweep", "Condition-number sweep, CSV output");
  sc_sweep
      ->add_option("--class", sweep.matrix_class,
                   "Matrix class: default|glued|monomial|piled")
      ->required();
  sc_sweep->add_option("--m", sweep.m, "Rows");
  sc_sweep->add_option("--p", sweep.p, "Block columns");
  sc_sweep->add_option("--s", sweep.s, "Block width");
  sc_sweep->add_option("--kappas", sweep.kappas, "Comma list of target kappas");
  sc_sweep->add_option("--variants", sweep.variants,
                       "Comma list of variants or 'all'");
  sc_sweep->add_option("--io-a", sweep.io_a, "First intraorthogonalization");
  sc_sweep->add_option("--io-1", sweep.io_1, "Per-block intraorthogonalization");
  sc_sweep->add_option("--switch-const", sweep.switch_const,
                       "Adaptive switching constant");
  sc_sweep->add_option("--tsqr-row-blocks", sweep.tsqr_row_blocks,
                       "Row panels for the TSQR tree");
  sc_sweep->add_option("--seed", sweep.seed, "Generator seed");
  sc_sweep->add_option("--output", sweep.output, "CSV path or '-' for stdout");

  GmresArgs gmres;
  CLI::App* sc_gmres = app.add_subcommand(
      "gmres", "s-step GMRES on a Matrix Market system (b = ones, x0 = 0)");
  sc_gmres->add_option("--matrix", gmres.matrix, "Matrix Market file")
      ->required();
  sc_gmres->add_option("--s", gmres.s, "Block size");
  sc_gmres->add_option("--variant", gmres.variant,
                       "ip_1s|ip_2s|adaptive|bcgs2");
  sc_gmres->add_option("--io-1", gmres.io_1, "Per-block intraorthogonalization");
  sc_gmres->add_option("--switch-const", gmres.switch_const,
                       "Adaptive switching constant");
  sc_gmres->add_option("--tol", gmres.tol, "Stopping tolerance");
  sc_gmres->add_option("--max-iter", gmres.max_iter,
                       "Cap on single-vector iterations");
  sc_gmres->add_option("--tsqr-row-blocks", gmres.tsqr_row_blocks,
                       "Row panels for the TSQR tree");
  sc_gmres->add_option("--basis", gmres.basis, "monomial|newton");
  sc_gmres->add_flag("--no-column-scaling", gmres.no_column_scaling,
                     "Disable unit-norm basis column scaling");
  sc_gmres->add_option("--output", gmres.output, "History CSV path");

  MatgenArgs matgen;
  CLI::App* sc_matgen = app.add_subcommand(
      "matgen", "Generate a test matrix (Matrix Market array format)");
  sc_matgen
      ->add_option("--class", matgen.matrix_class,
                   "default|glued|monomial|piled")
      ->required();
  sc_matgen->add_option("--m", matgen.m, "Rows");
  sc_matgen->add_option("--p", matgen.p, "Block columns");
  sc_matgen->add_option("--s", matgen.s, "Block width");
  sc_matgen->add_option("--kappa", matgen.kappa, "Target condition number");
  sc_matgen->add_option("--seed", matgen.seed, "Generator seed");
  sc_matgen->add_option("--output", matgen.output, "Output path")->required();

  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  std::vector<const char*> arg_ptrs;
  arg_ptrs.reserve(args.size());
  for (const std::string& arg : args) arg_ptrs.push_back(arg.c_str());

  try {
    app.parse(static_cast<int>(arg_ptrs.size()), arg_ptrs.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (sc_sweep->parsed()) return cmd_qr_sweep(sweep);
    if (sc_gmres->parsed()) return cmd_gmres(gmres);
    if (sc_matgen->parsed()) return cmd_matgen(matgen);
    std::cerr << "no subcommand given\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NotPositiveDefinite& e) {
    std::cerr << "numerical breakdown: " << e.what() << "\n";
    return kExitBreakdown;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
}
