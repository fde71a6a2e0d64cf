// rstile: command-line driver for reordering, RS-Tile conversion and hybrid SpMM.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "rsh/json.hpp"
#include "rsh/rsh.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using rsh::index_t;

namespace {

struct Options {
  std::string input;
  std::string output;
  std::string perm;
  std::string b_path;
  std::string format = "json";
  std::string sweep_format = "csv";
  double alpha = 0.5;
  index_t k = 8;
  std::optional<index_t> tau_nnz;
  std::optional<index_t> tau_inc;
  index_t window_size = 8;
  index_t max_blocks = 64;
  index_t d = 64;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  bool check = false;
  std::string precision = "f64";
  index_t tau_min = 0;
  index_t tau_max = 8;

  // generate
  std::string kind = "power-law";
  index_t rows = 1024;
  std::optional<index_t> cols;
  std::uint64_t nnz = 8192;
  double skew = 1.5;
  index_t community = 0;
  double pool_fraction = 0.25;
  double locality = 0.0;
  index_t band = 32;
  index_t blocks = 32;
  index_t block_rows = 8;
  double density = 0.6;
};

/// Usage or input problems detected by the driver itself.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

rsh::PartitionParams partition_params(const Options& o) {
  rsh::PartitionParams p;
  p.window_size = o.window_size;
  p.tau_nnz = o.tau_nnz;
  p.tau_inc = o.tau_inc;
  p.max_blocks_per_item = o.max_blocks;
  p.check();
  return p;
}

void emit(const Options& o, const std::string& text, bool to_output) {
  if (to_output && !o.output.empty()) {
    std::ofstream out(o.output, std::ios::binary);
    if (!out) throw UsageError("cannot write " + o.output);
    out << text;
  } else {
    std::cout << text;
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

/// Encodes with the partition flags and fails loudly if the result is malformed.
rsh::RsTileMatrix encode_checked(const rsh::CsrMatrix& a, const Options& o) {
  auto m = rsh::encode(a, partition_params(o), o.workers);
  if (auto bad = rsh::validate(m); !bad.empty()) throw rsh::InvariantError("built RS-Tile is invalid: " + bad.front());
  return m;
}

int cmd_stats(const Options& o) {
  const auto a = rsh::read_matrix_market(o.input);
  const auto j = rsh::to_json(rsh::row_stats(a), a);
  if (o.format == "csv") {
    std::string head, vals;
    for (auto it = j.begin(); it != j.end(); ++it) {
      head += (head.empty() ? "" : ",") + it.key();
      vals += (vals.empty() ? "" : ",") + it.value().dump();
    }
    emit(o, head + "\n" + vals + "\n", true);
  } else {
    emit(o, dump(j), true);
  }
  return 0;
}

int cmd_reorder(const Options& o) {
  const auto a = rsh::read_matrix_market(o.input);
  rsh::ReorderParams p;
  p.alpha = o.alpha;
  p.k = o.k;
  p.workers = o.workers;
  const auto res = rsh::reorder_pipeline(a, p);
  std::string perm_path = o.perm;
  if (perm_path.empty() && !o.output.empty()) perm_path = o.output + ".perm";
  if (!perm_path.empty()) rsh::write_permutation(fs::path(perm_path), res.permutation);
  if (!o.output.empty()) rsh::write_matrix_market(fs::path(o.output), res.reordered);
  json j{{"n_rows", a.n_rows},
         {"objective_before", res.identity_objective},
         {"mst_objective", res.mst_objective},
         {"refined_objective", res.refined_objective},
         {"objective_after", res.permutation.objective}};
  std::cout << dump(j);
  return 0;
}

int cmd_convert(const Options& o) {
  if (o.output.empty()) throw UsageError("convert needs --output");
  const auto a = rsh::read_matrix_market(o.input);
  const auto m = encode_checked(a, o);
  const auto bytes = rsh::serialize_rstile(m);
  rsh::write_file_bytes(o.output, bytes);
  json j{{"storage", rsh::to_json(rsh::storage_report(a, m))},
         {"density", rsh::to_json(rsh::tile_density(m))},
         {"window_entries", m.tc.entries()},
         {"file_bytes", bytes.size()}};
  std::cout << dump(j);
  return 0;
}

struct SpmmRun {
  json report;
  rsh::DenseMatrix c;
};

SpmmRun run_spmm(const rsh::RsTileMatrix& m, std::uint64_t nnz, const Options& o) {
  rsh::DenseMatrix b = o.b_path.empty() ? rsh::random_dense(m.n_cols, o.d, o.seed) : rsh::read_dense(o.b_path);
  if (b.n_rows() != m.n_cols) {
    throw rsh::DimensionError("B has " + std::to_string(b.n_rows()) + " rows but A has " + std::to_string(m.n_cols) +
                              " columns");
  }
  rsh::ExecConfig cfg;
  cfg.num_workers = o.workers;
  cfg.accumulate_precision = o.precision == "f32" ? rsh::Precision::f32 : rsh::Precision::f64;
  const auto t0 = std::chrono::steady_clock::now();
  auto c = rsh::hybrid_spmm(m, b, cfg);
  const double wall = seconds_since(t0);
  json j{{"n_rows", m.n_rows}, {"n_cols", m.n_cols}, {"nnz", nnz}, {"d", b.n_cols()}};
  if (o.check) {
    const double err = rsh::max_relative_error(c, rsh::oracle_spmm(rsh::decode_rstile(m), b));
    j["max_relative_error"] = err;
    if (!(err <= 1e-5)) {
      std::cout << dump(j);
      throw rsh::InvariantError("hybrid result disagrees with the oracle (max relative error " + std::to_string(err) + ")");
    }
  }
  j["wall_seconds"] = wall;
  j["gflops"] = wall > 0 ? 2.0 * static_cast<double>(nnz) * b.n_cols() / wall * 1e-9 : 0.0;
  return {std::move(j), std::move(c)};
}

int cmd_spmm(const Options& o) {
  const auto bytes = rsh::read_file_bytes(o.input);
  rsh::RsTileMatrix m;
  if (rsh::has_rstile_magic(bytes)) {
    m = rsh::deserialize_rstile(bytes);
  } else {
    m = encode_checked(rsh::parse_matrix_market(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size())), o);
  }
  const std::uint64_t nnz = m.tc.values.size() + m.residual.values.size();
  auto run = run_spmm(m, nnz, o);
  if (!o.output.empty()) rsh::write_dense(o.output, run.c);
  std::cout << dump(run.report);
  return 0;
}

int cmd_sweep(const Options& o) {
  if (o.tau_min > o.tau_max) throw UsageError("--tau-min must not exceed --tau-max");
  const auto a = rsh::read_matrix_market(o.input);
  std::vector<index_t> taus(o.tau_max - o.tau_min + 1);
  std::iota(taus.begin(), taus.end(), o.tau_min);
  const auto sweep = rsh::threshold_sweep(a, taus, partition_params(o), o.workers);
  if (o.sweep_format == "json") {
    emit(o, dump(rsh::to_json(sweep)), true);
  } else {
    std::ostringstream out;
    rsh::write_sweep_csv(out, sweep);
    emit(o, out.str(), true);
  }
  return 0;
}

int cmd_bench(const Options& o) {
  if (!fs::is_directory(o.input)) throw UsageError("not a directory: " + o.input);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(o.input)) {
    if (e.is_regular_file() && e.path().extension() == ".mtx") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  json entries = json::array();
  for (const auto& f : files) {
    rsh::CsrMatrix a;
    try {
      a = rsh::read_matrix_market(f);
    } catch (const rsh::Error& e) {
      std::cerr << "warning: skipping " << f.string() << ": " << e.what() << "\n";
      continue;
    }
    const auto m = encode_checked(a, o);
    auto run = run_spmm(m, a.nnz(), o);
    json row{{"name", f.filename().string()}};
    for (auto it = run.report.begin(); it != run.report.end(); ++it) row[it.key()] = it.value();
    row["density"] = rsh::to_json(rsh::tile_density(m));
    row["storage"] = rsh::to_json(rsh::storage_report(a, m));
    entries.push_back(std::move(row));
  }
  if (entries.empty()) std::cerr << "warning: no readable .mtx files in " << o.input << "\n";
  emit(o, dump(json{{"count", entries.size()}, {"matrices", entries}}), true);
  return 0;
}

int cmd_generate(const Options& o) {
  if (o.output.empty()) throw UsageError("generate needs --output");
  rsh::CsrMatrix a;
  if (o.kind == "block-diagonal") {
    a = rsh::generate_block_diagonal(o.blocks, o.block_rows, o.block_rows, o.density, o.seed);
  } else {
    rsh::PowerLawOptions opt;
    opt.community = o.community;
    opt.pool_fraction = o.pool_fraction;
    opt.locality = o.locality;
    opt.band = o.band;
    a = rsh::generate_power_law(o.rows, o.cols.value_or(o.rows), o.nnz, o.skew, o.seed, opt);
  }
  rsh::write_matrix_market(fs::path(o.output), a);
  std::cout << dump(rsh::to_json(rsh::row_stats(a), a));
  return 0;
}

std::size_t default_workers() {
  const char* env = std::getenv("RSTILE_WORKERS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const unsigned long v = std::strtoul(env, &end, 10);
  if (*end != '\0' || v < 1) throw UsageError(std::string("RSTILE_WORKERS must be a positive integer, got '") + env + "'");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  try {
    o.workers = default_workers();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  CLI::App app{"RS-Tile sparse format tools"};
  app.require_subcommand(1);
  auto add_workers = [&](CLI::App* c) {
    c->add_option("--workers", o.workers, "Worker threads (default $RSTILE_WORKERS or 1)")->check(CLI::PositiveNumber);
  };
  auto add_partition = [&](CLI::App* c) {
    c->add_option("--tau-nnz", o.tau_nnz, "Row nnz threshold (default: estimated)");
    c->add_option("--tau-inc", o.tau_inc, "Column increment threshold (default: 2)");
    c->add_option("--window-size", o.window_size, "Rows per window")->check(CLI::Range(1, 8));
    c->add_option("--max-blocks", o.max_blocks, "Blocks per work item before splitting")->check(CLI::PositiveNumber);
  };

  auto* stats = app.add_subcommand("stats", "Row statistics of a Matrix Market file");
  stats->add_option("input", o.input, "Matrix Market file")->required();
  stats->add_option("--output", o.output, "Report file (default stdout)");
  stats->add_option("--format", o.format, "Report format")->check(CLI::IsMember({"json", "csv"}));

  auto* reorder = app.add_subcommand("reorder", "Locality-aware row reordering");
  reorder->add_option("input", o.input, "Matrix Market file")->required();
  reorder->add_option("--output", o.output, "Reordered Matrix Market file");
  reorder->add_option("--perm", o.perm, "Permutation file (default <output>.perm)");
  reorder->add_option("--alpha", o.alpha, "Column weight exponent")->check(CLI::PositiveNumber);
  reorder->add_option("--k", o.k, "Neighbours per row")->check(CLI::PositiveNumber);
  add_workers(reorder);

  auto* convert = app.add_subcommand("convert", "Matrix Market to RS-Tile binary");
  convert->add_option("input", o.input, "Matrix Market file")->required();
  convert->add_option("--output", o.output, "RS-Tile file")->required();
  add_partition(convert);
  add_workers(convert);

  auto* spmm = app.add_subcommand("spmm", "Hybrid SpMM with an RS-Tile or Matrix Market operand");
  spmm->add_option("input", o.input, "RS-Tile or Matrix Market file")->required();
  spmm->add_option("--output", o.output, "Result C as a DMAT file");
  spmm->add_option("--b", o.b_path, "Dense operand as a DMAT file (default: random)");
  spmm->add_option("--d", o.d, "Columns of the random B")->check(CLI::PositiveNumber);
  spmm->add_option("--seed", o.seed, "Seed of the random B");
  spmm->add_flag("--check", o.check, "Compare against the reference product");
  spmm->add_option("--precision", o.precision, "Accumulation precision")->check(CLI::IsMember({"f32", "f64"}));
  add_partition(spmm);
  add_workers(spmm);

  auto* sweep = app.add_subcommand("partition-sweep", "Tile density over a range of row nnz thresholds");
  sweep->add_option("input", o.input, "Matrix Market file")->required();
  sweep->add_option("--tau-min", o.tau_min, "First threshold");
  sweep->add_option("--tau-max", o.tau_max, "Last threshold");
  sweep->add_option("--output", o.output, "Report file (default stdout)");
  sweep->add_option("--tau-inc", o.tau_inc, "Column increment threshold (default: 2)");
  sweep->add_option("--window-size", o.window_size, "Rows per window")->check(CLI::Range(1, 8));
  sweep->add_option("--max-blocks", o.max_blocks, "Blocks per work item before splitting")->check(CLI::PositiveNumber);
  sweep->add_option("--format", o.sweep_format, "Report format")->check(CLI::IsMember({"json", "csv"}));
  add_workers(sweep);

  auto* bench = app.add_subcommand("bench", "Convert and multiply every .mtx file in a directory");
  bench->add_option("input", o.input, "Corpus directory")->required();
  bench->add_option("--output", o.output, "Report file (default stdout)");
  bench->add_option("--d", o.d, "Columns of the random B")->check(CLI::PositiveNumber);
  bench->add_option("--seed", o.seed, "Seed of the random B");
  bench->add_flag("--check", o.check, "Compare against the reference product");
  add_partition(bench);
  add_workers(bench);

  auto* generate = app.add_subcommand("generate", "Write a seeded synthetic matrix");
  generate->add_option("--output", o.output, "Matrix Market file")->required();
  generate->add_option("--kind", o.kind, "Matrix family")->check(CLI::IsMember({"power-law", "block-diagonal"}));
  generate->add_option("--rows", o.rows, "Rows")->check(CLI::PositiveNumber);
  generate->add_option("--cols", o.cols, "Columns (default: rows)");
  generate->add_option("--nnz", o.nnz, "Target nonzeros");
  generate->add_option("--skew", o.skew, "Power-law exponent");
  generate->add_option("--seed", o.seed, "Seed");
  generate->add_option("--community", o.community, "Rows per column-sharing group (0: off)");
  generate->add_option("--pool-fraction", o.pool_fraction, "Group column pool size relative to group rows");
  generate->add_option("--locality", o.locality, "Probability of a near-diagonal column")->check(CLI::Range(0.0, 1.0));
  generate->add_option("--band", o.band, "Half-width of the diagonal band");
  generate->add_option("--blocks", o.blocks, "Diagonal blocks")->check(CLI::PositiveNumber);
  generate->add_option("--block-rows", o.block_rows, "Rows and columns per block")->check(CLI::PositiveNumber);
  generate->add_option("--density", o.density, "Cell probability inside a block")->check(CLI::Range(0.0, 1.0));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*stats) return cmd_stats(o);
    if (*reorder) return cmd_reorder(o);
    if (*convert) return cmd_convert(o);
    if (*spmm) return cmd_spmm(o);
    if (*sweep) return cmd_sweep(o);
    if (*bench) return cmd_bench(o);
    if (*generate) return cmd_generate(o);
  } catch (const rsh::InvariantError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const rsh::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
