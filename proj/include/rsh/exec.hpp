#pragma once

// Hybrid SpMM over an RS-Tile matrix. The TC path expands each bitmap block
// into a dense 8x8 fragment and multiplies it with the 8 gathered rows of B;
// the residual path is a scalar multiply-add per nonzero. The two paths write
// disjoint output rows.

#include <array>
#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rsh/error.hpp"
#include "rsh/parallel.hpp"
#include "rsh/rstile.hpp"
#include "rsh/sparse.hpp"

namespace rsh {

enum class Precision { f32, f64 };

struct ExecConfig {
  std::size_t num_workers = 1;
  bool check_against_oracle = false;
  Precision accumulate_precision = Precision::f64;
};

using Fragment8x8 = std::array<float, kTileDim * kTileDim>;

/// Scatters values into the set-bit positions of the fragment: the value for
/// bit b is values[popcount(bitmap & ((1 << b) - 1))].
inline Fragment8x8 decode_tile(std::uint64_t bitmap, std::span<const float> values) {
  if (values.size() != static_cast<std::size_t>(std::popcount(bitmap))) {
    throw DimensionError("decode_tile: " + std::to_string(values.size()) + " values for popcount " +
                         std::to_string(std::popcount(bitmap)));
  }
  Fragment8x8 frag{};
  for (int b = 0; b < 64; ++b) {
    const std::uint64_t bit = std::uint64_t{1} << b;
    if (bitmap & bit) frag[b] = values[std::popcount(bitmap & (bit - 1))];
  }
  return frag;
}

/// Index of the first value of every block (popcount prefix sums), blocks + 1 long.
inline std::vector<std::size_t> block_value_offsets(const TcPart& tc) {
  std::vector<std::size_t> off(tc.blocks() + 1, 0);
  for (std::size_t t = 0; t < tc.blocks(); ++t) off[t + 1] = off[t] + std::popcount(tc.bitmaps[t]);
  return off;
}

/// c_out (kTileDim x d, row-major) += sum over the entry's blocks of
/// fragment(block) * B[col_id(block), :].
template <class Acc>
void exec_tc_window(const RsTileMatrix& m, std::size_t entry, const DenseMatrix& b, std::span<Acc> c_out,
                    std::span<const std::size_t> value_offsets) {
  const index_t d = b.n_cols();
  const auto& tc = m.tc;
  if (entry >= tc.entries()) throw DimensionError("exec_tc_window: entry " + std::to_string(entry) + " out of range");
  if (c_out.size() != std::size_t{kTileDim} * d) throw DimensionError("exec_tc_window: accumulator must be 8 x d");
  const float* rows[kTileDim];
  for (std::size_t t = tc.row_window_offset[entry]; t < tc.row_window_offset[entry + 1]; ++t) {
    const Fragment8x8 frag = decode_tile(
        tc.bitmaps[t], std::span<const float>(tc.values).subspan(value_offsets[t], value_offsets[t + 1] - value_offsets[t]));
    for (index_t s = 0; s < kTileDim; ++s) {
      const index_t col = tc.col_id[t * kTileDim + s];
      if (col >= b.n_rows()) throw FormatError("block " + std::to_string(t) + ": col_id " + std::to_string(col) + " out of range");
      rows[s] = b.row(col).data();
    }
    for (index_t i = 0; i < kTileDim; ++i) {
      Acc* out = c_out.data() + std::size_t{i} * d;
      for (index_t s = 0; s < kTileDim; ++s) {
        const Acc a = frag[i * kTileDim + s];
        const float* g = rows[s];
        for (index_t j = 0; j < d; ++j) out[j] += a * static_cast<Acc>(g[j]);
      }
    }
  }
}

template <class Acc>
void exec_tc_window(const RsTileMatrix& m, std::size_t entry, const DenseMatrix& b, std::span<Acc> c_out) {
  exec_tc_window(m, entry, b, c_out, std::span<const std::size_t>(block_value_offsets(m.tc)));
}

namespace exec_detail {

template <class Acc>
void residual_rows(const RsTileMatrix& m, const DenseMatrix& b, DenseMatrix& c, std::size_t begin, std::size_t end) {
  const index_t d = b.n_cols();
  const auto& res = m.residual;
  std::vector<Acc> acc(d);
  for (std::size_t i = begin; i < end; ++i) {
    const index_t r = res.row_id[i];
    auto crow = c.row(r);
    for (index_t j = 0; j < d; ++j) acc[j] = static_cast<Acc>(crow[j]);
    for (index_t k = res.row_nnz_offset[i]; k < res.row_nnz_offset[i + 1]; ++k) {
      const Acc v = res.values[k];
      auto brow = b.row(res.col_id[k]);
      for (index_t j = 0; j < d; ++j) acc[j] += v * static_cast<Acc>(brow[j]);
    }
    for (index_t j = 0; j < d; ++j) crow[j] = static_cast<float>(acc[j]);
  }
}

}  // namespace exec_detail

/// c[r, :] += v * B[col, :] for every residual nonzero; touches residual rows only.
inline void exec_residual(const RsTileMatrix& m, const DenseMatrix& b, DenseMatrix& c, Precision p = Precision::f64,
                          std::size_t workers = 1) {
  if (c.n_rows() != m.n_rows || c.n_cols() != b.n_cols()) throw DimensionError("exec_residual: C has the wrong shape");
  parallel_chunks(m.residual.rows(), workers, [&](std::size_t begin, std::size_t end) {
    if (p == Precision::f64) {
      exec_detail::residual_rows<double>(m, b, c, begin, end);
    } else {
      exec_detail::residual_rows<float>(m, b, c, begin, end);
    }
  });
}

/// Per-row write counts by path, for checking output disjointness.
struct ExecTrace {
  std::vector<std::uint8_t> tc_writes;
  std::vector<std::uint8_t> residual_writes;
};

namespace exec_detail {

/// [first, last] entry ranges of logical windows (entries sharing a row_window_id).
inline std::vector<std::pair<std::size_t, std::size_t>> logical_windows(const TcPart& tc) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t e = 0; e < tc.entries();) {
    std::size_t last = e;
    while (last + 1 < tc.entries() && tc.row_window_id[last + 1] == tc.row_window_id[e]) ++last;
    out.emplace_back(e, last);
    e = last + 1;
  }
  return out;
}

template <class Acc>
void tc_path(const RsTileMatrix& m, const DenseMatrix& b, DenseMatrix& c, std::size_t workers, ExecTrace* trace) {
  const index_t d = b.n_cols();
  const auto offsets = block_value_offsets(m.tc);
  const auto groups = logical_windows(m.tc);
  parallel_chunks(groups.size(), workers, [&](std::size_t begin, std::size_t end) {
    std::vector<Acc> acc(std::size_t{kTileDim} * d);
    for (std::size_t g = begin; g < end; ++g) {
      std::fill(acc.begin(), acc.end(), Acc{0});
      // Split segments accumulate into the same buffer in segment order.
      for (std::size_t e = groups[g].first; e <= groups[g].second; ++e) {
        exec_tc_window<Acc>(m, e, b, acc, offsets);
      }
      const index_t start = m.tc.row_window_id[groups[g].first];
      const index_t rows = m.entry_rows(groups[g].first);
      for (index_t i = 0; i < rows; ++i) {
        auto crow = c.row(start + i);
        for (index_t j = 0; j < d; ++j) crow[j] = static_cast<float>(acc[std::size_t{i} * d + j]);
        if (trace) ++trace->tc_writes[start + i];
      }
    }
  });
}

}  // namespace exec_detail

/// C = A * B with A in RS-Tile form. Each output row is produced by exactly
/// one worker in a fixed order, so results do not depend on num_workers.
inline DenseMatrix hybrid_spmm(const RsTileMatrix& m, const DenseMatrix& b, const ExecConfig& cfg = {},
                               ExecTrace* trace = nullptr) {
  if (cfg.num_workers < 1) throw ParameterError("hybrid_spmm: num_workers must be >= 1");
  if (m.n_cols != b.n_rows()) {
    throw DimensionError("hybrid_spmm: A has " + std::to_string(m.n_cols) + " columns but B has " +
                         std::to_string(b.n_rows()) + " rows");
  }
  require_valid(m);
  DenseMatrix c(m.n_rows, b.n_cols());
  if (trace) {
    trace->tc_writes.assign(m.n_rows, 0);
    trace->residual_writes.assign(m.n_rows, 0);
  }
  if (cfg.accumulate_precision == Precision::f64) {
    exec_detail::tc_path<double>(m, b, c, cfg.num_workers, trace);
  } else {
    exec_detail::tc_path<float>(m, b, c, cfg.num_workers, trace);
  }
  exec_residual(m, b, c, cfg.accumulate_precision, cfg.num_workers);
  if (trace) {
    for (index_t r : m.residual.row_id) ++trace->residual_writes[r];
  }
  if (cfg.check_against_oracle) {
    const double err = max_relative_error(c, oracle_spmm(decode_rstile(m), b));
    if (!(err <= 1e-5)) throw InvariantError("hybrid_spmm disagrees with the oracle: max relative error " + std::to_string(err));
  }
  return c;
}

}  // namespace rsh
