#pragma once

// RS-Tile: row windows compacted onto their distinct columns and cut into
// bitmap-encoded 8x8 blocks, plus a plain list of residual rows.
//
// Bit b of a block bitmap is local position (b / 8, b % 8): row-major with
// bit 0 (LSB) at (0, 0). Block values are stored in ascending bit order.
// Column slots past a window's last distinct column hold column 0 and have no
// bits set.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rsh/binary_io.hpp"
#include "rsh/error.hpp"
#include "rsh/parallel.hpp"
#include "rsh/partition.hpp"
#include "rsh/sparse.hpp"

namespace rsh {

struct TcPart {
  std::vector<index_t> row_window_id;      // first row of each window entry
  std::vector<index_t> row_window_offset;  // block prefix sums, entries + 1
  std::vector<std::uint64_t> bitmaps;      // one per block
  std::vector<index_t> col_id;             // kTileDim per block
  std::vector<float> values;

  std::size_t entries() const noexcept { return row_window_id.size(); }
  std::size_t blocks() const noexcept { return bitmaps.size(); }
  friend bool operator==(const TcPart&, const TcPart&) = default;
};

struct ResidualPart {
  std::vector<index_t> row_id;
  std::vector<index_t> row_nnz_offset{0};
  std::vector<index_t> col_id;
  std::vector<float> values;

  std::size_t rows() const noexcept { return row_id.size(); }
  friend bool operator==(const ResidualPart&, const ResidualPart&) = default;
};

struct RsTileMatrix {
  index_t n_rows = 0;
  index_t n_cols = 0;
  index_t window_size = kTileDim;
  TcPart tc;
  ResidualPart residual;

  /// Rows covered by the window entry (clamped at the matrix edge).
  index_t entry_rows(std::size_t e) const noexcept {
    return std::min<index_t>(window_size, n_rows - std::min(n_rows, tc.row_window_id[e]));
  }
  friend bool operator==(const RsTileMatrix&, const RsTileMatrix&) = default;
};

namespace rstile_detail {

struct WindowTiles {
  std::vector<std::uint64_t> bitmaps;
  std::vector<index_t> col_id;
  std::vector<float> values;
};

inline WindowTiles tile_window(const CsrMatrix& a, const RowWindow& w) {
  const std::vector<index_t> cols = window_columns(a, w.start, w.rows);
  const std::size_t blocks = (cols.size() + kTileDim - 1) / kTileDim;
  WindowTiles t;
  t.bitmaps.assign(blocks, 0);
  t.col_id.assign(blocks * kTileDim, 0);
  std::copy(cols.begin(), cols.end(), t.col_id.begin());

  std::vector<std::size_t> per_block(blocks + 1, 0);
  for (index_t r = w.start; r < w.start + w.rows; ++r) {
    for (index_t c : a.row_cols(r)) {
      const auto pos = static_cast<std::size_t>(std::lower_bound(cols.begin(), cols.end(), c) - cols.begin());
      const std::size_t b = (r - w.start) * kTileDim + pos % kTileDim;
      t.bitmaps[pos / kTileDim] |= std::uint64_t{1} << b;
      ++per_block[pos / kTileDim + 1];
    }
  }
  for (std::size_t b = 0; b < blocks; ++b) per_block[b + 1] += per_block[b];
  // Row-major scan visits each block's entries in ascending bit order.
  t.values.resize(per_block[blocks]);
  for (index_t r = w.start; r < w.start + w.rows; ++r) {
    auto rc = a.row_cols(r);
    auto rv = a.row_values(r);
    for (std::size_t k = 0; k < rc.size(); ++k) {
      const auto pos = static_cast<std::size_t>(std::lower_bound(cols.begin(), cols.end(), rc[k]) - cols.begin());
      t.values[per_block[pos / kTileDim]++] = rv[k];
    }
  }
  return t;
}

}  // namespace rstile_detail

/// Encodes `a` under `plan`. Split windows become several consecutive
/// entries sharing one row_window_id.
inline RsTileMatrix build_rstile(const CsrMatrix& a, const PartitionPlan& plan, index_t window_size = kTileDim,
                                 std::size_t workers = 1) {
  if (window_size < 1 || window_size > kTileDim) throw ParameterError("build_rstile: window_size must be in [1, 8]");
  check_extent(a.n_rows, "n_rows");
  check_extent(a.n_cols, "n_cols");
  check_extent(a.nnz(), "nnz");
  if (auto bad = check_plan(a, plan); !bad.empty()) throw FormatError("plan does not match matrix: " + bad.front());
  for (const auto& w : plan.windows) {
    if (w.rows > window_size) throw FormatError("plan window at row " + std::to_string(w.start) + " exceeds window_size");
  }

  std::vector<rstile_detail::WindowTiles> tiles(plan.windows.size());
  parallel_for(plan.windows.size(), workers, [&](std::size_t i) { tiles[i] = rstile_detail::tile_window(a, plan.windows[i]); });

  RsTileMatrix m;
  m.n_rows = a.n_rows;
  m.n_cols = a.n_cols;
  m.window_size = window_size;
  auto& tc = m.tc;
  tc.row_window_offset.assign(1, 0);
  for (std::size_t i = 0; i < plan.windows.size(); ++i) {
    const auto& w = plan.windows[i];
    const auto& t = tiles[i];
    const index_t base = tc.row_window_offset.back();
    if (w.segments.empty()) {
      tc.row_window_id.push_back(w.start);
      tc.row_window_offset.push_back(base + static_cast<index_t>(t.bitmaps.size()));
    } else {
      index_t off = base;
      for (index_t s : w.segments) {
        off += s;
        tc.row_window_id.push_back(w.start);
        tc.row_window_offset.push_back(off);
      }
    }
    tc.bitmaps.insert(tc.bitmaps.end(), t.bitmaps.begin(), t.bitmaps.end());
    tc.col_id.insert(tc.col_id.end(), t.col_id.begin(), t.col_id.end());
    tc.values.insert(tc.values.end(), t.values.begin(), t.values.end());
  }

  auto& res = m.residual;
  for (index_t r : plan.residual_rows) {
    res.row_id.push_back(r);
    auto rc = a.row_cols(r);
    auto rv = a.row_values(r);
    res.col_id.insert(res.col_id.end(), rc.begin(), rc.end());
    res.values.insert(res.values.end(), rv.begin(), rv.end());
    res.row_nnz_offset.push_back(static_cast<index_t>(res.col_id.size()));
  }
  return m;
}

/// Every violated structural invariant, one message each; empty when valid.
inline std::vector<std::string> validate(const RsTileMatrix& m) {
  std::vector<std::string> bad;
  const auto& tc = m.tc;
  if (m.window_size < 1 || m.window_size > kTileDim) bad.push_back("window_size must be in [1, 8]");
  if (tc.row_window_offset.size() != tc.entries() + 1) {
    bad.push_back("row_window_offset length != window entries + 1");
    return bad;
  }
  if (tc.row_window_offset.front() != 0) bad.push_back("row_window_offset[0] != 0");
  for (std::size_t e = 0; e < tc.entries(); ++e) {
    if (tc.row_window_offset[e + 1] < tc.row_window_offset[e]) {
      bad.push_back("row_window_offset not monotone at entry " + std::to_string(e));
    }
  }
  if (tc.row_window_offset.back() != tc.blocks()) bad.push_back("row_window_offset last != block count");
  if (tc.col_id.size() != tc.blocks() * kTileDim) bad.push_back("col_id length != 8 * block count");
  if (!bad.empty()) return bad;

  std::uint64_t running = 0;
  bool value_mismatch = false;
  for (std::size_t t = 0; t < tc.blocks(); ++t) {
    running += static_cast<unsigned>(std::popcount(tc.bitmaps[t]));
    if (running > tc.values.size() && !value_mismatch) {
      bad.push_back("block " + std::to_string(t) + ": popcount runs past the value array (" +
                    std::to_string(tc.values.size()) + " values)");
      value_mismatch = true;
    }
  }
  if (!value_mismatch && running != tc.values.size()) {
    bad.push_back("block " + std::to_string(tc.blocks() ? tc.blocks() - 1 : 0) + ": popcount sum " +
                  std::to_string(running) + " != value count " + std::to_string(tc.values.size()));
  }
  for (std::size_t i = 0; i < tc.col_id.size(); ++i) {
    if (tc.col_id[i] >= m.n_cols) {
      bad.push_back("block " + std::to_string(i / kTileDim) + ": col_id " + std::to_string(tc.col_id[i]) + " >= n_cols");
      break;
    }
  }

  std::vector<std::uint8_t> tc_row(m.n_rows, 0);
  std::uint64_t prev_end = 0;
  for (std::size_t e = 0; e < tc.entries();) {
    const index_t start = tc.row_window_id[e];
    std::size_t last = e;
    while (last + 1 < tc.entries() && tc.row_window_id[last + 1] == start) ++last;
    const std::string tag = "window entry " + std::to_string(e);
    if (start >= m.n_rows) {
      bad.push_back(tag + ": row_window_id out of range");
      e = last + 1;
      continue;
    }
    if (start < prev_end) bad.push_back(tag + ": window overlaps or precedes the previous window");
    const index_t rows = m.entry_rows(e);
    prev_end = std::uint64_t{start} + rows;
    for (index_t r = start; r < start + rows; ++r) tc_row[r] = 1;
    const std::uint64_t row_mask = rows >= kTileDim ? ~std::uint64_t{0} : (std::uint64_t{1} << (rows * kTileDim)) - 1;
    bool have_prev = false;
    index_t prev_col = 0;
    for (std::size_t t = tc.row_window_offset[e]; t < tc.row_window_offset[last + 1]; ++t) {
      if (tc.bitmaps[t] & ~row_mask) bad.push_back("block " + std::to_string(t) + ": bits set past the window's last row");
      for (index_t s = 0; s < kTileDim; ++s) {
        std::uint64_t column_bits = 0;
        for (index_t lr = 0; lr < kTileDim; ++lr) column_bits |= tc.bitmaps[t] & (std::uint64_t{1} << (lr * kTileDim + s));
        if (!column_bits) continue;
        const index_t c = tc.col_id[t * kTileDim + s];
        if (have_prev && c <= prev_col) {
          bad.push_back("block " + std::to_string(t) + ": occupied columns not strictly increasing within the window");
        }
        have_prev = true;
        prev_col = c;
      }
    }
    e = last + 1;
  }

  const auto& res = m.residual;
  if (res.row_nnz_offset.size() != res.rows() + 1 || res.row_nnz_offset.front() != 0 ||
      res.row_nnz_offset.back() != res.col_id.size() || res.col_id.size() != res.values.size()) {
    bad.push_back("residual offsets inconsistent with col_id/values length");
    return bad;
  }
  for (std::size_t i = 0; i < res.rows(); ++i) {
    const index_t r = res.row_id[i];
    const std::string tag = "residual row " + std::to_string(r);
    if (r >= m.n_rows) {
      bad.push_back(tag + ": out of range");
      continue;
    }
    if (i > 0 && r <= res.row_id[i - 1]) bad.push_back(tag + ": row_id not strictly increasing");
    if (tc_row[r]) bad.push_back(tag + ": also covered by a TC window");
    const index_t b = res.row_nnz_offset[i], e = res.row_nnz_offset[i + 1];
    if (e < b) {
      bad.push_back(tag + ": offsets decrease");
      continue;
    }
    if (e == b) bad.push_back(tag + ": empty");
    for (index_t k = b; k < e; ++k) {
      if (res.col_id[k] >= m.n_cols) bad.push_back(tag + ": column out of range");
      if (k > b && res.col_id[k] <= res.col_id[k - 1]) bad.push_back(tag + ": columns not strictly increasing");
    }
  }
  return bad;
}

inline void require_valid(const RsTileMatrix& m) {
  if (auto bad = validate(m); !bad.empty()) throw FormatError("corrupt RS-Tile: " + bad.front());
}

/// Reconstructs the canonical CSR matrix.
inline CsrMatrix decode_rstile(const RsTileMatrix& m) {
  require_valid(m);
  CooMatrix coo{m.n_rows, m.n_cols, {}};
  coo.entries.reserve(m.tc.values.size() + m.residual.values.size());
  std::size_t cursor = 0;
  for (std::size_t e = 0; e < m.tc.entries(); ++e) {
    const index_t start = m.tc.row_window_id[e];
    for (std::size_t t = m.tc.row_window_offset[e]; t < m.tc.row_window_offset[e + 1]; ++t) {
      for (std::uint64_t bits = m.tc.bitmaps[t]; bits; bits &= bits - 1) {
        const auto b = static_cast<index_t>(std::countr_zero(bits));
        coo.entries.push_back({start + b / kTileDim, m.tc.col_id[t * kTileDim + b % kTileDim], m.tc.values[cursor++]});
      }
    }
  }
  for (std::size_t i = 0; i < m.residual.rows(); ++i) {
    for (index_t k = m.residual.row_nnz_offset[i]; k < m.residual.row_nnz_offset[i + 1]; ++k) {
      coo.entries.push_back({m.residual.row_id[i], m.residual.col_id[k], m.residual.values[k]});
    }
  }
  return coo.to_csr();
}

struct StorageReport {
  std::uint64_t coo_bytes = 0;
  std::uint64_t csr_bytes = 0;
  std::uint64_t rstile_bytes = 0;
  std::uint64_t tc_bytes = 0;
  std::uint64_t residual_bytes = 0;
  std::uint64_t bitmap_bytes = 0;
  std::uint64_t colid_bytes = 0;   // TC col_id only
  std::uint64_t offset_bytes = 0;  // TC row_window_offset only
  friend bool operator==(const StorageReport&, const StorageReport&) = default;
};

/// Byte accounting with 4-byte indices and values, 8-byte bitmaps.
inline StorageReport storage_report(const CsrMatrix& a, const RsTileMatrix& m) {
  StorageReport s;
  const std::uint64_t nnz = a.nnz();
  const std::uint64_t entries = m.tc.entries(), blocks = m.tc.blocks(), tc_values = m.tc.values.size();
  const std::uint64_t res_rows = m.residual.rows(), res_nnz = m.residual.values.size();
  s.coo_bytes = nnz * 12;
  s.csr_bytes = nnz * 8 + (std::uint64_t{a.n_rows} + 1) * 4;
  s.bitmap_bytes = blocks * 8;
  s.colid_bytes = blocks * kTileDim * 4;
  s.offset_bytes = (entries + 1) * 4;
  s.tc_bytes = entries * 4 + s.offset_bytes + s.bitmap_bytes + s.colid_bytes + tc_values * 4;
  s.residual_bytes = res_rows * 4 + res_nnz * 8 + (res_rows + 1) * 4;
  s.rstile_bytes = s.tc_bytes + s.residual_bytes;
  return s;
}

inline constexpr std::uint16_t kRsTileVersion = 1;
inline constexpr std::size_t kRsTileHeaderBytes = 48;

/// Header then TcPart arrays then ResidualPart arrays, little-endian, packed.
inline std::vector<std::uint8_t> serialize_rstile(const RsTileMatrix& m) {
  ByteWriter w;
  w.put_magic("RSTL");
  w.put<std::uint16_t>(kRsTileVersion);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(m.window_size));
  w.put<std::uint32_t>(m.n_rows);
  w.put<std::uint32_t>(m.n_cols);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.tc.entries()));
  w.put<std::uint64_t>(m.tc.blocks());
  w.put<std::uint64_t>(m.tc.values.size());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.residual.rows()));
  w.put<std::uint64_t>(m.residual.values.size());
  w.put_array<index_t>(m.tc.row_window_id);
  w.put_array<index_t>(m.tc.row_window_offset);
  w.put_array<std::uint64_t>(m.tc.bitmaps);
  w.put_array<index_t>(m.tc.col_id);
  w.put_array<float>(m.tc.values);
  w.put_array<index_t>(m.residual.row_id);
  w.put_array<index_t>(m.residual.row_nnz_offset);
  w.put_array<index_t>(m.residual.col_id);
  w.put_array<float>(m.residual.values);
  return w.bytes();
}

inline bool has_rstile_magic(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 4 && bytes[0] == 'R' && bytes[1] == 'S' && bytes[2] == 'T' && bytes[3] == 'L';
}

inline RsTileMatrix deserialize_rstile(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (!r.magic_is("RSTL")) throw FormatError("not an RS-Tile file (bad magic)");
  if (const auto v = r.get<std::uint16_t>(); v != kRsTileVersion) throw FormatError("unsupported RS-Tile version " + std::to_string(v));
  RsTileMatrix m;
  m.window_size = r.get<std::uint16_t>();
  m.n_rows = r.get<std::uint32_t>();
  m.n_cols = r.get<std::uint32_t>();
  const auto entries = r.get<std::uint32_t>();
  const auto blocks = r.get<std::uint64_t>();
  const auto tc_values = r.get<std::uint64_t>();
  const auto res_rows = r.get<std::uint32_t>();
  const auto res_nnz = r.get<std::uint64_t>();
  m.tc.row_window_id = r.get_array<index_t>(entries);
  m.tc.row_window_offset = r.get_array<index_t>(std::uint64_t{entries} + 1);
  m.tc.bitmaps = r.get_array<std::uint64_t>(blocks);
  m.tc.col_id = r.get_array<index_t>(blocks * kTileDim);
  m.tc.values = r.get_array<float>(tc_values);
  m.residual.row_id = r.get_array<index_t>(res_rows);
  m.residual.row_nnz_offset = r.get_array<index_t>(std::uint64_t{res_rows} + 1);
  m.residual.col_id = r.get_array<index_t>(res_nnz);
  m.residual.values = r.get_array<float>(res_nnz);
  if (r.remaining() != 0) throw FormatError("trailing bytes after RS-Tile arrays");
  require_valid(m);
  return m;
}

inline void write_rstile(const std::filesystem::path& path, const RsTileMatrix& m) {
  write_file_bytes(path, serialize_rstile(m));
}

inline RsTileMatrix read_rstile(const std::filesystem::path& path) { return deserialize_rstile(read_file_bytes(path)); }

}  // namespace rsh
