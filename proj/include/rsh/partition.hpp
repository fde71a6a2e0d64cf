#pragma once

// Row-level TC/residual partitioning and block-range splitting of heavy windows.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rsh/error.hpp"
#include "rsh/parallel.hpp"
#include "rsh/sparse.hpp"

namespace rsh {

/// Edge length of a TC block (rows per block and compacted columns per block).
inline constexpr index_t kTileDim = 8;
inline constexpr index_t kUnboundedBlocks = std::numeric_limits<index_t>::max();

struct PartitionParams {
  index_t window_size = 8;
  std::optional<index_t> tau_nnz;  // empty: estimated from the matrix
  std::optional<index_t> tau_inc;
  /// Per-row trigger: windows holding a row with nnz > split_factor * mean
  /// are split even below max_blocks_per_item. Off unless split_long_rows.
  double split_factor = 4.0;
  bool split_long_rows = false;
  index_t max_blocks_per_item = 64;

  void check() const {
    if (window_size < 1 || window_size > kTileDim) throw ParameterError("partition: window_size must be in [1, 8]");
    if (!(split_factor > 1.0)) throw ParameterError("partition: split_factor must be > 1");
    if (max_blocks_per_item < 1) throw ParameterError("partition: max_blocks_per_item must be >= 1");
  }
};

struct Thresholds {
  index_t tau_nnz;
  index_t tau_inc;
  friend bool operator==(const Thresholds&, const Thresholds&) = default;
};

struct RowWindow {
  index_t start = 0;
  index_t rows = 0;
  /// Block counts of each split segment; empty when the window is not split.
  std::vector<index_t> segments;
  friend bool operator==(const RowWindow&, const RowWindow&) = default;
};

struct PartitionPlan {
  std::vector<RowWindow> windows;
  std::vector<index_t> residual_rows;
  friend bool operator==(const PartitionPlan&, const PartitionPlan&) = default;
};

/// tau_nnz = clamp(round(mean_nnz / 2), 2, 6), tau_inc = 2.
inline Thresholds estimate_thresholds(std::uint64_t n_rows, std::uint64_t nnz) {
  if (n_rows == 0) throw ParameterError("estimate_thresholds: n_rows must be > 0");
  const double half_mean = static_cast<double>(nnz) / static_cast<double>(n_rows) / 2.0;
  const auto tau = static_cast<index_t>(std::clamp<long long>(std::llround(half_mean), 2, 6));
  return {tau, 2};
}

inline Thresholds resolve_thresholds(const CsrMatrix& a, const PartitionParams& p) {
  const Thresholds est = a.n_rows > 0 ? estimate_thresholds(a.n_rows, a.nnz()) : Thresholds{2, 2};
  return {p.tau_nnz.value_or(est.tau_nnz), p.tau_inc.value_or(est.tau_inc)};
}

/// Number of columns of row r that no row in (r, r+w) uses.
inline index_t column_increment(const CsrMatrix& a, index_t r, index_t w) {
  if (r >= a.n_rows) throw DimensionError("column_increment: row out of range");
  const index_t last = static_cast<index_t>(std::min<std::uint64_t>(std::uint64_t{r} + w, a.n_rows));
  index_t fresh = 0;
  for (index_t c : a.row_cols(r)) {
    bool shared = false;
    for (index_t u = r + 1; u < last && !shared; ++u) {
      auto cols = a.row_cols(u);
      shared = std::binary_search(cols.begin(), cols.end(), c);
    }
    fresh += !shared;
  }
  return fresh;
}

/// Sequential scan: an empty row is skipped; a short row (nnz <= tau_nnz)
/// that adds fewer than tau_inc new columns to the window it would head
/// goes to the residual set; anything else opens a window of up to W rows.
inline PartitionPlan partition_rows(const CsrMatrix& a, const PartitionParams& p) {
  p.check();
  const Thresholds t = resolve_thresholds(a, p);
  PartitionPlan plan;
  index_t r = 0;
  while (r < a.n_rows) {
    const index_t nz = a.row_nnz(r);
    if (nz == 0) {
      ++r;
      continue;
    }
    if (nz <= t.tau_nnz && column_increment(a, r, p.window_size) < t.tau_inc) {
      plan.residual_rows.push_back(r);
      ++r;
    } else {
      const index_t rows = static_cast<index_t>(std::min<std::uint64_t>(p.window_size, a.n_rows - r));
      plan.windows.push_back({r, rows, {}});
      r += rows;
    }
  }
  return plan;
}

/// Distinct columns touched by rows [start, start+rows), ascending.
inline std::vector<index_t> window_columns(const CsrMatrix& a, index_t start, index_t rows) {
  std::vector<index_t> cols;
  for (index_t r = start; r < start + rows; ++r) {
    auto rc = a.row_cols(r);
    cols.insert(cols.end(), rc.begin(), rc.end());
  }
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
  return cols;
}

inline index_t projected_blocks(const CsrMatrix& a, const RowWindow& w) {
  const auto n = static_cast<index_t>(window_columns(a, w.start, w.rows).size());
  return (n + kTileDim - 1) / kTileDim;
}

/// Divides `blocks` into consecutive segments of at most `bound` blocks.
inline std::vector<index_t> segment_sizes(index_t blocks, index_t bound) {
  std::vector<index_t> seg;
  for (index_t left = blocks; left > 0;) {
    const index_t s = std::min(left, bound);
    seg.push_back(s);
    left -= s;
  }
  return seg;
}

/// Windows whose block count exceeds max_blocks_per_item get their block
/// range cut into segments; row membership is untouched.
inline PartitionPlan split_long_work(const CsrMatrix& a, const PartitionPlan& plan, const PartitionParams& p,
                                     std::size_t workers = 1) {
  p.check();
  PartitionPlan out = plan;
  const double mean = a.n_rows ? static_cast<double>(a.nnz()) / a.n_rows : 0.0;
  parallel_for(out.windows.size(), workers, [&](std::size_t i) {
    RowWindow& w = out.windows[i];
    const index_t blocks = projected_blocks(a, w);
    index_t bound = p.max_blocks_per_item;
    if (p.split_long_rows && blocks > 1) {
      index_t longest = 0;
      for (index_t r = w.start; r < w.start + w.rows; ++r) longest = std::max(longest, a.row_nnz(r));
      const double limit = p.split_factor * mean;
      if (longest > limit) {
        // One segment per multiple of the long-row limit the row reaches.
        const auto parts = static_cast<index_t>(std::ceil(longest / std::max(limit, 1.0)));
        bound = std::min(bound, std::max<index_t>(1, (blocks + parts - 1) / parts));
      }
    }
    w.segments = blocks > bound ? segment_sizes(blocks, bound) : std::vector<index_t>{};
  });
  return out;
}

/// Structural problems of `plan` relative to `a`; empty when sound.
inline std::vector<std::string> check_plan(const CsrMatrix& a, const PartitionPlan& plan) {
  std::vector<std::string> bad;
  std::vector<std::uint8_t> owner(a.n_rows, 0);
  std::uint64_t prev_end = 0;
  for (std::size_t i = 0; i < plan.windows.size(); ++i) {
    const auto& w = plan.windows[i];
    const std::string tag = "window " + std::to_string(i);
    if (w.rows == 0) bad.push_back(tag + ": zero rows");
    if (std::uint64_t{w.start} + w.rows > a.n_rows) {
      bad.push_back(tag + ": extends past the last row");
      continue;
    }
    if (w.start < prev_end) bad.push_back(tag + ": overlaps or precedes the previous window");
    prev_end = std::uint64_t{w.start} + w.rows;
    if (w.rows > 0 && a.row_nnz(w.start) == 0) bad.push_back(tag + ": starts on an empty row");
    for (index_t r = w.start; r < w.start + w.rows; ++r) ++owner[r];
    if (!w.segments.empty()) {
      std::uint64_t total = 0;
      for (index_t s : w.segments) {
        if (s == 0) bad.push_back(tag + ": empty segment");
        total += s;
      }
      if (total != projected_blocks(a, w)) bad.push_back(tag + ": segments do not cover the block range");
    }
  }
  for (std::size_t i = 0; i < plan.residual_rows.size(); ++i) {
    const index_t r = plan.residual_rows[i];
    if (r >= a.n_rows) {
      bad.push_back("residual row " + std::to_string(r) + " out of range");
      continue;
    }
    if (i > 0 && r <= plan.residual_rows[i - 1]) bad.push_back("residual rows not strictly increasing at " + std::to_string(r));
    if (a.row_nnz(r) == 0) bad.push_back("residual row " + std::to_string(r) + " is empty");
    ++owner[r];
  }
  for (index_t r = 0; r < a.n_rows; ++r) {
    if (a.row_nnz(r) > 0 && owner[r] != 1) {
      bad.push_back("row " + std::to_string(r) + " assigned " + std::to_string(owner[r]) + " times");
    }
  }
  return bad;
}

/// Nonzeros inside window row ranges and inside residual rows.
struct PlanNnz {
  std::uint64_t window_nnz = 0;
  std::uint64_t residual_nnz = 0;
};

inline PlanNnz plan_nnz(const CsrMatrix& a, const PartitionPlan& plan) {
  PlanNnz n;
  for (const auto& w : plan.windows) n.window_nnz += a.row_ptr[w.start + w.rows] - a.row_ptr[w.start];
  for (index_t r : plan.residual_rows) n.residual_nnz += a.row_nnz(r);
  return n;
}

}  // namespace rsh
