#pragma once

#include <bit>
#include <cstdint>
#include <ostream>
#include <vector>

#include "rsh/error.hpp"
#include "rsh/partition.hpp"
#include "rsh/reorder.hpp"
#include "rsh/rstile.hpp"
#include "rsh/sparse.hpp"

namespace rsh {

/// Tiling quality of an RS-Tile matrix. Padding slots never count as nonzeros.
struct TileDensityReport {
  double mean_nnz_per_block = 0.0;
  double mean_nnz_per_window = 0.0;
  std::uint64_t block_count = 0;
  std::uint64_t window_count = 0;  // logical windows; split segments count once
  double residual_nnz_fraction = 0.0;
  double residual_row_fraction = 0.0;
  std::uint64_t tc_nnz = 0;
  std::uint64_t residual_nnz = 0;
  friend bool operator==(const TileDensityReport&, const TileDensityReport&) = default;
};

inline TileDensityReport tile_density(const RsTileMatrix& m) {
  TileDensityReport r;
  const auto& tc = m.tc;
  r.block_count = tc.blocks();
  r.tc_nnz = 0;
  for (auto bits : tc.bitmaps) r.tc_nnz += static_cast<unsigned>(std::popcount(bits));
  r.residual_nnz = m.residual.values.size();

  std::uint64_t tc_rows_with_nnz = 0;
  for (std::size_t e = 0; e < tc.entries();) {
    std::size_t last = e;
    while (last + 1 < tc.entries() && tc.row_window_id[last + 1] == tc.row_window_id[e]) ++last;
    ++r.window_count;
    std::uint8_t occupied = 0;
    for (std::size_t t = tc.row_window_offset[e]; t < tc.row_window_offset[last + 1]; ++t) {
      for (index_t i = 0; i < kTileDim; ++i) {
        if ((tc.bitmaps[t] >> (i * kTileDim)) & 0xFF) occupied |= static_cast<std::uint8_t>(1u << i);
      }
    }
    tc_rows_with_nnz += static_cast<unsigned>(std::popcount(occupied));
    e = last + 1;
  }
  if (r.block_count) r.mean_nnz_per_block = static_cast<double>(r.tc_nnz) / r.block_count;
  if (r.window_count) r.mean_nnz_per_window = static_cast<double>(r.tc_nnz) / r.window_count;
  if (const auto total = r.tc_nnz + r.residual_nnz) r.residual_nnz_fraction = static_cast<double>(r.residual_nnz) / total;
  if (const auto rows = tc_rows_with_nnz + m.residual.rows()) {
    r.residual_row_fraction = static_cast<double>(m.residual.rows()) / rows;
  }
  return r;
}

/// partition -> split -> build, as used by every driver.
inline RsTileMatrix encode(const CsrMatrix& a, const PartitionParams& p, std::size_t workers = 1) {
  const PartitionPlan plan = split_long_work(a, partition_rows(a, p), p, workers);
  return build_rstile(a, plan, p.window_size, workers);
}

struct SweepPoint {
  index_t tau;
  TileDensityReport density;
};

/// Density of the RS-Tile encoding for each tau_nnz override.
inline std::vector<SweepPoint> threshold_sweep(const CsrMatrix& a, const std::vector<index_t>& tau_values,
                                               const PartitionParams& p, std::size_t workers = 1) {
  if (tau_values.empty()) throw ParameterError("threshold_sweep: no tau values");
  std::vector<SweepPoint> out(tau_values.size());
  parallel_for(tau_values.size(), workers, [&](std::size_t i) {
    PartitionParams q = p;
    q.tau_nnz = tau_values[i];
    out[i] = {tau_values[i], tile_density(encode(a, q))};
  });
  return out;
}

inline constexpr const char* kSweepCsvHeader = "tau,mean_nnz_per_block,mean_nnz_per_window,residual_nnz_fraction";

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& sweep) {
  const auto old_precision = out.precision(17);
  out << kSweepCsvHeader << '\n';
  for (const auto& s : sweep) {
    out << s.tau << ',' << s.density.mean_nnz_per_block << ',' << s.density.mean_nnz_per_window << ','
        << s.density.residual_nnz_fraction << '\n';
  }
  out.precision(old_precision);
}

struct ReorderGain {
  double objective_before = 0.0;
  double objective_after = 0.0;
  std::uint64_t block_count_before = 0;
  std::uint64_t block_count_after = 0;
};

/// Objectives and TC block counts of `a` under two row orders, same partition params.
inline ReorderGain reorder_gain(const CsrMatrix& a, std::span<const index_t> before, std::span<const index_t> after,
                                const PartitionParams& p, double alpha = 0.5) {
  if (!is_permutation_of(before, a.n_rows) || !is_permutation_of(after, a.n_rows)) {
    throw DimensionError("reorder_gain: orders must be permutations of the matrix rows");
  }
  const ColumnWeights w = column_weights(a, alpha);
  ReorderGain g;
  g.objective_before = ordering_objective(a, w, before);
  g.objective_after = ordering_objective(a, w, after);
  g.block_count_before = encode(permute_rows(a, before), p).tc.blocks();
  g.block_count_after = encode(permute_rows(a, after), p).tc.blocks();
  return g;
}

}  // namespace rsh
