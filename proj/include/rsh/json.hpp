#pragma once

// JSON views of plans and reports (nlohmann/json).

#include <json.hpp>

#include "rsh/metrics.hpp"
#include "rsh/partition.hpp"
#include "rsh/rstile.hpp"
#include "rsh/sparse.hpp"

namespace rsh {

inline nlohmann::ordered_json plan_to_json(const PartitionPlan& plan) {
  nlohmann::ordered_json windows = nlohmann::ordered_json::array();
  for (const auto& w : plan.windows) {
    windows.push_back({{"start", w.start}, {"rows", w.rows}, {"segments", w.segments}});
  }
  return {{"windows", std::move(windows)}, {"residual", plan.residual_rows}};
}

inline PartitionPlan plan_from_json(const nlohmann::json& j) {
  PartitionPlan plan;
  for (const auto& w : j.at("windows")) {
    plan.windows.push_back({w.at("start").get<index_t>(), w.at("rows").get<index_t>(),
                            w.value("segments", std::vector<index_t>{})});
  }
  plan.residual_rows = j.at("residual").get<std::vector<index_t>>();
  return plan;
}

inline nlohmann::ordered_json to_json(const RowStats& s, const CsrMatrix& a) {
  return {{"n_rows", a.n_rows},
          {"n_cols", a.n_cols},
          {"nnz", a.nnz()},
          {"nnz_mean", s.nnz_mean},
          {"nnz_max", s.nnz_max},
          {"long_row_ratio_2x", s.long_row_ratio_2x},
          {"long_row_ratio_4x", s.long_row_ratio_4x}};
}

inline nlohmann::ordered_json to_json(const StorageReport& s) {
  return {{"coo_bytes", s.coo_bytes},       {"csr_bytes", s.csr_bytes},
          {"rstile_bytes", s.rstile_bytes}, {"tc_bytes", s.tc_bytes},
          {"residual_bytes", s.residual_bytes}, {"bitmap_bytes", s.bitmap_bytes},
          {"colid_bytes", s.colid_bytes},   {"offset_bytes", s.offset_bytes},
          {"rstile_vs_coo", s.coo_bytes ? static_cast<double>(s.rstile_bytes) / s.coo_bytes : 0.0}};
}

inline nlohmann::ordered_json to_json(const TileDensityReport& d) {
  return {{"mean_nnz_per_block", d.mean_nnz_per_block},
          {"mean_nnz_per_window", d.mean_nnz_per_window},
          {"block_count", d.block_count},
          {"window_count", d.window_count},
          {"residual_nnz_fraction", d.residual_nnz_fraction},
          {"residual_row_fraction", d.residual_row_fraction}};
}

inline nlohmann::ordered_json to_json(const std::vector<SweepPoint>& sweep) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& s : sweep) {
    auto row = to_json(s.density);
    row["tau"] = s.tau;
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace rsh
