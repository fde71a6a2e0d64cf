#include <gtest/gtest.h>

#include <algorithm>

#include "rsh/json.hpp"
#include "rsh/rsh.hpp"
#include "test_util.hpp"

using namespace rsh;
using rsh_test::from_rows;

namespace {

std::vector<index_t> all_cols(index_t n) {
  std::vector<index_t> v(n);
  for (index_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

PartitionParams fixed(index_t tau_nnz, index_t tau_inc, index_t w = 8) {
  PartitionParams p;
  p.window_size = w;
  p.tau_nnz = tau_nnz;
  p.tau_inc = tau_inc;
  return p;
}

}  // namespace

TEST(Thresholds, Rule) {
  EXPECT_EQ(estimate_thresholds(10, 80), (Thresholds{4, 2}));
  EXPECT_EQ(estimate_thresholds(10, 10), (Thresholds{2, 2}));
  EXPECT_EQ(estimate_thresholds(10, 1000), (Thresholds{6, 2}));
  EXPECT_EQ(estimate_thresholds(10, 0), (Thresholds{2, 2}));
  EXPECT_EQ(estimate_thresholds(2, 14).tau_nnz, 4u);  // 3.5 rounds half away from zero
  EXPECT_THROW(estimate_thresholds(0, 5), ParameterError);
}

TEST(Thresholds, OverridesWin) {
  auto a = from_rows(8, std::vector<std::vector<index_t>>(4, all_cols(8)));
  PartitionParams p;
  EXPECT_EQ(resolve_thresholds(a, p), (Thresholds{4, 2}));
  p.tau_inc = 5;
  EXPECT_EQ(resolve_thresholds(a, p), (Thresholds{4, 5}));
}

TEST(Increment, Examples) {
  auto a = from_rows(6, {{1, 2}, {2, 3}, {3, 4}, {}});
  EXPECT_EQ(column_increment(a, 0, 3), 1u);
  EXPECT_EQ(column_increment(a, 3, 3), 0u);
  EXPECT_EQ(column_increment(a, 2, 8), 2u);  // rows past the end count as empty
  EXPECT_EQ(column_increment(a, 0, 1), 2u);
  EXPECT_THROW(column_increment(a, 4, 2), DimensionError);
}

TEST(Increment, MatchesSetOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = rsh_test::small_power_law(64, 0.08, 1.5, seed);
    for (index_t w = 1; w <= 8; ++w) {
      for (index_t r = 0; r < a.n_rows; ++r) {
        const index_t d = column_increment(a, r, w);
        ASSERT_EQ(d, rsh_test::naive_increment(a, r, w));
        ASSERT_LE(d, a.row_nnz(r));
      }
    }
  }
}

TEST(Partition, DenseMatrixHasNoResidual) {
  auto a = from_rows(8, std::vector<std::vector<index_t>>(20, all_cols(8)));
  auto plan = partition_rows(a, PartitionParams{});
  EXPECT_TRUE(plan.residual_rows.empty());
  ASSERT_EQ(plan.windows.size(), 3u);
  EXPECT_EQ(plan.windows[2].start, 16u);
  EXPECT_EQ(plan.windows[2].rows, 4u);
}

TEST(Partition, AllEmptyRows) {
  auto a = from_rows(4, {{}, {}, {}});
  auto plan = partition_rows(a, PartitionParams{});
  EXPECT_TRUE(plan.windows.empty());
  EXPECT_TRUE(plan.residual_rows.empty());
}

TEST(Partition, NineRowExample) {
  std::vector<std::vector<index_t>> rows(8, all_cols(8));
  rows.push_back({20});
  auto a = from_rows(21, rows);
  auto plan = partition_rows(a, fixed(2, 2));
  ASSERT_EQ(plan.windows.size(), 1u);
  EXPECT_EQ(plan.windows[0].start, 0u);
  EXPECT_EQ(plan.windows[0].rows, 8u);
  EXPECT_EQ(plan.residual_rows, (std::vector<index_t>{8}));
}

TEST(Partition, TauZeroKeepsEverythingInWindows) {
  const auto a = rsh_test::small_power_law(200, 0.02, 1.2, 4);
  auto plan = partition_rows(a, fixed(0, 2));
  EXPECT_TRUE(plan.residual_rows.empty());
  EXPECT_EQ(plan_nnz(a, plan).window_nnz, a.nnz());
}

TEST(Partition, MatchesRecursiveOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = rsh_test::small_power_law(150, 0.03, 1.2 + 0.05 * (seed % 10), seed);
    for (index_t tau = 0; tau <= 6; tau += 2) {
      for (index_t w : {1u, 4u, 8u}) {
        PartitionPlan expect;
        rsh_test::naive_partition(a, 0, w, tau, 2, expect);
        ASSERT_EQ(partition_rows(a, fixed(tau, 2, w)), expect) << "seed " << seed << " tau " << tau << " w " << w;
      }
    }
  }
}

TEST(Partition, ParameterChecks) {
  auto a = from_rows(2, {{0}});
  PartitionParams p;
  p.window_size = 0;
  EXPECT_THROW(partition_rows(a, p), ParameterError);
  p.window_size = 9;
  EXPECT_THROW(partition_rows(a, p), ParameterError);
  p = {};
  p.split_factor = 1.0;
  EXPECT_THROW(partition_rows(a, p), ParameterError);
  p = {};
  p.max_blocks_per_item = 0;
  EXPECT_THROW(partition_rows(a, p), ParameterError);
}

TEST(Partition, SoundnessOnRandomMatrices) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto a = rsh_test::small_power_law(300, 0.01 + 0.002 * seed, 1.2 + 0.03 * seed, seed);
    PartitionParams p;
    p.max_blocks_per_item = 1 + seed % 5;
    const auto plan = split_long_work(a, partition_rows(a, p), p);
    EXPECT_TRUE(check_plan(a, plan).empty());
    const auto n = plan_nnz(a, plan);
    EXPECT_EQ(n.window_nnz + n.residual_nnz, a.nnz());
  }
}

TEST(Partition, CheckPlanFindsViolations) {
  auto a = from_rows(4, {{0}, {1}, {}, {3}});
  PartitionPlan dup{{{0, 2, {}}}, {1, 3}};
  EXPECT_FALSE(check_plan(a, dup).empty());
  PartitionPlan missing{{{0, 2, {}}}, {}};
  EXPECT_FALSE(check_plan(a, missing).empty());
  PartitionPlan empty_residual{{{0, 2, {}}}, {2, 3}};
  EXPECT_FALSE(check_plan(a, empty_residual).empty());
  PartitionPlan past_end{{{0, 2, {}}, {3, 2, {}}}, {}};
  EXPECT_FALSE(check_plan(a, past_end).empty());
  PartitionPlan good{{{0, 2, {}}}, {3}};
  EXPECT_TRUE(check_plan(a, good).empty());
}

TEST(Partition, ResidualCountMonotoneInTau) {
  int violations = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = rsh_test::small_power_law(400, 0.01, 1.5, seed);
    std::size_t prev = 0;
    for (index_t tau = 0; tau <= 8; ++tau) {
      const auto n = partition_rows(a, fixed(tau, 2)).residual_rows.size();
      if (n < prev) ++violations;
      prev = n;
    }
  }
  EXPECT_EQ(violations, 0);
}

TEST(Split, SegmentSizes) {
  EXPECT_EQ(segment_sizes(130, 64), (std::vector<index_t>{64, 64, 2}));
  EXPECT_EQ(segment_sizes(3, 1), (std::vector<index_t>{1, 1, 1}));
  EXPECT_EQ(segment_sizes(64, 64), (std::vector<index_t>{64}));
}

TEST(Split, WideWindowIsCut) {
  // one row with 1040 columns -> 130 blocks
  auto a = from_rows(1040, {all_cols(1040)});
  PartitionParams p;
  auto plan = split_long_work(a, partition_rows(a, p), p);
  ASSERT_EQ(plan.windows.size(), 1u);
  EXPECT_EQ(plan.windows[0].segments, (std::vector<index_t>{64, 64, 2}));
  p.max_blocks_per_item = kUnboundedBlocks;
  EXPECT_TRUE(split_long_work(a, partition_rows(a, p), p).windows[0].segments.empty());
}

TEST(Split, MembershipUnchanged) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = rsh_test::small_power_law(256, 0.05, 1.2, seed);
    PartitionParams p;
    const auto base = partition_rows(a, p);
    for (index_t bound : {1u, 2u, 8u, 64u}) {
      p.max_blocks_per_item = bound;
      const auto split = split_long_work(a, base, p, 1 + seed % 3);
      ASSERT_EQ(split.residual_rows, base.residual_rows);
      ASSERT_EQ(split.windows.size(), base.windows.size());
      for (std::size_t i = 0; i < base.windows.size(); ++i) {
        const auto& w = split.windows[i];
        ASSERT_EQ(w.start, base.windows[i].start);
        ASSERT_EQ(w.rows, base.windows[i].rows);
        const index_t blocks = projected_blocks(a, w);
        if (blocks > bound) {
          ASSERT_EQ(w.segments, segment_sizes(blocks, bound));
        } else {
          ASSERT_TRUE(w.segments.empty());
        }
        if (bound == 1) {
          ASSERT_TRUE(blocks <= 1 || w.segments.size() == blocks);
        }
      }
      EXPECT_TRUE(check_plan(a, split).empty());
    }
  }
}

TEST(Split, LongRowTrigger) {
  // row 0 has 64 nnz, rows 1..15 have 1 nnz: mean = 79/16
  std::vector<std::vector<index_t>> rows{all_cols(64)};
  for (index_t i = 1; i < 16; ++i) rows.push_back({i});
  auto a = from_rows(64, rows);
  PartitionParams p;
  p.tau_nnz = 0;
  p.split_long_rows = true;
  auto plan = split_long_work(a, partition_rows(a, p), p);
  ASSERT_EQ(plan.windows.size(), 2u);
  // 64 > 4 * 4.9375 -> parts = ceil(64 / 19.75) = 4 -> 8 blocks split by 2
  EXPECT_EQ(plan.windows[0].segments, (std::vector<index_t>{2, 2, 2, 2}));
  EXPECT_TRUE(plan.windows[1].segments.empty());
  p.split_long_rows = false;
  EXPECT_TRUE(split_long_work(a, partition_rows(a, p), p).windows[0].segments.empty());
}

TEST(PlanJson, RoundTrip) {
  const auto a = rsh_test::small_power_law(128, 0.05, 1.2, 2);
  PartitionParams p;
  p.max_blocks_per_item = 2;
  const auto plan = split_long_work(a, partition_rows(a, p), p);
  const auto j = plan_to_json(plan);
  EXPECT_TRUE(j.contains("windows"));
  EXPECT_TRUE(j.contains("residual"));
  EXPECT_EQ(plan_from_json(nlohmann::json::parse(j.dump())), plan);
}
