#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "rsh/rsh.hpp"
#include "test_util.hpp"

using namespace rsh;
using rsh_test::from_rows;

namespace {

RsTileMatrix encode_default(const CsrMatrix& a, index_t max_blocks = 64) {
  PartitionParams p;
  p.max_blocks_per_item = max_blocks;
  return encode(a, p);
}

/// Bit-by-bit reference encoding of the TC part for an unsplit plan.
TcPart reference_tc(const CsrMatrix& a, const PartitionPlan& plan) {
  const auto d = rsh_test::dense_of(a);
  TcPart tc;
  tc.row_window_offset.push_back(0);
  for (const auto& w : plan.windows) {
    std::set<index_t> cols;
    for (index_t r = w.start; r < w.start + w.rows; ++r) {
      auto s = rsh_test::col_set(a, r);
      cols.insert(s.begin(), s.end());
    }
    std::vector<index_t> list(cols.begin(), cols.end());
    const std::size_t blocks = (list.size() + 7) / 8;
    for (std::size_t t = 0; t < blocks; ++t) {
      std::uint64_t bits = 0;
      for (index_t bit = 0; bit < 64; ++bit) {
        const index_t lr = bit / 8, lc = bit % 8;
        const std::size_t pos = t * 8 + lc;
        if (lr >= w.rows || pos >= list.size()) continue;
        if (rsh_test::col_set(a, w.start + lr).count(list[pos])) {
          bits |= std::uint64_t{1} << bit;
          tc.values.push_back(static_cast<float>(d[w.start + lr][list[pos]]));
        }
      }
      tc.bitmaps.push_back(bits);
      for (index_t s = 0; s < 8; ++s) tc.col_id.push_back(t * 8 + s < list.size() ? list[t * 8 + s] : 0);
    }
    tc.row_window_id.push_back(w.start);
    tc.row_window_offset.push_back(tc.row_window_offset.back() + static_cast<index_t>(blocks));
  }
  return tc;
}

}  // namespace

TEST(Build, SingleEntry) {
  CooMatrix c{1, 8, {{0, 5, 2.5f}}};
  auto a = c.to_csr();
  auto m = build_rstile(a, PartitionPlan{{{0, 1, {}}}, {}});
  ASSERT_EQ(m.tc.blocks(), 1u);
  EXPECT_EQ(m.tc.bitmaps[0], 1u);
  EXPECT_EQ(m.tc.col_id, (std::vector<index_t>{5, 0, 0, 0, 0, 0, 0, 0}));
  EXPECT_EQ(m.tc.values, (std::vector<float>{2.5f}));
}

TEST(Build, SaturatedBlock) {
  std::vector<std::vector<index_t>> rows(8, {0, 1, 2, 3, 4, 5, 6, 7});
  auto a = from_rows(8, rows);
  auto m = encode_default(a);
  ASSERT_EQ(m.tc.blocks(), 1u);
  EXPECT_EQ(m.tc.bitmaps[0], ~std::uint64_t{0});
  EXPECT_EQ(m.tc.values.size(), 64u);
  EXPECT_EQ(tile_density(m).mean_nnz_per_block, 64.0);
}

TEST(Build, DiagonalPairBitmap) {
  CooMatrix c{2, 4, {{0, 1, 1.0f}, {1, 3, 2.0f}}};
  auto m = build_rstile(c.to_csr(), PartitionPlan{{{0, 2, {}}}, {}});
  ASSERT_EQ(m.tc.blocks(), 1u);
  EXPECT_EQ(m.tc.bitmaps[0], 0x201u);
  EXPECT_EQ(m.tc.values, (std::vector<float>{1.0f, 2.0f}));
}

TEST(Build, MatchesBitwiseReference) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = rsh_test::small_power_law(120, 0.04, 1.2 + 0.04 * seed, seed);
    PartitionParams p;
    p.max_blocks_per_item = kUnboundedBlocks;
    const auto plan = partition_rows(a, p);
    const auto m = build_rstile(a, plan, 8, 1 + seed % 3);
    ASSERT_EQ(m.tc, reference_tc(a, plan)) << "seed " << seed;
    ASSERT_EQ(m.residual.row_id, plan.residual_rows);
  }
}

TEST(Build, RejectsBadPlan) {
  auto a = from_rows(4, {{0}, {1}, {2}});
  EXPECT_THROW(build_rstile(a, PartitionPlan{{{0, 2, {}}}, {}}), FormatError);
  EXPECT_THROW(build_rstile(a, PartitionPlan{{{0, 3, {}}}, {}}, 2), FormatError);
  EXPECT_THROW(build_rstile(a, PartitionPlan{{{0, 3, {}}}, {}}, 9), ParameterError);
}

TEST(Build, SplitOnlyAddsEntries) {
  const auto a = rsh_test::small_power_law(200, 0.2, 1.2, 8);
  const auto whole = encode_default(a, kUnboundedBlocks);
  const auto split = encode_default(a, 1);
  EXPECT_EQ(split.tc.bitmaps, whole.tc.bitmaps);
  EXPECT_EQ(split.tc.col_id, whole.tc.col_id);
  EXPECT_EQ(split.tc.values, whole.tc.values);
  EXPECT_EQ(split.residual, whole.residual);
  EXPECT_GT(split.tc.entries(), whole.tc.entries());
  EXPECT_EQ(split.tc.entries(), split.tc.blocks());
}

TEST(RoundTrip, IdentityAndRandom) {
  const auto id = identity_matrix(37);
  EXPECT_EQ(decode_rstile(encode_default(id)), id);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto a = rsh_test::small_power_law(100 + seed * 3, 0.01 + 0.004 * (seed % 10), 1.2 + 0.02 * seed, seed);
    for (index_t bound : {1u, 64u}) {
      ASSERT_EQ(decode_rstile(encode_default(a, bound)), a) << "seed " << seed;
    }
  }
}

TEST(RoundTrip, ResidualOnly) {
  auto a = from_rows(5, {{0}, {}, {3, 4}});
  PartitionPlan plan{{}, {0, 2}};
  auto m = build_rstile(a, plan);
  EXPECT_EQ(m.tc.blocks(), 0u);
  EXPECT_EQ(decode_rstile(m), a);
  auto d = tile_density(m);
  EXPECT_EQ(d.mean_nnz_per_block, 0.0);
  EXPECT_EQ(d.residual_nnz_fraction, 1.0);
}

TEST(RoundTrip, WindowSizesBelowEight) {
  for (index_t w = 1; w <= 8; ++w) {
    const auto a = rsh_test::small_power_law(90, 0.05, 1.5, w);
    PartitionParams p;
    p.window_size = w;
    const auto m = build_rstile(a, split_long_work(a, partition_rows(a, p), p), w);
    EXPECT_TRUE(validate(m).empty());
    EXPECT_EQ(decode_rstile(m), a);
  }
}

TEST(Validate, FreshIsClean) {
  EXPECT_TRUE(validate(encode_default(rsh_test::small_power_law(64, 0.1, 1.5, 1))).empty());
}

TEST(Validate, PopcountMismatchNamesBlock) {
  auto m = encode_default(rsh_test::small_power_law(64, 0.1, 1.5, 1));
  m.tc.values.pop_back();
  auto bad = validate(m);
  ASSERT_EQ(bad.size(), 1u);
  EXPECT_NE(bad[0].find("block"), std::string::npos);
  EXPECT_THROW(decode_rstile(m), FormatError);
}

TEST(Validate, DetectsCorruptions) {
  const auto base = encode_default(rsh_test::small_power_law(64, 0.1, 1.5, 1));
  ASSERT_GE(base.tc.entries(), 2u);
  auto offsets = base;
  std::swap(offsets.tc.row_window_offset[1], offsets.tc.row_window_offset[2]);
  EXPECT_FALSE(validate(offsets).empty());
  auto col = base;
  col.tc.col_id[0] = base.n_cols;
  EXPECT_FALSE(validate(col).empty());
  auto order = base;
  std::swap(order.tc.row_window_id[0], order.tc.row_window_id[1]);
  EXPECT_FALSE(validate(order).empty());
  auto overlap = base;
  overlap.residual.row_id.insert(overlap.residual.row_id.begin(), base.tc.row_window_id[0]);
  overlap.residual.row_nnz_offset.insert(overlap.residual.row_nnz_offset.begin(), 0);
  EXPECT_FALSE(validate(overlap).empty());
}

TEST(Storage, Formulas) {
  std::vector<std::vector<index_t>> rows(8, {0, 1, 2, 3, 4, 5, 6, 7});
  auto a = from_rows(8, rows);
  auto s = storage_report(a, encode_default(a));
  EXPECT_EQ(s.bitmap_bytes, 8u);
  EXPECT_EQ(s.colid_bytes, 32u);
  EXPECT_EQ(s.coo_bytes, 64u * 12);
  EXPECT_EQ(s.csr_bytes, 64u * 8 + 9 * 4);
  EXPECT_EQ(s.tc_bytes, 4u + 8 + 8 + 32 + 256);
  EXPECT_EQ(s.residual_bytes, 4u);
  EXPECT_EQ(s.rstile_bytes, s.tc_bytes + s.residual_bytes);
}

TEST(Storage, EmptyMatrixIsFixedOverhead) {
  CsrMatrix a;
  auto s = storage_report(a, build_rstile(a, PartitionPlan{}));
  EXPECT_EQ(s.coo_bytes, 0u);
  EXPECT_EQ(s.csr_bytes, 4u);
  EXPECT_EQ(s.tc_bytes, 4u);
  EXPECT_EQ(s.residual_bytes, 4u);
}

TEST(Storage, CooScale) {
  const auto a = generate_power_law(500, 500, 1000, 1.5, 2);
  EXPECT_EQ(storage_report(a, encode_default(a)).coo_bytes, 12000u);
}

TEST(Serialize, RoundTripAndSize) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = rsh_test::small_power_law(150, 0.03, 1.3, seed);
    const auto m = encode_default(a, 1 + seed);
    const auto bytes = serialize_rstile(m);
    EXPECT_EQ(bytes.size(), kRsTileHeaderBytes + storage_report(a, m).rstile_bytes);
    EXPECT_TRUE(has_rstile_magic(bytes));
    EXPECT_EQ(deserialize_rstile(bytes), m);
  }
}

TEST(Serialize, HeaderLayout) {
  auto a = from_rows(8, {{0, 1}, {1}, {}});
  auto m = encode_default(a);
  auto bytes = serialize_rstile(m);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "RSTL");
  EXPECT_EQ(bytes[4], 1);  // version
  EXPECT_EQ(bytes[6], 8);  // window size
  EXPECT_EQ(bytes[8], 3);  // n_rows
  EXPECT_EQ(bytes[12], 8);  // n_cols
}

TEST(Serialize, RejectsDamage) {
  const auto m = encode_default(rsh_test::small_power_law(64, 0.1, 1.5, 3));
  auto bytes = serialize_rstile(m);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(deserialize_rstile(truncated), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(deserialize_rstile(trailing), FormatError);
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(deserialize_rstile(magic), FormatError);
  auto version = bytes;
  version[4] = 9;
  EXPECT_THROW(deserialize_rstile(version), FormatError);
}

TEST(Serialize, FileRoundTrip) {
  const auto m = encode_default(rsh_test::small_power_law(64, 0.1, 1.5, 4));
  const auto path = std::filesystem::temp_directory_path() / "rsh_rstile_rt.rstl";
  write_rstile(path, m);
  EXPECT_EQ(std::filesystem::file_size(path), serialize_rstile(m).size());
  EXPECT_EQ(read_rstile(path), m);
  std::filesystem::remove(path);
}
