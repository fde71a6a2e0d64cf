#include <gtest/gtest.h>

#include <bit>

#include "rsh/rsh.hpp"
#include "test_util.hpp"

using namespace rsh;
using rsh_test::from_rows;

namespace {

RsTileMatrix encode_with(const CsrMatrix& a, index_t max_blocks) {
  PartitionParams p;
  p.max_blocks_per_item = max_blocks;
  return encode(a, p);
}

}  // namespace

TEST(DecodeTile, Examples) {
  auto zero = decode_tile(0, {});
  for (float v : zero) EXPECT_EQ(v, 0.0f);
  std::vector<float> vals(64);
  for (int i = 0; i < 64; ++i) vals[i] = static_cast<float>(i + 1);
  auto full = decode_tile(~std::uint64_t{0}, vals);
  for (int i = 0; i < 64; ++i) EXPECT_EQ(full[i], vals[i]);
  std::vector<float> ab{3.0f, 4.0f};
  auto diag = decode_tile(0x201, ab);
  EXPECT_EQ(diag[0], 3.0f);
  EXPECT_EQ(diag[9], 4.0f);
  for (int i = 0; i < 64; ++i) {
    if (i != 0 && i != 9) {
      EXPECT_EQ(diag[i], 0.0f);
    }
  }
  EXPECT_THROW(decode_tile(0x3, std::span<const float>(ab).first(1)), DimensionError);
}

TEST(DecodeTile, ReencodeIsExact) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::uint64_t bits = (rng.below(~std::uint64_t{0}) ^ (rng.below(~std::uint64_t{0}) << 1));
    std::vector<float> vals(static_cast<std::size_t>(std::popcount(bits)));
    for (auto& v : vals) v = static_cast<float>(rng.uniform(0.5, 1.5));
    auto frag = decode_tile(bits, vals);
    std::uint64_t back = 0;
    std::vector<float> seen;
    for (int b = 0; b < 64; ++b) {
      if (frag[b] != 0.0f) {
        back |= std::uint64_t{1} << b;
        seen.push_back(frag[b]);
      }
    }
    ASSERT_EQ(back, bits);
    ASSERT_EQ(seen, vals);
  }
}

TEST(TcWindow, IdentityBlockCopiesB) {
  const auto m = build_rstile(identity_matrix(8), PartitionPlan{{{0, 8, {}}}, {}});
  const auto b = random_dense(8, 5, 1);
  std::vector<double> acc(8 * 5, 0.0);
  exec_tc_window<double>(m, 0, b, acc);
  for (index_t i = 0; i < 8; ++i) {
    for (index_t j = 0; j < 5; ++j) EXPECT_EQ(acc[i * 5 + j], b(i, j));
  }
}

TEST(TcWindow, ZeroBitmapLeavesAccumulator) {
  RsTileMatrix m;
  m.n_rows = 8;
  m.n_cols = 8;
  m.tc.row_window_id = {0};
  m.tc.row_window_offset = {0, 1};
  m.tc.bitmaps = {0};
  m.tc.col_id.assign(8, 0);
  const auto b = random_dense(8, 3, 2);
  std::vector<double> acc(8 * 3, 1.5);
  exec_tc_window<double>(m, 0, b, acc);
  for (double v : acc) EXPECT_EQ(v, 1.5);
}

TEST(TcWindow, RandomWindowMatchesOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CooMatrix coo{8, 16, {}};
    Rng rng(seed);
    for (index_t r = 0; r < 8; ++r) {
      for (index_t c = 0; c < 16; ++c) {
        if (rng.uniform() < 0.3) coo.entries.push_back({r, c, static_cast<float>(rng.uniform(-1, 1))});
      }
    }
    coo.entries.push_back({0, 0, 1.0f});
    const auto a = coo.to_csr();
    const auto m = build_rstile(a, PartitionPlan{{{0, 8, {}}}, {}});
    const auto b = random_dense(16, 4, seed);
    std::vector<double> acc(8 * 4, 0.0);
    exec_tc_window<double>(m, 0, b, acc);
    const auto ref = oracle_spmm(a, b);
    for (index_t i = 0; i < 8; ++i) {
      for (index_t j = 0; j < 4; ++j) ASSERT_EQ(static_cast<float>(acc[i * 4 + j]), ref(i, j));
    }
  }
}

TEST(TcWindow, BadColumnIsFormatError) {
  auto m = build_rstile(identity_matrix(8), PartitionPlan{{{0, 8, {}}}, {}});
  m.tc.col_id[3] = 100;
  std::vector<double> acc(8 * 2, 0.0);
  EXPECT_THROW(exec_tc_window<double>(m, 1, random_dense(8, 2, 0), acc), DimensionError);
  EXPECT_THROW(exec_tc_window<double>(m, 0, random_dense(8, 2, 0), acc), FormatError);
  std::vector<double> wrong(3);
  EXPECT_THROW(exec_tc_window<double>(m, 0, random_dense(8, 2, 0), wrong), DimensionError);
}

TEST(Residual, Examples) {
  CooMatrix coo{5, 4, {{1, 3, 2.0f}}};
  const auto a = coo.to_csr();
  const auto m = build_rstile(a, PartitionPlan{{}, {1}});
  DenseMatrix b(4, 2, 0.0f);
  b(3, 0) = 1.0f;
  b(3, 1) = 1.0f;
  DenseMatrix c(5, 2);
  exec_residual(m, b, c);
  EXPECT_EQ(c(1, 0), 2.0f);
  EXPECT_EQ(c(1, 1), 2.0f);
  EXPECT_EQ(c(0, 0), 0.0f);

  DenseMatrix untouched(5, 2, 7.0f);
  exec_residual(build_rstile(a, PartitionPlan{{{1, 1, {}}}, {}}), b, untouched);
  EXPECT_EQ(untouched, DenseMatrix(5, 2, 7.0f));

  CooMatrix zeros{2, 4, {{0, 1, 0.0f}}};
  DenseMatrix cz(2, 2);
  exec_residual(build_rstile(zeros.to_csr(), PartitionPlan{{}, {0}}), random_dense(4, 2, 1), cz);
  EXPECT_EQ(cz, DenseMatrix(2, 2));
}

TEST(Hybrid, IdentityGivesB) {
  const auto b = random_dense(50, 16, 3);
  EXPECT_EQ(hybrid_spmm(encode_with(identity_matrix(50), 64), b), b);
}

TEST(Hybrid, MatchesOracle) {
  const index_t ds[] = {16, 64, 128};
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const index_t n = 64 + static_cast<index_t>(seed * 7 % 400);
    const auto a = rsh_test::small_power_law(n, 0.002 + 0.001 * (seed % 30), 1.2 + 0.4 * (seed % 3), seed);
    const auto m = encode_with(a, 64);
    const auto b = random_dense(n, ds[seed % 3], seed + 1000);
    ExecConfig cfg;
    cfg.check_against_oracle = true;
    const auto c = hybrid_spmm(m, b, cfg);
    ASSERT_LE(max_relative_error(c, oracle_spmm(a, b)), 1e-5) << "seed " << seed;
  }
}

TEST(Hybrid, F32AccumulationStillClose) {
  const auto a = rsh_test::small_power_law(300, 0.05, 1.2, 3);
  const auto b = random_dense(300, 32, 4);
  ExecConfig cfg;
  cfg.accumulate_precision = Precision::f32;
  EXPECT_LE(max_relative_error(hybrid_spmm(encode_with(a, 64), b, cfg), oracle_spmm(a, b)), 1e-5);
}

TEST(Hybrid, WorkersAndSplitsAreBitIdentical) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto a = rsh_test::small_power_law(400, 0.1, 1.2, seed);
    const auto b = random_dense(400, 16, seed);
    ExecConfig one;
    const auto ref = hybrid_spmm(encode_with(a, kUnboundedBlocks), b, one);
    for (index_t bound : {1u, 4u, 64u}) {
      for (std::size_t workers : {1u, 3u, 8u}) {
        ExecConfig cfg;
        cfg.num_workers = workers;
        ASSERT_EQ(hybrid_spmm(encode_with(a, bound), b, cfg), ref) << "bound " << bound << " workers " << workers;
      }
    }
  }
}

TEST(Hybrid, OutputPathsAreDisjoint) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = rsh_test::small_power_law(200, 0.02, 1.2 + 0.05 * seed, seed);
    const auto m = encode_with(a, 1 + seed % 4);
    ExecTrace trace;
    ExecConfig cfg;
    cfg.num_workers = 1 + seed % 4;
    hybrid_spmm(m, random_dense(200, 4, seed), cfg, &trace);
    for (index_t r = 0; r < a.n_rows; ++r) {
      ASSERT_LE(trace.tc_writes[r], 1);
      ASSERT_LE(trace.residual_writes[r], 1);
      ASSERT_FALSE(trace.tc_writes[r] && trace.residual_writes[r]) << "row " << r;
      if (a.row_nnz(r) > 0) {
        ASSERT_TRUE(trace.tc_writes[r] || trace.residual_writes[r]);
      }
    }
  }
}

TEST(Hybrid, Errors) {
  const auto m = encode_with(identity_matrix(10), 64);
  EXPECT_THROW(hybrid_spmm(m, random_dense(9, 2, 0)), DimensionError);
  ExecConfig zero;
  zero.num_workers = 0;
  EXPECT_THROW(hybrid_spmm(m, random_dense(10, 2, 0), zero), ParameterError);
  auto broken = encode_with(rsh_test::small_power_law(10, 0.5, 1.5, 1), 64);
  ASSERT_FALSE(broken.tc.values.empty());
  broken.tc.values.pop_back();
  EXPECT_THROW(hybrid_spmm(broken, random_dense(10, 2, 0)), FormatError);
}
