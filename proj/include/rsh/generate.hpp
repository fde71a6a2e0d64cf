#pragma once

// Seeded synthetic matrices. Sampling is built on std::mt19937_64 with
// hand-rolled conversions so outputs are identical across standard libraries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_set>
#include <vector>

#include "rsh/error.hpp"
#include "rsh/sparse.hpp"

namespace rsh {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), n > 0; rejection keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::mt19937_64 engine_;
};

struct PowerLawOptions {
  /// Probability that a column is drawn from a band around the row's diagonal
  /// position instead of uniformly over all columns.
  double locality = 0.0;
  /// Half-width of the diagonal band, in columns.
  index_t band = 32;
  /// When nonzero, rows form consecutive groups of this many rows. Inside a
  /// group rows are ordered longest first and every row with two or more
  /// nonzeros draws its columns from a shared pool; single-nonzero rows pick
  /// any column. Overrides locality.
  index_t community = 0;
  /// Pool size as a fraction of the group's row count (at least the longest row).
  double pool_fraction = 0.25;
};

namespace gen_detail {

/// Integer row lengths summing exactly to target, each in [0, cap], shaped by weights.
inline std::vector<index_t> allocate_counts(const std::vector<double>& weights, std::uint64_t target, index_t cap) {
  const std::size_t n = weights.size();
  auto filled = [&](double s) {
    double t = 0.0;
    for (double w : weights) t += std::min(s * w, static_cast<double>(cap));
    return t;
  };
  double lo = 0.0, hi = 1.0;
  while (filled(hi) < static_cast<double>(target) && hi < 1e300) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (filled(mid) < static_cast<double>(target) ? lo : hi) = mid;
  }
  std::vector<index_t> counts(n);
  std::vector<double> frac(n);
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = std::min(hi * weights[i], static_cast<double>(cap));
    counts[i] = static_cast<index_t>(std::floor(c));
    frac[i] = c - counts[i];
    sum += counts[i];
  }
  std::vector<std::size_t> by_frac(n);
  std::iota(by_frac.begin(), by_frac.end(), 0);
  std::stable_sort(by_frac.begin(), by_frac.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  while (sum < target) {
    for (std::size_t i : by_frac) {
      if (sum == target) break;
      if (counts[i] < cap) {
        ++counts[i];
        ++sum;
      }
    }
  }
  while (sum > target) {
    const auto it = std::max_element(counts.begin(), counts.end());
    --*it;
    --sum;
  }
  return counts;
}

/// k distinct values from [0, n) in ascending order (Floyd's algorithm).
inline std::vector<index_t> sample_uniform(Rng& rng, index_t n, index_t k) {
  std::unordered_set<index_t> chosen;
  chosen.reserve(k * 2);
  for (std::uint64_t j = std::uint64_t{n} - k; j < n; ++j) {
    const auto t = static_cast<index_t>(rng.below(j + 1));
    if (!chosen.insert(t).second) chosen.insert(static_cast<index_t>(j));
  }
  std::vector<index_t> out(chosen.begin(), chosen.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace gen_detail

/// Heavy-tailed row lengths: each row draws a Pareto weight u^(-1/skew), the
/// weights are scaled (and clipped at n_cols) so lengths sum to target_nnz.
/// Values are uniform in [-1, 1].
inline CsrMatrix generate_power_law(index_t n_rows, index_t n_cols, std::uint64_t target_nnz, double skew,
                                    std::uint64_t seed, const PowerLawOptions& opt = {}) {
  if (!(skew > 0.0)) throw ParameterError("generate_power_law: skew must be > 0");
  if (target_nnz > std::uint64_t{n_rows} * n_cols) throw ParameterError("generate_power_law: infeasible density (target_nnz > n_rows*n_cols)");
  check_extent(target_nnz, "target_nnz");
  if (!(opt.pool_fraction >= 0.0)) throw ParameterError("generate_power_law: pool_fraction must be >= 0");
  Rng rng(seed);
  std::vector<double> weights(n_rows);
  for (auto& w : weights) w = std::pow(1.0 - rng.uniform(), -1.0 / skew);
  auto counts = target_nnz == 0 ? std::vector<index_t>(n_rows, 0) : gen_detail::allocate_counts(weights, target_nnz, n_cols);

  CsrMatrix m;
  m.n_rows = n_rows;
  m.n_cols = n_cols;
  m.row_ptr.assign(std::size_t{n_rows} + 1, 0);
  m.col_idx.reserve(target_nnz);
  m.values.reserve(target_nnz);
  std::unordered_set<index_t> picked;
  std::vector<index_t> cols;
  std::vector<index_t> pool;
  for (index_t g = 0; opt.community > 0 && g < n_rows; g += std::min(opt.community, n_rows - g)) {
    std::sort(counts.begin() + g, counts.begin() + std::min<std::uint64_t>(std::uint64_t{g} + opt.community, n_rows), std::greater<>());
  }
  for (index_t r = 0; r < n_rows; ++r) {
    const index_t k = counts[r];
    if (opt.community > 0) {
      if (r % opt.community == 0) {
        const index_t end = static_cast<index_t>(std::min<std::uint64_t>(std::uint64_t{r} + opt.community, n_rows));
        const auto want = static_cast<index_t>(std::min<double>(n_cols, std::max<double>(counts[r], opt.pool_fraction * (end - r))));
        pool = gen_detail::sample_uniform(rng, n_cols, want);
      }
      if (k == 1) {
        cols.assign(1, static_cast<index_t>(rng.below(n_cols)));
      } else {
        cols = gen_detail::sample_uniform(rng, static_cast<index_t>(pool.size()), k);
        for (auto& c : cols) c = pool[c];
      }
    } else if (opt.locality <= 0.0 || std::uint64_t{k} * 2 > n_cols) {
      cols = gen_detail::sample_uniform(rng, n_cols, k);
    } else {
      picked.clear();
      const auto center = static_cast<std::int64_t>((std::uint64_t{r} * 2 + 1) * n_cols / (std::uint64_t{n_rows} * 2));
      const std::int64_t width = std::int64_t{opt.band} * 2 + 1;
      std::uint64_t attempts = 0;
      while (picked.size() < k) {
        index_t c;
        if (attempts++ < std::uint64_t{k} * 64 && rng.uniform() < opt.locality) {
          const std::int64_t off = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(width))) - opt.band;
          c = static_cast<index_t>(((center + off) % n_cols + n_cols) % n_cols);
        } else {
          c = static_cast<index_t>(rng.below(n_cols));
        }
        picked.insert(c);
      }
      cols.assign(picked.begin(), picked.end());
      std::sort(cols.begin(), cols.end());
    }
    for (index_t c : cols) {
      m.col_idx.push_back(c);
      m.values.push_back(static_cast<float>(rng.uniform(-1.0, 1.0)));
    }
    m.row_ptr[r + 1] = static_cast<index_t>(m.col_idx.size());
  }
  return m;
}

/// n_blocks diagonal blocks of block_rows x block_cols, each cell present with
/// probability density.
inline CsrMatrix generate_block_diagonal(index_t n_blocks, index_t block_rows, index_t block_cols, double density,
                                         std::uint64_t seed) {
  Rng rng(seed);
  CooMatrix coo{n_blocks * block_rows, n_blocks * block_cols, {}};
  for (index_t b = 0; b < n_blocks; ++b) {
    for (index_t i = 0; i < block_rows; ++i) {
      for (index_t j = 0; j < block_cols; ++j) {
        if (rng.uniform() < density) {
          coo.entries.push_back({b * block_rows + i, b * block_cols + j, static_cast<float>(rng.uniform(-1.0, 1.0))});
        }
      }
    }
  }
  return coo.to_csr();
}

inline DenseMatrix random_dense(index_t rows, index_t cols, std::uint64_t seed) {
  Rng rng(seed);
  DenseMatrix d(rows, cols);
  for (float& v : d.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return d;
}

/// Uniformly random permutation of [0, n) (Fisher-Yates).
inline std::vector<index_t> random_permutation(index_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<index_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (index_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
  return p;
}

}  // namespace rsh
