#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "rsh/error.hpp"

namespace rsh {

using index_t = std::uint32_t;

/// Largest dimension or nonzero count accepted anywhere (all indices are 32-bit).
inline constexpr std::uint64_t kMaxExtent = (std::uint64_t{1} << 31) - 1;

inline void check_extent(std::uint64_t v, const char* what) {
  if (v > kMaxExtent) {
    throw DimensionError(std::string(what) + " " + std::to_string(v) + " exceeds 2^31-1");
  }
}

/// Compressed sparse row matrix with sorted, duplicate-free rows.
struct CsrMatrix {
  index_t n_rows = 0;
  index_t n_cols = 0;
  std::vector<index_t> row_ptr{0};
  std::vector<index_t> col_idx;
  std::vector<float> values;

  std::size_t nnz() const noexcept { return col_idx.size(); }
  index_t row_nnz(index_t r) const noexcept { return row_ptr[r + 1] - row_ptr[r]; }

  std::span<const index_t> row_cols(index_t r) const noexcept {
    return {col_idx.data() + row_ptr[r], row_nnz(r)};
  }
  std::span<const float> row_values(index_t r) const noexcept {
    return {values.data() + row_ptr[r], row_nnz(r)};
  }

  /// Throws DimensionError when a structural invariant does not hold.
  void check() const {
    if (row_ptr.size() != std::size_t{n_rows} + 1) throw DimensionError("csr: row_ptr length != n_rows+1");
    if (row_ptr.front() != 0) throw DimensionError("csr: row_ptr[0] != 0");
    if (row_ptr.back() != col_idx.size()) throw DimensionError("csr: row_ptr[n_rows] != nnz");
    if (col_idx.size() != values.size()) throw DimensionError("csr: col_idx/values length differ");
    for (index_t r = 0; r < n_rows; ++r) {
      if (row_ptr[r] > row_ptr[r + 1]) throw DimensionError("csr: row_ptr decreasing at row " + std::to_string(r));
      for (index_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
        if (col_idx[k] >= n_cols) throw DimensionError("csr: column out of range in row " + std::to_string(r));
        if (k > row_ptr[r] && col_idx[k] <= col_idx[k - 1]) {
          throw DimensionError("csr: columns not strictly increasing in row " + std::to_string(r));
        }
      }
    }
  }

  friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;
};

struct CooEntry {
  index_t row;
  index_t col;
  float value;
};

/// Coordinate list; duplicates are allowed until canonicalize().
struct CooMatrix {
  index_t n_rows = 0;
  index_t n_cols = 0;
  std::vector<CooEntry> entries;

  /// Sorts by (row, col) and sums duplicate coordinates.
  void canonicalize() {
    for (const auto& e : entries) {
      if (e.row >= n_rows || e.col >= n_cols) throw DimensionError("coo: entry index out of range");
    }
    std::stable_sort(entries.begin(), entries.end(), [](const CooEntry& a, const CooEntry& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    std::vector<CooEntry> out;
    out.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size();) {
      double sum = 0.0;
      std::size_t j = i;
      for (; j < entries.size() && entries[j].row == entries[i].row && entries[j].col == entries[i].col; ++j) {
        sum += entries[j].value;
      }
      out.push_back({entries[i].row, entries[i].col, static_cast<float>(sum)});
      i = j;
    }
    entries = std::move(out);
  }

  CsrMatrix to_csr() const {
    CooMatrix c = *this;
    c.canonicalize();
    check_extent(c.entries.size(), "nnz");
    CsrMatrix m;
    m.n_rows = n_rows;
    m.n_cols = n_cols;
    m.row_ptr.assign(std::size_t{n_rows} + 1, 0);
    m.col_idx.reserve(c.entries.size());
    m.values.reserve(c.entries.size());
    for (const auto& e : c.entries) {
      ++m.row_ptr[e.row + 1];
      m.col_idx.push_back(e.col);
      m.values.push_back(e.value);
    }
    for (index_t r = 0; r < n_rows; ++r) m.row_ptr[r + 1] += m.row_ptr[r];
    return m;
  }
};

inline CooMatrix to_coo(const CsrMatrix& a) {
  CooMatrix c{a.n_rows, a.n_cols, {}};
  c.entries.reserve(a.nnz());
  for (index_t r = 0; r < a.n_rows; ++r) {
    for (index_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) c.entries.push_back({r, a.col_idx[k], a.values[k]});
  }
  return c;
}

/// Row-major dense matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(index_t rows, index_t cols, float fill = 0.0f)
      : n_rows_(rows), n_cols_(cols), data_(std::size_t{rows} * cols, fill) {}
  DenseMatrix(index_t rows, index_t cols, std::vector<float> data) : n_rows_(rows), n_cols_(cols), data_(std::move(data)) {
    if (data_.size() != std::size_t{rows} * cols) throw DimensionError("dense: data length != rows*cols");
    for (float v : data_) {
      if (!std::isfinite(v)) throw DimensionError("dense: non-finite value");
    }
  }

  index_t n_rows() const noexcept { return n_rows_; }
  index_t n_cols() const noexcept { return n_cols_; }
  float& operator()(index_t r, index_t c) noexcept { return data_[std::size_t{r} * n_cols_ + c]; }
  float operator()(index_t r, index_t c) const noexcept { return data_[std::size_t{r} * n_cols_ + c]; }
  std::span<float> row(index_t r) noexcept { return {data_.data() + std::size_t{r} * n_cols_, n_cols_}; }
  std::span<const float> row(index_t r) const noexcept { return {data_.data() + std::size_t{r} * n_cols_, n_cols_}; }
  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  index_t n_rows_ = 0;
  index_t n_cols_ = 0;
  std::vector<float> data_;
};

inline DenseMatrix to_dense(const CsrMatrix& a) {
  DenseMatrix d(a.n_rows, a.n_cols);
  for (index_t r = 0; r < a.n_rows; ++r) {
    for (index_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) d(r, a.col_idx[k]) = a.values[k];
  }
  return d;
}

/// Reference C = A * B: 64-bit accumulation, 32-bit store.
inline DenseMatrix oracle_spmm(const CsrMatrix& a, const DenseMatrix& b) {
  if (a.n_cols != b.n_rows()) {
    throw DimensionError("oracle_spmm: A is " + std::to_string(a.n_rows) + "x" + std::to_string(a.n_cols) +
                         " but B has " + std::to_string(b.n_rows()) + " rows");
  }
  const index_t d = b.n_cols();
  DenseMatrix c(a.n_rows, d);
  std::vector<double> acc(d);
  for (index_t r = 0; r < a.n_rows; ++r) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (index_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
      const double v = a.values[k];
      auto brow = b.row(a.col_idx[k]);
      for (index_t j = 0; j < d; ++j) acc[j] += v * static_cast<double>(brow[j]);
    }
    auto crow = c.row(r);
    for (index_t j = 0; j < d; ++j) crow[j] = static_cast<float>(acc[j]);
  }
  return c;
}

/// max over elements of |x - ref| / max(|ref|, 1).
inline double max_relative_error(const DenseMatrix& x, const DenseMatrix& ref) {
  if (x.n_rows() != ref.n_rows() || x.n_cols() != ref.n_cols()) throw DimensionError("max_relative_error: shape mismatch");
  double worst = 0.0;
  auto xs = x.data();
  auto rs = ref.data();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double ref_v = rs[i];
    worst = std::max(worst, std::abs(static_cast<double>(xs[i]) - ref_v) / std::max(std::abs(ref_v), 1.0));
  }
  return worst;
}

struct RowStats {
  double nnz_mean = 0.0;
  index_t nnz_max = 0;
  double long_row_ratio_2x = 0.0;
  double long_row_ratio_4x = 0.0;
  std::vector<index_t> per_row_nnz;
};

inline RowStats row_stats(const CsrMatrix& a) {
  RowStats s;
  s.per_row_nnz.resize(a.n_rows);
  for (index_t r = 0; r < a.n_rows; ++r) {
    s.per_row_nnz[r] = a.row_nnz(r);
    s.nnz_max = std::max(s.nnz_max, s.per_row_nnz[r]);
  }
  if (a.n_rows == 0) return s;
  s.nnz_mean = static_cast<double>(a.nnz()) / a.n_rows;
  std::size_t over2 = 0, over4 = 0;
  for (index_t n : s.per_row_nnz) {
    over2 += n > 2.0 * s.nnz_mean;
    over4 += n > 4.0 * s.nnz_mean;
  }
  s.long_row_ratio_2x = static_cast<double>(over2) / a.n_rows;
  s.long_row_ratio_4x = static_cast<double>(over4) / a.n_rows;
  return s;
}

/// Returns P*A where row i of the result is row order[i] of A.
inline CsrMatrix permute_rows(const CsrMatrix& a, std::span<const index_t> order) {
  if (order.size() != a.n_rows) throw DimensionError("permute_rows: order length != n_rows");
  CsrMatrix p;
  p.n_rows = a.n_rows;
  p.n_cols = a.n_cols;
  p.row_ptr.assign(std::size_t{a.n_rows} + 1, 0);
  p.col_idx.reserve(a.nnz());
  p.values.reserve(a.nnz());
  std::vector<bool> seen(a.n_rows, false);
  for (index_t i = 0; i < a.n_rows; ++i) {
    const index_t src = order[i];
    if (src >= a.n_rows || seen[src]) throw DimensionError("permute_rows: order is not a permutation");
    seen[src] = true;
    auto cols = a.row_cols(src);
    auto vals = a.row_values(src);
    p.col_idx.insert(p.col_idx.end(), cols.begin(), cols.end());
    p.values.insert(p.values.end(), vals.begin(), vals.end());
    p.row_ptr[i + 1] = static_cast<index_t>(p.col_idx.size());
  }
  return p;
}

inline CsrMatrix identity_matrix(index_t n) {
  CsrMatrix m;
  m.n_rows = m.n_cols = n;
  m.row_ptr.resize(std::size_t{n} + 1);
  m.col_idx.resize(n);
  m.values.assign(n, 1.0f);
  for (index_t i = 0; i <= n; ++i) m.row_ptr[i] = i;
  for (index_t i = 0; i < n; ++i) m.col_idx[i] = i;
  return m;
}

}  // namespace rsh
