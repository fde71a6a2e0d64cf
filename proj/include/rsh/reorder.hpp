#pragma once

// Locality-aware row reordering: weighted-Jaccard kNN graph, minimum spanning
// forest + DFS for a global order, windowed 2-opt, then isolated-row relocation.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "rsh/error.hpp"
#include "rsh/parallel.hpp"
#include "rsh/sparse.hpp"

namespace rsh {

struct ColumnWeights {
  std::vector<double> weights;  // 0 for columns no row uses
  double alpha = 0.5;
};

struct Neighbor {
  index_t row;
  double similarity;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct SimilarityEdge {
  index_t u;  // u < v
  index_t v;
  double similarity;
  friend bool operator==(const SimilarityEdge&, const SimilarityEdge&) = default;
};

/// Directed top-k lists; edges() gives the symmetrized undirected graph.
struct KnnGraph {
  index_t n_rows = 0;
  index_t k = 0;
  std::vector<std::vector<Neighbor>> neighbors;

  std::vector<SimilarityEdge> edges() const {
    std::vector<SimilarityEdge> out;
    for (index_t r = 0; r < n_rows; ++r) {
      for (const auto& nb : neighbors[r]) out.push_back({std::min(r, nb.row), std::max(r, nb.row), nb.similarity});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return std::tie(a.u, a.v) < std::tie(b.u, b.v); });
    out.erase(std::unique(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.u == b.u && a.v == b.v; }),
              out.end());
    return out;
  }
};

struct Permutation {
  std::vector<index_t> order;
  double objective = 0.0;
};

struct ReorderParams {
  double alpha = 0.5;
  index_t k = 8;
  index_t max_candidates = 256;
  index_t refine_window = 64;
  index_t max_passes = 3;
  double iso_threshold = 0.05;
  std::size_t workers = 1;
};

inline ColumnWeights column_weights(const CsrMatrix& a, double alpha) {
  if (!(alpha > 0.0)) throw ParameterError("column_weights: alpha must be > 0");
  std::vector<std::uint32_t> degree(a.n_cols, 0);
  for (index_t c : a.col_idx) ++degree[c];
  ColumnWeights w{std::vector<double>(a.n_cols, 0.0), alpha};
  for (index_t j = 0; j < a.n_cols; ++j) {
    if (degree[j] > 0) w.weights[j] = std::pow(static_cast<double>(degree[j]), -alpha);
  }
  return w;
}

/// Weighted Jaccard similarity of the column supports of rows r and u.
/// Two empty rows are identical (1); empty vs nonempty is 0.
inline double w_jaccard(const CsrMatrix& a, const ColumnWeights& w, index_t r, index_t u) {
  auto x = a.row_cols(r);
  auto y = a.row_cols(u);
  if (x.empty() && y.empty()) return 1.0;
  if (x.empty() || y.empty()) return 0.0;
  double inter = 0.0, uni = 0.0;
  std::size_t i = 0, j = 0;
  while (i < x.size() && j < y.size()) {
    if (x[i] == y[j]) {
      inter += w.weights[x[i]];
      uni += w.weights[x[i]];
      ++i, ++j;
    } else if (x[i] < y[j]) {
      uni += w.weights[x[i++]];
    } else {
      uni += w.weights[y[j++]];
    }
  }
  for (; i < x.size(); ++i) uni += w.weights[x[i]];
  for (; j < y.size(); ++j) uni += w.weights[y[j]];
  return std::clamp(inter / uni, 0.0, 1.0);
}

/// Sum over adjacent pairs of (1 - sim).
inline double ordering_objective(const CsrMatrix& a, const ColumnWeights& w, std::span<const index_t> order) {
  double total = 0.0;
  for (std::size_t i = 1; i < order.size(); ++i) total += 1.0 - w_jaccard(a, w, order[i - 1], order[i]);
  return total;
}

inline bool is_permutation_of(std::span<const index_t> order, std::size_t n) {
  if (order.size() != n) return false;
  std::vector<bool> seen(n, false);
  for (index_t x : order) {
    if (x >= n || seen[x]) return false;
    seen[x] = true;
  }
  return true;
}

namespace reorder_detail {

/// Column -> rows containing it (rows ascending).
inline CsrMatrix inverted_index(const CsrMatrix& a) {
  CsrMatrix t;
  t.n_rows = a.n_cols;
  t.n_cols = a.n_rows;
  t.row_ptr.assign(std::size_t{a.n_cols} + 1, 0);
  for (index_t c : a.col_idx) ++t.row_ptr[c + 1];
  for (index_t c = 0; c < a.n_cols; ++c) t.row_ptr[c + 1] += t.row_ptr[c];
  t.col_idx.resize(a.nnz());
  std::vector<index_t> fill(t.row_ptr.begin(), t.row_ptr.end() - 1);
  for (index_t r = 0; r < a.n_rows; ++r) {
    for (index_t c : a.row_cols(r)) t.col_idx[fill[c]++] = r;
  }
  return t;
}

}  // namespace reorder_detail

/// For each row, the rows sharing at least one column with it. Lists longer
/// than max_candidates keep the largest raw overlap counts (ties: lower row).
/// Each list is returned in ascending row order.
inline std::vector<std::vector<index_t>> build_candidates(const CsrMatrix& a, index_t max_candidates,
                                                          std::size_t workers = 1) {
  const CsrMatrix inv = reorder_detail::inverted_index(a);
  std::vector<std::vector<index_t>> cand(a.n_rows);
  parallel_chunks(a.n_rows, workers, [&](std::size_t begin, std::size_t end) {
    std::vector<index_t> overlap(a.n_rows, 0);
    std::vector<index_t> touched;
    for (std::size_t rr = begin; rr < end; ++rr) {
      const auto r = static_cast<index_t>(rr);
      touched.clear();
      for (index_t c : a.row_cols(r)) {
        for (index_t u : inv.row_cols(c)) {
          if (u == r) continue;
          if (overlap[u]++ == 0) touched.push_back(u);
        }
      }
      if (touched.size() > max_candidates) {
        std::sort(touched.begin(), touched.end(), [&](index_t x, index_t y) {
          return overlap[x] != overlap[y] ? overlap[x] > overlap[y] : x < y;
        });
      }
      for (index_t u : touched) overlap[u] = 0;
      touched.resize(std::min<std::size_t>(touched.size(), max_candidates));
      std::sort(touched.begin(), touched.end());
      cand[r] = touched;
    }
  });
  return cand;
}

/// Top-k positive-similarity candidates per row (ties: lower row index).
inline KnnGraph build_knn(const CsrMatrix& a, const ColumnWeights& w, const std::vector<std::vector<index_t>>& candidates,
                          index_t k, std::size_t workers = 1) {
  if (k < 1) throw ParameterError("build_knn: k must be >= 1");
  if (candidates.size() != a.n_rows) throw DimensionError("build_knn: candidate list count != n_rows");
  KnnGraph g{a.n_rows, k, std::vector<std::vector<Neighbor>>(a.n_rows)};
  parallel_for(a.n_rows, workers, [&](std::size_t rr) {
    const auto r = static_cast<index_t>(rr);
    std::vector<Neighbor> scored;
    scored.reserve(candidates[r].size());
    for (index_t u : candidates[r]) {
      if (u == r) continue;
      const double s = w_jaccard(a, w, r, u);
      if (s > 0.0) scored.push_back({u, s});
    }
    auto better = [](const Neighbor& x, const Neighbor& y) {
      return x.similarity != y.similarity ? x.similarity > y.similarity : x.row < y.row;
    };
    const std::size_t keep = std::min<std::size_t>(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), better);
    scored.resize(keep);
    g.neighbors[r] = std::move(scored);
  });
  return g;
}

namespace reorder_detail {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

}  // namespace reorder_detail

/// Minimum spanning forest (Kruskal, weight 1 - sim) traversed depth-first.
/// Trees are emitted by ascending root (their lowest vertex), children in
/// descending similarity; vertices without tree edges go last, ascending.
/// The objective is evaluated on graph similarities, with non-edges as 0.
inline Permutation mst_order(const KnnGraph& g) {
  const index_t n = g.n_rows;
  auto edges = g.edges();
  std::sort(edges.begin(), edges.end(), [](const SimilarityEdge& a, const SimilarityEdge& b) {
    const double wa = 1.0 - a.similarity, wb = 1.0 - b.similarity;
    return std::tie(wa, a.u, a.v) < std::tie(wb, b.u, b.v);
  });
  reorder_detail::DisjointSets sets(n);
  std::vector<std::vector<Neighbor>> tree(n);
  for (const auto& e : edges) {
    if (sets.unite(e.u, e.v)) {
      tree[e.u].push_back({e.v, e.similarity});
      tree[e.v].push_back({e.u, e.similarity});
    }
  }
  for (auto& adj : tree) {
    std::sort(adj.begin(), adj.end(), [](const Neighbor& x, const Neighbor& y) {
      return x.similarity != y.similarity ? x.similarity > y.similarity : x.row < y.row;
    });
  }

  Permutation p;
  p.order.reserve(n);
  std::vector<bool> visited(n, false);
  std::vector<index_t> stack;
  for (index_t root = 0; root < n; ++root) {
    if (visited[root] || tree[root].empty()) continue;
    stack.push_back(root);
    while (!stack.empty()) {
      const index_t v = stack.back();
      stack.pop_back();
      if (visited[v]) continue;
      visited[v] = true;
      p.order.push_back(v);
      for (auto it = tree[v].rbegin(); it != tree[v].rend(); ++it) {
        if (!visited[it->row]) stack.push_back(it->row);
      }
    }
  }
  for (index_t v = 0; v < n; ++v) {
    if (!visited[v]) p.order.push_back(v);
  }

  std::unordered_map<std::uint64_t, double> sim;
  sim.reserve(edges.size() * 2);
  for (const auto& e : edges) sim[(std::uint64_t{e.u} << 32) | e.v] = e.similarity;
  for (std::size_t i = 1; i < p.order.size(); ++i) {
    const index_t x = std::min(p.order[i - 1], p.order[i]);
    const index_t y = std::max(p.order[i - 1], p.order[i]);
    const auto it = sim.find((std::uint64_t{x} << 32) | y);
    p.objective += 1.0 - (it == sim.end() ? 0.0 : it->second);
  }
  return p;
}

/// Segment-reversal local search restricted to position pairs less than
/// `window` apart. A move is applied only if it strictly lowers the objective.
inline Permutation refine_2opt(const CsrMatrix& a, const ColumnWeights& w, const Permutation& p, index_t window,
                               index_t max_passes) {
  if (window < 2) throw ParameterError("refine_2opt: window must be >= 2");
  if (!is_permutation_of(p.order, a.n_rows)) throw DimensionError("refine_2opt: not a permutation of the matrix rows");
  if (max_passes == 0) return p;
  constexpr double kMinGain = 1e-12;
  Permutation out{p.order, 0.0};
  auto& o = out.order;
  const std::size_t m = o.size();
  auto dist = [&](index_t x, index_t y) { return 1.0 - w_jaccard(a, w, x, y); };
  for (index_t pass = 0; pass < max_passes; ++pass) {
    bool improved = false;
    for (std::size_t i = 0; i + 1 < m; ++i) {
      const std::size_t j_end = std::min(m, i + window);
      for (std::size_t j = i + 1; j < j_end; ++j) {
        double before = 0.0, after = 0.0;
        if (i > 0) {
          before += dist(o[i - 1], o[i]);
          after += dist(o[i - 1], o[j]);
        }
        if (j + 1 < m) {
          before += dist(o[j], o[j + 1]);
          after += dist(o[i], o[j + 1]);
        }
        if (after < before - kMinGain) {
          std::reverse(o.begin() + static_cast<std::ptrdiff_t>(i), o.begin() + static_cast<std::ptrdiff_t>(j) + 1);
          improved = true;
        }
      }
    }
    if (!improved) break;
  }
  out.objective = ordering_objective(a, w, o);
  return out;
}

/// A row is isolated when every permutation neighbor it has is less similar
/// than iso_threshold. Isolated rows are pulled out and reinserted right after
/// their most similar non-isolated row (ties: lower row; several rows landing
/// on the same anchor keep their original relative order). Rows without any
/// positive match go to the tail in ascending order.
inline Permutation isolation_adjust(const CsrMatrix& a, const ColumnWeights& w, const Permutation& p,
                                    double iso_threshold) {
  if (!(iso_threshold >= 0.0 && iso_threshold <= 1.0)) throw ParameterError("isolation_adjust: threshold must be in [0,1]");
  if (!is_permutation_of(p.order, a.n_rows)) throw DimensionError("isolation_adjust: not a permutation of the matrix rows");
  const auto& o = p.order;
  const std::size_t m = o.size();
  std::vector<bool> isolated(a.n_rows, false);
  std::vector<index_t> moved;
  for (std::size_t i = 0; i < m; ++i) {
    const bool has_prev = i > 0, has_next = i + 1 < m;
    if (!has_prev && !has_next) continue;
    const bool prev_weak = !has_prev || w_jaccard(a, w, o[i - 1], o[i]) < iso_threshold;
    const bool next_weak = !has_next || w_jaccard(a, w, o[i], o[i + 1]) < iso_threshold;
    if (prev_weak && next_weak) {
      isolated[o[i]] = true;
      moved.push_back(o[i]);
    }
  }
  if (moved.empty()) return p;

  const CsrMatrix inv = reorder_detail::inverted_index(a);
  std::vector<std::vector<index_t>> attached(a.n_rows);
  std::vector<index_t> orphans;
  std::vector<bool> tested(a.n_rows, false);
  std::vector<index_t> touched;
  for (index_t r : moved) {
    index_t best = r;
    double best_sim = 0.0;
    touched.clear();
    for (index_t c : a.row_cols(r)) {
      for (index_t u : inv.row_cols(c)) {
        if (tested[u] || isolated[u]) continue;
        tested[u] = true;
        touched.push_back(u);
        const double s = w_jaccard(a, w, r, u);
        if (s > best_sim || (s == best_sim && s > 0.0 && u < best)) {
          best_sim = s;
          best = u;
        }
      }
    }
    for (index_t u : touched) tested[u] = false;
    if (best_sim > 0.0) {
      attached[best].push_back(r);
    } else {
      orphans.push_back(r);
    }
  }
  // Empty rows share no columns but match each other with similarity 1.
  index_t empty_anchor = a.n_rows;
  for (index_t u = 0; u < a.n_rows && empty_anchor == a.n_rows; ++u) {
    if (!isolated[u] && a.row_nnz(u) == 0) empty_anchor = u;
  }
  if (empty_anchor < a.n_rows) {
    std::vector<index_t> still;
    for (index_t r : orphans) (a.row_nnz(r) == 0 ? attached[empty_anchor] : still).push_back(r);
    orphans = std::move(still);
  }
  std::sort(orphans.begin(), orphans.end());

  Permutation out;
  out.order.reserve(m);
  for (index_t u : o) {
    if (isolated[u]) continue;
    out.order.push_back(u);
    out.order.insert(out.order.end(), attached[u].begin(), attached[u].end());
  }
  out.order.insert(out.order.end(), orphans.begin(), orphans.end());
  out.objective = ordering_objective(a, w, out.order);
  return out;
}

struct ReorderResult {
  Permutation permutation;
  CsrMatrix reordered;
  double identity_objective = 0.0;
  double mst_objective = 0.0;
  double refined_objective = 0.0;
  double adjusted_objective = 0.0;
};

/// Candidates -> kNN graph -> MST order -> 2-opt -> isolation adjustment.
/// The isolation step is kept only if it does not raise the objective.
inline ReorderResult reorder_pipeline(const CsrMatrix& a, const ReorderParams& params = {}) {
  const ColumnWeights w = column_weights(a, params.alpha);
  std::vector<index_t> identity(a.n_rows);
  std::iota(identity.begin(), identity.end(), 0);

  ReorderResult res;
  res.identity_objective = ordering_objective(a, w, identity);
  const auto cand = build_candidates(a, params.max_candidates, params.workers);
  const KnnGraph g = build_knn(a, w, cand, params.k, params.workers);
  Permutation p = mst_order(g);
  p.objective = ordering_objective(a, w, p.order);
  res.mst_objective = p.objective;
  p = refine_2opt(a, w, p, params.refine_window, params.max_passes);
  res.refined_objective = p.objective;
  Permutation adjusted = isolation_adjust(a, w, p, params.iso_threshold);
  res.adjusted_objective = adjusted.objective;
  if (adjusted.objective <= p.objective) p = std::move(adjusted);
  res.reordered = permute_rows(a, p.order);
  res.permutation = std::move(p);
  return res;
}

inline void write_permutation(std::ostream& out, const Permutation& p) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), p.objective);
  out << "# objective=" << std::string_view(buf, end - buf) << '\n';
  for (index_t x : p.order) out << x << '\n';
}

inline void write_permutation(const std::filesystem::path& path, const Permutation& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_permutation(out, p);
}

inline Permutation read_permutation(std::istream& in) {
  Permutation p;
  std::string line;
  std::size_t line_no = 0;
  bool have_objective = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.front() == '#') {
      const std::string key = "# objective=";
      if (line.rfind(key, 0) != 0) throw ParseError("expected '# objective=<value>'", line_no);
      const char* b = line.data() + key.size();
      auto [ptr, ec] = std::from_chars(b, line.data() + line.size(), p.objective);
      if (ec != std::errc{}) throw ParseError("bad objective value", line_no);
      have_objective = true;
      continue;
    }
    index_t v = 0;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc{} || ptr != line.data() + line.size()) throw ParseError("bad row index '" + line + "'", line_no);
    p.order.push_back(v);
  }
  if (!have_objective) throw ParseError("missing objective comment", 0);
  if (!is_permutation_of(p.order, p.order.size())) throw ParseError("indices do not form a permutation", 0);
  return p;
}

}  // namespace rsh
