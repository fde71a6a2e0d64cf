#pragma once

// Matrix Market coordinate I/O (real / integer / pattern; general / symmetric).

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rsh/error.hpp"
#include "rsh/sparse.hpp"

namespace rsh {

namespace mm_detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tok;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) tok.push_back(line.substr(i, j - i));
    i = j;
  }
  return tok;
}

inline std::uint64_t parse_count(std::string_view tok, std::size_t line, const char* what) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec == std::errc::result_out_of_range) throw DimensionError("line " + std::to_string(line) + ": " + what + " overflows");
  if (ec != std::errc{} || p != tok.data() + tok.size()) {
    throw ParseError(std::string("bad ") + what + " '" + std::string(tok) + "'", line);
  }
  return v;
}

inline double parse_real(std::string_view tok, std::size_t line) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size()) {
    throw ParseError("bad value '" + std::string(tok) + "'", line);
  }
  return v;
}

}  // namespace mm_detail

/// Parses Matrix Market text. Symmetric off-diagonal entries are mirrored,
/// pattern entries get 1.0, duplicates are summed.
inline CsrMatrix parse_matrix_market(std::string_view text) {
  using namespace mm_detail;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&](std::string_view& out) {
    if (pos >= text.size()) return false;
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    out = text.substr(pos, end - pos);
    if (!out.empty() && out.back() == '\r') out.remove_suffix(1);
    pos = end + 1;
    ++line_no;
    return true;
  };

  std::string_view line;
  if (!next_line(line)) throw ParseError("empty input", 0);
  auto header = split_ws(line);
  if (header.size() != 5 || lower(header[0]) != "%%matrixmarket") throw ParseError("missing %%MatrixMarket header", line_no);
  if (lower(header[1]) != "matrix") throw ParseError("object must be 'matrix'", line_no);
  if (lower(header[2]) != "coordinate") throw ParseError("only coordinate format is supported", line_no);
  const std::string field = lower(header[3]);
  const std::string symmetry = lower(header[4]);
  const bool pattern = field == "pattern";
  if (!pattern && field != "real" && field != "integer" && field != "double") {
    throw ParseError("unsupported field '" + field + "'", line_no);
  }
  const bool symmetric = symmetry == "symmetric";
  if (!symmetric && symmetry != "general") throw ParseError("unsupported symmetry '" + symmetry + "'", line_no);

  std::vector<std::string_view> size_tok;
  while (next_line(line)) {
    if (line.empty() || line.front() == '%') continue;
    size_tok = split_ws(line);
    if (size_tok.empty()) continue;
    break;
  }
  if (size_tok.size() != 3) throw ParseError("expected 'rows cols nnz' size line", line_no);
  const std::size_t size_line = line_no;
  const std::uint64_t rows = parse_count(size_tok[0], size_line, "row count");
  const std::uint64_t cols = parse_count(size_tok[1], size_line, "column count");
  const std::uint64_t declared = parse_count(size_tok[2], size_line, "entry count");
  if (rows > kMaxExtent || cols > kMaxExtent || declared > kMaxExtent) {
    throw DimensionError("line " + std::to_string(size_line) + ": dimensions exceed 2^31-1");
  }

  CooMatrix coo{static_cast<index_t>(rows), static_cast<index_t>(cols), {}};
  coo.entries.reserve(symmetric ? 2 * declared : declared);
  std::uint64_t seen = 0;
  while (next_line(line)) {
    if (line.empty() || line.front() == '%') continue;
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (seen == declared) throw ParseError("more entries than declared (" + std::to_string(declared) + ")", line_no);
    if (tok.size() != (pattern ? 2u : 3u)) throw ParseError("wrong number of fields in entry", line_no);
    const std::uint64_t i = parse_count(tok[0], line_no, "row index");
    const std::uint64_t j = parse_count(tok[1], line_no, "column index");
    if (i < 1 || i > rows || j < 1 || j > cols) throw ParseError("entry index out of range", line_no);
    const float v = pattern ? 1.0f : static_cast<float>(parse_real(tok[2], line_no));
    const auto r = static_cast<index_t>(i - 1);
    const auto c = static_cast<index_t>(j - 1);
    coo.entries.push_back({r, c, v});
    if (symmetric && r != c) {
      if (c >= rows || r >= cols) throw ParseError("symmetric entry mirrors out of range", line_no);
      coo.entries.push_back({c, r, v});
    }
    ++seen;
  }
  if (seen != declared) {
    throw ParseError("expected " + std::to_string(declared) + " entries, found " + std::to_string(seen), line_no);
  }
  return coo.to_csr();
}

inline CsrMatrix read_matrix_market(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_matrix_market(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

/// Writes general real coordinate format; values use shortest round-trip text.
inline void write_matrix_market(std::ostream& out, const CsrMatrix& a) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.n_rows << ' ' << a.n_cols << ' ' << a.nnz() << '\n';
  char buf[64];
  for (index_t r = 0; r < a.n_rows; ++r) {
    for (index_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
      auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), a.values[k]);
      out << (r + 1) << ' ' << (a.col_idx[k] + 1) << ' ' << std::string_view(buf, p - buf) << '\n';
    }
  }
}

inline void write_matrix_market(const std::filesystem::path& path, const CsrMatrix& a) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_matrix_market(out, a);
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace rsh
