#pragma once

// Little-endian packing helpers and the DMAT dense-matrix file.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "rsh/error.hpp"
#include "rsh/sparse.hpp"

namespace rsh {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class ByteWriter {
 public:
  template <class T>
    requires std::is_arithmetic_v<T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }

  template <class T>
    requires std::is_arithmetic_v<T>
  void put_array(std::span<const T> xs) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(xs.data());
    bytes_.insert(bytes_.end(), p, p + xs.size_bytes());
  }

  void put_magic(const char (&magic)[5]) { bytes_.insert(bytes_.end(), magic, magic + 4); }

  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <class T>
    requires std::is_arithmetic_v<T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  template <class T>
    requires std::is_arithmetic_v<T>
  std::vector<T> get_array(std::uint64_t n) {
    if (n > remaining() / sizeof(T)) throw FormatError("truncated file: array of " + std::to_string(n) + " elements");
    std::vector<T> out(n);
    std::memcpy(out.data(), bytes_.data() + pos_, n * sizeof(T));
    pos_ += n * sizeof(T);
    return out;
  }

  bool magic_is(const char (&magic)[5]) {
    need(4);
    const bool ok = std::memcmp(bytes_.data() + pos_, magic, 4) == 0;
    pos_ += 4;
    return ok;
  }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw FormatError("truncated file");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

inline constexpr std::size_t kDenseHeaderBytes = 16;

/// DMAT layout: "DMAT", u32 rows, u32 cols, u32 reserved = 0, then row-major f32.
inline std::vector<std::uint8_t> encode_dense(const DenseMatrix& m) {
  ByteWriter w;
  w.put_magic("DMAT");
  w.put<std::uint32_t>(m.n_rows());
  w.put<std::uint32_t>(m.n_cols());
  w.put<std::uint32_t>(0);
  w.put_array(m.data());
  return w.bytes();
}

inline DenseMatrix decode_dense(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (!r.magic_is("DMAT")) throw FormatError("not a DMAT file");
  const auto rows = r.get<std::uint32_t>();
  const auto cols = r.get<std::uint32_t>();
  if (r.get<std::uint32_t>() != 0) throw FormatError("DMAT reserved field is nonzero");
  auto data = r.get_array<float>(std::uint64_t{rows} * cols);
  if (r.remaining() != 0) throw FormatError("DMAT has trailing bytes");
  return DenseMatrix(rows, cols, std::move(data));
}

inline void write_dense(const std::filesystem::path& path, const DenseMatrix& m) { write_file_bytes(path, encode_dense(m)); }
inline DenseMatrix read_dense(const std::filesystem::path& path) { return decode_dense(read_file_bytes(path)); }

}  // namespace rsh
