// SPDX-License-Identifier: Apache-2.0
#pragma once

// Little-endian primitive encoding shared by the dataset and checkpoint
// formats.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "wts/error.hpp"

namespace wts::io {

class ByteWriter {
 public:
  void raw(std::string_view bytes) { buf_.append(bytes); }

  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<char, sizeof(T)> b;
    std::memcpy(b.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
    buf_.append(b.data(), b.size());
  }

  void u8(std::uint8_t v) { put(v); }
  void u16(std::uint16_t v) { put(v); }
  void u32(std::uint32_t v) { put(v); }
  void f32(float v) { put(v); }

  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

/// Cursor over an in-memory file image. Reads past the end throw
/// "truncated" errors carrying the caller-supplied context.
class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::string_view raw(std::size_t n, const char* what) {
    need(n, what);
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    std::array<char, sizeof(T)> b;
    std::memcpy(b.data(), data_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, b.data(), sizeof(T));
    return v;
  }

  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (data_.size() - pos_ < n) throw Error(std::string("truncated file while reading ") + what);
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw Error("cannot open file: " + path);
  std::string out;
  std::array<char, 1 << 16> chunk;
  std::size_t n;
  while ((n = std::fread(chunk.data(), 1, chunk.size(), f)) > 0) out.append(chunk.data(), n);
  std::fclose(f);
  return out;
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw Error("cannot open file for writing: " + path);
  const bool ok = std::fwrite(bytes.data(), 1, bytes.size(), f) == bytes.size();
  if (std::fclose(f) != 0 || !ok) throw Error("failed writing file: " + path);
}

}  // namespace wts::io
