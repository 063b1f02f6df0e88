#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace spotter {

using i64 = std::int64_t;
using u64 = std::uint64_t;

enum class ErrorKind {
  ShapeMismatch,
  Config,
  DegenerateClassifier,
  InvalidMask,
  EmptyTube,
  EmptySupport,
  DegeneratePrototype,
  Protocol,
  EmptyData,
  NonFiniteLoss,
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) raise(kind, msg);
}

// Dense row-major matrix. Plain storage, no ownership tricks.
template <typename T>
struct Matrix {
  i64 rows = 0;
  i64 cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(i64 r, i64 c, T fill = T(0))
      : rows(r), cols(c), data(static_cast<std::size_t>(r * c), fill) {}

  T* row(i64 r) { return data.data() + r * cols; }
  const T* row(i64 r) const { return data.data() + r * cols; }
  std::span<T> row_span(i64 r) { return {row(r), static_cast<std::size_t>(cols)}; }
  std::span<const T> row_span(i64 r) const {
    return {row(r), static_cast<std::size_t>(cols)};
  }
  T& at(i64 r, i64 c) { return data[r * cols + c]; }
  const T& at(i64 r, i64 c) const { return data[r * cols + c]; }
  void zero() { std::fill(data.begin(), data.end(), T(0)); }
  bool empty() const { return rows == 0; }
};

// FNV-1a, used for config hashes and parameter checksums.
inline u64 fnv1a64(const void* bytes, std::size_t len, u64 seed = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  u64 h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline u64 fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

template <typename T>
u64 checksum(std::span<const T> values) {
  return fnv1a64(values.data(), values.size() * sizeof(T));
}

inline std::string hex64(u64 v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

}  // namespace spotter
