#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hed {

/// Raised for malformed, truncated or mismatched checkpoint data.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace io {

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_integral_v<T>);
  unsigned char buf[sizeof(T)];
  auto u = static_cast<std::make_unsigned_t<T>>(value);
  for (std::size_t k = 0; k < sizeof(T); ++k) buf[k] = static_cast<unsigned char>((u >> (8 * k)) & 0xFFu);
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  static_assert(std::is_integral_v<T>);
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw CheckpointError("truncated checkpoint data");
  std::make_unsigned_t<T> u = 0;
  for (std::size_t k = 0; k < sizeof(T); ++k) u |= static_cast<std::make_unsigned_t<T>>(buf[k]) << (8 * k);
  return static_cast<T>(u);
}

inline void write_f64(std::ostream& out, double v) { write_le(out, std::bit_cast<std::uint64_t>(v)); }
inline double read_f64(std::istream& in) { return std::bit_cast<double>(read_le<std::uint64_t>(in)); }

inline void write_f64s(std::ostream& out, std::span<const double> v) {
  write_le<std::uint64_t>(out, v.size());
  for (double x : v) write_f64(out, x);
}

inline std::vector<double> read_f64s(std::istream& in, std::uint64_t max_len = 1ull << 34) {
  const auto n = read_le<std::uint64_t>(in);
  if (n > max_len) throw CheckpointError("implausible vector length in checkpoint");
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, 1u << 20)));
  for (std::uint64_t k = 0; k < n; ++k) v.push_back(read_f64(in));
  return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_le<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, std::uint64_t max_len = 1ull << 30) {
  const auto n = read_le<std::uint64_t>(in);
  if (n > max_len) throw CheckpointError("implausible string length in checkpoint");
  std::string s(static_cast<std::size_t>(n), '\0');
  if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n))) throw CheckpointError("truncated checkpoint data");
  return s;
}

inline void write_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

inline void expect_magic(std::istream& in, const char (&magic)[5]) {
  char buf[4];
  if (!in.read(buf, 4)) throw CheckpointError("truncated checkpoint data");
  if (std::string(buf, 4) != std::string(magic, 4))
    throw CheckpointError(std::string("bad magic, expected ") + magic);
}

}  // namespace io
}  // namespace hed
