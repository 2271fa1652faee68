#pragma once

// Little-endian stream primitives shared by the TTDF reader, the snapshot
// format, and content hashing.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "ttd/error.hpp"

namespace ttd::bytes {

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

template <typename T>
inline void write_raw(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
inline T read_raw(std::istream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error(ErrorCode::corrupt_file, "unexpected end of file");
  return value;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_raw<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
  const auto size = read_raw<std::uint64_t>(in);
  std::string s(size, '\0');
  in.read(s.data(), static_cast<std::streamsize>(size));
  if (!in) throw Error(ErrorCode::corrupt_file, "unexpected end of file");
  return s;
}

// FNV-1a, used for state content hashes in tests and invariants.
class Fnv1a {
 public:
  void update(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      hash_ ^= bytes[i];
      hash_ *= 1099511628211ULL;
    }
  }

  template <typename T>
  void update_value(T value) {
    update(&value, sizeof(T));
  }

  std::uint64_t digest() const noexcept { return hash_; }

 private:
  std::uint64_t hash_ = 14695981039346656037ULL;
};

}  // namespace ttd::bytes
