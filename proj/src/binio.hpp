#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "freenoise/errors.hpp"

// Internal little-endian binary helpers shared by the weight and video
// container readers/writers.

namespace freenoise::binio {

inline void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& os, uint64_t v) {
  write_u32(os, static_cast<uint32_t>(v));
  write_u32(os, static_cast<uint32_t>(v >> 32));
}

inline void write_f32(std::ostream& os, const float* data, size_t count) {
  // float payloads are raw IEEE-754 bits; x86/arm little-endian layout
  os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 4));
}

/// Reads exactly n bytes or throws FormatError naming the byte offset.
inline void read_exact(std::istream& is, void* dst, size_t n, size_t offset,
                       const std::string& what) {
  is.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(is.gcount()) != n) {
    throw FormatError(what + ": truncated at byte " +
                      std::to_string(offset + static_cast<size_t>(is.gcount())));
  }
}

inline uint32_t read_u32(std::istream& is, size_t& offset, const std::string& what) {
  unsigned char b[4];
  read_exact(is, b, 4, offset, what);
  offset += 4;
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline uint64_t read_u64(std::istream& is, size_t& offset, const std::string& what) {
  const uint64_t lo = read_u32(is, offset, what);
  const uint64_t hi = read_u32(is, offset, what);
  return lo | (hi << 32);
}

inline void read_f32(std::istream& is, float* dst, size_t count, size_t& offset,
                     const std::string& what) {
  read_exact(is, dst, count * 4, offset, what);
  offset += count * 4;
}

}  // namespace freenoise::binio
