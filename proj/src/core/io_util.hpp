#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "core/error.hpp"

namespace cdt {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts need swaps");

// Binary readers/writers shared by the checkpoint and dataset formats.
// Readers throw ErrorCode::truncated when the stream ends early.

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!os) fail(ErrorCode::io, "write failed");
}

template <class T>
void write_pod(std::ostream& os, T v) {
  write_bytes(os, &v, sizeof(T));
}

inline void read_bytes(std::istream& is, void* p, std::size_t n,
                       const std::string& what) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) {
    fail(ErrorCode::truncated, "truncated file while reading " + what);
  }
}

template <class T>
T read_pod(std::istream& is, const std::string& what) {
  T v;
  read_bytes(is, &v, sizeof(T), what);
  return v;
}

inline void expect_magic(std::istream& is, const char (&magic)[9],
                         const std::string& format_name) {
  char buf[8];
  read_bytes(is, buf, 8, format_name + " magic");
  if (std::memcmp(buf, magic, 8) != 0) {
    fail(ErrorCode::bad_magic,
         "not a " + format_name + " file (bad magic)");
  }
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorCode::io, "cannot open for writing: " + path);
  return os;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::io, "cannot open for reading: " + path);
  return is;
}

}  // namespace cdt
