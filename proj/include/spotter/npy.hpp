#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "spotter/common.hpp"

// Minimal NPY (v1.0) support for 1-D float32/float64 arrays, little-endian,
// C order. Enough for checkpoint parameter blobs; round-trips bit-exactly.

namespace spotter::npy {

template <typename T>
const char* dtype_str();
template <>
inline const char* dtype_str<float>() { return "<f4"; }
template <>
inline const char* dtype_str<double>() { return "<f8"; }

template <typename T>
void save(const std::filesystem::path& path, std::span<const T> values) {
  std::string header = "{'descr': '";
  header += dtype_str<T>();
  header += "', 'fortran_order': False, 'shape': (";
  header += std::to_string(values.size());
  header += ",), }";
  // pad with spaces so that magic + header is a multiple of 64 bytes
  std::size_t unpadded = 10 + header.size() + 1;
  std::size_t padded = (unpadded + 63) / 64 * 64;
  header.append(padded - unpadded, ' ');
  header += '\n';

  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::Io, "cannot write " + path.string());
  const unsigned char magic[8] = {0x93, 'N', 'U', 'M', 'P', 'Y', 1, 0};
  out.write(reinterpret_cast<const char*>(magic), 8);
  auto hlen = static_cast<std::uint16_t>(header.size());
  out.write(reinterpret_cast<const char*>(&hlen), 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(T)));
  require(out.good(), ErrorKind::Io, "write failed: " + path.string());
}

template <typename T>
std::vector<T> load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Io, "cannot read " + path.string());
  unsigned char magic[8];
  in.read(reinterpret_cast<char*>(magic), 8);
  require(in.good() && magic[0] == 0x93 && std::memcmp(magic + 1, "NUMPY", 5) == 0,
          ErrorKind::Io, "not an npy file: " + path.string());
  std::uint16_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), 2);
  std::string header(hlen, '\0');
  in.read(header.data(), hlen);
  require(header.find(dtype_str<T>()) != std::string::npos, ErrorKind::Io,
          "npy dtype mismatch in " + path.string());
  require(header.find("'fortran_order': False") != std::string::npos,
          ErrorKind::Io, "npy fortran order unsupported");

  auto lp = header.find('(');
  auto rp = header.find(')', lp);
  require(lp != std::string::npos && rp != std::string::npos, ErrorKind::Io,
          "npy shape missing");
  std::size_t count = 1;
  std::string shape = header.substr(lp + 1, rp - lp - 1);
  std::size_t pos = 0;
  bool any = false;
  while (pos < shape.size()) {
    std::size_t comma = shape.find(',', pos);
    std::string tok = shape.substr(pos, comma == std::string::npos
                                            ? std::string::npos
                                            : comma - pos);
    std::size_t b = tok.find_first_not_of(" \t");
    if (b != std::string::npos) {
      count *= static_cast<std::size_t>(std::stoull(tok.substr(b)));
      any = true;
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (!any) count = 1;

  std::vector<T> values(count);
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(count * sizeof(T)));
  require(in.good(), ErrorKind::Io, "truncated npy file: " + path.string());
  return values;
}

}  // namespace spotter::npy
