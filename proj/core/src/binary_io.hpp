#pragma once

// Little-endian primitive encoding shared by the dataset and checkpoint files.

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace groupface::detail {

template <typename UInt>
void write_le(std::ostream& out, UInt value) {
  std::array<char, sizeof(UInt)> bytes{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

template <typename UInt>
UInt read_le(std::istream& in, const std::string& what) {
  std::array<unsigned char, sizeof(UInt)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw std::runtime_error("unexpected end of file while reading " + what);
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) value |= static_cast<UInt>(bytes[i]) << (8 * i);
  return value;
}

inline void write_f64(std::ostream& out, double v) { write_le(out, std::bit_cast<std::uint64_t>(v)); }
inline void write_f32(std::ostream& out, float v) { write_le(out, std::bit_cast<std::uint32_t>(v)); }
inline double read_f64(std::istream& in, const std::string& what) { return std::bit_cast<double>(read_le<std::uint64_t>(in, what)); }
inline float read_f32(std::istream& in, const std::string& what) { return std::bit_cast<float>(read_le<std::uint32_t>(in, what)); }

inline void write_string(std::ostream& out, const std::string& s) {
  write_le(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, const std::string& what) {
  const auto size = read_le<std::uint32_t>(in, what);
  std::string s(size, '\0');
  in.read(s.data(), size);
  if (!in) throw std::runtime_error("unexpected end of file while reading " + what);
  return s;
}

}  // namespace groupface::detail
