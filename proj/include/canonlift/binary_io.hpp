// SPDX-License-Identifier: Apache-2.0
//
// Little-endian scalar encoding shared by the CCM and grid formats.

#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string_view>

namespace canonlift::binio {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

inline void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

inline bool get_u32(std::istream& in, std::uint32_t& v) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) return false;
  v = static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
      (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
  return true;
}

inline bool get_f32(std::istream& in, float& v) {
  std::uint32_t bits = 0;
  if (!get_u32(in, bits)) return false;
  v = std::bit_cast<float>(bits);
  return true;
}

inline bool check_magic(std::istream& in, std::string_view magic) {
  char buf[4] = {};
  return in.read(buf, 4) && std::string_view(buf, 4) == magic;
}

}  // namespace canonlift::binio
