// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <png.h>

#include "canonlift/binary_io.hpp"
#include "canonlift/ccm_render.hpp"
#include "canonlift/error.hpp"

namespace canonlift {

namespace {

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open '{}'", path.string()));
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, fmt::format("'{}': {}", path.string(), e.what()));
  }
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& ccm_path) {
  auto p = ccm_path;
  p.replace_extension(".json");
  return p;
}

nlohmann::json ccm_sidecar(const CoordMap& map, const std::string& mesh_hash) {
  const Vec3& e = map.extents();
  return {{"pose", pose_to_json(map.pose())},
          {"extents", {e.x(), e.y(), e.z()}},
          {"mesh_hash", mesh_hash}};
}

void write_ccm(const CoordMap& map, const std::filesystem::path& path, const std::string& mesh_hash) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write '{}'", path.string()));
    out.write("CCM1", 4);
    binio::put_u32(out, static_cast<std::uint32_t>(map.width()));
    binio::put_u32(out, static_cast<std::uint32_t>(map.height()));
    for (float v : map.channels()) binio::put_f32(out, v);
    out.write(reinterpret_cast<const char*>(map.mask().data()),
              static_cast<std::streamsize>(map.mask().size()));
    if (!out) throw Error(ErrorKind::Io, fmt::format("write failed for '{}'", path.string()));
  }
  std::ofstream side(sidecar_path(path));
  if (!side) throw Error(ErrorKind::Io, fmt::format("cannot write sidecar for '{}'", path.string()));
  side << ccm_sidecar(map, mesh_hash).dump(2) << '\n';
}

CcmHeader read_ccm_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open '{}'", path.string()));
  if (!binio::check_magic(in, "CCM1")) {
    throw Error(ErrorKind::Parse, fmt::format("'{}' is not a CCM1 file", path.string()));
  }
  CcmHeader h;
  if (!binio::get_u32(in, h.width) || !binio::get_u32(in, h.height) || h.width == 0 || h.height == 0) {
    throw Error(ErrorKind::Parse, fmt::format("'{}': bad CCM header", path.string()));
  }
  const auto expected = 12 + static_cast<std::uintmax_t>(h.width) * h.height * 13;
  if (std::filesystem::file_size(path) != expected) {
    throw Error(ErrorKind::Parse, fmt::format("'{}': size does not match {}x{} header", path.string(),
                                              h.width, h.height));
  }
  return h;
}

CoordMap read_ccm(const std::filesystem::path& path) {
  const CcmHeader h = read_ccm_header(path);
  const auto side = read_json_file(sidecar_path(path));
  CameraPose pose = pose_from_json(side.at("pose"));
  if (pose.width() != static_cast<int>(h.width) || pose.height() != static_cast<int>(h.height)) {
    throw Error(ErrorKind::Parse, fmt::format("'{}': sidecar size disagrees with header", path.string()));
  }
  const auto ext = side.at("extents").get<std::vector<double>>();
  if (ext.size() != 3) throw Error(ErrorKind::Parse, "sidecar extents must have 3 values");
  CoordMap map(pose, Vec3(ext[0], ext[1], ext[2]));

  std::ifstream in(path, std::ios::binary);
  in.seekg(12);
  for (float& v : map.channels()) {
    if (!binio::get_f32(in, v)) throw Error(ErrorKind::Io, "truncated CCM payload");
  }
  if (!in.read(reinterpret_cast<char*>(map.mask().data()), static_cast<std::streamsize>(map.mask().size()))) {
    throw Error(ErrorKind::Io, "truncated CCM mask");
  }
  return map;
}

void write_png16(const CoordMap& map, const std::filesystem::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!fp) throw Error(ErrorKind::Io, fmt::format("cannot write '{}'", path.string()));
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::Io, "libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::Io, fmt::format("libpng failed writing '{}'", path.string()));
  }
  const auto w = static_cast<png_uint_32>(map.width());
  const auto h = static_cast<png_uint_32>(map.height());
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, w, h, 16, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(w) * 6);
  for (png_uint_32 y = 0; y < h; ++y) {
    for (png_uint_32 x = 0; x < w; ++x) {
      const auto p = 3 * map.pixel(static_cast<int>(x), static_cast<int>(y));
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(static_cast<double>(map.channels()[p + c]), 0.0, 1.0);
        const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
        row[x * 6 + c * 2] = static_cast<png_byte>(q >> 8);  // PNG is big-endian
        row[x * 6 + c * 2 + 1] = static_cast<png_byte>(q & 0xff);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace canonlift
