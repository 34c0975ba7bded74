// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>


#include "canonlift/geometry.hpp"

namespace canonlift::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("canonlift_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::vector<Mesh> fixture_meshes() {
  return {make_procedural(SphereSpec{}), make_procedural(BoxSpec{}), make_procedural(TorusSpec{}),
          make_procedural(CompositeSpec{})};
}

// Signed volume by the divergence theorem; positive for outward winding.
inline double signed_volume(const Mesh& m) {
  double v = 0.0;
  for (const auto& t : m.triangles()) {
    const Vec3& a = m.vertices()[t[0]];
    const Vec3& b = m.vertices()[t[1]];
    const Vec3& c = m.vertices()[t[2]];
    v += a.dot(b.cross(c)) / 6.0;
  }
  return v;
}

}  // namespace canonlift::testing

#include "canonlift/error.hpp"

// Runs `expr` and checks that it throws canonlift::Error of the given kind.
#define CHECK_ERROR_KIND(expr, expected_kind)                            \
  do {                                                                   \
    bool thrown_ = false;                                                \
    try {                                                                \
      static_cast<void>(expr);                                           \
    } catch (const ::canonlift::Error& e_) {                             \
      thrown_ = true;                                                    \
      CHECK(e_.kind() == (expected_kind));                               \
    }                                                                    \
    CHECK_MESSAGE(thrown_, "expected canonlift::Error from " #expr);     \
  } while (false)
