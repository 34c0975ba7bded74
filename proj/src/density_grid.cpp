// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "canonlift/binary_io.hpp"
#include "canonlift/error.hpp"
#include "canonlift/lifting.hpp"

namespace canonlift {

DensityGrid::DensityGrid(int resolution, const Vec3& extents, double fill)
    : resolution_(resolution), extents_(extents) {
  if (resolution < 1 || !(extents.array() > 0.0).all()) {
    throw Error(ErrorKind::InvalidArgument, fmt::format("invalid density grid: R={}", resolution));
  }
  if (!(fill >= 0.0)) throw Error(ErrorKind::InvalidArgument, "densities must be non-negative");
  const auto r = static_cast<std::size_t>(resolution);
  data_.assign(r * r * r, fill);
}

DensityGrid DensityGrid::centered_blob(int resolution, const Vec3& extents, double density,
                                       double radius_fraction) {
  DensityGrid grid(resolution, extents);
  const double radius = radius_fraction * extents.maxCoeff();
  for (int k = 0; k < resolution; ++k)
    for (int j = 0; j < resolution; ++j)
      for (int i = 0; i < resolution; ++i)
        if (grid.cell_center(i, j, k).norm() <= radius) grid.at(i, j, k) = density;
  return grid;
}

Vec3 DensityGrid::cell_center(int i, int j, int k) const {
  const Vec3 idx(i + 0.5, j + 0.5, k + 0.5);
  return -0.5 * extents_ + (idx.array() * extents_.array() / resolution_).matrix();
}

double DensityGrid::sample(const Vec3& p) const {
  const Stencil s = stencil(p);
  double v = 0.0;
  for (std::size_t c = 0; c < 8; ++c) v += s.weight[c] * data_[s.index[c]];
  return v;
}

double DensityGrid::max_density() const { return *std::max_element(data_.begin(), data_.end()); }

OccupancyGrid DensityGrid::occupancy(double iso) const {
  OccupancyGrid occ(resolution_, domain());
  for (int k = 0; k < resolution_; ++k)
    for (int j = 0; j < resolution_; ++j)
      for (int i = 0; i < resolution_; ++i) occ.set(i, j, k, at(i, j, k) > iso);
  return occ;
}

double relative_iso(const DensityGrid& grid, double fraction) { return fraction * grid.max_density(); }

void write_grid(const DensityGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write '{}'", path.string()));
  out.write("DGR1", 4);
  binio::put_u32(out, static_cast<std::uint32_t>(grid.resolution()));
  for (int a = 0; a < 3; ++a) binio::put_f32(out, static_cast<float>(grid.extents()[a]));
  for (double v : grid.data()) binio::put_f32(out, static_cast<float>(v));
  if (!out) throw Error(ErrorKind::Io, fmt::format("write failed for '{}'", path.string()));
}

DensityGrid read_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open '{}'", path.string()));
  if (!binio::check_magic(in, "DGR1")) {
    throw Error(ErrorKind::Parse, fmt::format("'{}' is not a DGR1 file", path.string()));
  }
  std::uint32_t r = 0;
  std::array<float, 3> e{};
  if (!binio::get_u32(in, r) || r == 0 || r > 4096 || !binio::get_f32(in, e[0]) ||
      !binio::get_f32(in, e[1]) || !binio::get_f32(in, e[2])) {
    throw Error(ErrorKind::Parse, fmt::format("'{}': bad grid header", path.string()));
  }
  DensityGrid grid(static_cast<int>(r), Vec3(e[0], e[1], e[2]));
  for (double& v : grid.data()) {
    float f = 0.0f;
    if (!binio::get_f32(in, f)) throw Error(ErrorKind::Parse, fmt::format("'{}': truncated grid", path.string()));
    if (!(f >= 0.0f)) throw Error(ErrorKind::Parse, fmt::format("'{}': negative or NaN density", path.string()));
    v = f;
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorKind::Parse, fmt::format("'{}': trailing bytes after grid payload", path.string()));
  }
  return grid;
}

}  // namespace canonlift
