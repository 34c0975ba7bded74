// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "canonlift/ccm_render.hpp"
#include "canonlift/parallel.hpp"

namespace canonlift {

CoordMap::CoordMap(const CameraPose& pose, const Vec3& extents)
    : pose_(pose),
      extents_(extents),
      channels_(static_cast<std::size_t>(pose.width()) * static_cast<std::size_t>(pose.height()) * 3, 0.0f),
      mask_(static_cast<std::size_t>(pose.width()) * static_cast<std::size_t>(pose.height()), 0) {}

Vec3 CoordMap::value(int x, int y) const {
  const auto p = 3 * pixel(x, y);
  return {channels_[p], channels_[p + 1], channels_[p + 2]};
}

void CoordMap::set(int x, int y, const Vec3& v) {
  const auto p = pixel(x, y);
  channels_[3 * p] = static_cast<float>(v.x());
  channels_[3 * p + 1] = static_cast<float>(v.y());
  channels_[3 * p + 2] = static_cast<float>(v.z());
  mask_[p] = 1;
}

std::size_t CoordMap::foreground_count() const {
  return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
}

DepthMap::DepthMap(const CameraPose& pose)
    : pose_(pose),
      depth_(static_cast<std::size_t>(pose.width()) * static_cast<std::size_t>(pose.height()), 0.0) {}

namespace {

constexpr double kNearDepth = 1e-6;
constexpr int kTileRows = 8;

struct ClipVertex {
  Vec3 cam;    // camera-space position
  Vec3 coord;  // normalized canonical coordinate
};

struct ScreenTriangle {
  std::array<Vec2, 3> screen;
  std::array<double, 3> inv_depth;
  std::array<Vec3, 3> coord_over_depth;
  int x0, x1, y0, y1;  // inclusive pixel bounds
};

/// Sutherland-Hodgman against depth >= kNearDepth.
std::vector<ClipVertex> clip_near(const std::array<ClipVertex, 3>& tri) {
  std::vector<ClipVertex> out;
  for (std::size_t i = 0; i < 3; ++i) {
    const ClipVertex& a = tri[i];
    const ClipVertex& b = tri[(i + 1) % 3];
    const double da = -a.cam.z() - kNearDepth;
    const double db = -b.cam.z() - kNearDepth;
    if (da >= 0.0) out.push_back(a);
    if ((da >= 0.0) != (db >= 0.0)) {
      const double s = da / (da - db);
      out.push_back({a.cam + s * (b.cam - a.cam), a.coord + s * (b.coord - a.coord)});
    }
  }
  return out;
}

std::vector<ScreenTriangle> setup_triangles(const Mesh& mesh, const AxisNormalizer& n,
                                            const CameraPose& pose) {
  const auto& ext = pose.extrinsics();
  const Vec2 pp = pose.principal_point();
  const double f = pose.focal();
  std::vector<ScreenTriangle> out;
  out.reserve(mesh.triangles().size());
  for (const auto& t : mesh.triangles()) {
    std::array<ClipVertex, 3> tri;
    for (int k = 0; k < 3; ++k) {
      const Vec3& v = mesh.vertices()[t[k]];
      tri[k] = {ext.to_camera(v), n.normalize(v)};
    }
    const auto poly = clip_near(tri);
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
      ScreenTriangle st{};
      const std::array<const ClipVertex*, 3> v{&poly[0], &poly[k], &poly[k + 1]};
      double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
      double min_y = min_x, max_y = -min_x;
      for (int c = 0; c < 3; ++c) {
        const double depth = -v[c]->cam.z();
        st.screen[c] = Vec2(pp.x() + f * v[c]->cam.x() / depth, pp.y() - f * v[c]->cam.y() / depth);
        st.inv_depth[c] = 1.0 / depth;
        st.coord_over_depth[c] = v[c]->coord / depth;
        min_x = std::min(min_x, st.screen[c].x());
        max_x = std::max(max_x, st.screen[c].x());
        min_y = std::min(min_y, st.screen[c].y());
        max_y = std::max(max_y, st.screen[c].y());
      }
      // Pixel x covers samples at x + 0.5.
      const double lim_x = pose.width() - 1;
      const double lim_y = pose.height() - 1;
      st.x0 = static_cast<int>(std::max(0.0, std::ceil(min_x - 0.5)));
      st.x1 = static_cast<int>(std::min(lim_x, std::floor(max_x - 0.5)));
      st.y0 = static_cast<int>(std::max(0.0, std::ceil(min_y - 0.5)));
      st.y1 = static_cast<int>(std::min(lim_y, std::floor(max_y - 0.5)));
      if (st.x0 > st.x1 || st.y0 > st.y1) continue;
      out.push_back(st);
    }
  }
  return out;
}

double edge(const Vec2& a, const Vec2& b, double px, double py) {
  return (b.x() - a.x()) * (py - a.y()) - (b.y() - a.y()) * (px - a.x());
}

}  // namespace

RenderResult rasterize(const Mesh& mesh, const AxisNormalizer& n, const CameraPose& pose) {
  RenderResult out{CoordMap(pose, n.extents()), DepthMap(pose)};
  const auto tris = setup_triangles(mesh, n, pose);
  const int w = pose.width();
  const int h = pose.height();
  const auto tiles = static_cast<std::size_t>((h + kTileRows - 1) / kTileRows);

  parallel_for(tiles, [&](std::size_t tile) {
    const int row0 = static_cast<int>(tile) * kTileRows;
    const int row1 = std::min(h, row0 + kTileRows);
    std::vector<double> zbuf(static_cast<std::size_t>(w * (row1 - row0)),
                             std::numeric_limits<double>::infinity());
    for (const auto& st : tris) {
      const int y0 = std::max(st.y0, row0);
      const int y1 = std::min(st.y1, row1 - 1);
      if (y0 > y1) continue;
      const double area = edge(st.screen[0], st.screen[1], st.screen[2].x(), st.screen[2].y());
      if (area == 0.0) continue;
      for (int y = y0; y <= y1; ++y) {
        const double py = y + 0.5;
        for (int x = st.x0; x <= st.x1; ++x) {
          const double px = x + 0.5;
          const double b0 = edge(st.screen[1], st.screen[2], px, py) / area;
          const double b1 = edge(st.screen[2], st.screen[0], px, py) / area;
          const double b2 = 1.0 - b0 - b1;
          if (b0 < 0.0 || b1 < 0.0 || b2 < 0.0) continue;
          const double inv = b0 * st.inv_depth[0] + b1 * st.inv_depth[1] + b2 * st.inv_depth[2];
          const double depth = 1.0 / inv;
          auto& z = zbuf[static_cast<std::size_t>((y - row0) * w + x)];
          if (!(depth < z)) continue;
          z = depth;
          const Vec3 coord =
              (b0 * st.coord_over_depth[0] + b1 * st.coord_over_depth[1] + b2 * st.coord_over_depth[2]) *
              depth;
          out.ccm.set(x, y, coord);
          out.depth.set(x, y, depth);
        }
      }
    }
  });
  return out;
}

CoordMap depth_to_ccm(const DepthMap& depth, const AxisNormalizer& n) {
  const CameraPose& pose = depth.pose();
  CoordMap out(pose, n.extents());
  for (int y = 0; y < pose.height(); ++y) {
    for (int x = 0; x < pose.width(); ++x) {
      const double d = depth.at(x, y);
      if (!(d > 0.0)) continue;
      out.set(x, y, n.normalize(unproject(pose, Vec2(x + 0.5, y + 0.5), d)));
    }
  }
  return out;
}

}  // namespace canonlift
