// SPDX-License-Identifier: Apache-2.0

#include <array>
#include <unordered_map>

#include <fmt/format.h>

#include "canonlift/error.hpp"
#include "canonlift/lifting.hpp"
#include "mc_tables.hpp"

namespace canonlift {

namespace {

// Corner offsets matching the table's corner numbering.
constexpr std::array<std::array<int, 3>, 8> kCorner = {{
    {0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1}, {0, 1, 0}, {1, 1, 0}, {1, 1, 1}, {0, 1, 1},
}};
constexpr std::array<std::array<int, 2>, 12> kEdge = {{
    {0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6}, {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7},
}};

}  // namespace

Mesh extract_mesh(const DensityGrid& grid, double iso) {
  if (!(iso > 0.0)) throw Error(ErrorKind::InvalidArgument, fmt::format("iso level {} must be > 0", iso));
  const int r = grid.resolution();
  // Lattice of cell centers with one ring of zero padding: index -1 .. r.
  const int n = r + 2;
  auto value = [&](int i, int j, int k) {
    if (i < 0 || j < 0 || k < 0 || i >= r || j >= r || k >= r) return 0.0;
    return grid.at(i, j, k);
  };
  auto lattice_key = [n](int i, int j, int k) {
    return (static_cast<std::size_t>(k + 1) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j + 1)) *
               static_cast<std::size_t>(n) +
           static_cast<std::size_t>(i + 1);
  };

  std::vector<Vec3> verts;
  std::vector<TriIndex> tris;
  std::unordered_map<std::size_t, std::uint32_t> edge_vertex;

  for (int k = -1; k < r; ++k) {
    for (int j = -1; j < r; ++j) {
      for (int i = -1; i < r; ++i) {
        std::array<double, 8> val{};
        int cube = 0;
        for (int c = 0; c < 8; ++c) {
          val[static_cast<std::size_t>(c)] = value(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]);
          if (val[static_cast<std::size_t>(c)] < iso) cube |= 1 << c;
        }
        if (detail::kMcEdgeTable[static_cast<std::size_t>(cube)] == 0) continue;

        std::array<std::uint32_t, 12> local{};
        for (int e = 0; e < 12; ++e) {
          if (!(detail::kMcEdgeTable[static_cast<std::size_t>(cube)] & (1 << e))) continue;
          const auto& a = kCorner[kEdge[e][0]];
          const auto& b = kCorner[kEdge[e][1]];
          // Canonical edge id: lower lattice point plus axis.
          const std::array<int, 3> pa{i + a[0], j + a[1], k + a[2]};
          const std::array<int, 3> pb{i + b[0], j + b[1], k + b[2]};
          const auto lo = std::min(lattice_key(pa[0], pa[1], pa[2]), lattice_key(pb[0], pb[1], pb[2]));
          const int axis = a[0] != b[0] ? 0 : (a[1] != b[1] ? 1 : 2);
          const std::size_t key = lo * 3 + static_cast<std::size_t>(axis);
          auto [it, inserted] = edge_vertex.try_emplace(key, static_cast<std::uint32_t>(verts.size()));
          if (inserted) {
            const double va = val[static_cast<std::size_t>(kEdge[e][0])];
            const double vb = val[static_cast<std::size_t>(kEdge[e][1])];
            const double s = (iso - va) / (vb - va);
            const Vec3 xa = grid.cell_center(pa[0], pa[1], pa[2]);
            const Vec3 xb = grid.cell_center(pb[0], pb[1], pb[2]);
            verts.push_back(xa + s * (xb - xa));
          }
          local[static_cast<std::size_t>(e)] = it->second;
        }
        const auto& row = detail::kMcTriTable[static_cast<std::size_t>(cube)];
        // Reversed so triangles face away from the dense side.
        for (std::size_t t = 0; t + 2 < row.size() && row[t] != -1; t += 3) {
          tris.push_back({local[static_cast<std::size_t>(row[t])], local[static_cast<std::size_t>(row[t + 2])],
                          local[static_cast<std::size_t>(row[t + 1])]});
        }
      }
    }
  }
  return Mesh(std::move(verts), std::move(tris));
}

}  // namespace canonlift
