// SPDX-License-Identifier: Apache-2.0
//
// Mesh ingestion, canonical normalization and ground-truth voxelization.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace canonlift {

using Vec3 = Eigen::Vector3d;
using TriIndex = std::array<std::uint32_t, 3>;

/// Indexed triangle mesh. Construction checks index bounds; an empty mesh is
/// a valid value (marching cubes may legitimately produce one), but loaders
/// and every geometric query reject it.
class Mesh {
 public:
  Mesh() = default;
  Mesh(std::vector<Vec3> vertices, std::vector<TriIndex> triangles);

  const std::vector<Vec3>& vertices() const noexcept { return vertices_; }
  const std::vector<TriIndex>& triangles() const noexcept { return triangles_; }
  bool empty() const noexcept { return triangles_.empty(); }

  double triangle_area(std::size_t tri) const;
  bool has_nonzero_area() const;

  /// Concatenates two meshes, offsetting the second mesh's indices.
  static Mesh merge(const Mesh& a, const Mesh& b);

 private:
  std::vector<Vec3> vertices_;
  std::vector<TriIndex> triangles_;
};

struct Box3 {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  Vec3 extents() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }
  bool contains(const Vec3& p, double tol = 0.0) const;
};

/// Per-axis affine map from canonicalized coordinates, which live in
/// [-e/2, e/2], onto the unit cube: n_k(v) = v / e_k + 1/2.
class AxisNormalizer {
 public:
  /// Requires 0 < e_k <= 1 and max_k e_k == 1 (within 1e-6).
  explicit AxisNormalizer(const Vec3& extents);

  const Vec3& extents() const noexcept { return extents_; }
  Box3 domain() const { return {-0.5 * extents_, 0.5 * extents_}; }

  Vec3 normalize(const Vec3& p) const;
  Vec3 denormalize(const Vec3& q) const;

 private:
  Vec3 extents_;
};

struct CanonicalMesh {
  Mesh mesh;
  AxisNormalizer normalizer;
  double scale = 1.0;     // uniform factor applied after centering
  Vec3 source_center;     // bbox center of the input mesh
};

Box3 tight_bbox(const Mesh& mesh);

/// Centers the tight bbox at the origin and scales uniformly so its largest
/// extent is exactly 1.
CanonicalMesh canonicalize(const Mesh& mesh);

/// Wavefront OBJ subset: `v` and `f` records, polygons fan-triangulated.
Mesh load_mesh(const std::filesystem::path& path);
Mesh parse_obj(const std::string& text);
void save_mesh(const Mesh& mesh, const std::filesystem::path& path);
std::string format_obj(const Mesh& mesh);

/// Hex SHA-256 over the vertex and index buffers.
std::string mesh_hash(const Mesh& mesh);

// Procedural fixtures -------------------------------------------------------

struct SphereSpec {
  double radius = 0.5;
  int segments = 32;  // around the y axis
  int rings = 16;     // pole to pole
  Vec3 center = Vec3::Zero();
};

struct BoxSpec {
  Vec3 extents = Vec3::Ones();
  Vec3 center = Vec3::Zero();
};

struct TorusSpec {
  double major_radius = 0.35;
  double minor_radius = 0.15;
  int major_segments = 48;
  int minor_segments = 24;
};

/// Box with a sphere offset toward +x and +y, separated by a gap. Has no
/// mirror symmetry across the yz plane, so reflections are detectable.
struct CompositeSpec {
  BoxSpec box{Vec3(0.6, 0.3, 0.3), Vec3(-0.2, 0.0, 0.0)};
  SphereSpec sphere{0.18, 32, 16, Vec3(0.32, 0.12, 0.0)};
};

using ShapeSpec = std::variant<SphereSpec, BoxSpec, TorusSpec, CompositeSpec>;

Mesh make_procedural(const ShapeSpec& spec);

// Voxelization --------------------------------------------------------------

/// Boolean occupancy over a box domain split into R cells per axis. Cell
/// (i, j, k) is stored at (k * R + j) * R + i.
class OccupancyGrid {
 public:
  OccupancyGrid(int resolution, const Box3& domain);

  int resolution() const noexcept { return resolution_; }
  const Box3& domain() const noexcept { return domain_; }

  std::size_t index(int i, int j, int k) const;
  Vec3 cell_center(int i, int j, int k) const;

  bool at(int i, int j, int k) const { return cells_[index(i, j, k)] != 0; }
  void set(int i, int j, int k, bool occupied) { cells_[index(i, j, k)] = occupied ? 1 : 0; }

  std::size_t count() const;
  double occupied_fraction() const;

  /// Reflection across the plane through the domain center normal to x.
  OccupancyGrid mirrored_x() const;

  /// Number of ray columns whose crossing count was odd (open surface).
  int parity_warnings = 0;

 private:
  int resolution_;
  Box3 domain_;
  std::vector<std::uint8_t> cells_;
};

/// Intersection over union. Throws ExtentMismatch if the grids disagree in
/// resolution or domain.
double iou(const OccupancyGrid& a, const OccupancyGrid& b);

/// Center-point inside test by ray parity along +z, with deterministic
/// jitter when a ray grazes an edge or vertex. The domain defaults to the
/// mesh's tight bbox.
OccupancyGrid voxelize(const Mesh& mesh, int resolution);
OccupancyGrid voxelize(const Mesh& mesh, const Box3& domain, int resolution);

}  // namespace canonlift
