// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "canonlift/geometry.hpp"
#include "test_support.hpp"

using namespace canonlift;

TEST_CASE("unit box fills every cell") {
  const OccupancyGrid g = voxelize(make_procedural(BoxSpec{}), 8);
  CHECK(g.count() == 512);
  CHECK(g.parity_warnings == 0);
}

TEST_CASE("cell centers follow the declared lattice") {
  const Box3 domain{Vec3(-0.5, -0.25, -0.25), Vec3(0.5, 0.25, 0.25)};
  const OccupancyGrid g(4, domain);
  CHECK(g.cell_center(0, 0, 0).isApprox(Vec3(-0.5 + 0.125, -0.25 + 0.0625, -0.25 + 0.0625)));
  CHECK(g.cell_center(3, 3, 3).isApprox(Vec3(0.5 - 0.125, 0.25 - 0.0625, 0.25 - 0.0625)));
  CHECK(g.index(1, 2, 3) == static_cast<std::size_t>((3 * 4 + 2) * 4 + 1));
}

TEST_CASE("sphere volume fraction") {
  const Mesh sphere = make_procedural(SphereSpec{0.5, 64, 32});
  const double exact = std::numbers::pi / 6.0;
  const OccupancyGrid g32 = voxelize(sphere, 32);
  CHECK(std::abs(g32.occupied_fraction() - exact) / exact < 0.05);

  // Voxel volume approaches the analytic value as the grid refines. The
  // tessellation deficit is small next to the voxel error at these sizes.
  double previous = 1.0;
  for (int r : {16, 32, 64}) {
    const double err = std::abs(voxelize(sphere, r).occupied_fraction() - exact);
    CHECK(err < previous);
    previous = err;
  }
}

TEST_CASE("cells outside the mesh stay empty") {
  const Mesh small = make_procedural(BoxSpec{Vec3::Constant(0.4)});
  const Box3 domain{Vec3::Constant(-0.5), Vec3::Constant(0.5)};
  const OccupancyGrid g = voxelize(small, domain, 20);
  for (int k = 0; k < 20; ++k)
    for (int j = 0; j < 20; ++j)
      for (int i = 0; i < 20; ++i) {
        const Vec3 c = g.cell_center(i, j, k);
        if (c.cwiseAbs().maxCoeff() > 0.2) CHECK_FALSE(g.at(i, j, k));
        if (c.cwiseAbs().maxCoeff() < 0.2) CHECK(g.at(i, j, k));
      }
}

TEST_CASE("grazing rays on an axis-aligned lattice are resolved") {
  // Box faces lie exactly on cell boundaries and its edges on cell-center
  // columns, so rays hit edges and vertices head-on.
  const Mesh box = make_procedural(BoxSpec{Vec3(0.5, 0.5, 0.5)});
  const Box3 domain{Vec3::Constant(-0.5), Vec3::Constant(0.5)};
  const OccupancyGrid g = voxelize(box, domain, 8);
  CHECK(g.count() == 64);
  CHECK(g.parity_warnings == 0);
}

TEST_CASE("open surfaces are reported") {
  const Mesh box = make_procedural(BoxSpec{});
  std::vector<TriIndex> tris(box.triangles().begin(), box.triangles().end() - 2);
  const OccupancyGrid g = voxelize(Mesh(box.vertices(), tris), 8);
  CHECK(g.parity_warnings > 0);
}

TEST_CASE("voxelization is deterministic") {
  const Mesh c = canonicalize(make_procedural(CompositeSpec{})).mesh;
  const OccupancyGrid a = voxelize(c, 32);
  const OccupancyGrid b = voxelize(c, 32);
  CHECK(iou(a, b) == 1.0);
  CHECK(a.count() == b.count());
}

TEST_CASE("intersection over union") {
  const Box3 domain{Vec3::Constant(-0.5), Vec3::Constant(0.5)};
  OccupancyGrid a(4, domain);
  OccupancyGrid b(4, domain);
  CHECK(iou(a, b) == 1.0);
  a.set(0, 0, 0, true);
  CHECK(iou(a, b) == 0.0);
  b.set(0, 0, 0, true);
  b.set(1, 0, 0, true);
  CHECK(iou(a, b) == doctest::Approx(0.5));
  CHECK_ERROR_KIND(iou(a, OccupancyGrid(5, domain)), ErrorKind::ExtentMismatch);
  CHECK_ERROR_KIND(iou(a, OccupancyGrid(4, Box3{Vec3::Constant(-1), Vec3::Constant(1)})), ErrorKind::ExtentMismatch);
}

TEST_CASE("mirroring the composite fixture breaks the overlap") {
  const CanonicalMesh c = canonicalize(make_procedural(CompositeSpec{}));
  const OccupancyGrid g = voxelize(c.mesh, c.normalizer.domain(), 48);
  const OccupancyGrid m = g.mirrored_x();
  CHECK(m.count() == g.count());
  CHECK(iou(m.mirrored_x(), g) == 1.0);
  CHECK(iou(m, g) < 0.5);

  const OccupancyGrid sphere = voxelize(make_procedural(SphereSpec{}), 32);
  CHECK(iou(sphere.mirrored_x(), sphere) > 0.99);
}
