#include <doctest.h>

#include "cadq/metrics.hpp"
#include "support/scenarios.hpp"

using namespace cadq;
using testing::model_of;

namespace {

PartInstance whole(const CadModel& m) { return {m.all_face_ids(), {}}; }

const fixtures::FeatureInfo& feature(const fixtures::Fixture& fx, fixtures::CellKind kind) {
  for (const auto& f : fx.manifest.features) {
    if (f.kind == kind) return f;
  }
  throw std::logic_error("fixture lacks the feature");
}

}  // namespace

TEST_CASE("extents and centre of a whole cube") {
  const auto cube = model_of(fixtures::unit_cube());
  CHECK(part_extents(cube, whole(cube)) == Vec3{1, 1, 1});
  CHECK(part_center(cube, whole(cube)) == Vec3{0.5, 0.5, 0.5});
  CHECK(part_area(cube, whole(cube)) == doctest::Approx(6.0));

  const auto box = model_of(fixtures::box({-2, 0, 1}, {4, 3, 9}));
  CHECK(part_extents(box, whole(box)) == Vec3{6, 3, 8});
  CHECK(part_center(box, whole(box)) == Vec3{1, 1.5, 5});
}

TEST_CASE("centre is the box centre, not the vertex centroid") {
  // Dense grid on one half of the patch would pull a centroid; the box centre ignores it.
  const auto fx = fixtures::plate_mixed_holes();
  const auto model = model_of(fx);
  const auto m = measure(model, whole(model));
  CHECK(m.center == model.aabb().center());
  CHECK(m.extents == model.aabb().extents());
}

TEST_CASE("every part vertex lies inside centre +- extents / 2") {
  const auto fx = fixtures::plate_mixed_holes();
  const auto model = model_of(fx);
  for (const auto& f : fx.manifest.features) {
    const PartInstance p{f.faces, {}};
    const Vec3 c = part_center(model, p), e = part_extents(model, p);
    for (auto v : part_vertices(model, p)) {
      const Vec3 q = model.vertices()[v];
      for (int k = 0; k < 3; ++k) {
        CHECK(q[k] >= c[k] - e[k] / 2);
        CHECK(q[k] <= c[k] + e[k] / 2);
      }
    }
  }
}

TEST_CASE("feature measurements match the generator") {
  const auto fx = fixtures::plate_mixed_holes();
  const auto model = model_of(fx);
  for (const auto& f : fx.manifest.features) {
    const auto m = measure(model, {f.faces, {}});
    CAPTURE(static_cast<int>(f.kind));
    REQUIRE(m.radius.has_value());
    CHECK(*m.radius == doctest::Approx(f.radius).epsilon(1e-9));
    CHECK(*m.diameter == 2 * *m.radius);
    CHECK(*m.depth == doctest::Approx(f.depth).epsilon(1e-9));
    CHECK(std::abs(m.axis->z) == doctest::Approx(1.0));
    CHECK(m.center.x == doctest::Approx(f.center.x));
    CHECK(m.center.y == doctest::Approx(f.center.y));
    CHECK(m.center.z == doctest::Approx(f.center.z));
  }
}

TEST_CASE("blind hole: wall plus floor falls back to the wall, depth spans the floor") {
  const auto fx = fixtures::plate_with_blind_hole();
  const auto model = model_of(fx);
  const auto& blind = feature(fx, fixtures::CellKind::BlindHole);
  REQUIRE(blind.faces.size() == 2);
  const auto fit = fit_cylinder(model, {blind.faces, {}});
  REQUIRE(fit.has_value());
  CHECK(fit->radius == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(fit->depth == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(fit->fitted_face == blind.faces.front());
}

TEST_CASE("analytic cylinders in random poses") {
  std::mt19937 rng(2024);
  for (double r : {2.0, 5.0, 20.0}) {
    for (int pose = 0; pose < 10; ++pose) {
      const double h = std::uniform_real_distribution<double>(1.0, 60.0)(rng);
      const auto tf = testing::random_pose(rng);
      for (bool solid : {false, true}) {
        CAPTURE(r);
        CAPTURE(h);
        CAPTURE(solid);
        const auto t = testing::cylinder_trial(r, h, 64, tf, solid);
        REQUIRE(t.fitted);
        CHECK(t.radius_error < 0.01);
        CHECK(t.axis_error_deg < 1.0);
        CHECK(t.depth_error < 0.001);
      }
    }
  }
}

TEST_CASE("uniform scale scales every measurement") {
  auto fx = fixtures::plate_mixed_holes();
  const auto model = model_of(fx);
  fixtures::RigidTransform scale;
  scale.scale = 2.0;
  fx.mesh = fixtures::transformed(fx.mesh, scale);
  const auto scaled = model_of(fx);
  for (const auto& f : fx.manifest.features) {
    const auto a = measure(model, {f.faces, {}}), b = measure(scaled, {f.faces, {}});
    CHECK(b.extents == a.extents * 2.0);
    CHECK(b.center == a.center * 2.0);
    CHECK(*b.radius == doctest::Approx(*a.radius * 2.0).epsilon(1e-14));
    CHECK(*b.depth == doctest::Approx(*a.depth * 2.0).epsilon(1e-14));
  }
}

TEST_CASE("planar parts are not cylindrical") {
  const auto patch = model_of(fixtures::square_grid_patch(10.0, 4));
  CHECK_FALSE(fit_cylinder(patch, whole(patch)).has_value());
  const auto m = measure(patch, whole(patch));
  CHECK_FALSE(m.radius.has_value());
  CHECK_FALSE(m.axis.has_value());
  // A box is not a cylinder either, even though its normals span a plane around each edge direction.
  const auto cube = model_of(fixtures::unit_cube());
  CHECK_FALSE(fit_cylinder(cube, whole(cube)).has_value());
}

TEST_CASE("a plate with a hole is not a cylinder, though the hole is") {
  const auto fx = fixtures::plate_with_holes(1, 1);
  const auto model = model_of(fx);
  CHECK_FALSE(fit_cylinder(model, whole(model)).has_value());
  const auto& hole = fx.manifest.features.front().faces;
  auto with_top = hole;
  with_top.push_back(fx.manifest.named_faces.at("plate_top"));
  CHECK_FALSE(fit_cylinder(model, {with_top, {}}).has_value());
  CHECK(fit_cylinder(model, {hole, {}}).has_value());
}

TEST_CASE("too few vertices") {
  const auto patch = model_of(fixtures::square_grid_patch(1.0, 1));
  CHECK_THROWS_AS(fit_cylinder(patch, whole(patch)), TooFewVertices);
  CHECK_NOTHROW(measure(patch, whole(patch)));
}

TEST_CASE("measurements serialise to JSON with absent fields as null") {
  const auto patch = model_of(fixtures::square_grid_patch(2.0, 2));
  const nlohmann::json j = measure(patch, whole(patch));
  CHECK(j.at("radius").is_null());
  CHECK(j.at("extents") == nlohmann::json::array({2.0, 2.0, 0.0}));
}

TEST_CASE("closest-face pruning survives randomised masks of a block seen through holes") {
  const auto stats = testing::see_through_trials(20, 99, 960, 540);
  CHECK(stats.trials == 20);
  CHECK(stats.block_was_candidate == 20);
  CHECK(stats.block_pruned == 20);
}
