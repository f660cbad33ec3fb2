#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "cadq/image_io.hpp"
#include "cadq/render.hpp"
#include "support/support.hpp"

using namespace cadq;
using testing::model_of;

namespace {

double angle_deg(Vec3 a, Vec3 b) {
  // atan2 form stays accurate for tiny angles, unlike acos of the dot product.
  const Vec3 u = normalized(a), v = normalized(b);
  return std::atan2(norm(cross(u, v)), dot(u, v)) * 180.0 / std::numbers::pi;
}

std::set<std::int32_t> ids_in(const RenderBuffers& b) {
  std::set<std::int32_t> ids(b.face_id.begin(), b.face_id.end());
  ids.erase(kNoFace);
  return ids;
}

// Textbook Moller-Trumbore, used only as an independent check on the watertight test.
bool moller_trumbore(Vec3 o, Vec3 d, Vec3 a, Vec3 b, Vec3 c, double& t, double& u, double& v) {
  const Vec3 e1 = b - a, e2 = c - a, p = cross(d, e2);
  const double det = dot(e1, p);
  if (std::abs(det) < 1e-14) return false;
  const double inv = 1.0 / det;
  const Vec3 s = o - a;
  u = dot(s, p) * inv;
  if (u < 0 || u > 1) return false;
  const Vec3 q = cross(s, e1);
  v = dot(d, q) * inv;
  if (v < 0 || u + v > 1) return false;
  t = dot(e2, q) * inv;
  return t > 0;
}

}  // namespace

TEST_CASE("main-axis cameras look along the axis, rotated by the perturbation") {
  const auto cube = model_of(fixtures::unit_cube());
  const std::pair<Side, Vec3> expected[] = {{Side::Top, {0, 0, -1}},  {Side::Bottom, {0, 0, 1}}, {Side::Front, {0, 1, 0}},
                                            {Side::Back, {0, -1, 0}}, {Side::Right, {-1, 0, 0}}, {Side::Left, {1, 0, 0}}};
  for (const auto& [side, axis] : expected) {
    const auto cam = camera_for_view(cube, ViewSpec::main_axis(side, 1.0), 640, 360);
    const double a = angle_deg(cam.view_direction, axis);
    CHECK(a <= 1.0 + 1e-9);
    CHECK(a == doctest::Approx(1.0).epsilon(1e-9));  // exactly one degree off-axis
    CHECK(angle_deg(camera_for_view(cube, ViewSpec::main_axis(side, 0.0), 640, 360).view_direction, axis) < 1e-9);
    CHECK(std::abs(dot(cam.up, cam.view_direction)) < 1e-12);
    CHECK(std::abs(dot(cam.right, cam.view_direction)) < 1e-12);
  }
}

TEST_CASE("side perturbation is an azimuth rotation about the vertical axis") {
  const auto cube = model_of(fixtures::unit_cube());
  const auto cam = camera_for_view(cube, ViewSpec::main_axis(Side::Front, 1.0), 640, 360);
  CHECK(std::abs(cam.view_direction.z) < 1e-15);  // stays horizontal
}

TEST_CASE("corner views sit at 45 degrees azimuth and elevation") {
  const auto cube = model_of(fixtures::unit_cube());
  const double c = std::cos(std::numbers::pi / 4);
  for (int k = 0; k < 8; ++k) {
    const Vec3 eye{(k & 1 ? 1 : -1) * c * c, (k & 2 ? 1 : -1) * c * c, (k & 4 ? 1 : -1) * c};
    const auto cam = camera_for_view(cube, ViewSpec::corner(k), 800, 600);
    CHECK(angle_deg(cam.view_direction, -eye) < 1e-9);
    // Elevation of the eye above the horizon is 45 degrees.
    CHECK(std::abs(std::asin(-cam.view_direction.z)) * 180 / std::numbers::pi == doctest::Approx(45.0));
    // The central ray passes through the model centre.
    const Vec3 mid = cam.viewport_center;
    const Vec3 to_center = cube.aabb().center() - mid;
    CHECK(norm(to_center - cam.view_direction * dot(to_center, cam.view_direction)) < 1e-12);
  }
}

TEST_CASE("camera is deterministic and frames the whole model") {
  const auto model = model_of(fixtures::plate_mixed_holes());
  for (const auto& name : {"top", "left", "corner:5"}) {
    const auto view = ViewSpec::parse(name);
    const auto a = camera_for_view(model, view, 320, 180);
    CHECK(a == camera_for_view(model, view, 320, 180));
    const auto& box = model.aabb();
    for (int i = 0; i < 8; ++i) {
      const Vec3 p{(i & 1) ? box.max.x : box.min.x, (i & 2) ? box.max.y : box.min.y, (i & 4) ? box.max.z : box.min.z};
      const Vec3 rel = p - a.viewport_center;
      const double px = dot(rel, a.right) / a.world_units_per_pixel + a.image_width * 0.5;
      const double py = a.image_height * 0.5 - dot(rel, a.up) / a.world_units_per_pixel;
      CHECK(px > 0);
      CHECK(px < a.image_width);
      CHECK(py > 0);
      CHECK(py < a.image_height);
      CHECK(dot(rel, a.view_direction) > 0);  // model in front of the viewport
    }
  }
}

TEST_CASE("flat model is still renderable; a point is degenerate") {
  const auto patch = model_of(fixtures::square_grid_patch(10.0, 2));
  CHECK_NOTHROW(camera_for_view(patch, ViewSpec::parse("top"), 64, 64));
  CHECK_THROWS_AS(camera_for_view(patch, ViewSpec::parse("top"), 0, 64), std::invalid_argument);
  CHECK_THROWS_AS(ViewSpec::parse("corner:9"), std::invalid_argument);
}

TEST_CASE("cube from exact +Z shows only its top face") {
  const auto fx = fixtures::unit_cube();
  const auto cube = model_of(fx);
  const auto b = render(cube, camera_for_view(cube, ViewSpec::main_axis(Side::Top, 0.0), 200, 100));
  const auto ids = ids_in(b);
  REQUIRE(ids.size() == 1);
  const FaceId top = *ids.begin();
  CHECK(cube.face(top).triangles.size() == 2);
  // Every vertex of that face has z = 1.
  for (const auto& t : cube.face(top).triangles) {
    for (auto v : t) CHECK(cube.vertices()[v].z == 1.0);
  }
  // Pixel count is consistent across histogram, id buffer and colour image.
  std::size_t coloured = 0;
  for (const auto& c : b.color) coloured += c == face_color(top);
  CHECK(visible_pixel_count(b, top) == coloured);
  CHECK(b.model_pixels == coloured);
  // Unit square at 200x100 with 5% margin: 100/1.05 px wide, so about 95x95 pixels.
  CHECK(coloured == doctest::Approx(95.0 * 95.0).epsilon(0.03));
  for (FaceId f = 0; f < 6; ++f) {
    if (f != top) CHECK(visible_pixel_count(b, f) == 0);
  }
  CHECK_THROWS_AS(visible_pixel_count(b, 6), UnknownFace);
  CHECK_THROWS_AS(visible_pixel_count(b, -1), UnknownFace);
}

TEST_CASE("cube from each corner shows exactly three faces") {
  const auto cube = model_of(fixtures::unit_cube());
  for (int k = 0; k < 8; ++k) {
    const auto b = render(cube, camera_for_view(cube, ViewSpec::corner(k), 160, 120));
    CHECK(ids_in(b).size() == 3);
  }
}

TEST_CASE("plate with holes from top: walls visible, background through the holes") {
  const auto fx = fixtures::plate_with_holes();
  const auto model = model_of(fx);
  const auto b = render(model, camera_for_view(model, ViewSpec::main_axis(Side::Top, 1.0), 640, 360));
  const auto ids = ids_in(b);
  for (const auto& hole : fx.manifest.features) CHECK(ids.count(hole.faces[0]) == 1);

  const auto exact = camera_for_view(model, ViewSpec::main_axis(Side::Top, 0.0), 640, 360);
  const auto e = render(model, exact);
  for (const auto& hole : fx.manifest.features) {
    // Project the hole centre to a pixel; nothing lies behind the plate there.
    const Vec3 rel = hole.center - exact.viewport_center;
    const int px = static_cast<int>(dot(rel, exact.right) / exact.world_units_per_pixel + 320);
    const int py = static_cast<int>(180 - dot(rel, exact.up) / exact.world_units_per_pixel);
    CHECK(e.face_id[e.index(px, py)] == kNoFace);
  }
}

TEST_CASE("occluded block faces get no pixels") {
  const auto fx = fixtures::plate_before_block();
  const auto model = model_of(fx);
  const auto b = render(model, camera_for_view(model, ViewSpec::main_axis(Side::Top, 0.0), 400, 400));
  // The block's bottom faces away from a top camera.
  CHECK(visible_pixel_count(b, fx.manifest.named_faces.at("block_bottom")) == 0);
}

TEST_CASE("palette is a bijection with well separated colours") {
  std::set<std::tuple<int, int, int>> seen;
  for (FaceId f = 0; f < static_cast<FaceId>(kMaxPaletteFaces); ++f) {
    const Rgb c = face_color(f);
    REQUIRE(face_from_color(c) == f);
    REQUIRE_FALSE(c == kBackground);
    // All channels on the same 8-step lattice: distinct colours differ by at least 8 somewhere.
    REQUIRE(c.r % 8 == 7);
    REQUIRE(c.g % 8 == 7);
    REQUIRE(c.b % 8 == 7);
    seen.insert({c.r, c.g, c.b});
  }
  CHECK(seen.size() == kMaxPaletteFaces);
  CHECK_FALSE(face_from_color(kBackground).has_value());
  CHECK_FALSE(face_from_color({7, 7, 7}).has_value());
  CHECK_THROWS_AS(face_color(static_cast<FaceId>(kMaxPaletteFaces)), UnknownFace);
  // Neighbouring ids do not get neighbouring colours.
  const Rgb a = face_color(0), b = face_color(1);
  CHECK(std::abs(a.r - b.r) + std::abs(a.g - b.g) + std::abs(a.b - b.b) >= 24);
}

TEST_CASE("watertight intersection agrees with Moller-Trumbore away from edges") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int compared = 0;
  for (int i = 0; i < 20000; ++i) {
    const Vec3 a{u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng)}, c{u(rng), u(rng), u(rng)};
    const Vec3 d = normalized(Vec3{u(rng), u(rng), u(rng)});
    const Vec3 o = Vec3{u(rng), u(rng), u(rng)} - d * 3.0;
    double t_ref = 0, bu = 0, bv = 0, t = 0;
    const bool ref = moller_trumbore(o, d, a, b, c, t_ref, bu, bv);
    // Skip rays that graze an edge; the two tests may legitimately differ there.
    if (ref && std::min({bu, bv, 1 - bu - bv}) < 1e-6) continue;
    const bool got = intersect_triangle(RayDirection(d), o, a, b, c, t);
    REQUIRE(got == ref);
    if (ref) CHECK(t == doctest::Approx(t_ref).epsilon(1e-9));
    ++compared;
  }
  CHECK(compared > 19000);
}

TEST_CASE("shared edges do not leak: rays through a fan centre always hit") {
  // A fan of 16 triangles around the origin; rays through the shared vertex and along shared edges.
  fixtures::MeshBuilder mb;
  mb.begin_face("fan");
  const auto centre = mb.vertex({0, 0, 0});
  std::vector<std::uint32_t> rim;
  for (int i = 0; i < 16; ++i) {
    const double a = 2 * std::numbers::pi * i / 16;
    rim.push_back(mb.vertex({std::cos(a), std::sin(a), 0}));
  }
  for (int i = 0; i < 16; ++i) mb.triangle(centre, rim[i], rim[(i + 1) % 16]);
  const auto model = model_of(mb.finish());
  const Bvh bvh(model);
  const RayDirection down(Vec3{0, 0, -1});
  CHECK(bvh.closest_hit({0, 0, 5}, down).has_value());
  for (int i = 0; i < 16; ++i) {
    const double a = 2 * std::numbers::pi * i / 16;
    for (double r : {0.1, 0.5, 0.9}) CHECK(bvh.closest_hit({r * std::cos(a), r * std::sin(a), 5}, down).has_value());
  }
}

TEST_CASE("BVH renders equal brute-force ray casting on small fixtures") {
  const std::vector<std::pair<const char*, fixtures::Fixture>> all = {
      {"cube", fixtures::unit_cube()},
      {"plate", fixtures::plate_with_holes(2, 2, 5.0, 8.0, 32)},
      {"blind", fixtures::plate_with_blind_hole()},
      {"cylinder", fixtures::solid_cylinder(5.0, 10.0, 48)},
  };
  for (const auto& [name, fx] : all) {
    const auto model = model_of(fx);
    const Renderer renderer(model);
    for (const auto& view : {ViewSpec::main_axis(Side::Top), ViewSpec::main_axis(Side::Left), ViewSpec::corner(6)}) {
      CAPTURE(name);
      CAPTURE(view.name());
      const auto cam = camera_for_view(model, view, 96, 54);
      const auto fast = renderer.render(cam);
      const auto ref = testing::brute_force_render(model, cam);
      CHECK(fast.face_id == ref.face_id);
      double worst = 0.0;
      for (std::size_t i = 0; i < ref.depth.size(); ++i) {
        if (ref.face_id[i] != kNoFace) worst = std::max(worst, std::abs(fast.depth[i] - ref.depth[i]));
      }
      CHECK(worst <= 1e-6);
    }
  }
}

TEST_CASE("image export round-trips") {
  testing::TempDir dir;
  const auto model = model_of(fixtures::plate_with_holes());
  const auto b = render(model, camera_for_view(model, ViewSpec::corner(7), 120, 80));
  export_render(b, dir.path(), "corner7");

  const auto png = encode_png_rgb(b.width, b.height, b.color);
  const auto decoded = decode_png_rgb(png);
  CHECK(decoded.width == b.width);
  CHECK(decoded.height == b.height);
  CHECK(decoded.pixels == b.color);

  int w = 0, h = 0;
  const auto ids = read_png_gray16(dir / "corner7_faceid.png", w, h);
  REQUIRE(ids.size() == b.face_id.size());
  for (std::size_t i = 0; i < ids.size(); ++i) REQUIRE(static_cast<int>(ids[i]) - 1 == b.face_id[i]);

  const auto depth = read_depth(dir / "corner7.depth", w, h);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (b.face_id[i] == kNoFace) {
      REQUIRE(std::isinf(depth[i]));
    } else {
      REQUIRE(depth[i] == static_cast<float>(b.depth[i]));
    }
  }
  CHECK_THROWS_AS(decode_png_rgb(std::vector<std::uint8_t>{1, 2, 3}), ImageError);
}
