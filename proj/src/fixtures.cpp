#include "cadq/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cadq::fixtures {

std::uint32_t MeshBuilder::vertex(Vec3 p) {
  mesh_.positions.push_back(p);
  return static_cast<std::uint32_t>(mesh_.positions.size() - 1);
}

FaceId MeshBuilder::begin_face(const std::string& name) {
  const auto id = static_cast<FaceId>(mesh_.groups.size());
  mesh_.groups.push_back({"face_" + std::to_string(id), {}});
  if (!name.empty()) manifest_.named_faces[name] = id;
  return id;
}

void MeshBuilder::triangle(std::uint32_t a, std::uint32_t b, std::uint32_t c) {
  mesh_.groups.back().polygons.push_back({a, b, c});
  ++triangles_;
}

void MeshBuilder::quad(std::uint32_t a, std::uint32_t b, std::uint32_t c, std::uint32_t d) {
  triangle(a, b, c);
  triangle(a, c, d);
}

void MeshBuilder::label(const std::string& label, FaceId face) { mesh_.labels[label].push_back(face); }

Fixture MeshBuilder::finish() {
  manifest_.face_count = mesh_.groups.size();
  manifest_.triangle_count = triangles_;
  for (auto& [label, faces] : mesh_.labels) std::sort(faces.begin(), faces.end());
  return {std::move(mesh_), std::move(manifest_)};
}

namespace {

void add_box(MeshBuilder& b, Vec3 lo, Vec3 hi, const std::string& label, const std::string& prefix = {}) {
  std::uint32_t v[8];
  for (int i = 0; i < 8; ++i) {
    v[i] = b.vertex({(i & 1) ? hi.x : lo.x, (i & 2) ? hi.y : lo.y, (i & 4) ? hi.z : lo.z});
  }
  struct Side {
    const char* name;
    int a, b, c, d;
  };
  constexpr Side sides[] = {
      {"bottom", 0, 2, 3, 1}, {"top", 4, 5, 7, 6},  {"front", 0, 1, 5, 4},
      {"back", 2, 6, 7, 3},   {"left", 0, 4, 6, 2}, {"right", 1, 3, 7, 5},
  };
  std::vector<FaceId> faces;
  for (const auto& s : sides) {
    const FaceId f = b.begin_face(prefix + s.name);
    b.quad(v[s.a], v[s.b], v[s.c], v[s.d]);
    faces.push_back(f);
    if (!label.empty()) b.label(label, f);
  }
  if (!label.empty()) b.manifest().instances[label].push_back(faces);
}

// Point on the boundary of an axis-aligned square of half-size `half`, hit by the ray at `angle`.
Vec3 square_point(Vec3 center, double half, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double m = std::max(std::abs(c), std::abs(s));
  double dx = half * c / m;
  double dy = half * s / m;
  // Snap the exact edge coordinate so neighbouring cells share identical positions.
  if (std::abs(c) >= std::abs(s)) dx = c > 0 ? half : -half;
  if (std::abs(s) >= std::abs(c)) dy = s > 0 ? half : -half;
  return {center.x + dx, center.y + dy, center.z};
}

Vec3 circle_point(Vec3 center, double radius, double angle) {
  return {center.x + radius * std::cos(angle), center.y + radius * std::sin(angle), center.z};
}

double angle_of(int k, int n) { return 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n); }

}  // namespace

Fixture box(Vec3 min, Vec3 max) {
  MeshBuilder b;
  add_box(b, min, max, "box");
  return b.finish();
}

Fixture unit_cube() { return box({0, 0, 0}, {1, 1, 1}); }

Fixture two_disjoint_cubes() {
  MeshBuilder b;
  add_box(b, {0, 0, 0}, {1, 1, 1}, "cube");
  add_box(b, {3, 0, 0}, {4, 1, 1}, "cube", "second_");
  return b.finish();
}

Fixture plate(const PlateSpec& spec) {
  const int n = spec.segments;
  if (n < 8 || n % 8 != 0) throw std::invalid_argument("plate segments must be a positive multiple of 8");
  const int nx = spec.cells_x;
  const int ny = spec.cells_y;
  const double c = spec.cell_size;
  const double half = c / 2.0;
  const double z_bot = spec.origin.z;
  const double z_top = spec.origin.z + spec.thickness;

  auto feature = [&](int i, int j) -> CellFeature {
    const auto idx = static_cast<std::size_t>(j * nx + i);
    return idx < spec.cells.size() ? spec.cells[idx] : CellFeature{};
  };
  auto cell_center = [&](int i, int j, double z) {
    return Vec3{spec.origin.x + (i + 0.5) * c, spec.origin.y + (j + 0.5) * c, z};
  };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const auto f = feature(i, j);
      if (f.kind == CellKind::Solid) continue;
      if (f.radius <= 0.0 || f.radius >= half) throw std::invalid_argument("feature radius must fit its cell");
      if (f.kind == CellKind::BlindHole && (f.depth <= 0.0 || f.depth >= spec.thickness)) {
        throw std::invalid_argument("blind hole depth must be inside the plate");
      }
      if (f.kind == CellKind::Boss && f.depth <= 0.0) throw std::invalid_argument("boss height must be positive");
    }
  }

  MeshBuilder b;
  const auto cell_count = static_cast<std::size_t>(nx * ny);
  std::vector<std::vector<std::uint32_t>> top_circle(cell_count), bottom_circle(cell_count);

  auto cap = [&](int i, int j, double z, bool opening) {
    const Vec3 center = cell_center(i, j, z);
    std::vector<std::uint32_t> square(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) square[static_cast<std::size_t>(k)] = b.vertex(square_point(center, half, angle_of(k, n)));
    const auto f = feature(i, j);
    if (!opening) {
      const auto mid = b.vertex(center);
      for (int k = 0; k < n; ++k) b.triangle(mid, square[static_cast<std::size_t>(k)], square[static_cast<std::size_t>((k + 1) % n)]);
      return std::vector<std::uint32_t>{};
    }
    std::vector<std::uint32_t> circle(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) circle[static_cast<std::size_t>(k)] = b.vertex(circle_point(center, f.radius, angle_of(k, n)));
    for (int k = 0; k < n; ++k) {
      const auto k0 = static_cast<std::size_t>(k);
      const auto k1 = static_cast<std::size_t>((k + 1) % n);
      b.quad(circle[k0], square[k0], square[k1], circle[k1]);
    }
    return circle;
  };

  b.begin_face("plate_top");
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const bool opening = feature(i, j).kind != CellKind::Solid;
      top_circle[static_cast<std::size_t>(j * nx + i)] = cap(i, j, z_top, opening);
    }
  }
  b.begin_face("plate_bottom");
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const bool opening = feature(i, j).kind == CellKind::ThroughHole;
      bottom_circle[static_cast<std::size_t>(j * nx + i)] = cap(i, j, z_bot, opening);
    }
  }

  // Perimeter walls reuse the cells' boundary sampling so edges weld exactly.
  auto side = [&](const std::string& name, const std::vector<std::pair<int, int>>& cells, int k_begin) {
    b.begin_face(name);
    std::vector<Vec3> points;
    for (std::size_t idx = 0; idx < cells.size(); ++idx) {
      const auto [i, j] = cells[idx];
      for (int k = k_begin; k <= k_begin + n / 4; ++k) {
        if (idx > 0 && k == k_begin) continue;
        points.push_back(square_point(cell_center(i, j, 0.0), half, angle_of(k % n, n)));
      }
    }
    for (std::size_t p = 0; p + 1 < points.size(); ++p) {
      const auto b0 = b.vertex({points[p].x, points[p].y, z_bot});
      const auto b1 = b.vertex({points[p + 1].x, points[p + 1].y, z_bot});
      const auto t1 = b.vertex({points[p + 1].x, points[p + 1].y, z_top});
      const auto t0 = b.vertex({points[p].x, points[p].y, z_top});
      b.quad(b0, b1, t1, t0);
    }
  };
  std::vector<std::pair<int, int>> cells;
  for (int i = 0; i < nx; ++i) cells.emplace_back(i, 0);
  side("side_front", cells, 5 * n / 8);
  cells.clear();
  for (int i = nx - 1; i >= 0; --i) cells.emplace_back(i, ny - 1);
  side("side_back", cells, n / 8);
  cells.clear();
  for (int j = 0; j < ny; ++j) cells.emplace_back(nx - 1, j);
  side("side_right", cells, 7 * n / 8);
  cells.clear();
  for (int j = ny - 1; j >= 0; --j) cells.emplace_back(0, j);
  side("side_left", cells, 3 * n / 8);

  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const auto f = feature(i, j);
      if (f.kind == CellKind::Solid) continue;
      const auto cell = static_cast<std::size_t>(j * nx + i);
      const auto& top = top_circle[cell];
      FeatureInfo info;
      info.kind = f.kind;
      info.radius = f.radius;

      auto wall_to = [&](const std::vector<std::uint32_t>& upper, const std::vector<std::uint32_t>& lower) {
        for (int k = 0; k < n; ++k) {
          const auto k0 = static_cast<std::size_t>(k);
          const auto k1 = static_cast<std::size_t>((k + 1) % n);
          b.quad(upper[k0], upper[k1], lower[k1], lower[k0]);
        }
      };
      auto ring_at = [&](double z) {
        std::vector<std::uint32_t> ring(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k) ring[static_cast<std::size_t>(k)] = b.vertex(circle_point(cell_center(i, j, z), f.radius, angle_of(k, n)));
        return ring;
      };
      auto disk = [&](const std::vector<std::uint32_t>& ring, double z) {
        const auto mid = b.vertex(cell_center(i, j, z));
        for (int k = 0; k < n; ++k) b.triangle(mid, ring[static_cast<std::size_t>((k + 1) % n)], ring[static_cast<std::size_t>(k)]);
      };

      std::vector<std::string> labels;
      if (f.kind == CellKind::ThroughHole) {
        info.faces.push_back(b.begin_face());
        wall_to(top, bottom_circle[cell]);
        info.depth = spec.thickness;
        info.center = cell_center(i, j, (z_top + z_bot) / 2.0);
        labels = {"hole", "through hole"};
      } else if (f.kind == CellKind::BlindHole) {
        const double z_floor = z_top - f.depth;
        info.faces.push_back(b.begin_face());
        const auto floor_ring = ring_at(z_floor);
        wall_to(top, floor_ring);
        info.faces.push_back(b.begin_face());
        disk(floor_ring, z_floor);
        info.depth = f.depth;
        info.center = cell_center(i, j, (z_top + z_floor) / 2.0);
        labels = {"hole", "blind hole"};
      } else {
        const double z_cap = z_top + f.depth;
        info.faces.push_back(b.begin_face());
        const auto cap_ring = ring_at(z_cap);
        wall_to(cap_ring, top);
        info.faces.push_back(b.begin_face());
        disk(cap_ring, z_cap);
        info.depth = f.depth;
        info.center = cell_center(i, j, (z_top + z_cap) / 2.0);
        labels = {"shaft", "boss"};
      }
      info.extents = {2.0 * f.radius, 2.0 * f.radius, info.depth};
      for (const auto& l : labels) {
        for (FaceId face : info.faces) b.label(l, face);
        b.manifest().instances[l].push_back(info.faces);
      }
      b.manifest().features.push_back(info);
    }
  }
  return b.finish();
}

Fixture plate_with_holes(int holes_x, int holes_y, double radius, double thickness, int segments) {
  PlateSpec spec;
  spec.cells_x = holes_x;
  spec.cells_y = holes_y;
  spec.thickness = thickness;
  spec.segments = segments;
  spec.origin = {5.0, 15.0, 0.0};
  spec.cells.assign(static_cast<std::size_t>(holes_x * holes_y), {CellKind::ThroughHole, radius, 0.0});
  return plate(spec);
}

Fixture plate_with_blind_hole() {
  PlateSpec spec;
  spec.cells_x = 2;
  spec.cells_y = 1;
  spec.thickness = 8.0;
  spec.cells = {{CellKind::BlindHole, 5.0, 4.0}, {CellKind::ThroughHole, 4.0, 0.0}};
  return plate(spec);
}

Fixture plate_mixed_holes() {
  PlateSpec spec;
  spec.cells_x = 3;
  spec.cells_y = 2;
  spec.thickness = 8.0;
  spec.cells = {
      {CellKind::ThroughHole, 5.0, 0.0}, {CellKind::ThroughHole, 8.0, 0.0}, {CellKind::Boss, 4.0, 10.0},
      {CellKind::ThroughHole, 8.0, 0.0}, {CellKind::Solid, 0.0, 0.0},       {CellKind::ThroughHole, 5.0, 0.0},
  };
  return plate(spec);
}

Fixture plate_before_block() {
  PlateSpec spec;
  spec.cells_x = 2;
  spec.cells_y = 2;
  spec.thickness = 4.0;
  spec.origin = {0.0, 0.0, 20.0};
  spec.cells.assign(4, {CellKind::ThroughHole, 6.0, 0.0});
  Fixture plate_part = plate(spec);

  MeshBuilder b;
  // Re-emit the plate through the builder so the block can be appended with consistent ids.
  auto& mesh = plate_part.mesh;
  for (const auto& p : mesh.positions) b.vertex(p);
  for (const auto& group : mesh.groups) {
    b.begin_face();
    for (const auto& poly : group.polygons) b.triangle(poly[0], poly[1], poly[2]);
  }
  for (const auto& [label, faces] : mesh.labels) {
    for (FaceId f : faces) b.label(label, f);
  }
  b.manifest().instances = plate_part.manifest.instances;
  b.manifest().features = plate_part.manifest.features;
  b.manifest().named_faces = plate_part.manifest.named_faces;
  add_box(b, {2.0, 2.0, 0.0}, {58.0, 58.0, 10.0}, "block", "block_");
  return b.finish();
}

Fixture solid_cylinder(double radius, double height, int segments) {
  MeshBuilder b;
  std::vector<std::uint32_t> lower(static_cast<std::size_t>(segments)), upper(static_cast<std::size_t>(segments));
  for (int k = 0; k < segments; ++k) {
    lower[static_cast<std::size_t>(k)] = b.vertex(circle_point({0, 0, 0}, radius, angle_of(k, segments)));
    upper[static_cast<std::size_t>(k)] = b.vertex(circle_point({0, 0, height}, radius, angle_of(k, segments)));
  }
  const FaceId wall = b.begin_face("wall");
  for (int k = 0; k < segments; ++k) {
    const auto k0 = static_cast<std::size_t>(k);
    const auto k1 = static_cast<std::size_t>((k + 1) % segments);
    b.quad(lower[k0], lower[k1], upper[k1], upper[k0]);
  }
  const FaceId top = b.begin_face("top");
  const auto top_mid = b.vertex({0, 0, height});
  for (int k = 0; k < segments; ++k) b.triangle(top_mid, upper[static_cast<std::size_t>(k)], upper[static_cast<std::size_t>((k + 1) % segments)]);
  const FaceId bottom = b.begin_face("bottom");
  const auto bottom_mid = b.vertex({0, 0, 0});
  for (int k = 0; k < segments; ++k) b.triangle(bottom_mid, lower[static_cast<std::size_t>((k + 1) % segments)], lower[static_cast<std::size_t>(k)]);
  b.label("cylinder", wall);
  b.label("cylinder", top);
  b.label("cylinder", bottom);
  b.manifest().instances["cylinder"].push_back({wall, top, bottom});
  return b.finish();
}

Fixture cylinder_wall(double radius, double height, int segments) {
  MeshBuilder b;
  std::vector<std::uint32_t> lower(static_cast<std::size_t>(segments)), upper(static_cast<std::size_t>(segments));
  for (int k = 0; k < segments; ++k) {
    lower[static_cast<std::size_t>(k)] = b.vertex(circle_point({0, 0, 0}, radius, angle_of(k, segments)));
    upper[static_cast<std::size_t>(k)] = b.vertex(circle_point({0, 0, height}, radius, angle_of(k, segments)));
  }
  const FaceId wall = b.begin_face("wall");
  for (int k = 0; k < segments; ++k) {
    const auto k0 = static_cast<std::size_t>(k);
    const auto k1 = static_cast<std::size_t>((k + 1) % segments);
    b.quad(lower[k0], lower[k1], upper[k1], upper[k0]);
  }
  b.label("wall", wall);
  b.manifest().instances["wall"].push_back({wall});
  return b.finish();
}

Fixture square_grid_patch(double size, int divisions) {
  MeshBuilder b;
  std::vector<std::uint32_t> grid;
  for (int j = 0; j <= divisions; ++j) {
    for (int i = 0; i <= divisions; ++i) {
      grid.push_back(b.vertex({size * i / divisions, size * j / divisions, 0.0}));
    }
  }
  const FaceId face = b.begin_face("patch");
  auto at = [&](int i, int j) { return grid[static_cast<std::size_t>(j * (divisions + 1) + i)]; };
  for (int j = 0; j < divisions; ++j) {
    for (int i = 0; i < divisions; ++i) b.quad(at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1));
  }
  b.label("patch", face);
  b.manifest().instances["patch"].push_back({face});
  return b.finish();
}

Fixture dense_plate(std::size_t min_triangles) {
  // Each through-hole cell contributes 6 * segments triangles (two rings plus the wall).
  PlateSpec spec;
  spec.cells_x = 10;
  spec.cells_y = 10;
  spec.cell_size = 20.0;
  spec.thickness = 6.0;
  const std::size_t per_segment = static_cast<std::size_t>(spec.cells_x * spec.cells_y) * 6;
  std::size_t segments = (min_triangles + per_segment - 1) / per_segment;
  segments = std::max<std::size_t>(8, (segments + 7) / 8 * 8);
  spec.segments = static_cast<int>(segments);
  spec.cells.assign(100, {CellKind::ThroughHole, 6.0, 0.0});
  return plate(spec);
}

Vec3 RigidTransform::rotate(Vec3 v) const {
  return {rotation[0][0] * v.x + rotation[0][1] * v.y + rotation[0][2] * v.z,
          rotation[1][0] * v.x + rotation[1][1] * v.y + rotation[1][2] * v.z,
          rotation[2][0] * v.x + rotation[2][1] * v.y + rotation[2][2] * v.z};
}

Vec3 RigidTransform::apply(Vec3 p) const { return rotate(p) * scale + translation; }

RigidTransform RigidTransform::from_axis_angle(Vec3 axis, double radians, Vec3 translation) {
  const Vec3 u = normalized(axis);
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  const double t = 1.0 - c;
  RigidTransform r;
  r.rotation[0][0] = c + u.x * u.x * t;
  r.rotation[0][1] = u.x * u.y * t - u.z * s;
  r.rotation[0][2] = u.x * u.z * t + u.y * s;
  r.rotation[1][0] = u.y * u.x * t + u.z * s;
  r.rotation[1][1] = c + u.y * u.y * t;
  r.rotation[1][2] = u.y * u.z * t - u.x * s;
  r.rotation[2][0] = u.z * u.x * t - u.y * s;
  r.rotation[2][1] = u.z * u.y * t + u.x * s;
  r.rotation[2][2] = c + u.z * u.z * t;
  r.translation = translation;
  return r;
}

RawMesh transformed(const RawMesh& mesh, const RigidTransform& transform) {
  RawMesh out = mesh;
  for (auto& p : out.positions) p = transform.apply(p);
  return out;
}

std::filesystem::path write_fixture(const Fixture& fixture, const std::filesystem::path& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  const auto path = dir / (name + ".obj");
  save_raw_mesh(fixture.mesh, path, LengthUnit::Millimeter);
  return path;
}

}  // namespace cadq::fixtures
