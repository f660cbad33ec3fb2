#pragma once

// Analytic test-model generators. Every generator returns the polygon soup together with a manifest
// of what it built, so tests can compare pipeline output against known geometry.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cadq/geometry.hpp"

namespace cadq::fixtures {

enum class CellKind { Solid, ThroughHole, BlindHole, Boss };

struct CellFeature {
  CellKind kind = CellKind::Solid;
  double radius = 0.0;
  double depth = 0.0;  // blind hole depth or boss height
};

struct PlateSpec {
  int cells_x = 2;
  int cells_y = 2;
  double cell_size = 30.0;
  double thickness = 8.0;
  Vec3 origin{0.0, 0.0, 0.0};
  int segments = 64;  // must be a multiple of 8
  std::vector<CellFeature> cells;  // row-major, cells_x * cells_y entries; missing entries are solid
};

struct FeatureInfo {
  CellKind kind = CellKind::Solid;
  std::vector<FaceId> faces;
  Vec3 center;    // centre of the feature's bounding box
  Vec3 extents;   // full extents of the feature's bounding box
  double radius = 0.0;
  double depth = 0.0;
};

struct Manifest {
  std::size_t face_count = 0;
  std::size_t triangle_count = 0;
  std::map<std::string, std::vector<std::vector<FaceId>>> instances;  // label -> instances
  std::vector<FeatureInfo> features;
  std::map<std::string, FaceId> named_faces;  // e.g. "plate_top"
};

struct Fixture {
  RawMesh mesh;
  Manifest manifest;
};

/// Incrementally assembles face groups; face ids follow insertion order.
class MeshBuilder {
 public:
  std::uint32_t vertex(Vec3 p);
  FaceId begin_face(const std::string& name = {});
  void triangle(std::uint32_t a, std::uint32_t b, std::uint32_t c);
  void quad(std::uint32_t a, std::uint32_t b, std::uint32_t c, std::uint32_t d);
  void label(const std::string& label, FaceId face);

  Fixture finish();
  Manifest& manifest() { return manifest_; }

 private:
  RawMesh mesh_;
  Manifest manifest_;
  std::size_t triangles_ = 0;
};

Fixture unit_cube();
Fixture box(Vec3 min, Vec3 max);
Fixture two_disjoint_cubes();
Fixture plate(const PlateSpec& spec);
Fixture plate_with_holes(int holes_x = 2, int holes_y = 2, double radius = 5.0, double thickness = 8.0,
                         int segments = 64);
Fixture plate_with_blind_hole();
Fixture plate_mixed_holes();
Fixture plate_before_block();
Fixture solid_cylinder(double radius, double height, int segments);
Fixture cylinder_wall(double radius, double height, int segments);
Fixture square_grid_patch(double size, int divisions);
Fixture dense_plate(std::size_t min_triangles);

struct RigidTransform {
  double rotation[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  Vec3 translation;
  double scale = 1.0;

  Vec3 apply(Vec3 p) const;
  Vec3 rotate(Vec3 v) const;
  static RigidTransform from_axis_angle(Vec3 axis, double radians, Vec3 translation = {});
};

RawMesh transformed(const RawMesh& mesh, const RigidTransform& transform);

/// Writes `<dir>/<name>.obj` plus sidecar; returns the obj path.
std::filesystem::path write_fixture(const Fixture& fixture, const std::filesystem::path& dir, const std::string& name);

}  // namespace cadq::fixtures
