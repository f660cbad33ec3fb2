#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "cadq/geometry.hpp"
#include "cadq/segcad.hpp"

namespace cadq {

struct TooFewVertices : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kMaxRadialDeviation = 0.05;  // relative std-dev of radial distances
inline constexpr double kMinNormalAlignment = 0.9;   // mean |n . radial| of wall triangles
inline constexpr double kMinCapAlignment = 0.999;    // |n . axis| of every cap triangle
inline constexpr std::size_t kMinCylinderVertices = 8;

struct CylinderFit {
  Vec3 axis;         // unit, sign-normalised (largest component positive)
  Vec3 axis_point;   // vertex centroid of the fitted surface
  double radius = 0.0;
  double depth = 0.0;  // extent of all part vertices along the axis
  double radial_deviation = 0.0;
  FaceId fitted_face = -1;  // -1 when the whole part was fitted at once
};

/// Unique vertex indices used by the part's faces, ascending.
std::vector<std::uint32_t> part_vertices(const CadModel& model, const PartInstance& part);

Aabb part_aabb(const CadModel& model, const PartInstance& part);
Vec3 part_extents(const CadModel& model, const PartInstance& part);
Vec3 part_center(const CadModel& model, const PartInstance& part);
double part_area(const CadModel& model, const PartInstance& part);

/// Axis from the normal scatter matrix, radius as mean radial distance. Returns nullopt when the part
/// is not cylindrical. If the part as a whole does not fit (e.g. a blind hole: wall plus floor) the
/// largest face that does fit is used, and depth still spans every part vertex.
/// Throws TooFewVertices when the part has fewer than 8 distinct vertices.
std::optional<CylinderFit> fit_cylinder(const CadModel& model, const PartInstance& part);

struct PartMeasurements {
  Vec3 center;
  Vec3 extents;
  std::optional<double> radius;
  std::optional<double> diameter;
  std::optional<Vec3> axis;
  std::optional<double> depth;
  double face_area_total = 0.0;
};

PartMeasurements measure(const CadModel& model, const PartInstance& part);
void to_json(nlohmann::json& j, const PartMeasurements& m);

}  // namespace cadq
