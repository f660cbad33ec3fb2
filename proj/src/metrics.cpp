#include "cadq/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace cadq {

std::vector<std::uint32_t> part_vertices(const CadModel& model, const PartInstance& part) {
  std::vector<std::uint32_t> ids;
  for (FaceId f : part.face_ids) {
    for (const auto& t : model.face(f).triangles) ids.insert(ids.end(), t.begin(), t.end());
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

Aabb part_aabb(const CadModel& model, const PartInstance& part) {
  Aabb box = Aabb::empty();
  for (auto v : part_vertices(model, part)) box.expand(model.vertices()[v]);
  return box;
}

Vec3 part_extents(const CadModel& model, const PartInstance& part) { return part_aabb(model, part).extents(); }

Vec3 part_center(const CadModel& model, const PartInstance& part) { return part_aabb(model, part).center(); }

double part_area(const CadModel& model, const PartInstance& part) {
  double area = 0.0;
  for (FaceId f : part.face_ids) area += model.face(f).total_area;
  return area;
}

namespace {

Vec3 triangle_normal(const CadModel& model, const Triangle& t) {
  const auto& v = model.vertices();
  return normalized(cross(v[t[1]] - v[t[0]], v[t[2]] - v[t[0]]));
}

Vec3 canonical_sign(Vec3 axis) {
  int k = 0;
  for (int i = 1; i < 3; ++i) {
    if (std::abs(axis[i]) > std::abs(axis[k])) k = i;
  }
  return axis[k] < 0.0 ? -axis : axis;
}

// Fits the surface made of `faces`; nullopt when it is not cylindrical.
std::optional<CylinderFit> fit_surface(const CadModel& model, const std::vector<FaceId>& faces) {
  const PartInstance surface{faces, {}};
  const auto ids = part_vertices(model, surface);
  if (ids.size() < kMinCylinderVertices) return std::nullopt;
  const auto& v = model.vertices();

  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  std::size_t tri_count = 0;
  for (FaceId f : faces) {
    for (const auto& t : model.face(f).triangles) {
      const Vec3 n = triangle_normal(model, t);
      const Eigen::Vector3d e(n.x, n.y, n.z);
      scatter += e * e.transpose();
      ++tri_count;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(scatter);
  const auto& values = solver.eigenvalues();  // ascending
  // A single normal direction (plane) leaves no spread around the axis.
  if (!(values(1) > 0.01 * static_cast<double>(tri_count))) return std::nullopt;
  const Eigen::Vector3d a = solver.eigenvectors().col(0);
  const Vec3 axis = canonical_sign(normalized({a(0), a(1), a(2)}));

  Vec3 centroid{};
  for (auto i : ids) centroid = centroid + v[i];
  centroid = centroid / static_cast<double>(ids.size());

  auto radial = [&](Vec3 p) {
    const Vec3 d = p - centroid;
    return d - axis * dot(d, axis);
  };
  double sum = 0.0, sum_sq = 0.0;
  for (auto i : ids) {
    const double r = norm(radial(v[i]));
    sum += r;
    sum_sq += r * r;
  }
  const double n = static_cast<double>(ids.size());
  const double mean = sum / n;
  if (!(mean > 0.0)) return std::nullopt;
  const double deviation = std::sqrt(std::max(0.0, sum_sq / n - mean * mean)) / mean;
  if (deviation > kMaxRadialDeviation) return std::nullopt;

  double alignment = 0.0;
  for (FaceId f : faces) {
    for (const auto& t : model.face(f).triangles) {
      const Vec3 r = radial((v[t[0]] + v[t[1]] + v[t[2]]) / 3.0);
      const double len = norm(r);
      if (len > 0.0) alignment += std::abs(dot(triangle_normal(model, t), r / len));
    }
  }
  if (alignment / static_cast<double>(tri_count) < kMinNormalAlignment) return std::nullopt;

  CylinderFit fit;
  fit.axis = axis;
  fit.axis_point = centroid;
  fit.radius = mean;
  fit.radial_deviation = deviation;
  return fit;
}

// A cap closes a fitted surface: planar, perpendicular to the axis and inside the radius.
bool is_cap(const CadModel& model, FaceId face, const CylinderFit& fit) {
  const auto& v = model.vertices();
  for (const auto& t : model.face(face).triangles) {
    if (std::abs(dot(triangle_normal(model, t), fit.axis)) < kMinCapAlignment) return false;
    for (auto i : t) {
      const Vec3 d = v[i] - fit.axis_point;
      if (norm(d - fit.axis * dot(d, fit.axis)) > fit.radius * (1.0 + kMaxRadialDeviation)) return false;
    }
  }
  return true;
}

}  // namespace

std::optional<CylinderFit> fit_cylinder(const CadModel& model, const PartInstance& part) {
  const auto ids = part_vertices(model, part);
  if (ids.size() < kMinCylinderVertices) {
    throw TooFewVertices("cylinder fit needs at least 8 distinct vertices, part has " + std::to_string(ids.size()));
  }
  auto fit = fit_surface(model, part.face_ids);
  if (!fit && part.face_ids.size() > 1) {
    std::vector<FaceId> by_area = part.face_ids;
    std::stable_sort(by_area.begin(), by_area.end(),
                     [&](FaceId a, FaceId b) { return model.face(a).total_area > model.face(b).total_area; });
    for (FaceId f : by_area) {
      auto candidate = fit_surface(model, {f});
      if (!candidate) continue;
      // The remaining faces must all be caps, otherwise the part is more than one cylinder.
      const bool closed = std::all_of(part.face_ids.begin(), part.face_ids.end(),
                                      [&](FaceId g) { return g == f || is_cap(model, g, *candidate); });
      if (!closed) continue;
      fit = candidate;
      fit->fitted_face = f;
      break;
    }
  }
  if (!fit) return std::nullopt;

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (auto i : ids) {
    const double s = dot(model.vertices()[i], fit->axis);
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  fit->depth = hi - lo;
  return fit;
}

PartMeasurements measure(const CadModel& model, const PartInstance& part) {
  PartMeasurements m;
  const Aabb box = part_aabb(model, part);
  m.center = box.center();
  m.extents = box.extents();
  m.face_area_total = part_area(model, part);
  try {
    if (auto fit = fit_cylinder(model, part)) {
      m.radius = fit->radius;
      m.diameter = 2.0 * fit->radius;
      m.axis = fit->axis;
      m.depth = fit->depth;
    }
  } catch (const TooFewVertices&) {
  }
  return m;
}

void to_json(nlohmann::json& j, const PartMeasurements& m) {
  auto vec = [](Vec3 v) { return nlohmann::json::array({v.x, v.y, v.z}); };
  j = {{"center", vec(m.center)}, {"extents", vec(m.extents)}, {"face_area_total", m.face_area_total}};
  j["radius"] = m.radius ? nlohmann::json(*m.radius) : nlohmann::json(nullptr);
  j["diameter"] = m.diameter ? nlohmann::json(*m.diameter) : nlohmann::json(nullptr);
  j["axis"] = m.axis ? vec(*m.axis) : nlohmann::json(nullptr);
  j["depth"] = m.depth ? nlohmann::json(*m.depth) : nlohmann::json(nullptr);
}

}  // namespace cadq
