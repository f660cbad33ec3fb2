#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cadq/geometry.hpp"

namespace cadq {

/// Ray direction with the per-direction constants of the watertight ray/triangle test precomputed.
/// Orthographic renders share one direction across all pixels.
class RayDirection {
 public:
  explicit RayDirection(Vec3 direction);

  Vec3 direction() const { return dir_; }
  Vec3 inverse() const { return inv_; }

 private:
  friend bool intersect_triangle(const RayDirection&, Vec3, Vec3, Vec3, Vec3, double&);
  Vec3 dir_;
  Vec3 inv_;
  int kx_ = 0, ky_ = 1, kz_ = 2;
  double sx_ = 0.0, sy_ = 0.0, sz_ = 1.0;
};

/// Watertight intersection (shared edges never leak). On hit writes the ray parameter to `t`;
/// hits with t <= 0 are rejected.
bool intersect_triangle(const RayDirection& dir, Vec3 origin, Vec3 a, Vec3 b, Vec3 c, double& t);

struct Hit {
  double t = 0.0;
  std::uint32_t triangle = 0;  // index into TriangleSet order
  FaceId face = -1;
};

/// Returns true when `candidate` should replace `best`: nearer, or equally near with a lower index.
inline bool closer(double t, std::uint32_t triangle, const Hit& best) {
  return t < best.t || (t == best.t && triangle < best.triangle);
}

/// Flat triangle list of a model, in face order.
struct TriangleSet {
  std::vector<Vec3> a, b, c;
  std::vector<FaceId> face;

  explicit TriangleSet(const CadModel& model);
  std::size_t size() const { return face.size(); }
};

/// Bounding volume hierarchy over a model's triangles (binned SAH).
class Bvh {
 public:
  explicit Bvh(const CadModel& model);

  std::optional<Hit> closest_hit(Vec3 origin, const RayDirection& dir) const;
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t triangle_count() const { return tri_a_.size(); }

 private:
  struct Node {
    Aabb box;
    std::uint32_t first = 0;  // first primitive (leaf) or right child (interior)
    std::uint32_t count = 0;  // 0 for interior nodes
  };
  std::uint32_t build(std::vector<std::uint32_t>& prims, std::uint32_t begin, std::uint32_t end,
                      const std::vector<Aabb>& boxes, const std::vector<Vec3>& centroids);

  std::vector<Node> nodes_;
  std::vector<Vec3> tri_a_, tri_b_, tri_c_;
  std::vector<std::uint32_t> tri_index_;
  std::vector<FaceId> tri_face_;
  double pad_ = 0.0;
};

}  // namespace cadq
