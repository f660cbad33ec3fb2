#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cadq {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  constexpr double& operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }

  friend constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend constexpr Vec3 operator-(Vec3 a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return a * s; }
  friend constexpr Vec3 operator/(Vec3 a, double s) { return {a.x / s, a.y / s, a.z / s}; }
  friend constexpr bool operator==(Vec3 a, Vec3 b) = default;
};

constexpr double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(Vec3 a) { return a / norm(a); }
inline Vec3 min(Vec3 a, Vec3 b) { return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)}; }
inline Vec3 max(Vec3 a, Vec3 b) { return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)}; }

struct Aabb {
  Vec3 min{};
  Vec3 max{};

  Vec3 extents() const { return max - min; }
  Vec3 center() const { return (min + max) * 0.5; }
  double diagonal() const { return norm(extents()); }
  bool contains(Vec3 p) const {
    return p.x >= min.x && p.y >= min.y && p.z >= min.z && p.x <= max.x && p.y <= max.y && p.z <= max.z;
  }
  void expand(Vec3 p) {
    min = cadq::min(min, p);
    max = cadq::max(max, p);
  }
  static Aabb empty();
};

enum class LengthUnit { Millimeter, Meter };

LengthUnit parse_length_unit(const std::string& text);
std::string to_string(LengthUnit unit);
double to_millimeters(LengthUnit unit);

using FaceId = int;
using Triangle = std::array<std::uint32_t, 3>;

struct Face {
  FaceId id = 0;
  std::vector<Triangle> triangles;
  double total_area = 0.0;
};

/// Symmetric, irreflexive face neighbourhood. Neighbour lists are sorted.
class AdjacencyGraph {
 public:
  AdjacencyGraph() = default;
  explicit AdjacencyGraph(std::vector<std::vector<FaceId>> neighbors) : neighbors_(std::move(neighbors)) {}

  const std::vector<FaceId>& neighbors(FaceId face) const { return neighbors_.at(static_cast<std::size_t>(face)); }
  bool adjacent(FaceId a, FaceId b) const;
  std::size_t size() const { return neighbors_.size(); }

  /// Connected components of the subgraph induced by `subset` (ids sorted inside each component,
  /// components ordered by their smallest id).
  std::vector<std::vector<FaceId>> components(const std::vector<FaceId>& subset) const;

 private:
  std::vector<std::vector<FaceId>> neighbors_;
};

struct MeshError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FileNotFound : MeshError {
  using MeshError::MeshError;
};
struct MalformedMesh : MeshError {
  using MeshError::MeshError;
};
struct EmptyModel : MeshError {
  using MeshError::MeshError;
};
struct EmptyFace : MeshError {
  using MeshError::MeshError;
};

/// Un-welded polygon soup grouped into faces, as read from disk or emitted by a generator.
struct RawMesh {
  std::vector<Vec3> positions;
  struct Group {
    std::string name;
    std::vector<std::vector<std::uint32_t>> polygons;
  };
  std::vector<Group> groups;
  std::map<std::string, std::vector<FaceId>> labels;
};

class CadModel {
 public:
  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }
  const Face& face(FaceId id) const { return faces_.at(static_cast<std::size_t>(id)); }
  const AdjacencyGraph& adjacency() const { return adjacency_; }
  const Aabb& aabb() const { return aabb_; }
  const std::string& source_path() const { return source_path_; }
  const std::map<std::string, std::vector<FaceId>>& labels() const { return labels_; }
  double weld_epsilon() const { return weld_epsilon_; }

  std::size_t face_count() const { return faces_.size(); }
  std::size_t triangle_count() const;
  bool has_face(FaceId id) const { return id >= 0 && static_cast<std::size_t>(id) < faces_.size(); }
  std::vector<FaceId> all_face_ids() const;

  /// Welds, drops degenerate triangles, converts to millimetres and builds adjacency.
  static CadModel build(const RawMesh& raw, LengthUnit unit, std::string source_path = {});

 private:
  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
  AdjacencyGraph adjacency_;
  Aabb aabb_ = Aabb::empty();
  std::string source_path_;
  std::map<std::string, std::vector<FaceId>> labels_;
  double weld_epsilon_ = 0.0;
};

double triangle_area(Vec3 a, Vec3 b, Vec3 c);
double face_visible_area(const CadModel& model, const Face& face);
Aabb model_aabb(const CadModel& model);
AdjacencyGraph build_adjacency(const std::vector<Face>& faces, std::size_t vertex_count);

/// Reads the face-grouped OBJ and its optional `<stem>.meta.json` sidecar. When `units` is empty the
/// sidecar's unit is used, falling back to millimetres.
CadModel load_model(const std::filesystem::path& path, std::optional<LengthUnit> units = std::nullopt);
RawMesh read_obj(const std::filesystem::path& path);

/// Writes `face_<id>` groups with round-trippable coordinates (millimetres) plus the sidecar.
void save_model(const CadModel& model, const std::filesystem::path& path);
void save_raw_mesh(const RawMesh& raw, const std::filesystem::path& path, LengthUnit unit);

std::filesystem::path sidecar_path(const std::filesystem::path& obj_path);

}  // namespace cadq
