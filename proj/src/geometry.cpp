#include "cadq/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace cadq {

Aabb Aabb::empty() {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return {{inf, inf, inf}, {-inf, -inf, -inf}};
}

LengthUnit parse_length_unit(const std::string& text) {
  if (text == "mm") return LengthUnit::Millimeter;
  if (text == "m") return LengthUnit::Meter;
  throw std::invalid_argument("unknown length unit '" + text + "' (expected mm or m)");
}

std::string to_string(LengthUnit unit) { return unit == LengthUnit::Meter ? "m" : "mm"; }

double to_millimeters(LengthUnit unit) { return unit == LengthUnit::Meter ? 1000.0 : 1.0; }

bool AdjacencyGraph::adjacent(FaceId a, FaceId b) const {
  const auto& n = neighbors(a);
  return std::binary_search(n.begin(), n.end(), b);
}

std::vector<std::vector<FaceId>> AdjacencyGraph::components(const std::vector<FaceId>& subset) const {
  std::vector<FaceId> members = subset;
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());

  std::unordered_map<FaceId, bool> visited;
  for (FaceId f : members) visited[f] = false;

  std::vector<std::vector<FaceId>> out;
  for (FaceId seed : members) {
    if (visited[seed]) continue;
    std::vector<FaceId> component;
    std::vector<FaceId> stack{seed};
    visited[seed] = true;
    while (!stack.empty()) {
      FaceId f = stack.back();
      stack.pop_back();
      component.push_back(f);
      for (FaceId n : neighbors(f)) {
        auto it = visited.find(n);
        if (it != visited.end() && !it->second) {
          it->second = true;
          stack.push_back(n);
        }
      }
    }
    std::sort(component.begin(), component.end());
    out.push_back(std::move(component));
  }
  return out;
}

std::size_t CadModel::triangle_count() const {
  std::size_t n = 0;
  for (const auto& f : faces_) n += f.triangles.size();
  return n;
}

std::vector<FaceId> CadModel::all_face_ids() const {
  std::vector<FaceId> ids(faces_.size());
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

double triangle_area(Vec3 a, Vec3 b, Vec3 c) { return 0.5 * norm(cross(b - a, c - a)); }

double face_visible_area(const CadModel& model, const Face& face) {
  const auto& v = model.vertices();
  double area = 0.0;
  for (const auto& t : face.triangles) area += triangle_area(v[t[0]], v[t[1]], v[t[2]]);
  return area;
}

Aabb model_aabb(const CadModel& model) {
  Aabb box = Aabb::empty();
  for (const auto& p : model.vertices()) box.expand(p);
  return box;
}

AdjacencyGraph build_adjacency(const std::vector<Face>& faces, std::size_t vertex_count) {
  // Undirected edge -> faces using it.
  std::unordered_map<std::uint64_t, std::vector<FaceId>> edge_faces;
  auto key = [vertex_count](std::uint32_t a, std::uint32_t b) {
    if (a > b) std::swap(a, b);
    return static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(vertex_count) + b;
  };
  for (const auto& face : faces) {
    for (const auto& t : face.triangles) {
      for (int e = 0; e < 3; ++e) {
        auto& users = edge_faces[key(t[e], t[(e + 1) % 3])];
        if (std::find(users.begin(), users.end(), face.id) == users.end()) users.push_back(face.id);
      }
    }
  }
  std::vector<std::vector<FaceId>> neighbors(faces.size());
  for (const auto& [edge, users] : edge_faces) {
    for (std::size_t i = 0; i < users.size(); ++i) {
      for (std::size_t j = i + 1; j < users.size(); ++j) {
        neighbors[static_cast<std::size_t>(users[i])].push_back(users[j]);
        neighbors[static_cast<std::size_t>(users[j])].push_back(users[i]);
      }
    }
  }
  for (auto& n : neighbors) {
    std::sort(n.begin(), n.end());
    n.erase(std::unique(n.begin(), n.end()), n.end());
  }
  return AdjacencyGraph(std::move(neighbors));
}

namespace {

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ULL;
    h ^= static_cast<std::uint64_t>(k.y) * 0xC2B2AE3D27D4EB4FULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.z) * 0x165667B19E3779F9ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

// Merges positions closer than `eps` (first occurrence wins). Returns old index -> welded index.
std::vector<std::uint32_t> weld(const std::vector<Vec3>& positions, double eps, std::vector<Vec3>& welded) {
  std::vector<std::uint32_t> remap(positions.size());
  if (eps <= 0.0) {
    std::map<std::tuple<double, double, double>, std::uint32_t> exact;
    for (std::size_t i = 0; i < positions.size(); ++i) {
      const auto& p = positions[i];
      auto [it, inserted] = exact.emplace(std::make_tuple(p.x, p.y, p.z), static_cast<std::uint32_t>(welded.size()));
      if (inserted) welded.push_back(p);
      remap[i] = it->second;
    }
    return remap;
  }
  std::unordered_map<CellKey, std::vector<std::uint32_t>, CellKeyHash> grid;
  auto cell_of = [eps](Vec3 p) {
    return CellKey{static_cast<std::int64_t>(std::floor(p.x / eps)), static_cast<std::int64_t>(std::floor(p.y / eps)),
                   static_cast<std::int64_t>(std::floor(p.z / eps))};
  };
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const Vec3 p = positions[i];
    const CellKey c = cell_of(p);
    std::optional<std::uint32_t> match;
    for (std::int64_t dx = -1; dx <= 1 && !match; ++dx) {
      for (std::int64_t dy = -1; dy <= 1 && !match; ++dy) {
        for (std::int64_t dz = -1; dz <= 1 && !match; ++dz) {
          auto it = grid.find({c.x + dx, c.y + dy, c.z + dz});
          if (it == grid.end()) continue;
          for (std::uint32_t candidate : it->second) {
            if (norm(welded[candidate] - p) <= eps) {
              match = candidate;
              break;
            }
          }
        }
      }
    }
    if (!match) {
      match = static_cast<std::uint32_t>(welded.size());
      welded.push_back(p);
      grid[c].push_back(*match);
    }
    remap[i] = *match;
  }
  return remap;
}

std::optional<FaceId> parse_face_name(const std::string& name) {
  constexpr std::string_view prefix = "face_";
  if (name.size() <= prefix.size() || name.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
  FaceId id = -1;
  const char* first = name.data() + prefix.size();
  const char* last = name.data() + name.size();
  auto [ptr, ec] = std::from_chars(first, last, id);
  if (ec != std::errc() || ptr != last || id < 0) return std::nullopt;
  return id;
}

}  // namespace

CadModel CadModel::build(const RawMesh& raw, LengthUnit unit, std::string source_path) {
  if (raw.groups.empty()) throw EmptyModel("model has no faces: " + source_path);

  const double scale = to_millimeters(unit);
  std::vector<Vec3> positions;
  positions.reserve(raw.positions.size());
  Aabb raw_box = Aabb::empty();
  for (const auto& p : raw.positions) {
    positions.push_back(p * scale);
    raw_box.expand(positions.back());
  }
  const double eps = raw.positions.empty() ? 0.0 : 1e-6 * raw_box.diagonal();

  CadModel model;
  model.source_path_ = std::move(source_path);
  model.weld_epsilon_ = eps;
  const auto remap = weld(positions, eps, model.vertices_);

  // Face ids come from `face_<id>` names when those form a dense range, otherwise from group order.
  std::vector<FaceId> ids(raw.groups.size());
  bool named = true;
  std::vector<bool> seen(raw.groups.size(), false);
  for (std::size_t g = 0; g < raw.groups.size() && named; ++g) {
    auto id = parse_face_name(raw.groups[g].name);
    if (!id || static_cast<std::size_t>(*id) >= raw.groups.size() || seen[static_cast<std::size_t>(*id)]) {
      named = false;
      break;
    }
    seen[static_cast<std::size_t>(*id)] = true;
    ids[g] = *id;
  }
  if (!named) std::iota(ids.begin(), ids.end(), 0);

  model.faces_.resize(raw.groups.size());
  const double min_area = eps * eps;
  for (std::size_t g = 0; g < raw.groups.size(); ++g) {
    Face& face = model.faces_[static_cast<std::size_t>(ids[g])];
    face.id = ids[g];
    for (const auto& poly : raw.groups[g].polygons) {
      if (poly.size() < 3) throw MalformedMesh("polygon with fewer than 3 vertices in group " + raw.groups[g].name);
      for (auto idx : poly) {
        if (idx >= positions.size()) throw MalformedMesh("vertex index out of range in group " + raw.groups[g].name);
      }
      // Fan triangulation.
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
        Triangle t{remap[poly[0]], remap[poly[k]], remap[poly[k + 1]]};
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) continue;
        const double area = triangle_area(model.vertices_[t[0]], model.vertices_[t[1]], model.vertices_[t[2]]);
        if (!(area > min_area)) continue;
        face.triangles.push_back(t);
        face.total_area += area;
      }
    }
    if (face.triangles.empty()) throw EmptyFace("face group '" + raw.groups[g].name + "' has no triangles");
  }

  model.aabb_ = model_aabb(model);
  model.adjacency_ = build_adjacency(model.faces_, model.vertices_.size());
  for (const auto& [label, faces] : raw.labels) {
    for (FaceId f : faces) {
      if (!model.has_face(f)) throw MalformedMesh("label '" + label + "' references unknown face " + std::to_string(f));
    }
    auto sorted = faces;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    model.labels_[label] = std::move(sorted);
  }
  return model;
}

std::filesystem::path sidecar_path(const std::filesystem::path& obj_path) {
  auto p = obj_path;
  p.replace_extension(".meta.json");
  return p;
}

RawMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFound("cannot open mesh file: " + path.string());

  RawMesh raw;
  std::map<std::string, std::size_t> group_index;
  RawMesh::Group* current = nullptr;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw MalformedMesh(path.string() + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x >> p.y >> p.z)) fail("bad vertex");
      raw.positions.push_back(p);
    } else if (tag == "g") {
      std::string name;
      std::getline(ls >> std::ws, name);
      if (name.empty()) fail("group without name");
      auto [it, inserted] = group_index.emplace(name, raw.groups.size());
      if (inserted) raw.groups.push_back({name, {}});
      current = &raw.groups[it->second];
    } else if (tag == "f") {
      if (current == nullptr) fail("face outside of a group");
      std::vector<std::uint32_t> poly;
      std::string token;
      while (ls >> token) {
        long long idx = 0;
        const auto slash = token.find('/');
        const std::string head = token.substr(0, slash);
        auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), idx);
        if (ec != std::errc() || ptr != head.data() + head.size() || idx == 0) fail("bad face index '" + token + "'");
        const long long n = static_cast<long long>(raw.positions.size());
        const long long resolved = idx > 0 ? idx - 1 : n + idx;
        if (resolved < 0 || resolved >= n) fail("face index out of range '" + token + "'");
        poly.push_back(static_cast<std::uint32_t>(resolved));
      }
      if (poly.size() < 3) fail("face with fewer than 3 vertices");
      current->polygons.push_back(std::move(poly));
    }
    // vn, vt, o, s, usemtl, mtllib: not needed.
  }
  return raw;
}

CadModel load_model(const std::filesystem::path& path, std::optional<LengthUnit> units) {
  if (!std::filesystem::exists(path)) throw FileNotFound("mesh file not found: " + path.string());
  RawMesh raw = read_obj(path);

  LengthUnit unit = units.value_or(LengthUnit::Millimeter);
  const auto meta_path = sidecar_path(path);
  if (std::filesystem::exists(meta_path)) {
    std::ifstream meta_in(meta_path);
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(meta_in);
    } catch (const nlohmann::json::exception& e) {
      throw MalformedMesh("bad sidecar " + meta_path.string() + ": " + e.what());
    }
    if (!units && meta.contains("units")) unit = parse_length_unit(meta.at("units").get<std::string>());
    if (meta.contains("labels")) {
      for (const auto& [label, ids] : meta.at("labels").items()) raw.labels[label] = ids.get<std::vector<FaceId>>();
    }
  }
  if (raw.groups.empty()) throw EmptyModel("model has no face groups: " + path.string());
  return CadModel::build(raw, unit, path.string());
}

namespace {

void write_vertex(std::ostream& out, Vec3 p) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", p.x, p.y, p.z);
  out << buf;
}

void write_sidecar(const std::filesystem::path& obj_path, LengthUnit unit,
                   const std::map<std::string, std::vector<FaceId>>& labels) {
  nlohmann::json meta;
  meta["units"] = to_string(unit);
  meta["labels"] = nlohmann::json::object();
  for (const auto& [label, ids] : labels) meta["labels"][label] = ids;
  std::ofstream out(sidecar_path(obj_path));
  out << meta.dump(2) << "\n";
}

}  // namespace

void save_model(const CadModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& p : model.vertices()) write_vertex(out, p);
  for (const auto& face : model.faces()) {
    out << "g face_" << face.id << "\n";
    for (const auto& t : face.triangles) out << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
  }
  write_sidecar(path, LengthUnit::Millimeter, model.labels());
}

void save_raw_mesh(const RawMesh& raw, const std::filesystem::path& path, LengthUnit unit) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& p : raw.positions) write_vertex(out, p);
  for (const auto& group : raw.groups) {
    out << "g " << group.name << "\n";
    for (const auto& poly : group.polygons) {
      out << "f";
      for (auto idx : poly) out << " " << idx + 1;
      out << "\n";
    }
  }
  write_sidecar(path, unit, raw.labels);
}

}  // namespace cadq
