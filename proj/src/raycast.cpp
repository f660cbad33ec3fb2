#include "cadq/raycast.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace cadq {

RayDirection::RayDirection(Vec3 direction) : dir_(direction) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) inv_[k] = direction[k] != 0.0 ? 1.0 / direction[k] : inf;

  const double ax = std::abs(direction.x), ay = std::abs(direction.y), az = std::abs(direction.z);
  kz_ = (ax > ay) ? (ax > az ? 0 : 2) : (ay > az ? 1 : 2);
  kx_ = (kz_ + 1) % 3;
  ky_ = (kx_ + 1) % 3;
  if (direction[kz_] < 0.0) std::swap(kx_, ky_);
  sx_ = direction[kx_] / direction[kz_];
  sy_ = direction[ky_] / direction[kz_];
  sz_ = 1.0 / direction[kz_];
}

bool intersect_triangle(const RayDirection& r, Vec3 origin, Vec3 a, Vec3 b, Vec3 c, double& t) {
  const Vec3 pa = a - origin, pb = b - origin, pc = c - origin;
  const double ax = pa[r.kx_] - r.sx_ * pa[r.kz_];
  const double ay = pa[r.ky_] - r.sy_ * pa[r.kz_];
  const double bx = pb[r.kx_] - r.sx_ * pb[r.kz_];
  const double by = pb[r.ky_] - r.sy_ * pb[r.kz_];
  const double cx = pc[r.kx_] - r.sx_ * pc[r.kz_];
  const double cy = pc[r.ky_] - r.sy_ * pc[r.kz_];

  double u = cx * by - cy * bx;
  double v = ax * cy - ay * cx;
  double w = bx * ay - by * ax;
  if (u == 0.0 || v == 0.0 || w == 0.0) {
    // Edge hit: re-evaluate in extended precision so both adjacent triangles agree.
    const long double lu = static_cast<long double>(cx) * by - static_cast<long double>(cy) * bx;
    const long double lv = static_cast<long double>(ax) * cy - static_cast<long double>(ay) * cx;
    const long double lw = static_cast<long double>(bx) * ay - static_cast<long double>(by) * ax;
    u = static_cast<double>(lu);
    v = static_cast<double>(lv);
    w = static_cast<double>(lw);
  }
  if ((u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0)) return false;
  const double det = u + v + w;
  if (det == 0.0) return false;

  const double az = r.sz_ * pa[r.kz_];
  const double bz = r.sz_ * pb[r.kz_];
  const double cz = r.sz_ * pc[r.kz_];
  const double tt = (u * az + v * bz + w * cz) / det;
  if (!(tt > 0.0)) return false;
  t = tt;
  return true;
}

TriangleSet::TriangleSet(const CadModel& model) {
  const auto& v = model.vertices();
  const auto n = model.triangle_count();
  a.reserve(n);
  b.reserve(n);
  c.reserve(n);
  face.reserve(n);
  for (const auto& f : model.faces()) {
    for (const auto& t : f.triangles) {
      a.push_back(v[t[0]]);
      b.push_back(v[t[1]]);
      c.push_back(v[t[2]]);
      face.push_back(f.id);
    }
  }
}

namespace {

constexpr std::uint32_t kLeafSize = 4;
constexpr int kBins = 16;

double surface_area(const Aabb& box) {
  const Vec3 e = box.extents();
  if (e.x < 0.0) return 0.0;
  return 2.0 * (e.x * e.y + e.y * e.z + e.z * e.x);
}

Aabb merge(const Aabb& l, const Aabb& r) { return {min(l.min, r.min), max(l.max, r.max)}; }

// Slab test; axes with zero direction component fall back to an origin containment check.
inline bool hit_box(const Aabb& box, Vec3 o, Vec3 d, Vec3 inv, double t_max, double& t_enter) {
  double t0 = 0.0;
  double t1 = t_max;
  for (int k = 0; k < 3; ++k) {
    if (d[k] == 0.0) {
      if (o[k] < box.min[k] || o[k] > box.max[k]) return false;
      continue;
    }
    double ta = (box.min[k] - o[k]) * inv[k];
    double tb = (box.max[k] - o[k]) * inv[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  t_enter = t0;
  return true;
}

}  // namespace

Bvh::Bvh(const CadModel& model) {
  const TriangleSet tris(model);
  const auto n = static_cast<std::uint32_t>(tris.size());
  pad_ = 1e-9 * std::max(1.0, model.aabb().diagonal());

  std::vector<Aabb> boxes(n);
  std::vector<Vec3> centroids(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Aabb box = Aabb::empty();
    box.expand(tris.a[i]);
    box.expand(tris.b[i]);
    box.expand(tris.c[i]);
    boxes[i] = box;
    centroids[i] = (tris.a[i] + tris.b[i] + tris.c[i]) / 3.0;
  }
  std::vector<std::uint32_t> prims(n);
  std::iota(prims.begin(), prims.end(), 0u);
  nodes_.reserve(2 * static_cast<std::size_t>(n) / kLeafSize + 1);
  if (n > 0) build(prims, 0, n, boxes, centroids);

  tri_a_.reserve(n);
  tri_b_.reserve(n);
  tri_c_.reserve(n);
  tri_index_.reserve(n);
  tri_face_.reserve(n);
  for (auto p : prims) {
    tri_a_.push_back(tris.a[p]);
    tri_b_.push_back(tris.b[p]);
    tri_c_.push_back(tris.c[p]);
    tri_index_.push_back(p);
    tri_face_.push_back(tris.face[p]);
  }
}

std::uint32_t Bvh::build(std::vector<std::uint32_t>& prims, std::uint32_t begin, std::uint32_t end,
                         const std::vector<Aabb>& boxes, const std::vector<Vec3>& centroids) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({});

  Aabb bounds = Aabb::empty();
  Aabb centroid_bounds = Aabb::empty();
  for (auto i = begin; i < end; ++i) {
    bounds = merge(bounds, boxes[prims[i]]);
    centroid_bounds.expand(centroids[prims[i]]);
  }
  bounds.min = bounds.min - Vec3{pad_, pad_, pad_};
  bounds.max = bounds.max + Vec3{pad_, pad_, pad_};
  nodes_[index].box = bounds;

  const std::uint32_t count = end - begin;
  auto make_leaf = [&] {
    nodes_[index].first = begin;
    nodes_[index].count = count;
    return index;
  };
  if (count <= kLeafSize) return make_leaf();

  const Vec3 extent = centroid_bounds.extents();
  int axis = 0;
  if (extent.y > extent[axis]) axis = 1;
  if (extent.z > extent[axis]) axis = 2;
  if (!(extent[axis] > 0.0)) return make_leaf();

  struct Bin {
    Aabb box = Aabb::empty();
    std::uint32_t count = 0;
  };
  std::array<Bin, kBins> bins{};
  const double lo = centroid_bounds.min[axis];
  const double scale = kBins / extent[axis];
  auto bin_of = [&](std::uint32_t p) {
    return std::min(kBins - 1, static_cast<int>((centroids[p][axis] - lo) * scale));
  };
  for (auto i = begin; i < end; ++i) {
    auto& bin = bins[static_cast<std::size_t>(bin_of(prims[i]))];
    bin.box = merge(bin.box, boxes[prims[i]]);
    ++bin.count;
  }
  std::array<double, kBins - 1> cost{};
  Aabb acc = Aabb::empty();
  std::uint32_t acc_count = 0;
  for (int i = 0; i < kBins - 1; ++i) {
    acc = merge(acc, bins[static_cast<std::size_t>(i)].box);
    acc_count += bins[static_cast<std::size_t>(i)].count;
    cost[static_cast<std::size_t>(i)] = acc_count * surface_area(acc);
  }
  acc = Aabb::empty();
  acc_count = 0;
  for (int i = kBins - 1; i > 0; --i) {
    acc = merge(acc, bins[static_cast<std::size_t>(i)].box);
    acc_count += bins[static_cast<std::size_t>(i)].count;
    cost[static_cast<std::size_t>(i - 1)] += acc_count * surface_area(acc);
  }
  int best = 0;
  for (int i = 1; i < kBins - 1; ++i) {
    if (cost[static_cast<std::size_t>(i)] < cost[static_cast<std::size_t>(best)]) best = i;
  }

  auto mid_it = std::partition(prims.begin() + begin, prims.begin() + end,
                               [&](std::uint32_t p) { return bin_of(p) <= best; });
  auto mid = static_cast<std::uint32_t>(mid_it - prims.begin());
  if (mid == begin || mid == end) {
    // All centroids in one bin: split by median.
    mid = begin + count / 2;
    std::nth_element(prims.begin() + begin, prims.begin() + mid, prims.begin() + end,
                     [&](std::uint32_t l, std::uint32_t r) { return centroids[l][axis] < centroids[r][axis]; });
  }
  build(prims, begin, mid, boxes, centroids);
  const auto right = build(prims, mid, end, boxes, centroids);
  nodes_[index].first = right;
  nodes_[index].count = 0;
  return index;
}

std::optional<Hit> Bvh::closest_hit(Vec3 origin, const RayDirection& dir) const {
  if (nodes_.empty()) return std::nullopt;
  const Vec3 d = dir.direction();
  const Vec3 inv = dir.inverse();
  Hit best{std::numeric_limits<double>::infinity(), std::numeric_limits<std::uint32_t>::max(), -1};
  bool found = false;

  std::uint32_t stack[128];
  int top = 0;
  double enter = 0.0;
  if (!hit_box(nodes_[0].box, origin, d, inv, best.t, enter)) return std::nullopt;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (node.count > 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        double t = 0.0;
        if (intersect_triangle(dir, origin, tri_a_[i], tri_b_[i], tri_c_[i], t) && closer(t, tri_index_[i], best)) {
          best = {t, tri_index_[i], tri_face_[i]};
          found = true;
        }
      }
      continue;
    }
    const auto left_index = static_cast<std::uint32_t>(&node - nodes_.data()) + 1;
    const auto right_index = node.first;
    double tl = 0.0, tr = 0.0;
    // Strict comparison against best.t keeps equal-distance candidates for the index tie-break.
    const bool hl = hit_box(nodes_[left_index].box, origin, d, inv, best.t, tl);
    const bool hr = hit_box(nodes_[right_index].box, origin, d, inv, best.t, tr);
    if (hl && hr) {
      if (tl <= tr) {
        stack[top++] = right_index;
        stack[top++] = left_index;
      } else {
        stack[top++] = left_index;
        stack[top++] = right_index;
      }
    } else if (hl) {
      stack[top++] = left_index;
    } else if (hr) {
      stack[top++] = right_index;
    }
  }
  if (!found) return std::nullopt;
  return best;
}

}  // namespace cadq
