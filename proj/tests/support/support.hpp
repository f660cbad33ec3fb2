#pragma once

#include <atomic>
#include <filesystem>
#include <limits>
#include <random>
#include <string>

#include <unistd.h>

#include "cadq/fixtures.hpp"
#include "cadq/raycast.hpp"
#include "cadq/render.hpp"

namespace testing {

inline cadq::CadModel model_of(const cadq::fixtures::Fixture& f) {
  return cadq::CadModel::build(f.mesh, cadq::LengthUnit::Millimeter);
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "cadq") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

struct BruteForceBuffers {
  std::vector<std::int32_t> face_id;
  std::vector<double> depth;
};

/// Reference renderer: tests every triangle for every pixel, keeps the nearest hit
/// (ties to the lower triangle index). No acceleration structure involved.
inline BruteForceBuffers brute_force_render(const cadq::CadModel& model, const cadq::OrthoCamera& cam) {
  const cadq::TriangleSet tris(model);
  const cadq::RayDirection dir(cam.view_direction);
  BruteForceBuffers out;
  const auto n = static_cast<std::size_t>(cam.image_width) * static_cast<std::size_t>(cam.image_height);
  out.face_id.assign(n, cadq::kNoFace);
  out.depth.assign(n, std::numeric_limits<double>::infinity());
  for (int y = 0; y < cam.image_height; ++y) {
    for (int x = 0; x < cam.image_width; ++x) {
      const auto origin = cam.pixel_origin(x, y);
      cadq::Hit best{std::numeric_limits<double>::infinity(), std::numeric_limits<std::uint32_t>::max(), cadq::kNoFace};
      for (std::uint32_t i = 0; i < tris.size(); ++i) {
        double t = 0.0;
        if (cadq::intersect_triangle(dir, origin, tris.a[i], tris.b[i], tris.c[i], t) && cadq::closer(t, i, best)) {
          best = {t, i, tris.face[i]};
        }
      }
      const auto idx = static_cast<std::size_t>(y) * static_cast<std::size_t>(cam.image_width) + static_cast<std::size_t>(x);
      out.face_id[idx] = best.face;
      out.depth[idx] = best.t;
    }
  }
  return out;
}

}  // namespace testing
