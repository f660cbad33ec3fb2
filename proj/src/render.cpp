#include "cadq/render.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

namespace cadq {

std::string to_string(Side side) {
  switch (side) {
    case Side::Top: return "top";
    case Side::Bottom: return "bottom";
    case Side::Left: return "left";
    case Side::Right: return "right";
    case Side::Front: return "front";
    case Side::Back: return "back";
  }
  return "?";
}

std::optional<Side> parse_side(std::string_view text) {
  for (Side s : kAllSides) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

ViewSpec ViewSpec::parse(const std::string& text) {
  if (auto side = parse_side(text)) return main_axis(*side);
  constexpr std::string_view prefix = "corner:";
  if (text.rfind(prefix, 0) == 0) {
    const auto rest = text.substr(prefix.size());
    if (rest.size() == 1 && rest[0] >= '0' && rest[0] <= '7') return corner(rest[0] - '0');
  }
  throw std::invalid_argument("unknown view '" + text + "' (expected top|bottom|left|right|front|back|corner:0..7)");
}

std::string ViewSpec::name() const {
  if (kind == Kind::Corner) return "corner:" + std::to_string(octant);
  return to_string(side);
}

Vec3 OrthoCamera::pixel_origin(int px, int py) const {
  const double u = (px + 0.5 - image_width * 0.5) * world_units_per_pixel;
  const double v = (image_height * 0.5 - py - 0.5) * world_units_per_pixel;
  return viewport_center + right * u + up * v;
}

namespace {

Vec3 rotate_about(Vec3 v, Vec3 axis, double radians) {
  const Vec3 k = normalized(axis);
  const double c = std::cos(radians), s = std::sin(radians);
  return v * c + cross(k, v) * s + k * (dot(k, v) * (1.0 - c));
}

}  // namespace

OrthoCamera camera_for_view(const CadModel& model, const ViewSpec& view, int width, int height) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("image size must be positive");
  const Aabb box = model.aabb();
  const double diagonal = box.diagonal();
  if (!(diagonal > 0.0)) throw DegenerateModel("model bounding box has zero diagonal");

  Vec3 dir, up;
  if (view.kind == ViewSpec::Kind::MainAxis) {
    switch (view.side) {
      case Side::Top: dir = {0, 0, -1}; up = {0, 1, 0}; break;
      case Side::Bottom: dir = {0, 0, 1}; up = {0, 1, 0}; break;
      case Side::Front: dir = {0, 1, 0}; up = {0, 0, 1}; break;
      case Side::Back: dir = {0, -1, 0}; up = {0, 0, 1}; break;
      case Side::Right: dir = {-1, 0, 0}; up = {0, 0, 1}; break;
      case Side::Left: dir = {1, 0, 0}; up = {0, 0, 1}; break;
    }
    const double angle = view.azimuth_perturbation_deg * std::numbers::pi / 180.0;
    if (angle != 0.0) {
      // Azimuth is undefined at the poles; top/bottom tilt about the horizontal diagonal instead.
      const bool vertical = view.side == Side::Top || view.side == Side::Bottom;
      const Vec3 axis = vertical ? Vec3{1, -1, 0} : Vec3{0, 0, 1};
      dir = rotate_about(dir, axis, angle);
      up = rotate_about(up, axis, angle);
    }
  } else {
    if (view.octant < 0 || view.octant > 7) throw std::invalid_argument("corner octant must be in 0..7");
    const double sx = (view.octant & 1) ? 1.0 : -1.0;
    const double sy = (view.octant & 2) ? 1.0 : -1.0;
    const double sz = (view.octant & 4) ? 1.0 : -1.0;
    const double az = std::numbers::pi / 4.0, el = std::numbers::pi / 4.0;
    const Vec3 eye{sx * std::cos(el) * std::cos(az), sy * std::cos(el) * std::sin(az), sz * std::sin(el)};
    dir = -normalized(eye);
    const Vec3 world_up{0, 0, 1};
    up = normalized(world_up - dir * dot(world_up, dir));
  }
  dir = normalized(dir);
  up = normalized(up - dir * dot(up, dir));
  const Vec3 right = normalized(cross(dir, up));

  const Vec3 center = box.center();
  double half_w = 0.0, half_h = 0.0;
  for (int i = 0; i < 8; ++i) {
    const Vec3 corner{(i & 1) ? box.max.x : box.min.x, (i & 2) ? box.max.y : box.min.y, (i & 4) ? box.max.z : box.min.z};
    half_w = std::max(half_w, std::abs(dot(corner - center, right)));
    half_h = std::max(half_h, std::abs(dot(corner - center, up)));
  }
  const double upp = std::max(2.0 * half_w / width, 2.0 * half_h / height) * (1.0 + kFrameMargin);

  OrthoCamera cam;
  cam.view_direction = dir;
  cam.up = up;
  cam.right = right;
  cam.image_width = width;
  cam.image_height = height;
  cam.world_units_per_pixel = upp;
  cam.viewport_center = center - dir * diagonal;
  return cam;
}

namespace {

struct PaletteTables {
  std::array<std::uint16_t, 32768> code_of{};
  std::array<std::int32_t, 32768> face_of{};
};

std::uint16_t scramble(std::uint32_t x) {
  x = (x * 0x2C1Bu) & 0x7FFFu;
  x ^= x >> 7;
  x ^= (x << 4) & 0x7FFFu;
  return static_cast<std::uint16_t>(x);
}

const PaletteTables& palette() {
  static const PaletteTables tables = [] {
    PaletteTables t;
    t.face_of.fill(-1);
    for (std::uint32_t id = 0; id < kMaxPaletteFaces; ++id) {
      const auto code = scramble(id + 1);
      t.code_of[id] = code;
      t.face_of[code] = static_cast<std::int32_t>(id);
    }
    return t;
  }();
  return tables;
}

}  // namespace

Rgb face_color(FaceId face) {
  if (face < 0 || static_cast<std::size_t>(face) >= kMaxPaletteFaces) throw UnknownFace("face id outside palette range");
  const std::uint16_t code = palette().code_of[static_cast<std::size_t>(face)];
  auto level = [](unsigned v) { return static_cast<std::uint8_t>((v & 31u) * 8u + 7u); };
  return {level(code >> 10), level(code >> 5), level(code)};
}

std::optional<FaceId> face_from_color(Rgb color) {
  if ((color.r & 7) != 7 || (color.g & 7) != 7 || (color.b & 7) != 7) return std::nullopt;
  const unsigned code = (static_cast<unsigned>(color.r >> 3) << 10) | (static_cast<unsigned>(color.g >> 3) << 5) |
                        static_cast<unsigned>(color.b >> 3);
  const auto face = palette().face_of[code];
  if (face < 0) return std::nullopt;
  return face;
}

Renderer::Renderer(const CadModel& model) : model_(model), bvh_(model) {
  if (model.face_count() > kMaxPaletteFaces) throw std::length_error("model has more faces than the palette supports");
}

RenderBuffers Renderer::render(const OrthoCamera& camera) const {
  RenderBuffers out;
  out.width = camera.image_width;
  out.height = camera.image_height;
  const std::size_t n = static_cast<std::size_t>(out.width) * static_cast<std::size_t>(out.height);
  out.color.assign(n, kBackground);
  out.face_id.assign(n, kNoFace);
  out.depth.assign(n, std::numeric_limits<double>::infinity());

  const RayDirection dir(camera.view_direction);
  std::atomic<int> next_row{0};
  auto worker = [&] {
    for (int y = next_row++; y < out.height; y = next_row++) {
      for (int x = 0; x < out.width; ++x) {
        const auto hit = bvh_.closest_hit(camera.pixel_origin(x, y), dir);
        if (!hit) continue;
        const auto i = out.index(x, y);
        out.face_id[i] = hit->face;
        out.depth[i] = hit->t;
      }
    }
  };
  // Probing the core count reads sysfs, so do it once.
  static const unsigned cores = std::max(1u, std::thread::hardware_concurrency());
  const unsigned threads = std::min(cores, static_cast<unsigned>(out.height));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  out.face_pixels.assign(model_.face_count(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = out.face_id[i];
    if (f == kNoFace) continue;
    out.color[i] = face_color(f);
    ++out.face_pixels[static_cast<std::size_t>(f)];
    ++out.model_pixels;
  }
  return out;
}

RenderBuffers render(const CadModel& model, const OrthoCamera& camera) { return Renderer(model).render(camera); }

std::uint32_t visible_pixel_count(const RenderBuffers& buffers, FaceId face) {
  if (face < 0 || static_cast<std::size_t>(face) >= buffers.face_pixels.size()) {
    throw UnknownFace("unknown face id " + std::to_string(face));
  }
  return buffers.face_pixels[static_cast<std::size_t>(face)];
}

}  // namespace cadq
