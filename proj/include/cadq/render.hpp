#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cadq/geometry.hpp"
#include "cadq/raycast.hpp"

namespace cadq {

enum class Side { Top, Bottom, Left, Right, Front, Back };

constexpr Side kAllSides[] = {Side::Top, Side::Bottom, Side::Left, Side::Right, Side::Front, Side::Back};

std::string to_string(Side side);
std::optional<Side> parse_side(std::string_view text);

/// A main-axis view (slightly rotated, see camera_for_view) or one of the eight 45/45 corner views.
/// Corner octant bits: 1 -> +x, 2 -> +y, 4 -> +z.
struct ViewSpec {
  enum class Kind { MainAxis, Corner };
  Kind kind = Kind::MainAxis;
  Side side = Side::Top;
  int octant = 0;
  double azimuth_perturbation_deg = 1.0;

  static ViewSpec main_axis(Side side, double perturbation_deg = 1.0) {
    return {Kind::MainAxis, side, 0, perturbation_deg};
  }
  static ViewSpec corner(int octant) { return {Kind::Corner, Side::Top, octant, 0.0}; }

  /// "top", "left", ..., "corner:K".
  static ViewSpec parse(const std::string& text);
  std::string name() const;
  bool operator==(const ViewSpec&) const = default;
};

struct OrthoCamera {
  Vec3 view_direction;
  Vec3 up;
  Vec3 right;
  int image_width = 0;
  int image_height = 0;
  double world_units_per_pixel = 0.0;
  Vec3 viewport_center;  // centre of the viewport plane, behind the model

  Vec3 pixel_origin(int px, int py) const;
  bool operator==(const OrthoCamera&) const = default;
};

struct DegenerateModel : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownFace : std::out_of_range {
  using std::out_of_range::out_of_range;
};

inline constexpr double kFrameMargin = 0.05;

OrthoCamera camera_for_view(const CadModel& model, const ViewSpec& view, int width, int height);

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

inline constexpr Rgb kBackground{0, 0, 0};

/// Non-owning view of a row-major RGB image.
struct ImageView {
  int width = 0;
  int height = 0;
  std::span<const Rgb> pixels;

  Rgb at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
};
inline constexpr std::int32_t kNoFace = -1;

/// Distinct colour per face id: 15-bit bijective hash spread over 32 levels per channel, so any two
/// ids differ by at least 8 in some channel and no id maps to black.
Rgb face_color(FaceId face);
std::optional<FaceId> face_from_color(Rgb color);
inline constexpr std::size_t kMaxPaletteFaces = 32767;

struct RenderBuffers {
  int width = 0;
  int height = 0;
  std::vector<Rgb> color;
  std::vector<std::int32_t> face_id;
  std::vector<double> depth;                  // +inf where face_id == kNoFace
  std::vector<std::uint32_t> face_pixels;     // per-face visible pixel histogram
  std::size_t model_pixels = 0;

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x); }
  std::size_t pixel_count() const { return color.size(); }
  ImageView image() const { return {width, height, color}; }
};

/// Per-model acceleration structure; build once, render many views.
class Renderer {
 public:
  explicit Renderer(const CadModel& model);

  RenderBuffers render(const OrthoCamera& camera) const;
  const CadModel& model() const { return model_; }
  const Bvh& bvh() const { return bvh_; }

 private:
  const CadModel& model_;
  Bvh bvh_;
};

RenderBuffers render(const CadModel& model, const OrthoCamera& camera);

std::uint32_t visible_pixel_count(const RenderBuffers& buffers, FaceId face);

}  // namespace cadq
