#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cadq/geometry.hpp"
#include "cadq/render.hpp"

namespace cadq {

enum class ViewSet { SixMainAxes, EightCorners };

std::string to_string(ViewSet set);
ViewSet parse_view_set(const std::string& text);

struct PipelineConfig {
  double box_score_threshold = 0.30;
  double max_mask_model_coverage = 0.45;
  double min_face_coverage = 0.05;
  ViewSet view_set = ViewSet::SixMainAxes;
  int render_width = 1920;
  int render_height = 1080;
  std::uint32_t min_visibility_pixels = 10;
  double main_axis_perturbation_deg = 1.0;

  /// Throws std::invalid_argument when a fraction leaves [0, 1] or the resolution is not positive.
  void validate() const;
  std::vector<ViewSpec> views() const;
  ViewSpec side_view(Side side) const { return ViewSpec::main_axis(side, main_axis_perturbation_deg); }
};

void to_json(nlohmann::json& j, const PipelineConfig& cfg);
void from_json(const nlohmann::json& j, PipelineConfig& cfg);

struct Bitmap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // row-major, 0 or 1

  Bitmap() = default;
  Bitmap(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {}

  bool get(int x, int y) const { return bits[index(x, y)] != 0; }
  void set(int x, int y, bool value = true) { bits[index(x, y)] = value ? 1 : 0; }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x); }
  std::size_t count() const;
  bool operator==(const Bitmap&) const = default;
};

struct BoundingBox {
  int x = 0, y = 0, w = 0, h = 0;
  bool contains(int px, int py) const { return px >= x && py >= y && px < x + w && py < y + h; }
  bool operator==(const BoundingBox&) const = default;
};

BoundingBox tight_bbox(const Bitmap& mask);

struct ScoredMask {
  Bitmap mask;
  BoundingBox bbox;
  double score = 0.0;

  /// Throws std::invalid_argument when a set pixel lies outside bbox or score is outside [0, 1].
  void validate() const;
};

/// Run-length encoding: row-major scan, alternating counts starting with a run of zeros.
nlohmann::json encode_rle(const Bitmap& mask);
Bitmap decode_rle(const nlohmann::json& rle);

struct Provenance {
  std::string view;
  int mask_index = 0;
  double score = 0.0;
  bool operator==(const Provenance&) const = default;
};

struct PartInstance {
  std::vector<FaceId> face_ids;  // sorted, unique
  std::vector<Provenance> provenance;
  bool operator==(const PartInstance&) const = default;
};

void to_json(nlohmann::json& j, const PartInstance& part);

struct ProviderUnavailable : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Open-vocabulary detector + mask model. Implementations return masks that satisfy ScoredMask's
/// invariants and keep no state between calls.
class SegmentationProvider {
 public:
  virtual ~SegmentationProvider() = default;
  virtual std::vector<ScoredMask> segment(const ImageView& image, const std::string& prompt, double box_threshold) = 0;
  /// Whether segment() may be called from several threads at once.
  virtual bool concurrent_safe() const { return false; }
};

struct AlignOutcome {
  enum class Status { Accepted, Rejected, Empty };
  Status status = Status::Empty;
  PartInstance part;                 // valid when Accepted
  std::vector<FaceId> candidates;    // faces passing the coverage rule, before pruning
  double model_coverage = 0.0;       // masked model pixels / model pixels
  std::optional<FaceId> closest_face;
};

AlignOutcome align_mask(const ScoredMask& mask, const RenderBuffers& buffers, const CadModel& model,
                        const PipelineConfig& cfg, const Provenance& provenance = {});

/// Thread-safe memo of rendered views for one model at one resolution.
class SceneViews {
 public:
  SceneViews(const CadModel& model, int width, int height);

  const CadModel& model() const { return renderer_.model(); }
  std::shared_ptr<const RenderBuffers> view(const ViewSpec& spec);
  std::size_t renders() const;

 private:
  Renderer renderer_;
  int width_, height_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const RenderBuffers>> cache_;
  std::size_t renders_ = 0;
};

struct ViewReport {
  std::string view;
  std::size_t masks_returned = 0;
  std::size_t below_threshold = 0;
  std::size_t rejected = 0;
  std::size_t empty = 0;
  std::vector<PartInstance> aligned;
};

struct SegmentationReport {
  std::vector<ViewReport> views;
  std::vector<PartInstance> parts;  // merged
};

SegmentationReport segment_model_report(const CadModel& model, const std::string& prompt, SegmentationProvider& provider,
                                        const PipelineConfig& cfg, SceneViews* views = nullptr);
std::vector<PartInstance> segment_model(const CadModel& model, const std::string& prompt, SegmentationProvider& provider,
                                        const PipelineConfig& cfg, SceneViews* views = nullptr);

/// Unions detections whose face sets intersect until no two outputs overlap.
std::vector<PartInstance> merge_detections(const std::vector<PartInstance>& detections);

std::vector<PartInstance> filter_by_sides(const CadModel& model, const std::vector<PartInstance>& parts,
                                          const std::set<Side>& sides, const PipelineConfig& cfg,
                                          SceneViews* views = nullptr);

/// Total visible pixels of the part's faces in the given buffers.
std::uint64_t part_visible_pixels(const RenderBuffers& buffers, const PartInstance& part);

}  // namespace cadq
