#include "cadq/segcad.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <sstream>

namespace cadq {

std::string to_string(ViewSet set) { return set == ViewSet::SixMainAxes ? "six_main_axes" : "eight_corners"; }

ViewSet parse_view_set(const std::string& text) {
  if (text == "six_main_axes" || text == "6") return ViewSet::SixMainAxes;
  if (text == "eight_corners" || text == "8") return ViewSet::EightCorners;
  throw std::invalid_argument("unknown view set '" + text + "'");
}

void PipelineConfig::validate() const {
  auto fraction = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(name) + " must be in [0, 1]");
  };
  fraction(box_score_threshold, "box_score_threshold");
  fraction(max_mask_model_coverage, "max_mask_model_coverage");
  fraction(min_face_coverage, "min_face_coverage");
  if (render_width <= 0 || render_height <= 0) throw std::invalid_argument("render size must be positive");
}

std::vector<ViewSpec> PipelineConfig::views() const {
  std::vector<ViewSpec> out;
  if (view_set == ViewSet::SixMainAxes) {
    for (Side s : kAllSides) out.push_back(side_view(s));
  } else {
    for (int k = 0; k < 8; ++k) out.push_back(ViewSpec::corner(k));
  }
  return out;
}

void to_json(nlohmann::json& j, const PipelineConfig& cfg) {
  j = {{"box_score_threshold", cfg.box_score_threshold},
       {"max_mask_model_coverage", cfg.max_mask_model_coverage},
       {"min_face_coverage", cfg.min_face_coverage},
       {"view_set", to_string(cfg.view_set)},
       {"render_width", cfg.render_width},
       {"render_height", cfg.render_height},
       {"min_visibility_pixels", cfg.min_visibility_pixels},
       {"main_axis_perturbation_deg", cfg.main_axis_perturbation_deg}};
}

void from_json(const nlohmann::json& j, PipelineConfig& cfg) {
  cfg.box_score_threshold = j.value("box_score_threshold", cfg.box_score_threshold);
  cfg.max_mask_model_coverage = j.value("max_mask_model_coverage", cfg.max_mask_model_coverage);
  cfg.min_face_coverage = j.value("min_face_coverage", cfg.min_face_coverage);
  if (j.contains("view_set")) cfg.view_set = parse_view_set(j.at("view_set").get<std::string>());
  cfg.render_width = j.value("render_width", cfg.render_width);
  cfg.render_height = j.value("render_height", cfg.render_height);
  cfg.min_visibility_pixels = j.value("min_visibility_pixels", cfg.min_visibility_pixels);
  cfg.main_axis_perturbation_deg = j.value("main_axis_perturbation_deg", cfg.main_axis_perturbation_deg);
  cfg.validate();
}

std::size_t Bitmap::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

BoundingBox tight_bbox(const Bitmap& mask) {
  int x0 = mask.width, y0 = mask.height, x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.get(x, y)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return {};
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

void ScoredMask::validate() const {
  if (!(score >= 0.0 && score <= 1.0)) throw std::invalid_argument("mask score outside [0, 1]");
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.get(x, y) && !bbox.contains(x, y)) throw std::invalid_argument("mask pixel outside its bounding box");
    }
  }
}

nlohmann::json encode_rle(const Bitmap& mask) {
  std::vector<std::uint64_t> counts;
  std::uint8_t current = 0;
  std::uint64_t run = 0;
  for (auto bit : mask.bits) {
    if (bit != current) {
      counts.push_back(run);
      run = 0;
      current = bit;
    }
    ++run;
  }
  counts.push_back(run);
  return {{"size", {mask.height, mask.width}}, {"counts", counts}};
}

Bitmap decode_rle(const nlohmann::json& rle) {
  const auto size = rle.at("size");
  if (!size.is_array() || size.size() != 2) throw std::invalid_argument("rle size must be [H, W]");
  const int h = size[0].get<int>();
  const int w = size[1].get<int>();
  if (h < 0 || w < 0) throw std::invalid_argument("rle size must be non-negative");
  Bitmap mask(w, h);
  std::size_t pos = 0;
  std::uint8_t value = 0;
  for (const auto& c : rle.at("counts")) {
    const auto run = c.get<std::uint64_t>();
    if (pos + run > mask.bits.size()) throw std::invalid_argument("rle counts exceed mask size");
    std::fill_n(mask.bits.begin() + static_cast<std::ptrdiff_t>(pos), run, value);
    pos += run;
    value ^= 1;
  }
  if (pos != mask.bits.size()) throw std::invalid_argument("rle counts do not cover the mask");
  return mask;
}

void to_json(nlohmann::json& j, const PartInstance& part) {
  j = nlohmann::json::object();
  j["face_ids"] = part.face_ids;
  auto& prov = j["provenance"] = nlohmann::json::array();
  for (const auto& p : part.provenance) prov.push_back({{"view", p.view}, {"mask_index", p.mask_index}, {"score", p.score}});
}

AlignOutcome align_mask(const ScoredMask& mask, const RenderBuffers& buffers, const CadModel& model,
                        const PipelineConfig& cfg, const Provenance& provenance) {
  if (mask.mask.width != buffers.width || mask.mask.height != buffers.height) {
    throw DimensionMismatch("mask is " + std::to_string(mask.mask.width) + "x" + std::to_string(mask.mask.height) +
                            " but render is " + std::to_string(buffers.width) + "x" + std::to_string(buffers.height));
  }
  AlignOutcome out;
  if (buffers.model_pixels == 0) return out;

  const std::size_t faces = model.face_count();
  std::vector<std::uint32_t> masked(faces, 0);
  std::vector<double> nearest(faces, std::numeric_limits<double>::infinity());
  std::size_t masked_model = 0;
  for (std::size_t i = 0; i < buffers.face_id.size(); ++i) {
    if (!mask.mask.bits[i]) continue;
    const auto f = buffers.face_id[i];
    if (f == kNoFace) continue;
    const auto fi = static_cast<std::size_t>(f);
    ++masked[fi];
    nearest[fi] = std::min(nearest[fi], buffers.depth[i]);
    ++masked_model;
  }

  out.model_coverage = static_cast<double>(masked_model) / static_cast<double>(buffers.model_pixels);
  if (out.model_coverage > cfg.max_mask_model_coverage) {
    out.status = AlignOutcome::Status::Rejected;
    return out;
  }

  for (std::size_t f = 0; f < faces; ++f) {
    const auto visible = buffers.face_pixels[f];
    if (visible == 0 || masked[f] == 0) continue;
    if (static_cast<double>(masked[f]) / static_cast<double>(visible) > cfg.min_face_coverage) {
      out.candidates.push_back(static_cast<FaceId>(f));
    }
  }
  if (out.candidates.empty()) return out;

  // Keep only the candidates connected (through candidates) to the one nearest the viewport.
  FaceId closest = out.candidates.front();
  for (FaceId f : out.candidates) {
    if (nearest[static_cast<std::size_t>(f)] < nearest[static_cast<std::size_t>(closest)]) closest = f;
  }
  out.closest_face = closest;
  for (auto& component : model.adjacency().components(out.candidates)) {
    if (std::binary_search(component.begin(), component.end(), closest)) {
      out.part.face_ids = std::move(component);
      break;
    }
  }
  out.part.provenance.push_back(provenance);
  out.status = AlignOutcome::Status::Accepted;
  return out;
}

SceneViews::SceneViews(const CadModel& model, int width, int height) : renderer_(model), width_(width), height_(height) {}

std::shared_ptr<const RenderBuffers> SceneViews::view(const ViewSpec& spec) {
  std::ostringstream key;
  key << spec.name() << "@" << spec.azimuth_perturbation_deg;
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key.str()); it != cache_.end()) return it->second;
  }
  auto camera = camera_for_view(renderer_.model(), spec, width_, height_);
  auto buffers = std::make_shared<const RenderBuffers>(renderer_.render(camera));
  std::lock_guard lock(mutex_);
  auto [it, inserted] = cache_.emplace(key.str(), std::move(buffers));
  if (inserted) ++renders_;
  return it->second;
}

std::size_t SceneViews::renders() const {
  std::lock_guard lock(mutex_);
  return renders_;
}

SegmentationReport segment_model_report(const CadModel& model, const std::string& prompt, SegmentationProvider& provider,
                                        const PipelineConfig& cfg, SceneViews* views) {
  if (prompt.empty()) throw std::invalid_argument("segmentation prompt must not be empty");
  cfg.validate();
  std::optional<SceneViews> local;
  if (views == nullptr) views = &local.emplace(model, cfg.render_width, cfg.render_height);

  SegmentationReport report;
  std::vector<PartInstance> detections;
  for (const auto& spec : cfg.views()) {
    const auto buffers = views->view(spec);
    ViewReport vr;
    vr.view = spec.name();
    std::vector<ScoredMask> masks;
    try {
      masks = provider.segment(buffers->image(), prompt, cfg.box_score_threshold);
    } catch (const ProviderUnavailable& e) {
      throw ProviderUnavailable("view " + vr.view + ": " + e.what());
    }
    vr.masks_returned = masks.size();
    for (std::size_t m = 0; m < masks.size(); ++m) {
      const auto& mask = masks[m];
      if (mask.score < cfg.box_score_threshold) {
        ++vr.below_threshold;
        continue;
      }
      auto outcome = align_mask(mask, *buffers, model, cfg, {vr.view, static_cast<int>(m), mask.score});
      switch (outcome.status) {
        case AlignOutcome::Status::Rejected: ++vr.rejected; break;
        case AlignOutcome::Status::Empty: ++vr.empty; break;
        case AlignOutcome::Status::Accepted:
          vr.aligned.push_back(outcome.part);
          detections.push_back(std::move(outcome.part));
          break;
      }
    }
    report.views.push_back(std::move(vr));
  }
  report.parts = merge_detections(detections);
  return report;
}

std::vector<PartInstance> segment_model(const CadModel& model, const std::string& prompt, SegmentationProvider& provider,
                                        const PipelineConfig& cfg, SceneViews* views) {
  return segment_model_report(model, prompt, provider, cfg, views).parts;
}

std::vector<PartInstance> merge_detections(const std::vector<PartInstance>& detections) {
  // Union-find over detections, joined through shared faces.
  std::vector<std::size_t> parent(detections.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  std::map<FaceId, std::size_t> owner;
  for (std::size_t d = 0; d < detections.size(); ++d) {
    for (FaceId f : detections[d].face_ids) {
      auto [it, inserted] = owner.emplace(f, d);
      if (!inserted) {
        const auto a = find(it->second), b = find(d);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
  }
  std::map<std::size_t, PartInstance> groups;
  for (std::size_t d = 0; d < detections.size(); ++d) {
    auto& g = groups[find(d)];
    g.face_ids.insert(g.face_ids.end(), detections[d].face_ids.begin(), detections[d].face_ids.end());
    g.provenance.insert(g.provenance.end(), detections[d].provenance.begin(), detections[d].provenance.end());
  }
  std::vector<PartInstance> out;
  for (auto& [root, part] : groups) {
    std::sort(part.face_ids.begin(), part.face_ids.end());
    part.face_ids.erase(std::unique(part.face_ids.begin(), part.face_ids.end()), part.face_ids.end());
    out.push_back(std::move(part));
  }
  std::sort(out.begin(), out.end(), [](const PartInstance& a, const PartInstance& b) { return a.face_ids < b.face_ids; });
  return out;
}

std::uint64_t part_visible_pixels(const RenderBuffers& buffers, const PartInstance& part) {
  std::uint64_t total = 0;
  for (FaceId f : part.face_ids) total += visible_pixel_count(buffers, f);
  return total;
}

std::vector<PartInstance> filter_by_sides(const CadModel& model, const std::vector<PartInstance>& parts,
                                          const std::set<Side>& sides, const PipelineConfig& cfg, SceneViews* views) {
  if (sides.empty()) throw std::invalid_argument("filter_by_sides needs at least one side");
  std::optional<SceneViews> local;
  if (views == nullptr) views = &local.emplace(model, cfg.render_width, cfg.render_height);

  std::vector<std::shared_ptr<const RenderBuffers>> renders;
  for (Side s : sides) renders.push_back(views->view(cfg.side_view(s)));

  std::vector<PartInstance> kept;
  for (const auto& part : parts) {
    const bool visible = std::any_of(renders.begin(), renders.end(), [&](const auto& buffers) {
      return part_visible_pixels(*buffers, part) >= cfg.min_visibility_pixels;
    });
    if (visible) kept.push_back(part);
  }
  return kept;
}

}  // namespace cadq
