#include <doctest.h>

#include <random>

#include "cadq/providers.hpp"
#include "cadq/segcad.hpp"
#include "support/support.hpp"
#include "support/synthetic.hpp"

using namespace cadq;
using testing::mask_of;
using testing::model_of;
using testing::RescoringProvider;
using testing::synthetic;

namespace {

class EmptyProvider : public SegmentationProvider {
 public:
  std::vector<ScoredMask> segment(const ImageView&, const std::string&, double) override { return {}; }
};

class DownProvider : public SegmentationProvider {
 public:
  std::vector<ScoredMask> segment(const ImageView&, const std::string&, double) override {
    throw ProviderUnavailable("connection refused");
  }
};

PipelineConfig small_cfg(ViewSet set = ViewSet::SixMainAxes) {
  PipelineConfig cfg;
  cfg.render_width = 480;
  cfg.render_height = 270;
  cfg.view_set = set;
  return cfg;
}

std::pair<FaceId, FaceId> adjacent_pair(const CadModel& m) { return {0, m.adjacency().neighbors(0).front()}; }

}  // namespace

TEST_CASE("a mask covering more than 45% of model pixels is rejected") {
  const auto cube = model_of(fixtures::unit_cube());
  const auto [a, b] = adjacent_pair(cube);
  const auto buffers = synthetic(cube, 50, 40, {{a, 500, 1.0}, {b, 500, 2.0}});  // 1000 model pixels
  const PipelineConfig cfg;

  auto at_limit = align_mask(mask_of(buffers, {{a, 450}}), buffers, cube, cfg);
  CHECK(at_limit.model_coverage == 0.45);
  CHECK(at_limit.status == AlignOutcome::Status::Accepted);

  auto just_over = align_mask(mask_of(buffers, {{a, 451}}), buffers, cube, cfg);
  CHECK(just_over.status == AlignOutcome::Status::Rejected);

  auto sixty = align_mask(mask_of(buffers, {{a, 500}, {b, 100}}), buffers, cube, cfg);
  CHECK(sixty.model_coverage == doctest::Approx(0.6));
  CHECK(sixty.status == AlignOutcome::Status::Rejected);
  CHECK(sixty.part.face_ids.empty());
}

TEST_CASE("a face with at most 5% of its visible pixels masked is excluded") {
  const auto cube = model_of(fixtures::unit_cube());
  const auto [a, b] = adjacent_pair(cube);
  const auto buffers = synthetic(cube, 60, 40, {{a, 200, 1.0}, {b, 1000, 2.0}});
  const PipelineConfig cfg;

  auto two = align_mask(mask_of(buffers, {{a, 200}, {b, 20}}), buffers, cube, cfg);
  CHECK(two.part.face_ids == std::vector<FaceId>{a});

  auto five = align_mask(mask_of(buffers, {{a, 200}, {b, 50}}), buffers, cube, cfg);
  CHECK(five.part.face_ids == std::vector<FaceId>{a});

  auto six = align_mask(mask_of(buffers, {{a, 200}, {b, 60}}), buffers, cube, cfg);
  CHECK(six.part.face_ids == std::vector<FaceId>{std::min(a, b), std::max(a, b)});
}

TEST_CASE("masks covering only background are empty, not rejected") {
  const auto cube = model_of(fixtures::unit_cube());
  const auto buffers = synthetic(cube, 20, 20, {{0, 100, 1.0}});
  ScoredMask m;
  m.mask = Bitmap(20, 20);
  m.mask.set(19, 19);
  m.bbox = tight_bbox(m.mask);
  m.score = 0.9;
  const auto out = align_mask(m, buffers, cube, PipelineConfig{});
  CHECK(out.status == AlignOutcome::Status::Empty);
  CHECK_THROWS_AS(align_mask(mask_of(synthetic(cube, 10, 10, {}), {}), buffers, cube, PipelineConfig{}), DimensionMismatch);
}

TEST_CASE("closest-face pruning keeps only the component nearest the camera") {
  // Faces 0 and 1 of the first cube are adjacent; face 6 belongs to the second, disjoint cube.
  const auto model = model_of(fixtures::two_disjoint_cubes());
  const FaceId near = 0, near_neighbor = model.adjacency().neighbors(0).front(), far = 6;
  const auto buffers = synthetic(model, 60, 60, {{near, 300, 5.0}, {near_neighbor, 300, 6.0}, {far, 300, 9.0}, {1, 2000, 7.0}});
  const auto out = align_mask(mask_of(buffers, {{near, 300}, {near_neighbor, 300}, {far, 300}}), buffers, model, PipelineConfig{});
  CHECK(out.status == AlignOutcome::Status::Accepted);
  CHECK(out.closest_face == near);
  CHECK(out.candidates.size() == 3);
  CHECK(std::find(out.part.face_ids.begin(), out.part.face_ids.end(), far) == out.part.face_ids.end());
  CHECK(out.part.face_ids.size() == 2);
}

TEST_CASE("detections scoring below 0.30 are dropped") {
  const auto fx = fixtures::plate_with_holes();
  const auto model = model_of(fx);
  auto cfg = small_cfg();
  cfg.view_set = ViewSet::SixMainAxes;

  RescoringProvider low(model, {0.29});
  CHECK(segment_model(model, "hole", low, cfg).empty());

  RescoringProvider edge(model, {0.30});
  CHECK(segment_model(model, "hole", edge, cfg).size() == 4);

  // Mixed scores: every other mask is below the threshold; the report says how many were dropped.
  RescoringProvider mixed(model, {0.31, 0.2999});
  const auto report = segment_model_report(model, "hole", mixed, cfg);
  std::size_t dropped = 0, returned = 0;
  for (const auto& v : report.views) {
    dropped += v.below_threshold;
    returned += v.masks_returned;
  }
  CHECK(dropped == returned / 2);
  for (const auto& part : report.parts) {
    for (const auto& p : part.provenance) CHECK(p.score >= 0.30);
  }
}

TEST_CASE("oracle provider honours the requested box threshold") {
  const auto model = model_of(fixtures::plate_with_holes());
  OracleProvider::Options opt;
  opt.score = 0.25;
  OracleProvider oracle(model, opt);
  const auto r = render(model, camera_for_view(model, ViewSpec::main_axis(Side::Top), 200, 120));
  CHECK(oracle.segment(r.image(), "hole", 0.30).empty());
  CHECK(oracle.segment(r.image(), "hole", 0.20).size() == 4);
  CHECK(oracle.segment(r.image(), "Holes ", 0.20).size() == 4);
  CHECK(oracle.segment(r.image(), "gear", 0.0).empty());
  for (const auto& m : oracle.segment(r.image(), "hole", 0.0)) CHECK_NOTHROW(m.validate());
}

TEST_CASE("segment_model on the plate finds exactly the four labelled holes") {
  const auto fx = fixtures::plate_with_holes();
  const auto model = model_of(fx);
  OracleProvider oracle(model);
  const auto parts = segment_model(model, "hole", oracle, small_cfg());
  REQUIRE(parts.size() == 4);
  std::vector<std::vector<FaceId>> expected = fx.manifest.instances.at("hole");
  std::vector<std::vector<FaceId>> got;
  for (const auto& p : parts) got.push_back(p.face_ids);
  std::sort(expected.begin(), expected.end());
  CHECK(got == expected);
  // Through holes are seen from above and below, so each part merges at least two views.
  for (const auto& p : parts) CHECK(p.provenance.size() >= 2);

  EmptyProvider none;
  CHECK(segment_model(model, "hole", none, small_cfg()).empty());
  DownProvider down;
  CHECK_THROWS_AS(segment_model(model, "hole", down, small_cfg()), ProviderUnavailable);
}

TEST_CASE("both view sets are selectable and find the holes") {
  const auto model = model_of(fixtures::plate_with_holes());
  OracleProvider oracle(model);
  CHECK(small_cfg(ViewSet::SixMainAxes).views().size() == 6);
  CHECK(small_cfg(ViewSet::EightCorners).views().size() == 8);
  SceneViews views(model, 480, 270);
  CHECK(segment_model(model, "hole", oracle, small_cfg(ViewSet::EightCorners), &views).size() == 4);
  CHECK(views.renders() == 8);
  CHECK(parse_view_set("eight_corners") == ViewSet::EightCorners);
  CHECK_THROWS_AS(parse_view_set("twelve"), std::invalid_argument);
}

TEST_CASE("merge_detections") {
  auto part = [](std::vector<FaceId> f, std::string view) { return PartInstance{std::move(f), {{std::move(view), 0, 0.9}}}; };
  auto merged = merge_detections({part({1, 2}, "top"), part({2, 3}, "left")});
  REQUIRE(merged.size() == 1);
  CHECK(merged[0].face_ids == std::vector<FaceId>{1, 2, 3});
  CHECK(merged[0].provenance.size() == 2);

  CHECK(merge_detections({part({1, 2}, "top"), part({3, 4}, "top")}).size() == 2);

  merged = merge_detections({part({4, 5}, "top"), part({4, 5}, "corner:7")});
  REQUIRE(merged.size() == 1);
  CHECK(merged[0].face_ids == std::vector<FaceId>{4, 5});
  CHECK(merged[0].provenance.size() == 2);

  // Chains close transitively regardless of order.
  merged = merge_detections({part({1}, "a"), part({9}, "b"), part({5, 9}, "c"), part({1, 5}, "d")});
  REQUIRE(merged.size() == 1);
  CHECK(merged[0].face_ids == std::vector<FaceId>{1, 5, 9});
  CHECK(merge_detections({}).empty());
}

TEST_CASE("side filtering on the blind-hole plate") {
  const auto fx = fixtures::plate_with_blind_hole();
  const auto model = model_of(fx);
  OracleProvider oracle(model);
  const auto cfg = small_cfg();
  SceneViews views(model, cfg.render_width, cfg.render_height);
  const auto parts = segment_model(model, "hole", oracle, cfg, &views);
  REQUIRE(parts.size() == 2);

  std::vector<FaceId> blind;
  for (const auto& f : fx.manifest.features) {
    if (f.kind == fixtures::CellKind::BlindHole) blind = f.faces;
  }
  auto has_blind = [&](const std::vector<PartInstance>& ps) {
    return std::any_of(ps.begin(), ps.end(), [&](const PartInstance& p) { return p.face_ids == blind; });
  };
  REQUIRE(has_blind(parts));

  const auto bottom = filter_by_sides(model, parts, {Side::Bottom}, cfg, &views);
  CHECK_FALSE(has_blind(bottom));
  CHECK(bottom.size() == 1);
  const auto top = filter_by_sides(model, parts, {Side::Top}, cfg, &views);
  CHECK(has_blind(top));
  CHECK(top.size() == 2);
  const std::set<Side> all(std::begin(kAllSides), std::end(kAllSides));
  CHECK(filter_by_sides(model, parts, all, cfg, &views) == parts);
  CHECK_THROWS_AS(filter_by_sides(model, parts, {}, cfg, &views), std::invalid_argument);
}

TEST_CASE("RLE round-trips and follows the zero-first convention") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int w = 1 + static_cast<int>(rng() % 40), h = 1 + static_cast<int>(rng() % 30);
    Bitmap b(w, h);
    const double density = (trial % 5) / 4.0;
    std::bernoulli_distribution bit(density);
    for (auto& v : b.bits) v = bit(rng);
    const auto rle = encode_rle(b);
    CHECK(rle.at("size") == nlohmann::json::array({h, w}));
    std::size_t total = 0;
    for (auto c : rle.at("counts")) total += c.get<std::size_t>();
    CHECK(total == b.bits.size());
    CHECK(decode_rle(rle) == b);
  }
  Bitmap ones(3, 2);
  for (auto& v : ones.bits) v = 1;
  CHECK(encode_rle(ones).at("counts") == nlohmann::json::array({0, 6}));
  CHECK(encode_rle(Bitmap(3, 2)).at("counts") == nlohmann::json::array({6}));
  CHECK_THROWS(decode_rle({{"size", {2, 3}}, {"counts", {1, 2}}}));
  CHECK_THROWS(decode_rle({{"size", {2, 3}}, {"counts", {7}}}));
}

TEST_CASE("ScoredMask invariants") {
  ScoredMask m;
  m.mask = Bitmap(10, 10);
  m.mask.set(5, 5);
  m.bbox = {0, 0, 5, 5};
  m.score = 0.5;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  m.bbox = tight_bbox(m.mask);
  CHECK(m.bbox == BoundingBox{5, 5, 1, 1});
  CHECK_NOTHROW(m.validate());
  m.score = 1.2;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
}

TEST_CASE("pipeline config validation and JSON") {
  PipelineConfig cfg;
  CHECK(cfg.box_score_threshold == 0.30);
  CHECK(cfg.max_mask_model_coverage == 0.45);
  CHECK(cfg.min_face_coverage == 0.05);
  CHECK(cfg.render_width == 1920);
  CHECK(cfg.render_height == 1080);
  cfg.view_set = ViewSet::EightCorners;
  cfg.box_score_threshold = 0.4;
  const nlohmann::json j = cfg;
  const auto back = j.get<PipelineConfig>();
  CHECK(back.view_set == ViewSet::EightCorners);
  CHECK(back.box_score_threshold == 0.4);
  cfg.max_mask_model_coverage = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.render_width = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("scene views render each view once") {
  const auto model = model_of(fixtures::unit_cube());
  SceneViews views(model, 64, 48);
  auto a = views.view(ViewSpec::main_axis(Side::Top));
  auto b = views.view(ViewSpec::main_axis(Side::Top));
  CHECK(a.get() == b.get());
  views.view(ViewSpec::main_axis(Side::Top, 0.0));
  CHECK(views.renders() == 2);
}
