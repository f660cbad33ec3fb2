#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cadq/segcad.hpp"

namespace cadq {

/// Ground-truth segmentation: decodes face ids from the palette colours of the rendered image and
/// emits one mask per labelled instance (connected component of the label's faces).
class OracleProvider final : public SegmentationProvider {
 public:
  struct Options {
    double score = 0.9;
    std::map<std::string, double> label_scores;  // per-label override
    std::size_t min_pixels = 1;
  };

  explicit OracleProvider(const CadModel& model) : OracleProvider(model, Options{}) {}
  OracleProvider(const CadModel& model, Options options);

  std::vector<ScoredMask> segment(const ImageView& image, const std::string& prompt, double box_threshold) override;
  bool concurrent_safe() const override { return true; }

  /// Label key a prompt resolves to (case/whitespace/plural insensitive), or empty.
  std::string resolve_label(const std::string& prompt) const;
  const std::vector<std::vector<FaceId>>& instances(const std::string& label) const;

 private:
  const CadModel& model_;
  Options options_;
  std::map<std::string, std::vector<std::vector<FaceId>>> instances_;
};

std::string normalize_prompt(const std::string& prompt);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

/// Client for the segmentation service: POST {base}/v1/segment with
/// {"image": base64 PNG, "prompt": text, "box_threshold": p}.
class RemoteProvider final : public SegmentationProvider {
 public:
  explicit RemoteProvider(std::string base_url, std::chrono::seconds timeout = std::chrono::seconds(120));

  std::vector<ScoredMask> segment(const ImageView& image, const std::string& prompt, double box_threshold) override;
  bool concurrent_safe() const override { return true; }

  static nlohmann::json make_request(const ImageView& image, const std::string& prompt, double box_threshold);
  /// Parses and validates a response body against the request image size.
  static std::vector<ScoredMask> parse_response(const nlohmann::json& body, int width, int height);

 private:
  std::string base_url_;
  std::chrono::seconds timeout_;
};

/// "oracle" or "remote:URL".
std::unique_ptr<SegmentationProvider> make_provider(const std::string& spec, const CadModel& model);

}  // namespace cadq
