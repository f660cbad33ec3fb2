#include "cadq/providers.hpp"

#include <algorithm>
#include <cctype>

#include <httplib.h>
#include <openssl/evp.h>

#include "cadq/image_io.hpp"

namespace cadq {

std::string normalize_prompt(const std::string& prompt) {
  std::string out;
  bool space = false;
  for (char ch : prompt) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c) || ch == '.' || ch == '_') {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

OracleProvider::OracleProvider(const CadModel& model, Options options) : model_(model), options_(std::move(options)) {
  for (const auto& [label, faces] : model.labels()) {
    instances_[normalize_prompt(label)] = model.adjacency().components(faces);
  }
}

std::string OracleProvider::resolve_label(const std::string& prompt) const {
  const auto key = normalize_prompt(prompt);
  if (instances_.count(key)) return key;
  for (const char* suffix : {"es", "s"}) {
    const std::string s(suffix);
    if (key.size() > s.size() && key.compare(key.size() - s.size(), s.size(), s) == 0) {
      const auto singular = key.substr(0, key.size() - s.size());
      if (instances_.count(singular)) return singular;
    }
  }
  return {};
}

const std::vector<std::vector<FaceId>>& OracleProvider::instances(const std::string& label) const {
  static const std::vector<std::vector<FaceId>> none;
  auto it = instances_.find(label);
  return it == instances_.end() ? none : it->second;
}

std::vector<ScoredMask> OracleProvider::segment(const ImageView& image, const std::string& prompt, double box_threshold) {
  const auto label = resolve_label(prompt);
  if (label.empty()) return {};
  double score = options_.score;
  for (const auto& [l, s] : options_.label_scores) {
    if (normalize_prompt(l) == label) score = s;
  }
  if (score < box_threshold) return {};

  const auto& groups = instances(label);
  std::vector<int> instance_of(model_.face_count(), -1);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (FaceId f : groups[g]) instance_of[static_cast<std::size_t>(f)] = static_cast<int>(g);
  }
  std::vector<ScoredMask> masks(groups.size());
  for (auto& m : masks) {
    m.mask = Bitmap(image.width, image.height);
    m.score = score;
  }
  std::vector<std::size_t> hits(groups.size(), 0);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const auto face = face_from_color(image.at(x, y));
      if (!face || !model_.has_face(*face)) continue;
      const int g = instance_of[static_cast<std::size_t>(*face)];
      if (g < 0) continue;
      masks[static_cast<std::size_t>(g)].mask.set(x, y);
      ++hits[static_cast<std::size_t>(g)];
    }
  }
  std::vector<ScoredMask> out;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (hits[g] < options_.min_pixels) continue;
    masks[g].bbox = tight_bbox(masks[g].mask);
    out.push_back(std::move(masks[g]));
  }
  return out;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw std::invalid_argument("base64 length must be a multiple of 4");
  std::vector<std::uint8_t> out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
  if (n < 0) throw std::invalid_argument("invalid base64");
  std::size_t size = static_cast<std::size_t>(n);
  // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
  if (!text.empty() && text.back() == '=') --size;
  if (text.size() >= 2 && text[text.size() - 2] == '=') --size;
  out.resize(size);
  return out;
}

RemoteProvider::RemoteProvider(std::string base_url, std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

nlohmann::json RemoteProvider::make_request(const ImageView& image, const std::string& prompt, double box_threshold) {
  const auto png = encode_png_rgb(image.width, image.height, image.pixels);
  return {{"image", base64_encode(png)}, {"prompt", prompt}, {"box_threshold", box_threshold}};
}

std::vector<ScoredMask> RemoteProvider::parse_response(const nlohmann::json& body, int width, int height) {
  std::vector<ScoredMask> masks;
  for (const auto& det : body.at("detections")) {
    ScoredMask m;
    const auto& bbox = det.at("bbox");
    if (!bbox.is_array() || bbox.size() != 4) throw std::invalid_argument("bbox must be [x, y, w, h]");
    m.bbox = {bbox[0].get<int>(), bbox[1].get<int>(), bbox[2].get<int>(), bbox[3].get<int>()};
    m.score = det.at("score").get<double>();
    m.mask = decode_rle(det.at("mask_rle"));
    if (m.mask.width != width || m.mask.height != height) {
      throw std::invalid_argument("mask size does not match the request image");
    }
    m.validate();
    masks.push_back(std::move(m));
  }
  return masks;
}

std::vector<ScoredMask> RemoteProvider::segment(const ImageView& image, const std::string& prompt, double box_threshold) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  const auto request = make_request(image, prompt, box_threshold);
  auto res = client.Post("/v1/segment", request.dump(), "application/json");
  if (!res) throw ProviderUnavailable("segmentation service unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw ProviderUnavailable("segmentation service returned HTTP " + std::to_string(res->status) + ": " + res->body);
  }
  try {
    return parse_response(nlohmann::json::parse(res->body), image.width, image.height);
  } catch (const std::exception& e) {
    throw ProviderUnavailable(std::string("malformed segmentation response: ") + e.what());
  }
}

std::unique_ptr<SegmentationProvider> make_provider(const std::string& spec, const CadModel& model) {
  if (spec == "oracle") return std::make_unique<OracleProvider>(model);
  constexpr std::string_view remote = "remote:";
  if (spec.rfind(remote, 0) == 0) return std::make_unique<RemoteProvider>(spec.substr(remote.size()));
  throw std::invalid_argument("unknown provider '" + spec + "' (expected oracle or remote:URL)");
}

}  // namespace cadq
