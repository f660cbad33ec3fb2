#include <doctest.h>

#include <cstdlib>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "cadq/image_io.hpp"
#include "cadq/providers.hpp"
#include "cadq/qa.hpp"
#include "support/support.hpp"

using namespace cadq;
using testing::model_of;

namespace {

/// httplib server on an ephemeral loopback port, stopped on destruction.
class LocalServer {
 public:
  LocalServer() {
    port_ = server.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~LocalServer() {
    server.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  httplib::Server server;

 private:
  int port_ = 0;
  std::thread thread_;
};

PipelineConfig small_config() {
  PipelineConfig cfg;
  cfg.render_width = 320;
  cfg.render_height = 180;
  return cfg;
}

struct Seen {
  std::mutex mutex;
  int requests = 0;
  std::string prompt;
  double threshold = -1.0;
  int width = 0, height = 0;
};

/// A stand-in segmentation service: decodes the PNG and answers with the oracle's masks.
void serve_oracle(LocalServer& srv, const CadModel& model, Seen& seen) {
  srv.server.Post("/v1/segment", [&model, &seen](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    const auto png = base64_decode(body.at("image").get<std::string>());
    const auto image = decode_png_rgb(png);
    {
      std::lock_guard lock(seen.mutex);
      ++seen.requests;
      seen.prompt = body.at("prompt").get<std::string>();
      seen.threshold = body.at("box_threshold").get<double>();
      seen.width = image.width;
      seen.height = image.height;
    }
    OracleProvider oracle(model);
    const ImageView view{image.width, image.height, image.pixels};
    nlohmann::json detections = nlohmann::json::array();
    for (const auto& m : oracle.segment(view, seen.prompt, seen.threshold)) {
      detections.push_back({{"bbox", {m.bbox.x, m.bbox.y, m.bbox.w, m.bbox.h}},
                            {"score", m.score},
                            {"mask_rle", encode_rle(m.mask)}});
    }
    res.set_content(nlohmann::json{{"detections", detections}}.dump(), "application/json");
  });
}

}  // namespace

TEST_CASE("base64 round trip and known vectors") {
  const std::string text = "foobar";
  const std::vector<std::uint8_t> bytes(text.begin(), text.end());
  CHECK(base64_encode(bytes) == "Zm9vYmFy");
  CHECK(base64_encode(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 4)) == "Zm9vYg==");
  CHECK(base64_encode(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 5)) == "Zm9vYmE=");
  std::mt19937 rng(3);
  for (int n = 0; n < 64; ++n) {
    std::vector<std::uint8_t> blob(static_cast<std::size_t>(n));
    for (auto& b : blob) b = static_cast<std::uint8_t>(rng());
    CHECK(base64_decode(base64_encode(blob)) == blob);
  }
}

TEST_CASE("remote provider yields the same parts as the in-process oracle") {
  const auto model = model_of(fixtures::plate_with_holes());
  LocalServer srv;
  Seen seen;
  serve_oracle(srv, model, seen);

  auto cfg = small_config();
  cfg.box_score_threshold = 0.25;
  RemoteProvider remote(srv.url());
  OracleProvider oracle(model);
  const auto over_wire = segment_model(model, "hole", remote, cfg);
  const auto local = segment_model(model, "hole", oracle, cfg);
  CHECK(over_wire == local);
  CHECK(over_wire.size() == 4);
  CHECK(seen.requests == static_cast<int>(cfg.views().size()));
  CHECK(seen.prompt == "hole");
  CHECK(seen.threshold == 0.25);
  CHECK(seen.width == cfg.render_width);
  CHECK(seen.height == cfg.render_height);
}

TEST_CASE("service failures surface as ProviderUnavailable") {
  const auto model = model_of(fixtures::unit_cube());
  const auto cfg = small_config();
  LocalServer srv;
  srv.server.Post("/v1/segment", [](const httplib::Request& req, httplib::Response& res) {
    const auto prompt = nlohmann::json::parse(req.body).at("prompt").get<std::string>();
    if (prompt == "busy") {
      res.status = 503;
      res.set_content("overloaded", "text/plain");
    } else if (prompt == "garbage") {
      res.set_content("{not json", "application/json");
    } else if (prompt == "small") {
      Bitmap tiny(4, 4);
      tiny.set(1, 1);
      res.set_content(nlohmann::json{{"detections", {{{"bbox", {1, 1, 1, 1}}, {"score", 0.9}, {"mask_rle", encode_rle(tiny)}}}}}.dump(),
                      "application/json");
    } else {
      res.set_content(R"({"detections": []})", "application/json");
    }
  });
  RemoteProvider remote(srv.url() + "/");
  CHECK(segment_model(model, "nothing", remote, cfg).empty());
  CHECK_THROWS_AS(segment_model(model, "busy", remote, cfg), ProviderUnavailable);
  CHECK_THROWS_AS(segment_model(model, "garbage", remote, cfg), ProviderUnavailable);
  CHECK_THROWS_AS(segment_model(model, "small", remote, cfg), ProviderUnavailable);

  // Nothing listens on a port that was just released.
  std::string dead;
  {
    LocalServer gone;
    dead = gone.url();
  }
  RemoteProvider unreachable(dead, std::chrono::seconds(2));
  CHECK_THROWS_AS(segment_model(model, "hole", unreachable, cfg), ProviderUnavailable);
}

TEST_CASE("response parsing validates masks") {
  Bitmap mask(8, 4);
  mask.set(2, 1);
  mask.set(3, 2);
  auto body = nlohmann::json{{"detections", {{{"bbox", {2, 1, 2, 2}}, {"score", 0.7}, {"mask_rle", encode_rle(mask)}}}}};
  const auto masks = RemoteProvider::parse_response(body, 8, 4);
  REQUIRE(masks.size() == 1);
  CHECK(masks[0].mask == mask);
  CHECK(masks[0].score == 0.7);
  CHECK(masks[0].bbox == BoundingBox{2, 1, 2, 2});

  CHECK_THROWS(RemoteProvider::parse_response(body, 8, 5));
  body["detections"][0]["bbox"] = {2, 1, 1, 1};  // pixel (3, 2) now outside the box
  CHECK_THROWS(RemoteProvider::parse_response(body, 8, 4));
  body["detections"][0]["bbox"] = {2, 1, 2, 2};
  body["detections"][0]["score"] = 1.5;
  CHECK_THROWS(RemoteProvider::parse_response(body, 8, 4));
}

TEST_CASE("provider specs") {
  const auto model = model_of(fixtures::unit_cube());
  CHECK(dynamic_cast<OracleProvider*>(make_provider("oracle", model).get()) != nullptr);
  CHECK(dynamic_cast<RemoteProvider*>(make_provider("remote:http://127.0.0.1:9", model).get()) != nullptr);
  CHECK_THROWS_AS(make_provider("psychic", model), std::invalid_argument);
}

TEST_CASE("chat client posts the prompt with a bearer token and reads the first choice") {
  LocalServer srv;
  std::string auth, path;
  nlohmann::json request;
  srv.server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    path = req.path;
    request = nlohmann::json::parse(req.body);
    res.set_content(R"({"choices": [{"message": {"role": "assistant", "content": "```\nsolution = 1;\n```"}}]})",
                    "application/json");
  });
  srv.server.Post("/broken/chat/completions", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices": []})", "application/json");
  });

  ::setenv("CADQ_TEST_CHAT_KEY", "sekrit", 1);
  qa::ChatEndpointConfig cfg;
  cfg.mode = qa::ChatEndpointConfig::Mode::Live;
  cfg.base_url = srv.url() + "/v1";
  cfg.api_key_env_var = "CADQ_TEST_CHAT_KEY";
  cfg.model_name = "tiny";
  auto client = qa::make_chat_client(cfg);
  CHECK(qa::ask("How many?", *client) == "solution = 1;\n");
  CHECK(auth == "Bearer sekrit");
  CHECK(path == "/v1/chat/completions");
  CHECK(request.at("model") == "tiny");
  CHECK(request.at("messages").at(0).at("content") == qa::build_prompt("How many?", qa::default_template()));

  cfg.base_url = srv.url() + "/broken";
  CHECK_THROWS_AS(qa::HttpChatClient(cfg).complete("q", "p"), qa::EndpointError);
  cfg.base_url = srv.url() + "/missing";
  CHECK_THROWS_AS(qa::HttpChatClient(cfg).complete("q", "p"), qa::EndpointError);
  ::unsetenv("CADQ_TEST_CHAT_KEY");
}
