// cadquery: render, segment, query and benchmark CAD models from the command line.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cadq/fixtures.hpp"
#include "cadq/image_io.hpp"
#include "cadq/metrics.hpp"
#include "cadq/providers.hpp"
#include "cadq/qa.hpp"

namespace {

using namespace cadq;

struct PipelineFlags {
  std::string config_file;
  std::optional<int> width, height;
  std::optional<double> box_threshold;
  std::string view_set;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "pipeline config JSON");
    cmd->add_option("--width", width, "render width in pixels");
    cmd->add_option("--height", height, "render height in pixels");
    cmd->add_option("--box-threshold", box_threshold, "detection score threshold");
    cmd->add_option("--view-set", view_set, "six_main_axes or eight_corners");
  }

  PipelineConfig resolve() const {
    PipelineConfig cfg;
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) throw std::runtime_error("cannot read " + config_file);
      cfg = nlohmann::json::parse(in).get<PipelineConfig>();
    }
    if (width) cfg.render_width = *width;
    if (height) cfg.render_height = *height;
    if (box_threshold) cfg.box_score_threshold = *box_threshold;
    if (!view_set.empty()) cfg.view_set = parse_view_set(view_set);
    cfg.validate();
    return cfg;
  }
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

qa::ChatEndpointConfig load_llm_config(const std::string& path) {
  auto cfg = nlohmann::json::parse(read_text(path)).get<qa::ChatEndpointConfig>();
  // Relative replay directories are relative to the config file.
  if (cfg.replay_dir.is_relative() && !cfg.replay_dir.empty()) {
    cfg.replay_dir = std::filesystem::path(path).parent_path() / cfg.replay_dir;
  }
  return cfg;
}

std::string file_stem(const ViewSpec& v) {
  auto name = v.name();
  std::erase(name, ':');
  return name;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Answer measurement questions about CAD models"};
  app.require_subcommand(1);

  // render
  auto* render_cmd = app.add_subcommand("render", "render face-colour, face-id and depth images");
  std::string model_path, out_dir;
  std::vector<std::string> view_names;
  int width = 1920, height = 1080;
  double perturbation = 1.0;
  render_cmd->add_option("--model", model_path, "face-grouped OBJ")->required();
  render_cmd->add_option("--view", view_names, "top|bottom|left|right|front|back|corner:K (repeatable)")->required();
  render_cmd->add_option("--width", width);
  render_cmd->add_option("--height", height);
  render_cmd->add_option("--perturbation", perturbation, "main-axis rotation in degrees");
  render_cmd->add_option("--out", out_dir)->required();

  // segment
  auto* segment_cmd = app.add_subcommand("segment", "retrieve the parts matching a description");
  std::string prompt, provider_spec = "oracle", sides_text, out_file;
  PipelineFlags seg_flags;
  segment_cmd->add_option("--model", model_path)->required();
  segment_cmd->add_option("--prompt", prompt)->required();
  segment_cmd->add_option("--provider", provider_spec, "oracle or remote:URL");
  segment_cmd->add_option("--sides", sides_text, "comma-separated sides, e.g. top,left");
  segment_cmd->add_option("--out", out_file, "parts JSON (default: stdout)");
  seg_flags.add(segment_cmd);

  // query
  auto* query_cmd = app.add_subcommand("query", "run a program or ask a question");
  std::string program_path, question, llm_config;
  bool show_trace = false;
  PipelineFlags query_flags;
  query_cmd->add_option("--model", model_path)->required();
  auto* program_opt = query_cmd->add_option("--program", program_path, ".cadq program");
  auto* question_opt = query_cmd->add_option("--question", question);
  query_cmd->add_option("--llm-config", llm_config, "chat endpoint JSON");
  query_cmd->add_option("--provider", provider_spec);
  query_cmd->add_flag("--trace", show_trace, "print the evaluation trace");
  program_opt->excludes(question_opt);
  query_flags.add(query_cmd);

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "run a question suite and write a report");
  std::string suite_path, mode = "golden", report_dir;
  unsigned workers = 1;
  PipelineFlags bench_flags;
  bench_cmd->add_option("--suite", suite_path)->required();
  bench_cmd->add_option("--mode", mode, "golden|replay|live");
  bench_cmd->add_option("--provider", provider_spec);
  bench_cmd->add_option("--llm-config", llm_config);
  bench_cmd->add_option("--report", report_dir, "output directory")->required();
  bench_cmd->add_option("--workers", workers);
  bench_flags.add(bench_cmd);

  // fixtures
  auto* fixtures_cmd = app.add_subcommand("fixtures", "write the synthetic fixture models");
  fixtures_cmd->add_option("--out", out_dir)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*render_cmd) {
      const auto model = load_model(model_path);
      Renderer renderer(model);
      for (const auto& name : view_names) {
        auto view = ViewSpec::parse(name);
        if (view.kind == ViewSpec::Kind::MainAxis) view.azimuth_perturbation_deg = perturbation;
        const auto buffers = renderer.render(camera_for_view(model, view, width, height));
        export_render(buffers, out_dir, file_stem(view));
        std::printf("%s: %llu model pixels\n", view.name().c_str(), static_cast<unsigned long long>(buffers.model_pixels));
      }
      return 0;
    }

    if (*segment_cmd) {
      const auto cfg = seg_flags.resolve();
      const auto model = load_model(model_path);
      auto provider = make_provider(provider_spec, model);
      SceneViews views(model, cfg.render_width, cfg.render_height);
      auto parts = segment_model(model, prompt, *provider, cfg, &views);
      std::set<Side> sides;
      std::stringstream ss(sides_text);
      for (std::string s; std::getline(ss, s, ',');) {
        auto side = parse_side(s);
        if (!side) throw std::invalid_argument("unknown side '" + s + "'");
        sides.insert(*side);
      }
      if (!sides.empty()) parts = filter_by_sides(model, parts, sides, cfg, &views);
      nlohmann::json out = {{"prompt", prompt}, {"config", cfg}, {"parts", nlohmann::json::array()}};
      for (const auto& p : parts) {
        nlohmann::json j = p;
        j["measurements"] = measure(model, p);
        out["parts"].push_back(j);
      }
      if (out_file.empty()) {
        std::cout << out.dump(2) << "\n";
      } else {
        write_text(out_file, out.dump(2) + "\n");
        std::printf("%zu parts -> %s\n", parts.size(), out_file.c_str());
      }
      return 0;
    }

    if (*query_cmd) {
      const auto cfg = query_flags.resolve();
      const auto model = load_model(model_path);
      auto provider = make_provider(provider_spec, model);
      qa::Execution ex;
      if (!program_path.empty()) {
        ex = qa::execute_program(read_text(program_path), model, *provider, cfg);
      } else if (!question.empty()) {
        if (llm_config.empty()) throw std::invalid_argument("--question needs --llm-config");
        auto client = qa::make_chat_client(load_llm_config(llm_config));
        ex = qa::answer_question(question, model, *provider, *client, cfg);
      } else {
        throw std::invalid_argument("give --program or --question");
      }
      if (!ex.answer) {
        std::fprintf(stderr, "%s error: %s\n", qa::to_string(ex.category).c_str(), ex.error.c_str());
        return 2;
      }
      auto j = query::to_json(*ex.answer);
      if (!show_trace) j.erase("trace");
      std::cout << j.dump(2) << "\n";
      return 0;
    }

    if (*bench_cmd) {
      qa::BenchOptions options;
      options.mode = qa::parse_bench_mode(mode);
      options.cfg = bench_flags.resolve();
      options.workers = workers;
      options.provider = [spec = provider_spec](const CadModel& m) { return make_provider(spec, m); };
      std::unique_ptr<qa::ChatClient> client;
      if (options.mode != qa::BenchMode::Golden) {
        if (llm_config.empty()) throw std::invalid_argument("replay and live modes need --llm-config");
        client = qa::make_chat_client(load_llm_config(llm_config));
        options.chat = client.get();
      }
      const auto report = qa::run_benchmark(qa::load_suite(suite_path), options);
      write_text(std::filesystem::path(report_dir) / "report.json", qa::report_json(report).dump(2) + "\n");
      const auto table = qa::report_table(report);
      write_text(std::filesystem::path(report_dir) / "report.txt", table);
      std::cout << table;
      return 0;
    }

    if (*fixtures_cmd) {
      const std::pair<const char*, fixtures::Fixture> all[] = {
          {"unit_cube", fixtures::unit_cube()},
          {"plate_4_holes", fixtures::plate_with_holes()},
          {"plate_blind_hole", fixtures::plate_with_blind_hole()},
          {"plate_mixed", fixtures::plate_mixed_holes()},
          {"plate_before_block", fixtures::plate_before_block()},
          {"cylinder_r5_h10", fixtures::solid_cylinder(5.0, 10.0, 64)},
      };
      for (const auto& [name, fixture] : all) {
        const auto path = fixtures::write_fixture(fixture, out_dir, name);
        std::printf("%s (%zu faces, %zu triangles)\n", path.string().c_str(), fixture.manifest.face_count,
                    fixture.manifest.triangle_count);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
