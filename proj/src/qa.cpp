#include "cadq/qa.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "cadq/providers.hpp"

namespace cadq::qa {

namespace {

const char* kApiDocumentation = R"(You answer questions about a CAD model by writing a program in a small query language.
A program is a sequence of statements `let NAME = EXPR;` and must assign the answer exactly once with `solution = EXPR;`.
All geometry is in world coordinates. Lengths are millimeters unless converted.

Parts
  search(description)                 parts matching a free-text description, e.g. search("hole")
  search(description, sides=[top])    only parts visible from the given sides: top, bottom, left, right, front, back
  model()                             the whole model as one part

Part properties (also available as p.center, p.radius, ...)
  center(p)        point, center of the part's axis-aligned bounding box
  extents(p)       vector of full lengths along x, y, z
  half_extents(p)  extents(p) / 2
  radius(p), diameter(p), depth(p)   cylindrical parts only; depth is the length along the axis
  axis(p)          unit direction of a cylindrical part

Lists
  count(xs), first(xs), last(xs), min(xs), max(xs), sum(xs)
  filter(xs, p -> condition), map(xs, p -> expression), sort_by(xs, p -> key)

Numbers and vectors
  + - * / on numbers and vectors, comparisons < <= > >= == !=, and, or, not
  abs(x), distance(a, b), point(x, y, z), x(v), y(v), z(v) (also v.x, v.y, v.z)
  mm(x), m(x): convert a length to millimeters or meters; on a bare number they attach the unit.
  Mixing mm and m in arithmetic is an error, so convert first.
)";

const char* kInstructions = R"(Rules
- Extents are always full extents unless the question explicitly asks for half-extents; then use half_extents.
- Convert units explicitly. Values come back in millimeters; if the question asks for meters, wrap the result in m(...).
- Explain your reasoning step by step, then give the final program in one fenced code block. Only the last code block is executed.
)";

PromptTemplate make_default_template() {
  PromptTemplate t;
  t.api_documentation = kApiDocumentation;
  t.instructions = kInstructions;
  t.examples = {{
      {"How many holes can be seen from the front of the part?",
       "Holes are parts described as \"hole\". Restricting the search to the front side keeps only holes visible from "
       "there. The answer is the number of such parts.",
       "let holes = search(\"hole\", sides=[front]);\nsolution = count(holes);"},
      {"What is the largest shaft diameter in meters?",
       "Shafts are cylindrical, so each has a diameter in millimeters. Take the maximum over all shafts, then convert "
       "millimeters to meters.",
       "let shafts = search(\"shaft\");\nlet d = max(map(shafts, s -> diameter(s)));\nsolution = m(d);"},
      {"Where is the center of the slot closest to the origin?",
       "Find all slots, sort them by the distance of their center to the origin and take the first one. Its center is "
       "the answer.",
       "let slots = search(\"slot\");\nlet nearest = first(sort_by(slots, s -> distance(center(s), point(0, 0, 0))));\n"
       "solution = center(nearest);"},
  }};
  return t;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void PromptTemplate::validate() const {
  if (api_documentation.empty() || instructions.empty()) throw std::invalid_argument("prompt template has an empty section");
  for (const auto& e : examples) {
    if (e.question.empty() || e.reasoning.empty() || e.program.empty()) throw std::invalid_argument("incomplete in-context example");
    try {
      query::parse(e.program);
    } catch (const query::QueryError& err) {
      throw std::invalid_argument("in-context example does not parse: " + std::string(err.what()));
    }
  }
}

const PromptTemplate& default_template() {
  static const PromptTemplate t = make_default_template();
  return t;
}

std::string build_prompt(const std::string& question, const PromptTemplate& tmpl) {
  std::string out = tmpl.api_documentation;
  out += "\n";
  out += tmpl.instructions;
  out += "\nExamples\n";
  for (std::size_t i = 0; i < tmpl.examples.size(); ++i) {
    const auto& e = tmpl.examples[i];
    out += "\nExample " + std::to_string(i + 1) + "\nQuestion: " + e.question + "\nReasoning: " + e.reasoning +
           "\n```cadq\n" + e.program + "\n```\n";
  }
  out += "\nNow answer the following question.\nQuestion: ";
  out += question;
  out += "\nReasoning:";
  return out;
}

std::string extract_last_code_block(const std::string& completion) {
  std::istringstream in(completion);
  std::string line, current, last;
  bool inside = false, found = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto start = line.find_first_not_of(" \t");
    const bool fence = start != std::string::npos && line.compare(start, 3, "```") == 0;
    if (fence) {
      if (inside) {
        last = current;
        found = true;
      }
      current.clear();
      inside = !inside;
    } else if (inside) {
      current += line + "\n";
    }
  }
  if (!found) throw NoCodeBlock("completion contains no fenced code block");
  return last;
}

std::string question_key(const std::string& question) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : question) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void from_json(const nlohmann::json& j, ChatEndpointConfig& cfg) {
  cfg.base_url = j.value("base_url", cfg.base_url);
  cfg.model_name = j.value("model_name", cfg.model_name);
  cfg.api_key_env_var = j.value("api_key_env_var", cfg.api_key_env_var);
  cfg.temperature = j.value("temperature", cfg.temperature);
  cfg.max_tokens = j.value("max_tokens", cfg.max_tokens);
  cfg.timeout = std::chrono::seconds(j.value("timeout_s", static_cast<int>(cfg.timeout.count())));
  const auto mode = j.value("mode", std::string("replay"));
  if (mode == "live") {
    cfg.mode = ChatEndpointConfig::Mode::Live;
  } else if (mode == "replay") {
    cfg.mode = ChatEndpointConfig::Mode::Replay;
  } else {
    throw std::invalid_argument("mode must be live or replay, got '" + mode + "'");
  }
  if (j.contains("replay_dir")) cfg.replay_dir = j.at("replay_dir").get<std::string>();
  if (cfg.mode == ChatEndpointConfig::Mode::Replay && cfg.replay_dir.empty()) throw std::invalid_argument("replay mode needs replay_dir");
}

nlohmann::json HttpChatClient::make_request(const ChatEndpointConfig& cfg, const std::string& prompt) {
  return {{"model", cfg.model_name},
          {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
          {"temperature", cfg.temperature},
          {"max_tokens", cfg.max_tokens}};
}

std::string HttpChatClient::complete(const std::string&, const std::string& prompt) {
  // httplib wants scheme://host[:port]; anything after that is a path prefix.
  const auto scheme_end = cfg_.base_url.find("://");
  const auto host_end = cfg_.base_url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  const std::string host = cfg_.base_url.substr(0, host_end);
  std::string prefix = host_end == std::string::npos ? "" : cfg_.base_url.substr(host_end);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

  httplib::Client client(host);
  client.set_connection_timeout(cfg_.timeout);
  client.set_read_timeout(cfg_.timeout);
  httplib::Headers headers;
  if (const char* key = std::getenv(cfg_.api_key_env_var.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  auto res = client.Post(prefix + "/chat/completions", headers, make_request(cfg_, prompt).dump(), "application/json");
  if (!res) throw EndpointError("chat endpoint unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200) throw EndpointError("chat endpoint returned HTTP " + std::to_string(res->status));
  try {
    return nlohmann::json::parse(res->body).at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const std::exception& e) {
    throw EndpointError(std::string("malformed chat response: ") + e.what());
  }
}

std::string ReplayChatClient::complete(const std::string& question, const std::string&) {
  const auto path = dir_ / (question_key(question) + ".txt");
  if (!std::filesystem::exists(path)) throw EndpointError("no recorded completion for question (" + path.string() + ")");
  return read_file(path);
}

std::unique_ptr<ChatClient> make_chat_client(const ChatEndpointConfig& cfg) {
  if (cfg.mode == ChatEndpointConfig::Mode::Replay) return std::make_unique<ReplayChatClient>(cfg.replay_dir);
  return std::make_unique<HttpChatClient>(cfg);
}

std::string ask(const std::string& question, ChatClient& client, const PromptTemplate& tmpl) {
  return extract_last_code_block(client.complete(question, build_prompt(question, tmpl)));
}

std::string to_string(Category c) {
  switch (c) {
    case Category::None: return "none";
    case Category::Syntax: return "syntax";
    case Category::Reasoning: return "reasoning";
    case Category::Masks: return "masks";
    case Category::CadInterface: return "cad_interface";
  }
  return "?";
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::Correct: return "correct";
    case Outcome::Partial: return "partial";
    case Outcome::Wrong: return "wrong";
  }
  return "?";
}

Execution execute_program(const std::string& source, const CadModel& model, SegmentationProvider& provider,
                          const PipelineConfig& cfg, const query::EvalOptions& options) {
  Execution ex;
  ex.program = source;
  auto fail = [&](Category c, const std::exception& e) {
    ex.category = c;
    ex.error = e.what();
  };
  query::Program program;
  try {
    program = query::parse(source);
  } catch (const query::SyntaxError& e) {
    fail(Category::Syntax, e);
    return ex;
  } catch (const query::SemanticError& e) {
    fail(Category::Reasoning, e);
    return ex;
  }
  try {
    ex.answer = query::evaluate(program, model, provider, cfg, options);
  } catch (const query::CapabilityError& e) {
    fail(Category::CadInterface, e);
  } catch (const query::SyntaxError& e) {
    fail(Category::Syntax, e);
  } catch (const query::QueryError& e) {
    fail(Category::Reasoning, e);
  } catch (const ProviderUnavailable& e) {
    fail(Category::Masks, e);
  } catch (const std::exception& e) {
    fail(Category::Reasoning, e);
  }
  return ex;
}

Execution answer_question(const std::string& question, const CadModel& model, SegmentationProvider& provider,
                          ChatClient& client, const PipelineConfig& cfg, const PromptTemplate& tmpl,
                          const query::EvalOptions& options) {
  std::string source;
  try {
    source = ask(question, client, tmpl);
  } catch (const std::exception& e) {
    // No program came back (prose only, or no completion at all).
    Execution ex;
    ex.category = Category::Syntax;
    ex.error = e.what();
    return ex;
  }
  return execute_program(source, model, provider, cfg, options);
}

void from_json(const nlohmann::json& j, Expected& e) {
  const auto type = j.at("type").get<std::string>();
  e.tolerance = j.value("tolerance", 0.0);
  if (e.tolerance < 0.0) throw std::invalid_argument("tolerance must be non-negative");
  e.unit.reset();
  if (j.contains("unit") && !j.at("unit").is_null()) {
    const auto u = j.at("unit").get<std::string>();
    if (u == "mm") e.unit = query::Unit::Millimeter;
    else if (u == "m") e.unit = query::Unit::Meter;
    else throw std::invalid_argument("unit must be mm or m, got '" + u + "'");
  }
  auto point = [](const nlohmann::json& v) {
    if (!v.is_array() || v.size() != 3) throw std::invalid_argument("a point has three coordinates");
    return Vec3{v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
  };
  if (type == "number") {
    e.kind = Expected::Kind::Number;
    e.number = j.at("value").get<double>();
  } else if (type == "count") {
    e.kind = Expected::Kind::Count;
    e.number = j.at("value").get<double>();
    if (e.number < 0 || e.number != std::floor(e.number)) throw std::invalid_argument("count must be a non-negative integer");
  } else if (type == "point") {
    e.kind = Expected::Kind::Point;
    e.point = point(j.at("value"));
  } else if (type == "list") {
    e.kind = Expected::Kind::List;
    e.items.clear();
    for (const auto& item : j.at("values")) {
      if (item.is_number()) {
        e.items.push_back({item.get<double>()});
      } else {
        const Vec3 p = point(item);
        e.items.push_back({p.x, p.y, p.z});
      }
    }
  } else {
    throw std::invalid_argument("expected type must be number, point, list or count, got '" + type + "'");
  }
}

void to_json(nlohmann::json& j, const Expected& e) {
  switch (e.kind) {
    case Expected::Kind::Number: j = {{"type", "number"}, {"value", e.number}}; break;
    case Expected::Kind::Count: j = {{"type", "count"}, {"value", e.number}}; break;
    case Expected::Kind::Point: j = {{"type", "point"}, {"value", {e.point.x, e.point.y, e.point.z}}}; break;
    case Expected::Kind::List: {
      nlohmann::json values = nlohmann::json::array();
      for (const auto& item : e.items) values.push_back(item.size() == 1 ? nlohmann::json(item[0]) : nlohmann::json(item));
      j = {{"type", "list"}, {"values", values}};
      break;
    }
  }
  if (e.kind != Expected::Kind::Count) j["tolerance"] = e.tolerance;
  if (e.unit) j["unit"] = query::to_string(*e.unit);
}

namespace {

// Coordinates of a numeric answer item, or nullopt when the unit does not match the question's.
std::optional<std::vector<double>> coordinates(const query::Value& v, const Expected& expected, std::string& note) {
  auto unit_ok = [&](query::Unit u) {
    if (expected.unit && u != query::Unit::None && u != *expected.unit) {
      note = "answer is in " + query::to_string(u) + ", question asks for " + query::to_string(*expected.unit);
      return false;
    }
    return true;
  };
  if (auto* n = std::get_if<query::Number>(&v.data)) {
    if (!unit_ok(n->unit)) return std::nullopt;
    return std::vector<double>{n->value};
  }
  if (auto* p = std::get_if<query::Vector3>(&v.data)) {
    if (!unit_ok(p->unit)) return std::nullopt;
    return std::vector<double>{p->value.x, p->value.y, p->value.z};
  }
  note = "cannot compare a " + v.kind() + " with the expected value";
  return std::nullopt;
}

bool within(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(std::abs(a[i] - b[i]) <= tol)) return false;
  }
  return true;
}

}  // namespace

Score score_answer(const query::Value& answer, const Expected& expected) {
  Score s;
  switch (expected.kind) {
    case Expected::Kind::Count: {
      const auto* n = std::get_if<query::Number>(&answer.data);
      if (!n || n->unit != query::Unit::None) {
        s.note = "expected a count, got " + answer.kind();
        return s;
      }
      s.outcome = n->value == expected.number ? Outcome::Correct : Outcome::Wrong;
      return s;
    }
    case Expected::Kind::Number:
    case Expected::Kind::Point: {
      auto got = coordinates(answer, expected, s.note);
      if (!got) return s;
      const std::vector<double> want = expected.kind == Expected::Kind::Number
                                           ? std::vector<double>{expected.number}
                                           : std::vector<double>{expected.point.x, expected.point.y, expected.point.z};
      if (got->size() != want.size()) {
        s.note = "expected a " + std::string(want.size() == 1 ? "number" : "point") + ", got " + answer.kind();
        return s;
      }
      s.outcome = within(*got, want, expected.tolerance) ? Outcome::Correct : Outcome::Wrong;
      return s;
    }
    case Expected::Kind::List: {
      query::ValueList single;
      const query::ValueList* items = nullptr;
      if (auto* l = std::get_if<query::ListValue>(&answer.data)) {
        items = l->items.get();
      } else {
        single.push_back(answer);
        items = &single;
      }
      std::vector<bool> used(expected.items.size(), false);
      std::size_t matched = 0;
      for (const auto& item : *items) {
        auto got = coordinates(item, expected, s.note);
        if (!got) continue;
        for (std::size_t k = 0; k < expected.items.size(); ++k) {
          if (!used[k] && within(*got, expected.items[k], expected.tolerance)) {
            used[k] = true;
            ++matched;
            break;
          }
        }
      }
      if (matched == expected.items.size() && matched == items->size()) {
        s.outcome = Outcome::Correct;
      } else if (matched > 0) {
        s.outcome = Outcome::Partial;
        s.note = std::to_string(matched) + " of " + std::to_string(expected.items.size()) + " expected items matched, " +
                 std::to_string(items->size()) + " answered";
      } else if (s.note.empty()) {
        s.note = "no answered item matches";
      }
      return s;
    }
  }
  return s;
}

std::vector<BenchQuestion> load_suite(const std::filesystem::path& suite_file) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(suite_file));
  } catch (const std::exception& e) {
    throw SuiteError("cannot read suite " + suite_file.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw SuiteError("suite must be a JSON array of questions");
  const auto base = suite_file.parent_path();
  std::vector<BenchQuestion> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    try {
      const auto& q = doc[i];
      BenchQuestion b;
      b.id = q.at("id").get<std::string>();
      b.model_path = base / q.at("model").get<std::string>();
      b.question = q.at("question").get<std::string>();
      b.expected = q.at("expected").get<Expected>();
      if (q.contains("program") && !q.at("program").is_null()) b.reference_program = base / q.at("program").get<std::string>();
      out.push_back(std::move(b));
    } catch (const std::exception& e) {
      throw SuiteError("question " + std::to_string(i) + " is malformed: " + e.what());
    }
  }
  return out;
}

BenchMode parse_bench_mode(const std::string& text) {
  if (text == "golden") return BenchMode::Golden;
  if (text == "replay") return BenchMode::Replay;
  if (text == "live") return BenchMode::Live;
  throw std::invalid_argument("mode must be golden, replay or live, got '" + text + "'");
}

std::string to_string(BenchMode mode) {
  switch (mode) {
    case BenchMode::Golden: return "golden";
    case BenchMode::Replay: return "replay";
    case BenchMode::Live: return "live";
  }
  return "?";
}

BenchReport run_benchmark(const std::vector<BenchQuestion>& suite, const BenchOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  options.cfg.validate();
  if (options.mode != BenchMode::Golden && !options.chat) throw SuiteError("replay and live modes need a chat client");

  // Precheck: everything resolvable before the first question runs.
  std::map<std::filesystem::path, std::unique_ptr<CadModel>> models;
  std::vector<std::string> programs(suite.size());
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const auto& q = suite[i];
    if (!models.count(q.model_path)) {
      try {
        models.emplace(q.model_path, std::make_unique<CadModel>(load_model(q.model_path)));
      } catch (const std::exception& e) {
        throw SuiteError("question " + q.id + ": cannot load model: " + e.what());
      }
    }
    if (options.mode == BenchMode::Golden) {
      if (!q.reference_program) throw SuiteError("question " + q.id + " has no reference program");
      try {
        programs[i] = read_file(*q.reference_program);
      } catch (const std::exception& e) {
        throw SuiteError("question " + q.id + ": " + e.what());
      }
    }
  }

  // One render cache per model; renders are pure functions of model, view and resolution.
  std::map<std::filesystem::path, std::unique_ptr<SceneViews>> views;
  for (const auto& [path, model] : models) {
    views.emplace(path, std::make_unique<SceneViews>(*model, options.cfg.render_width, options.cfg.render_height));
  }

  BenchReport report;
  report.rows.resize(suite.size());
  std::mutex chat_mutex;
  auto run_one = [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& q = suite[i];
    auto& row = report.rows[i];
    row.id = q.id;
    try {
      const CadModel& model = *models.at(q.model_path);
      auto provider = options.provider ? options.provider(model) : std::make_unique<OracleProvider>(model);
      query::EvalOptions eval;
      eval.budget = options.question_budget;
      eval.views = views.at(q.model_path).get();
      Execution ex;
      if (options.mode == BenchMode::Golden) {
        ex = execute_program(programs[i], model, *provider, options.cfg, eval);
      } else {
        std::string source;
        try {
          std::lock_guard lock(chat_mutex);
          source = ask(q.question, *options.chat, options.tmpl);
        } catch (const std::exception& e) {
          ex.category = Category::Syntax;
          ex.error = e.what();
        }
        if (ex.error.empty()) ex = execute_program(source, model, *provider, options.cfg, eval);
      }
      if (!ex.answer) {
        row.outcome = Outcome::Wrong;
        row.category = ex.category;
        row.note = ex.error;
      } else {
        row.answer = ex.answer->value.summary();
        const Score s = score_answer(ex.answer->value, q.expected);
        row.outcome = s.outcome;
        row.note = s.note;
        // The program ran; a wrong or partial answer is attributed to segmentation.
        row.category = s.outcome == Outcome::Correct ? Category::None : Category::Masks;
      }
    } catch (const std::exception& e) {
      row.outcome = Outcome::Wrong;
      row.category = Category::Reasoning;
      row.note = e.what();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(suite.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < suite.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < suite.size();) run_one(i);
      });
    }
  }

  for (const auto& row : report.rows) {
    auto& t = report.totals;
    (row.outcome == Outcome::Correct ? t.correct : row.outcome == Outcome::Partial ? t.partial : t.wrong)++;
    switch (row.category) {
      case Category::Syntax: ++t.syntax; break;
      case Category::Reasoning: ++t.reasoning; break;
      case Category::Masks: ++t.masks; break;
      case Category::CadInterface: ++t.cad_interface; break;
      case Category::None: break;
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

nlohmann::json report_json(const BenchReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  nlohmann::json per_question = nlohmann::json::object();
  for (const auto& r : report.rows) {
    rows.push_back({{"id", r.id},
                    {"outcome", to_string(r.outcome)},
                    {"category", to_string(r.category)},
                    {"answer", r.answer},
                    {"note", r.note}});
    per_question[r.id] = r.seconds;
  }
  const auto& t = report.totals;
  return {{"rows", rows},
          {"totals",
           {{"questions", report.rows.size()},
            {"correct", t.correct},
            {"partial", t.partial},
            {"wrong", t.wrong},
            {"syntax", t.syntax},
            {"reasoning", t.reasoning},
            {"masks", t.masks},
            {"cad_interface", t.cad_interface}}},
          {"timing", {{"total_seconds", report.seconds}, {"per_question_seconds", per_question}}}};
}

std::string report_table(const BenchReport& report) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %-8s %-13s %s\n", "id", "outcome", "category", "answer");
  out << line;
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof line, "%-12s %-8s %-13s ", r.id.c_str(), to_string(r.outcome).c_str(),
                  r.category == Category::None ? "-" : to_string(r.category).c_str());
    out << line << (r.answer.empty() ? r.note : r.answer) << "\n";
  }
  const auto& t = report.totals;
  const int n = static_cast<int>(report.rows.size());
  out << "\n";
  const std::pair<const char*, int> summary[] = {{"Correct", t.correct},     {"Partial", t.partial},
                                                 {"Wrong", t.wrong},         {"  Syntax", t.syntax},
                                                 {"  Reasoning", t.reasoning}, {"  Masks", t.masks},
                                                 {"  CAD-Interface", t.cad_interface}};
  for (const auto& [label, count] : summary) {
    std::snprintf(line, sizeof line, "%-16s %4d / %d\n", label, count, n);
    out << line;
  }
  std::snprintf(line, sizeof line, "\nelapsed %.2f s\n", report.seconds);
  out << line;
  return out.str();
}

}  // namespace cadq::qa
