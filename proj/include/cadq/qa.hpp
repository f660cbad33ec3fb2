#pragma once

#include <array>
#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cadq/query.hpp"

namespace cadq::qa {

struct EndpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoCodeBlock : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SuiteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InContextExample {
  std::string question;
  std::string reasoning;
  std::string program;
};

struct PromptTemplate {
  std::string api_documentation;
  std::array<InContextExample, 3> examples;
  std::string instructions;

  /// Throws std::invalid_argument when a section is empty or an example program does not parse.
  void validate() const;
};

const PromptTemplate& default_template();

/// Deterministic; the question appears verbatim exactly once, after the examples.
std::string build_prompt(const std::string& question, const PromptTemplate& tmpl);

/// Content of the last complete ``` fenced block. Throws NoCodeBlock.
std::string extract_last_code_block(const std::string& completion);

/// FNV-1a 64 of the question text, 16 lowercase hex digits. Names replay files.
std::string question_key(const std::string& question);

struct ChatEndpointConfig {
  enum class Mode { Live, Replay };
  std::string base_url = "http://127.0.0.1:8000/v1";
  std::string model_name = "gpt-4o";
  std::string api_key_env_var = "CADQUERY_LLM_KEY";
  double temperature = 0.0;
  int max_tokens = 2048;
  Mode mode = Mode::Replay;
  std::filesystem::path replay_dir;
  std::chrono::seconds timeout{120};
};

void from_json(const nlohmann::json& j, ChatEndpointConfig& cfg);

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  /// Completion text for a rendered prompt. Throws EndpointError.
  virtual std::string complete(const std::string& question, const std::string& prompt) = 0;
};

/// POST {base_url}/chat/completions with a messages array; reads choices[0].message.content.
class HttpChatClient final : public ChatClient {
 public:
  explicit HttpChatClient(ChatEndpointConfig cfg) : cfg_(std::move(cfg)) {}
  std::string complete(const std::string& question, const std::string& prompt) override;
  static nlohmann::json make_request(const ChatEndpointConfig& cfg, const std::string& prompt);

 private:
  ChatEndpointConfig cfg_;
};

/// Recorded completions at {dir}/{question_key(question)}.txt. Never touches the network.
class ReplayChatClient final : public ChatClient {
 public:
  explicit ReplayChatClient(std::filesystem::path dir) : dir_(std::move(dir)) {}
  std::string complete(const std::string& question, const std::string& prompt) override;

 private:
  std::filesystem::path dir_;
};

std::unique_ptr<ChatClient> make_chat_client(const ChatEndpointConfig& cfg);

std::string ask(const std::string& question, ChatClient& client, const PromptTemplate& tmpl = default_template());

enum class Category { None, Syntax, Reasoning, Masks, CadInterface };
enum class Outcome { Correct, Partial, Wrong };
std::string to_string(Category c);
std::string to_string(Outcome o);

struct Execution {
  std::optional<query::Answer> answer;  // empty on failure
  Category category = Category::None;   // failure stage; None when the program ran
  std::string error;
  std::string program;
};

/// Parse and evaluate; failures are mapped to categories, never thrown.
Execution execute_program(const std::string& source, const CadModel& model, SegmentationProvider& provider,
                          const PipelineConfig& cfg, const query::EvalOptions& options = {});

/// ask -> parse -> evaluate.
Execution answer_question(const std::string& question, const CadModel& model, SegmentationProvider& provider,
                          ChatClient& client, const PipelineConfig& cfg, const PromptTemplate& tmpl = default_template(),
                          const query::EvalOptions& options = {});

struct Expected {
  enum class Kind { Number, Point, List, Count };
  Kind kind = Kind::Number;
  double number = 0.0;
  Vec3 point;
  std::vector<std::vector<double>> items;  // List: each item is a number (size 1) or a point (size 3)
  double tolerance = 0.0;
  std::optional<query::Unit> unit;  // lengths: the unit the question asks for
};

void from_json(const nlohmann::json& j, Expected& e);
void to_json(nlohmann::json& j, const Expected& e);

struct Score {
  Outcome outcome = Outcome::Wrong;
  std::string note;
};

Score score_answer(const query::Value& answer, const Expected& expected);

struct BenchQuestion {
  std::string id;
  std::filesystem::path model_path;
  std::string question;
  Expected expected;
  std::optional<std::filesystem::path> reference_program;
};

/// Reads a JSON array of questions; relative paths resolve against the suite's directory.
std::vector<BenchQuestion> load_suite(const std::filesystem::path& suite_file);

enum class BenchMode { Golden, Replay, Live };
BenchMode parse_bench_mode(const std::string& text);
std::string to_string(BenchMode mode);

using ProviderFactory = std::function<std::unique_ptr<SegmentationProvider>(const CadModel&)>;

struct BenchOptions {
  BenchMode mode = BenchMode::Golden;
  ProviderFactory provider;  // default: oracle
  PipelineConfig cfg;
  ChatClient* chat = nullptr;  // replay and live modes
  PromptTemplate tmpl = default_template();
  std::chrono::milliseconds question_budget{120'000};
  unsigned workers = 1;
};

struct BenchRow {
  std::string id;
  Outcome outcome = Outcome::Wrong;
  Category category = Category::None;
  std::string answer;  // value summary, empty on failure
  std::string note;
  double seconds = 0.0;
};

struct BenchTotals {
  int correct = 0, partial = 0, wrong = 0;
  int syntax = 0, reasoning = 0, masks = 0, cad_interface = 0;
  bool operator==(const BenchTotals&) const = default;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  BenchTotals totals;
  double seconds = 0.0;
};

/// Every model is loaded and, in golden mode, every reference program read before any question runs;
/// a missing file raises SuiteError. Per-question failures become rows.
BenchReport run_benchmark(const std::vector<BenchQuestion>& suite, const BenchOptions& options);

/// Rows and totals; timing lives under a separate "timing" key so reports compare across runs.
nlohmann::json report_json(const BenchReport& report);
std::string report_table(const BenchReport& report);

}  // namespace cadq::qa
