#include <doctest.h>

#include <charconv>
#include <fstream>
#include <sstream>

#include "cadq/providers.hpp"
#include "cadq/query.hpp"
#include "support/support.hpp"

using namespace cadq;
using namespace cadq::query;
using testing::model_of;

namespace {

PipelineConfig small_config() {
  PipelineConfig cfg;
  cfg.render_width = 480;
  cfg.render_height = 270;
  return cfg;
}

Value run(const std::string& source, const CadModel& model, EvalOptions options = {}) {
  OracleProvider oracle(model);
  return evaluate(parse(source), model, oracle, small_config(), options).value;
}

double number(const Value& v) { return std::get<Number>(v.data).value; }
Unit unit(const Value& v) { return std::get<Number>(v.data).unit; }

std::string shortest(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, r.ptr};
}

/// Forwards to the oracle and counts calls.
class CountingProvider final : public SegmentationProvider {
 public:
  explicit CountingProvider(const CadModel& model) : inner_(model) {}
  std::vector<ScoredMask> segment(const ImageView& image, const std::string& prompt, double box_threshold) override {
    ++calls;
    return inner_.segment(image, prompt, box_threshold);
  }
  int calls = 0;

 private:
  OracleProvider inner_;
};

/// syscr + syscw from /proc/self/io: read and write syscalls issued by this process.
long long io_syscalls() {
  std::ifstream in("/proc/self/io");
  std::string key;
  long long value = 0, total = 0;
  while (in >> key >> value) {
    if (key == "syscr:" || key == "syscw:") total += value;
  }
  return total;
}

}  // namespace

TEST_CASE("parse the two-statement example") {
  const auto p = parse("let holes = search(\"hole\");\nsolution = count(holes);\n");
  REQUIRE(p.statements.size() == 2);
  CHECK(p.statements[0].is_let);
  CHECK(p.statements[0].name == "holes");
  CHECK_FALSE(p.statements[1].is_let);
  const auto& call = std::get<Call>(p.statements[1].value->node);
  CHECK(call.callee == "count");
  REQUIRE(call.args.size() == 1);
  CHECK(std::get<Identifier>(call.args[0].value->node).name == "holes");
}

TEST_CASE("syntax errors carry a position") {
  try {
    parse("let a = 1;\nsolution = ;");
    FAIL("expected a syntax error");
  } catch (const SyntaxError& e) {
    CHECK(e.span.line == 2);
    CHECK(e.span.column == 12);
  }
  CHECK_THROWS_AS(parse("solution = 1"), SyntaxError);
  CHECK_THROWS_AS(parse("solution = (1 + 2;"), SyntaxError);
  CHECK_THROWS_AS(parse("solution = 1 < 2 < 3;"), SyntaxError);
  CHECK_THROWS_AS(parse("solution = \"open;"), SyntaxError);
  CHECK_THROWS_AS(parse("solution = count(p -> p);"), SyntaxError);
  CHECK_THROWS_AS(parse("let = 3; solution = 1;"), SyntaxError);
}

TEST_CASE("semantic errors") {
  CHECK_THROWS_AS(parse("let a = 1;"), SemanticError);
  CHECK_THROWS_AS(parse("solution = 1; solution = 2;"), SemanticError);
  CHECK_THROWS_AS(parse("solution = b;"), SemanticError);
  CHECK_THROWS_AS(parse("let a = a; solution = a;"), SemanticError);
  // Lambda parameters are scoped to the body.
  CHECK_THROWS_AS(parse("let xs = filter(search(\"hole\"), p -> p.radius < 6); solution = p;"), SemanticError);
  CHECK_NOTHROW(parse("solution = search(\"hole\", sides=[top, bottom]);"));
}

TEST_CASE("printing is a fixed point of parsing") {
  const std::vector<std::string> programs = {
      "let holes = search(\"hole\");\nsolution = count(holes);",
      "let small = filter(search(\"hole\"), p -> p.radius < mm(6) and not (p.depth >= 2));\n"
      "solution = map(small, p -> p.center);",
      "solution = sort_by(search(\"slot\", sides=[top]), h -> -distance(h.center, point(0, 0, 0)));",
      "# comment\nlet a = [1, 2.5, -3e-2, \"q\\\"uote\"];  // more\nsolution = a.count * 2 - 1 / 4 == 7 or false;",
  };
  for (const auto& src : programs) {
    CAPTURE(src);
    const auto once = print(parse(src));
    CHECK(print(parse(once)) == once);
  }
}

TEST_CASE("count, filter and min on the four-hole plate") {
  const auto model = model_of(fixtures::plate_with_holes());
  CHECK(number(run("let holes = search(\"hole\");\nsolution = count(holes);", model)) == 4);
  CHECK(unit(run("solution = count(search(\"hole\"));", model)) == Unit::None);

  const auto radii = run("solution = map(filter(search(\"holes\"), p -> p.radius < 6), p -> p.radius);", model);
  const auto& items = *std::get<ListValue>(radii.data).items;
  REQUIRE(items.size() == 4);
  for (const auto& r : items) {
    CHECK(number(r) == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(unit(r) == Unit::Millimeter);
  }
  const auto smallest = run("solution = min(map(search(\"hole\"), p -> p.radius));", model);
  CHECK(number(smallest) == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(number(run("solution = count(filter(search(\"hole\"), p -> p.radius > 6));", model)) == 0);
}

TEST_CASE("mixed plate: radii and sides") {
  const auto fx = fixtures::plate_mixed_holes();
  const auto model = model_of(fx);
  double expected_max = 0;
  int below_six = 0;
  for (const auto& f : fx.manifest.features) {
    if (f.kind == fixtures::CellKind::Boss) continue;
    expected_max = std::max(expected_max, 2 * f.radius);
    below_six += f.radius < 6;
  }
  CHECK(number(run("solution = max(map(search(\"hole\"), h -> h.diameter));", model)) ==
        doctest::Approx(expected_max).epsilon(1e-9));
  CHECK(number(run("solution = count(filter(search(\"hole\"), h -> h.radius < mm(6)));", model)) == below_six);
}

TEST_CASE("capability and property errors") {
  const auto model = model_of(fixtures::unit_cube());
  CHECK_THROWS_AS(run("solution = normal(model());", model), CapabilityError);
  CHECK_THROWS_AS(run("solution = frobnicate(1);", model), CapabilityError);
  CHECK_THROWS_AS(run("solution = model().axis;", model), CapabilityError);
  CHECK_THROWS_AS(run("solution = radius(model());", model), CapabilityError);
  CHECK_THROWS_AS(run("solution = model().foo;", model), UnknownProperty);
  CHECK_THROWS_AS(run("solution = (1).x;", model), UnknownProperty);
}

TEST_CASE("type errors") {
  const auto model = model_of(fixtures::unit_cube());
  CHECK_THROWS_AS(run("solution = mm(1) + m(1);", model), TypeError);
  CHECK_THROWS_AS(run("solution = mm(2) * mm(3);", model), TypeError);
  CHECK_THROWS_AS(run("solution = 1 / mm(3);", model), TypeError);
  CHECK_THROWS_AS(run("solution = 1 / 0;", model), TypeError);
  CHECK_THROWS_AS(run("solution = min([]);", model), TypeError);
  CHECK_THROWS_AS(run("solution = count(3);", model), TypeError);
  CHECK_THROWS_AS(run("solution = \"a\" + 1;", model), TypeError);
  CHECK_THROWS_AS(run("solution = search(\"hole\", sides=[\"up\"]);", model), TypeError);
  CHECK_THROWS_AS(run("solution = 1 and true;", model), TypeError);
}

TEST_CASE("unit arithmetic") {
  const auto model = model_of(fixtures::unit_cube());
  const auto ten = run("solution = mm(m(0.005)) + 5;", model);
  CHECK(number(ten) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(unit(ten) == Unit::Millimeter);

  const auto ratio = run("solution = mm(6) / mm(3);", model);
  CHECK(number(ratio) == 2);
  CHECK(unit(ratio) == Unit::None);

  const auto metres = run("solution = m(mm(250));", model);
  CHECK(number(metres) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(unit(metres) == Unit::Meter);

  CHECK(std::get<bool>(run("solution = m(0.002) < mm(3);", model).data));
  CHECK(std::get<bool>(run("solution = mm(3) != m(0.002);", model).data));
}

TEST_CASE("unit soundness: m(x) equals mm(1000 x) for random x") {
  const auto model = model_of(fixtures::unit_cube());
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> mag(-6.0, 4.0);
  for (int i = 0; i < 200; ++i) {
    const double x = std::pow(10.0, mag(rng)) * (i % 3 == 0 ? -1 : 1);
    const std::string src = "solution = m(" + shortest(x) + ") == mm(" + shortest(x * 1000.0) + ");";
    CAPTURE(src);
    CHECK(std::get<bool>(run(src, model).data));
    const auto converted = run("solution = mm(m(" + shortest(x) + "));", model);
    CHECK(number(converted) == x * 1000.0);
  }
}

TEST_CASE("evaluation is deterministic and traced") {
  const auto model = model_of(fixtures::plate_mixed_holes());
  const auto program = parse("let hs = search(\"hole\", sides=[top]);\nsolution = sort_by(hs, h -> h.radius);");
  OracleProvider oracle(model);
  const auto a = evaluate(program, model, oracle, small_config());
  const auto b = evaluate(program, model, oracle, small_config());
  CHECK(a.value == b.value);
  CHECK(to_json(a).dump() == to_json(b).dump());
  REQUIRE_FALSE(a.trace.empty());
  CHECK(a.trace.front().call == "search");
  CHECK(a.trace.back().call == "solution");
}

TEST_CASE("search results are memoised within one evaluation") {
  const auto model = model_of(fixtures::plate_with_holes());
  CountingProvider provider(model);
  const auto cfg = small_config();
  evaluate(parse("let a = search(\"hole\"); let b = search(\"hole\"); solution = count(a) + count(b);"), model,
           provider, cfg);
  CHECK(provider.calls == static_cast<int>(cfg.views().size()));
}

TEST_CASE("budget exhaustion raises a timeout") {
  const auto model = model_of(fixtures::plate_with_holes());
  EvalOptions options;
  options.budget = std::chrono::milliseconds(0);
  CHECK_THROWS_AS(run("solution = count(search(\"hole\"));", model, options), EvaluationTimeout);
}

TEST_CASE("evaluation performs no file or socket I/O beyond the provider") {
  const auto model = model_of(fixtures::plate_with_holes());
  const auto cfg = small_config();
  SceneViews views(model, cfg.render_width, cfg.render_height);
  OracleProvider oracle(model);
  EvalOptions options;
  options.views = &views;
  const auto program = parse("solution = map(search(\"hole\"), h -> h.center);");

  // One-time process setup (the renderer's core-count probe) is not part of any evaluation.
  render(model_of(fixtures::unit_cube()), camera_for_view(model, cfg.side_view(Side::Top), 8, 8));

  // Baseline: the cost of probing the counter itself.
  const long long p0 = io_syscalls();
  const long long p1 = io_syscalls();
  const long long probe = p1 - p0;

  const long long before = io_syscalls();
  evaluate(program, model, oracle, cfg, options);
  const long long after = io_syscalls();
  CHECK(after - before == probe);
}
