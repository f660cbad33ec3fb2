#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>

#include "cadq/metrics.hpp"
#include "cadq/query.hpp"

namespace cadq::query {

std::string to_string(Unit unit) {
  switch (unit) {
    case Unit::None: return "";
    case Unit::Millimeter: return "mm";
    case Unit::Meter: return "m";
  }
  return "";
}

double millimeters_per(Unit unit) { return unit == Unit::Meter ? 1000.0 : 1.0; }

bool ListValue::operator==(const ListValue& o) const { return *items == *o.items; }

Value make_list(ValueList items) { return Value{ListValue{std::make_shared<const ValueList>(std::move(items))}}; }

namespace {

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string with_unit(const std::string& text, Unit unit) { return unit == Unit::None ? text : text + " " + to_string(unit); }

}  // namespace

std::string Value::kind() const {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Absent>) return "absent";
        else if constexpr (std::is_same_v<T, Number>) return v.unit == Unit::None ? "number" : "length";
        else if constexpr (std::is_same_v<T, Vector3>) return v.is_point ? "point" : "vector";
        else if constexpr (std::is_same_v<T, PartValue>) return "part";
        else if constexpr (std::is_same_v<T, ListValue>) return "list";
        else if constexpr (std::is_same_v<T, bool>) return "boolean";
        else if constexpr (std::is_same_v<T, std::string>) return "string";
        else return "side";
      },
      data);
}

std::string Value::summary() const {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Absent>) {
          return "absent";
        } else if constexpr (std::is_same_v<T, Number>) {
          return with_unit(fmt(v.value), v.unit);
        } else if constexpr (std::is_same_v<T, Vector3>) {
          return with_unit("(" + fmt(v.value.x) + ", " + fmt(v.value.y) + ", " + fmt(v.value.z) + ")", v.unit);
        } else if constexpr (std::is_same_v<T, PartValue>) {
          std::string out = "part[";
          for (std::size_t i = 0; i < v.part->face_ids.size(); ++i) out += (i ? "," : "") + std::to_string(v.part->face_ids[i]);
          return out + "]";
        } else if constexpr (std::is_same_v<T, ListValue>) {
          constexpr std::size_t kShown = 8;
          std::string out = "[";
          for (std::size_t i = 0; i < v.items->size() && i < kShown; ++i) out += (i ? ", " : "") + (*v.items)[i].summary();
          if (v.items->size() > kShown) out += ", ... (" + std::to_string(v.items->size()) + " items)";
          return out + "]";
        } else if constexpr (std::is_same_v<T, bool>) {
          return v ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::string>) {
          return "\"" + v + "\"";
        } else {
          return to_string(v.side);
        }
      },
      data);
}

nlohmann::json to_json(const Value& value) {
  using nlohmann::json;
  return std::visit(
      [&](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        auto unit = [](Unit u) { return u == Unit::None ? json(nullptr) : json(to_string(u)); };
        if constexpr (std::is_same_v<T, Absent>) {
          return {{"kind", "absent"}};
        } else if constexpr (std::is_same_v<T, Number>) {
          return {{"kind", "number"}, {"value", v.value}, {"unit", unit(v.unit)}};
        } else if constexpr (std::is_same_v<T, Vector3>) {
          return {{"kind", v.is_point ? "point" : "vector"}, {"value", {v.value.x, v.value.y, v.value.z}}, {"unit", unit(v.unit)}};
        } else if constexpr (std::is_same_v<T, PartValue>) {
          return {{"kind", "part"}, {"face_ids", v.part->face_ids}};
        } else if constexpr (std::is_same_v<T, ListValue>) {
          json items = json::array();
          for (const auto& item : *v.items) items.push_back(to_json(item));
          return {{"kind", "list"}, {"items", items}};
        } else if constexpr (std::is_same_v<T, bool>) {
          return {{"kind", "boolean"}, {"value", v}};
        } else if constexpr (std::is_same_v<T, std::string>) {
          return {{"kind", "string"}, {"value", v}};
        } else {
          return {{"kind", "side"}, {"value", to_string(v.side)}};
        }
      },
      value.data);
}

nlohmann::json to_json(const Answer& answer) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& t : answer.trace) trace.push_back({{"call", t.call}, {"arguments", t.arguments}, {"result", t.result}});
  return {{"value", to_json(answer.value)}, {"summary", answer.value.summary()}, {"trace", trace}};
}

const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names = {
      "search", "count",  "filter", "map",    "min",          "max",   "abs",   "sort_by", "center", "extents",
      "radius", "diameter", "depth", "axis",  "mm",           "m",     "distance", "half_extents", "model", "first",
      "last",   "sum",    "point",  "x",      "y",            "z",
  };
  return names;
}

namespace {

// Names a question might plausibly need but the CAD interface cannot answer.
const std::set<std::string> kUnsupported = {
    "normal", "surface_normal", "face_normal", "local_extents", "local_frame", "volume", "area", "surface_area",
    "thickness", "angle", "curvature", "mass", "material", "thread_pitch", "tolerance", "chamfer_size", "fillet_radius",
};

const std::set<std::string> kPartProperties = {"center", "extents", "half_extents", "radius", "diameter", "depth", "axis"};

class Evaluator {
 public:
  Evaluator(const CadModel& model, SegmentationProvider& provider, const PipelineConfig& cfg, const EvalOptions& options)
      : model_(model),
        provider_(provider),
        cfg_(cfg),
        deadline_(std::chrono::steady_clock::now() + options.budget) {
    if (options.views) {
      views_ = options.views;
    } else {
      own_views_ = std::make_unique<SceneViews>(model, cfg.render_width, cfg.render_height);
      views_ = own_views_.get();
    }
  }

  Answer run(const Program& program) {
    Answer answer;
    trace_ = &answer.trace;
    for (const auto& s : program.statements) {
      tick(s.span);
      Value v = eval(*s.value);
      trace_->push_back({s.is_let ? "let " + s.name : "solution", "", v.summary()});
      if (s.is_let) {
        env_[s.name] = std::move(v);
      } else {
        answer.value = std::move(v);
      }
    }
    return answer;
  }

 private:
  void tick(SourceSpan span) const {
    if (std::chrono::steady_clock::now() > deadline_) throw EvaluationTimeout("evaluation exceeded its time budget", span);
  }

  Value eval(const Expr& e) {
    tick(e.span);
    return std::visit(
        [&](const auto& n) -> Value {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, NumberLit>) {
            return Value{Number{n.value, Unit::None}};
          } else if constexpr (std::is_same_v<T, StringLit>) {
            return Value{n.value};
          } else if constexpr (std::is_same_v<T, BoolLit>) {
            return Value{n.value};
          } else if constexpr (std::is_same_v<T, Identifier>) {
            if (auto it = env_.find(n.name); it != env_.end()) return it->second;
            if (auto side = parse_side(n.name)) return Value{SideValue{*side}};
            throw SemanticError("'" + n.name + "' is not defined", e.span);
          } else if constexpr (std::is_same_v<T, ListLit>) {
            ValueList items;
            for (const auto& item : n.items) items.push_back(eval(*item));
            return make_list(std::move(items));
          } else if constexpr (std::is_same_v<T, Lambda>) {
            throw TypeError("a lambda cannot be used as a value", e.span);
          } else if constexpr (std::is_same_v<T, Call>) {
            return call(n, e.span);
          } else if constexpr (std::is_same_v<T, Member>) {
            return member(eval(*n.object), n.name, e.span);
          } else if constexpr (std::is_same_v<T, Binary>) {
            return binary(n, e.span);
          } else {
            Value v = eval(*n.operand);
            if (n.op == UnaryOp::Not) return Value{as_bool(v, e.span)};
            if (auto* num = std::get_if<Number>(&v.data)) return Value{Number{-num->value, num->unit}};
            if (auto* vec = std::get_if<Vector3>(&v.data)) return Value{Vector3{-vec->value, vec->unit, vec->is_point}};
            throw TypeError("cannot negate a " + v.kind(), e.span);
          }
        },
        e.node);
  }

  // ---- value accessors ----

  static bool as_bool(const Value& v, SourceSpan span) {
    if (auto* b = std::get_if<bool>(&v.data)) return *b;
    throw TypeError("expected a boolean, got " + v.kind(), span);
  }
  static Number as_number(const Value& v, SourceSpan span, const char* what = "a number") {
    if (auto* n = std::get_if<Number>(&v.data)) return *n;
    throw TypeError(std::string("expected ") + what + ", got " + v.kind(), span);
  }
  static Vector3 as_vector(const Value& v, SourceSpan span) {
    if (auto* n = std::get_if<Vector3>(&v.data)) return *n;
    throw TypeError("expected a point or vector, got " + v.kind(), span);
  }
  static const ValueList& as_list(const Value& v, SourceSpan span) {
    if (auto* l = std::get_if<ListValue>(&v.data)) return *l->items;
    throw TypeError("expected a list, got " + v.kind(), span);
  }
  static const PartInstance& as_part(const Value& v, SourceSpan span) {
    if (auto* p = std::get_if<PartValue>(&v.data)) return *p->part;
    throw TypeError("expected a part, got " + v.kind(), span);
  }

  static Unit join_units(Unit a, Unit b, SourceSpan span) {
    if (a != Unit::None && b != Unit::None && a != b) {
      throw TypeError("mixed units " + to_string(a) + " and " + to_string(b) + "; convert explicitly with mm() or m()", span);
    }
    return a == Unit::None ? b : a;
  }

  // ---- operators ----

  Value binary(const Binary& n, SourceSpan span) {
    if (n.op == BinaryOp::And) return Value{as_bool(eval(*n.lhs), span) && as_bool(eval(*n.rhs), span)};
    if (n.op == BinaryOp::Or) return Value{as_bool(eval(*n.lhs), span) || as_bool(eval(*n.rhs), span)};
    const Value a = eval(*n.lhs);
    const Value b = eval(*n.rhs);
    switch (n.op) {
      case BinaryOp::Add:
      case BinaryOp::Sub:
      case BinaryOp::Mul:
      case BinaryOp::Div:
        return arithmetic(n.op, a, b, span);
      case BinaryOp::Eq: return Value{equal(a, b, span)};
      case BinaryOp::Ne: return Value{!equal(a, b, span)};
      default: break;
    }
    const Number x = as_number(a, span), y = as_number(b, span);
    double l = x.value, r = y.value;
    if (x.unit != Unit::None && y.unit != Unit::None && x.unit != y.unit) {
      l *= millimeters_per(x.unit);
      r *= millimeters_per(y.unit);
    }
    switch (n.op) {
      case BinaryOp::Lt: return Value{l < r};
      case BinaryOp::Le: return Value{l <= r};
      case BinaryOp::Gt: return Value{l > r};
      default: return Value{l >= r};
    }
  }

  static bool equal(const Value& a, const Value& b, SourceSpan span) {
    const auto* x = std::get_if<Number>(&a.data);
    const auto* y = std::get_if<Number>(&b.data);
    if (x && y) {
      if (x->unit != Unit::None && y->unit != Unit::None && x->unit != y->unit) {
        return x->value * millimeters_per(x->unit) == y->value * millimeters_per(y->unit);
      }
      return x->value == y->value;
    }
    const auto* u = std::get_if<Vector3>(&a.data);
    const auto* v = std::get_if<Vector3>(&b.data);
    if (u && v) {
      join_units(u->unit, v->unit, span);
      return u->value == v->value;
    }
    return a == b;
  }

  static Value arithmetic(BinaryOp op, const Value& a, const Value& b, SourceSpan span) {
    const auto* x = std::get_if<Number>(&a.data);
    const auto* y = std::get_if<Number>(&b.data);
    const auto* u = std::get_if<Vector3>(&a.data);
    const auto* v = std::get_if<Vector3>(&b.data);
    const char* sym = op == BinaryOp::Add ? "+" : op == BinaryOp::Sub ? "-" : op == BinaryOp::Mul ? "*" : "/";
    auto bad = [&]() -> Value { throw TypeError(std::string("operator ") + sym + " does not apply to " + a.kind() + " and " + b.kind(), span); };

    if (x && y) {
      switch (op) {
        case BinaryOp::Add: return Value{Number{x->value + y->value, join_units(x->unit, y->unit, span)}};
        case BinaryOp::Sub: return Value{Number{x->value - y->value, join_units(x->unit, y->unit, span)}};
        case BinaryOp::Mul:
          if (x->unit != Unit::None && y->unit != Unit::None) throw TypeError("product of two lengths is not supported", span);
          return Value{Number{x->value * y->value, join_units(x->unit, y->unit, span)}};
        default: {
          if (y->value == 0.0) throw TypeError("division by zero", span);
          Unit unit = Unit::None;
          if (y->unit == Unit::None) {
            unit = x->unit;
          } else if (x->unit == Unit::None) {
            throw TypeError("cannot divide a bare number by a length", span);
          } else {
            join_units(x->unit, y->unit, span);
          }
          return Value{Number{x->value / y->value, unit}};
        }
      }
    }
    if (u && v) {
      if (op == BinaryOp::Add && !(u->is_point && v->is_point)) {
        return Value{Vector3{u->value + v->value, join_units(u->unit, v->unit, span), u->is_point || v->is_point}};
      }
      if (op == BinaryOp::Sub && !(v->is_point && !u->is_point)) {
        return Value{Vector3{u->value - v->value, join_units(u->unit, v->unit, span), u->is_point && !v->is_point}};
      }
      return bad();
    }
    if (u && y && (op == BinaryOp::Mul || op == BinaryOp::Div) && y->unit == Unit::None && !u->is_point) {
      if (op == BinaryOp::Div && y->value == 0.0) throw TypeError("division by zero", span);
      return Value{Vector3{op == BinaryOp::Mul ? u->value * y->value : u->value / y->value, u->unit, false}};
    }
    if (x && v && op == BinaryOp::Mul && x->unit == Unit::None && !v->is_point) {
      return Value{Vector3{v->value * x->value, v->unit, false}};
    }
    return bad();
  }

  // ---- members and properties ----

  Value member(const Value& object, const std::string& name, SourceSpan span) {
    if (std::holds_alternative<PartValue>(object.data) && kPartProperties.count(name)) {
      return property(name, as_part(object, span), span);
    }
    if (auto* v = std::get_if<Vector3>(&object.data); v && (name == "x" || name == "y" || name == "z")) {
      return Value{Number{v->value[name == "x" ? 0 : name == "y" ? 1 : 2], v->unit}};
    }
    if (std::holds_alternative<ListValue>(object.data) && name == "count") {
      return Value{Number{static_cast<double>(as_list(object, span).size()), Unit::None}};
    }
    throw UnknownProperty(object.kind() + " has no property '" + name + "'", span);
  }

  const std::optional<CylinderFit>& cylinder(const PartInstance& part, SourceSpan span) {
    auto it = fits_.find(part.face_ids);
    if (it == fits_.end()) {
      std::optional<CylinderFit> fit;
      try {
        fit = fit_cylinder(model_, part);
      } catch (const TooFewVertices& e) {
        throw CapabilityError(std::string("cannot fit a cylinder: ") + e.what(), span);
      }
      it = fits_.emplace(part.face_ids, fit).first;
    }
    if (!it->second) throw CapabilityError("part is not cylindrical; radius, diameter, depth and axis are unavailable", span);
    return it->second;
  }

  Value property(const std::string& name, const PartInstance& part, SourceSpan span) {
    if (name == "center") return Value{Vector3{part_center(model_, part), Unit::Millimeter, true}};
    if (name == "extents") return Value{Vector3{part_extents(model_, part), Unit::Millimeter, false}};
    if (name == "half_extents") return Value{Vector3{part_extents(model_, part) * 0.5, Unit::Millimeter, false}};
    const auto& fit = cylinder(part, span);
    if (name == "radius") return Value{Number{fit->radius, Unit::Millimeter}};
    if (name == "diameter") return Value{Number{2.0 * fit->radius, Unit::Millimeter}};
    if (name == "depth") return Value{Number{fit->depth, Unit::Millimeter}};
    return Value{Vector3{fit->axis, Unit::None, false}};
  }

  // ---- calls ----

  Value apply(const Lambda& fn, const Value& arg) {
    auto saved = env_.find(fn.param) == env_.end() ? std::optional<Value>{} : std::optional<Value>{env_[fn.param]};
    env_[fn.param] = arg;
    Value out;
    try {
      out = eval(*fn.body);
    } catch (...) {
      if (saved) env_[fn.param] = *saved; else env_.erase(fn.param);
      throw;
    }
    if (saved) env_[fn.param] = *saved; else env_.erase(fn.param);
    return out;
  }

  static const Lambda& lambda_arg(const Call& c, SourceSpan span) {
    if (c.args.size() != 2 || !c.args[1].keyword.empty()) throw TypeError(c.callee + " expects (list, x -> expression)", span);
    if (auto* fn = std::get_if<Lambda>(&c.args[1].value->node)) return *fn;
    throw TypeError(c.callee + " expects a lambda as its second argument", span);
  }

  Value call(const Call& c, SourceSpan span) {
    const auto& name = c.callee;
    const auto& names = builtin_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      if (kUnsupported.count(name)) throw CapabilityError("the CAD interface does not provide '" + name + "'", span);
      throw CapabilityError("unknown function '" + name + "'", span);
    }

    if (name == "filter" || name == "map" || name == "sort_by") {
      const Lambda& fn = lambda_arg(c, span);
      const Value source = eval(*c.args[0].value);
      const auto& items = as_list(source, span);
      ValueList out;
      if (name == "filter") {
        for (const auto& item : items) {
          if (as_bool(apply(fn, item), fn.body->span)) out.push_back(item);
        }
      } else if (name == "map") {
        for (const auto& item : items) out.push_back(apply(fn, item));
      } else {
        std::vector<std::pair<double, std::size_t>> keys;
        Unit unit = Unit::None;
        for (std::size_t i = 0; i < items.size(); ++i) {
          const Number k = as_number(apply(fn, items[i]), fn.body->span, "a numeric sort key");
          unit = join_units(unit, k.unit, span);
          keys.push_back({k.value, i});
        }
        std::stable_sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [k, i] : keys) out.push_back(items[i]);
      }
      Value result = make_list(std::move(out));
      log(name, source.summary() + ", " + fn.param + " -> " + print(*fn.body), result);
      return result;
    }

    std::vector<Value> args;
    std::map<std::string, Value> kwargs;
    for (const auto& a : c.args) {
      if (a.keyword.empty()) {
        if (!kwargs.empty()) throw SyntaxError("positional argument after keyword argument", a.value->span);
        args.push_back(eval(*a.value));
      } else if (!kwargs.emplace(a.keyword, eval(*a.value)).second) {
        throw TypeError("keyword '" + a.keyword + "' given twice", a.value->span);
      }
    }
    if (name != "search" && !kwargs.empty()) throw TypeError(name + " takes no keyword arguments", span);

    Value result = dispatch(name, args, kwargs, span);
    std::string summary;
    for (std::size_t i = 0; i < args.size(); ++i) summary += (i ? ", " : "") + args[i].summary();
    for (const auto& [k, v] : kwargs) summary += (summary.empty() ? "" : ", ") + k + "=" + v.summary();
    log(name, summary, result);
    return result;
  }

  void log(const std::string& name, std::string arguments, const Value& result) {
    trace_->push_back({name, std::move(arguments), result.summary()});
  }

  static void arity(const std::string& name, const std::vector<Value>& args, std::size_t n, SourceSpan span) {
    if (args.size() != n) {
      throw TypeError(name + " expects " + std::to_string(n) + " argument" + (n == 1 ? "" : "s") + ", got " + std::to_string(args.size()), span);
    }
  }

  Value dispatch(const std::string& name, const std::vector<Value>& args, const std::map<std::string, Value>& kwargs, SourceSpan span) {
    if (name == "search") return search(args, kwargs, span);
    if (name == "model") {
      arity(name, args, 0, span);
      auto whole = std::make_shared<PartInstance>();
      whole->face_ids = model_.all_face_ids();
      return Value{PartValue{whole}};
    }
    if (kPartProperties.count(name)) {
      arity(name, args, 1, span);
      return property(name, as_part(args[0], span), span);
    }
    if (name == "count") {
      arity(name, args, 1, span);
      return Value{Number{static_cast<double>(as_list(args[0], span).size()), Unit::None}};
    }
    if (name == "min" || name == "max" || name == "sum") {
      const ValueList& items = args.size() == 1 && std::holds_alternative<ListValue>(args[0].data) ? as_list(args[0], span) : args;
      if (items.empty()) {
        if (name == "sum") return Value{Number{0.0, Unit::None}};
        throw TypeError(name + " of an empty list", span);
      }
      Number acc = as_number(items[0], span);
      for (std::size_t i = 1; i < items.size(); ++i) {
        const Number n = as_number(items[i], span);
        acc.unit = join_units(acc.unit, n.unit, span);
        if (name == "sum") acc.value += n.value;
        else if (name == "min") acc.value = std::min(acc.value, n.value);
        else acc.value = std::max(acc.value, n.value);
      }
      return Value{acc};
    }
    if (name == "first" || name == "last") {
      arity(name, args, 1, span);
      const auto& items = as_list(args[0], span);
      if (items.empty()) throw TypeError(name + " of an empty list", span);
      return name == "first" ? items.front() : items.back();
    }
    if (name == "abs") {
      arity(name, args, 1, span);
      const Number n = as_number(args[0], span);
      return Value{Number{std::abs(n.value), n.unit}};
    }
    if (name == "mm" || name == "m") {
      arity(name, args, 1, span);
      const Unit target = name == "mm" ? Unit::Millimeter : Unit::Meter;
      auto factor = [&](Unit from) { return from == Unit::None || from == target ? 1.0 : millimeters_per(from) / millimeters_per(target); };
      if (auto* n = std::get_if<Number>(&args[0].data)) return Value{Number{n->value * factor(n->unit), target}};
      if (auto* v = std::get_if<Vector3>(&args[0].data)) return Value{Vector3{v->value * factor(v->unit), target, v->is_point}};
      throw TypeError(name + " expects a number, length, point or vector, got " + args[0].kind(), span);
    }
    if (name == "distance") {
      arity(name, args, 2, span);
      const Vector3 p = as_vector(args[0], span), q = as_vector(args[1], span);
      return Value{Number{norm(p.value - q.value), join_units(p.unit, q.unit, span)}};
    }
    if (name == "point") {
      arity(name, args, 3, span);
      Unit unit = Unit::None;
      Vec3 p;
      for (int i = 0; i < 3; ++i) {
        const Number n = as_number(args[static_cast<std::size_t>(i)], span);
        unit = join_units(unit, n.unit, span);
        p[i] = n.value;
      }
      return Value{Vector3{p, unit, true}};
    }
    // x, y, z
    arity(name, args, 1, span);
    return member(args[0], name, span);
  }

  Value search(const std::vector<Value>& args, const std::map<std::string, Value>& kwargs, SourceSpan span) {
    arity("search", args, 1, span);
    const auto* prompt = std::get_if<std::string>(&args[0].data);
    if (!prompt) throw TypeError("search expects a text prompt, got " + args[0].kind(), span);
    std::set<Side> sides;
    for (const auto& [k, v] : kwargs) {
      if (k != "sides") throw TypeError("search has no keyword '" + k + "'", span);
      auto add = [&](const Value& s) {
        if (auto* side = std::get_if<SideValue>(&s.data)) {
          sides.insert(side->side);
        } else if (auto* text = std::get_if<std::string>(&s.data); text && parse_side(*text)) {
          sides.insert(*parse_side(*text));
        } else {
          throw TypeError("sides must name top, bottom, left, right, front or back; got " + s.summary(), span);
        }
      };
      if (auto* list = std::get_if<ListValue>(&v.data)) {
        for (const auto& s : *list->items) add(s);
      } else {
        add(v);
      }
    }

    std::string key = *prompt + "|";
    for (Side s : sides) key += to_string(s) + ",";
    auto it = searches_.find(key);
    if (it == searches_.end()) {
      auto parts = segment_model(model_, *prompt, provider_, cfg_, views_);
      if (!sides.empty()) parts = filter_by_sides(model_, parts, sides, cfg_, views_);
      ValueList items;
      for (auto& p : parts) items.push_back(Value{PartValue{std::make_shared<const PartInstance>(std::move(p))}});
      it = searches_.emplace(key, make_list(std::move(items))).first;
    }
    return it->second;
  }

  const CadModel& model_;
  SegmentationProvider& provider_;
  const PipelineConfig& cfg_;
  std::chrono::steady_clock::time_point deadline_;
  std::unique_ptr<SceneViews> own_views_;
  SceneViews* views_ = nullptr;
  std::map<std::string, Value> env_;
  std::map<std::string, Value> searches_;
  std::map<std::vector<FaceId>, std::optional<CylinderFit>> fits_;
  std::vector<TraceEntry>* trace_ = nullptr;
};

}  // namespace

Answer evaluate(const Program& program, const CadModel& model, SegmentationProvider& provider, const PipelineConfig& cfg,
                const EvalOptions& options) {
  cfg.validate();
  return Evaluator(model, provider, cfg, options).run(program);
}

}  // namespace cadq::query
