#pragma once

// Query DSL: a small, total language whose programs search the model for parts, read their
// measurements and bind the answer to `solution`.
//
//   program := stmt+
//   stmt    := "let" IDENT "=" expr ";" | "solution" "=" expr ";"
//   expr    := or ; or := and ("or" and)* ; and := not ("and" not)* ; not := "not" not | cmp
//   cmp     := add (("<"|"<="|">"|">="|"=="|"!=") add)?
//   add     := mul (("+"|"-") mul)* ; mul := unary (("*"|"/") unary)* ; unary := "-" unary | postfix
//   postfix := primary ("." IDENT)*
//   primary := NUMBER | STRING | "true" | "false" | IDENT | call | "[" (expr ("," expr)*)? "]" | "(" expr ")"
//   call    := IDENT "(" (arg ("," arg)*)? ")" ; arg := IDENT "=" expr | IDENT "->" expr | expr
//
// Lambdas (`p -> expr`) are accepted only as the second argument of filter, map and sort_by.

#include <chrono>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "cadq/geometry.hpp"
#include "cadq/segcad.hpp"

namespace cadq::query {

struct SourceSpan {
  int line = 1;
  int column = 1;
  std::size_t offset = 0;
  std::size_t length = 0;
};

struct QueryError : std::runtime_error {
  QueryError(const std::string& message, SourceSpan where)
      : std::runtime_error(message + " (line " + std::to_string(where.line) + ", column " + std::to_string(where.column) + ")"),
        span(where) {}
  SourceSpan span;
};

/// Grammar violations.
struct SyntaxError : QueryError {
  using QueryError::QueryError;
};
/// Static program errors: undefined names, missing or repeated `solution`.
struct SemanticError : QueryError {
  using QueryError::QueryError;
};
/// Operand or argument of the wrong kind, mismatched units, empty aggregates, division by zero.
struct TypeError : QueryError {
  using QueryError::QueryError;
};
/// Attribute access (`p.foo`) that no value kind has.
struct UnknownProperty : QueryError {
  using QueryError::QueryError;
};
/// A CAD capability the interface does not offer (e.g. surface normals, local frames).
struct CapabilityError : QueryError {
  using QueryError::QueryError;
};
struct EvaluationTimeout : QueryError {
  using QueryError::QueryError;
};

enum class BinaryOp { Add, Sub, Mul, Div, Lt, Le, Gt, Ge, Eq, Ne, And, Or };
enum class UnaryOp { Neg, Not };

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct NumberLit {
  double value = 0.0;
};
struct StringLit {
  std::string value;
};
struct BoolLit {
  bool value = false;
};
struct Identifier {
  std::string name;
};
struct ListLit {
  std::vector<ExprPtr> items;
};
struct Lambda {
  std::string param;
  ExprPtr body;
};
struct Argument {
  std::string keyword;  // empty for positional
  ExprPtr value;
};
struct Call {
  std::string callee;
  std::vector<Argument> args;
};
struct Member {
  ExprPtr object;
  std::string name;
};
struct Binary {
  BinaryOp op;
  ExprPtr lhs, rhs;
};
struct Unary {
  UnaryOp op;
  ExprPtr operand;
};

struct Expr {
  std::variant<NumberLit, StringLit, BoolLit, Identifier, ListLit, Lambda, Call, Member, Binary, Unary> node;
  SourceSpan span;
};

struct Statement {
  bool is_let = true;  // false: assignment to `solution`
  std::string name;
  ExprPtr value;
  SourceSpan span;
};

struct Program {
  std::vector<Statement> statements;
};

/// Parses and statically checks a program. Throws SyntaxError or SemanticError.
Program parse(const std::string& source);

/// Canonical source form; parse(print(p)) prints identically.
std::string print(const Program& program);
std::string print(const Expr& expr);

enum class Unit { None, Millimeter, Meter };
std::string to_string(Unit unit);
double millimeters_per(Unit unit);

struct Value;
using ValueList = std::vector<Value>;

struct Absent {
  bool operator==(const Absent&) const = default;
};
struct Number {
  double value = 0.0;
  Unit unit = Unit::None;
  bool operator==(const Number&) const = default;
};
struct Vector3 {
  Vec3 value;
  Unit unit = Unit::None;
  bool is_point = false;
  bool operator==(const Vector3&) const = default;
};
struct PartValue {
  std::shared_ptr<const PartInstance> part;
  bool operator==(const PartValue& o) const { return part->face_ids == o.part->face_ids; }
};
struct ListValue {
  std::shared_ptr<const ValueList> items;
  bool operator==(const ListValue& o) const;
};
struct SideValue {
  Side side;
  bool operator==(const SideValue&) const = default;
};

struct Value {
  std::variant<Absent, Number, Vector3, PartValue, ListValue, bool, std::string, SideValue> data;

  std::string kind() const;
  std::string summary() const;
  bool operator==(const Value&) const = default;
};

Value make_list(ValueList items);
nlohmann::json to_json(const Value& value);

struct TraceEntry {
  std::string call;
  std::string arguments;
  std::string result;
};

struct Answer {
  Value value;
  std::vector<TraceEntry> trace;
};

nlohmann::json to_json(const Answer& answer);

struct EvalOptions {
  std::chrono::milliseconds budget{120'000};
  /// Optional render cache shared across evaluations of the same model; must match the config resolution.
  SceneViews* views = nullptr;
};

/// Runs the program against the model. Only the provider performs I/O.
Answer evaluate(const Program& program, const CadModel& model, SegmentationProvider& provider,
                const PipelineConfig& cfg, const EvalOptions& options = {});

/// Names accepted as callees.
const std::vector<std::string>& builtin_names();

}  // namespace cadq::query
