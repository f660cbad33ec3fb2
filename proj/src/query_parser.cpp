#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>
#include <sstream>

#include "cadq/query.hpp"

namespace cadq::query {

namespace {

enum class Tok {
  Number, String, Ident, Let, Solution, True, False, And, Or, Not,
  LParen, RParen, LBracket, RBracket, Comma, Semicolon, Assign, Arrow, Dot,
  Plus, Minus, Star, Slash, Lt, Le, Gt, Ge, EqEq, NotEq, End
};

struct Token {
  Tok kind;
  std::string text;
  double number = 0.0;
  SourceSpan span;
};

const char* describe(Tok t) {
  switch (t) {
    case Tok::Number: return "number";
    case Tok::String: return "string";
    case Tok::Ident: return "identifier";
    case Tok::Let: return "'let'";
    case Tok::Solution: return "'solution'";
    case Tok::True: return "'true'";
    case Tok::False: return "'false'";
    case Tok::And: return "'and'";
    case Tok::Or: return "'or'";
    case Tok::Not: return "'not'";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::LBracket: return "'['";
    case Tok::RBracket: return "']'";
    case Tok::Comma: return "','";
    case Tok::Semicolon: return "';'";
    case Tok::Assign: return "'='";
    case Tok::Arrow: return "'->'";
    case Tok::Dot: return "'.'";
    case Tok::Plus: return "'+'";
    case Tok::Minus: return "'-'";
    case Tok::Star: return "'*'";
    case Tok::Slash: return "'/'";
    case Tok::Lt: return "'<'";
    case Tok::Le: return "'<='";
    case Tok::Gt: return "'>'";
    case Tok::Ge: return "'>='";
    case Tok::EqEq: return "'=='";
    case Tok::NotEq: return "'!='";
    case Tok::End: return "end of input";
  }
  return "?";
}

std::vector<Token> lex(const std::string& src) {
  std::vector<Token> out;
  std::size_t i = 0;
  int line = 1, col = 1;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  while (i < src.size()) {
    const char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '#' || (c == '/' && i + 1 < src.size() && src[i + 1] == '/')) {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    SourceSpan span{line, col, i, 0};
    Token tok{Tok::End, {}, 0.0, span};
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      if (j + 1 < src.size() && src[j] == '.' && std::isdigit(static_cast<unsigned char>(src[j + 1]))) {
        ++j;
        while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      }
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
        if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
          while (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) ++k;
          j = k;
        }
      }
      tok.kind = Tok::Number;
      tok.text = src.substr(i, j - i);
      auto [ptr, ec] = std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), tok.number);
      if (ec != std::errc()) throw SyntaxError("invalid number '" + tok.text + "'", span);
      advance(j - i);
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      tok.text = src.substr(i, j - i);
      static const std::pair<const char*, Tok> keywords[] = {
          {"let", Tok::Let}, {"solution", Tok::Solution}, {"true", Tok::True}, {"false", Tok::False},
          {"and", Tok::And}, {"or", Tok::Or},             {"not", Tok::Not},
      };
      tok.kind = Tok::Ident;
      for (const auto& [word, kind] : keywords) {
        if (tok.text == word) tok.kind = kind;
      }
      advance(j - i);
    } else if (c == '"') {
      std::string value;
      std::size_t j = i + 1;
      bool closed = false;
      while (j < src.size()) {
        if (src[j] == '\\' && j + 1 < src.size()) {
          const char e = src[j + 1];
          value.push_back(e == 'n' ? '\n' : (e == 't' ? '\t' : e));
          j += 2;
        } else if (src[j] == '"') {
          closed = true;
          ++j;
          break;
        } else if (src[j] == '\n') {
          break;
        } else {
          value.push_back(src[j++]);
        }
      }
      if (!closed) throw SyntaxError("unterminated string literal", span);
      tok.kind = Tok::String;
      tok.text = std::move(value);
      advance(j - i);
    } else {
      auto two = [&](char a, char b) { return c == a && i + 1 < src.size() && src[i + 1] == b; };
      std::size_t len = 1;
      if (two('-', '>')) { tok.kind = Tok::Arrow; len = 2; }
      else if (two('<', '=')) { tok.kind = Tok::Le; len = 2; }
      else if (two('>', '=')) { tok.kind = Tok::Ge; len = 2; }
      else if (two('=', '=')) { tok.kind = Tok::EqEq; len = 2; }
      else if (two('!', '=')) { tok.kind = Tok::NotEq; len = 2; }
      else {
        switch (c) {
          case '(': tok.kind = Tok::LParen; break;
          case ')': tok.kind = Tok::RParen; break;
          case '[': tok.kind = Tok::LBracket; break;
          case ']': tok.kind = Tok::RBracket; break;
          case ',': tok.kind = Tok::Comma; break;
          case ';': tok.kind = Tok::Semicolon; break;
          case '=': tok.kind = Tok::Assign; break;
          case '.': tok.kind = Tok::Dot; break;
          case '+': tok.kind = Tok::Plus; break;
          case '-': tok.kind = Tok::Minus; break;
          case '*': tok.kind = Tok::Star; break;
          case '/': tok.kind = Tok::Slash; break;
          case '<': tok.kind = Tok::Lt; break;
          case '>': tok.kind = Tok::Gt; break;
          default: throw SyntaxError(std::string("unexpected character '") + c + "'", span);
        }
      }
      tok.text = src.substr(i, len);
      advance(len);
    }
    tok.span.length = i - tok.span.offset;
    out.push_back(std::move(tok));
  }
  out.push_back({Tok::End, {}, 0.0, {line, col, src.size(), 0}});
  return out;
}

bool takes_lambda(const std::string& callee) { return callee == "filter" || callee == "map" || callee == "sort_by"; }

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  Program program() {
    Program p;
    while (peek().kind != Tok::End) p.statements.push_back(statement());
    if (p.statements.empty()) throw SyntaxError("empty program", peek().span);
    return p;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
  const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  bool accept(Tok kind) {
    if (peek().kind != kind) return false;
    ++pos_;
    return true;
  }
  const Token& expect(Tok kind, const char* context) {
    if (peek().kind != kind) {
      throw SyntaxError(std::string("expected ") + describe(kind) + " " + context + ", found " + describe(peek().kind), peek().span);
    }
    return next();
  }

  Statement statement() {
    Statement s;
    s.span = peek().span;
    if (accept(Tok::Let)) {
      const auto& name = expect(Tok::Ident, "after 'let'");
      s.name = name.text;
      s.is_let = true;
    } else if (accept(Tok::Solution)) {
      s.name = "solution";
      s.is_let = false;
    } else {
      throw SyntaxError(std::string("expected 'let' or 'solution' at start of statement, found ") + describe(peek().kind), peek().span);
    }
    expect(Tok::Assign, "in statement");
    s.value = expression();
    expect(Tok::Semicolon, "at end of statement");
    return s;
  }

  ExprPtr make(SourceSpan span, auto node) {
    auto e = std::make_unique<Expr>();
    e->node = std::move(node);
    e->span = span;
    return e;
  }

  ExprPtr expression() { return or_expr(); }

  ExprPtr or_expr() {
    auto lhs = and_expr();
    while (peek().kind == Tok::Or) {
      const auto span = next().span;
      lhs = make(span, Binary{BinaryOp::Or, std::move(lhs), and_expr()});
    }
    return lhs;
  }

  ExprPtr and_expr() {
    auto lhs = not_expr();
    while (peek().kind == Tok::And) {
      const auto span = next().span;
      lhs = make(span, Binary{BinaryOp::And, std::move(lhs), not_expr()});
    }
    return lhs;
  }

  ExprPtr not_expr() {
    if (peek().kind == Tok::Not) {
      const auto span = next().span;
      return make(span, Unary{UnaryOp::Not, not_expr()});
    }
    return comparison();
  }

  ExprPtr comparison() {
    auto lhs = additive();
    static const std::pair<Tok, BinaryOp> ops[] = {{Tok::Lt, BinaryOp::Lt}, {Tok::Le, BinaryOp::Le}, {Tok::Gt, BinaryOp::Gt},
                                                   {Tok::Ge, BinaryOp::Ge}, {Tok::EqEq, BinaryOp::Eq}, {Tok::NotEq, BinaryOp::Ne}};
    for (const auto& [tok, op] : ops) {
      if (peek().kind == tok) {
        const auto span = next().span;
        auto result = make(span, Binary{op, std::move(lhs), additive()});
        for (const auto& [again, unused] : ops) {
          if (peek().kind == again) throw SyntaxError("comparisons cannot be chained", peek().span);
        }
        return result;
      }
    }
    return lhs;
  }

  ExprPtr additive() {
    auto lhs = multiplicative();
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      const auto& t = next();
      const auto op = t.kind == Tok::Plus ? BinaryOp::Add : BinaryOp::Sub;
      lhs = make(t.span, Binary{op, std::move(lhs), multiplicative()});
    }
    return lhs;
  }

  ExprPtr multiplicative() {
    auto lhs = unary();
    while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
      const auto& t = next();
      const auto op = t.kind == Tok::Star ? BinaryOp::Mul : BinaryOp::Div;
      lhs = make(t.span, Binary{op, std::move(lhs), unary()});
    }
    return lhs;
  }

  ExprPtr unary() {
    if (peek().kind == Tok::Minus) {
      const auto span = next().span;
      return make(span, Unary{UnaryOp::Neg, unary()});
    }
    return postfix();
  }

  ExprPtr postfix() {
    auto e = primary();
    while (peek().kind == Tok::Dot) {
      const auto span = next().span;
      const auto& name = expect(Tok::Ident, "after '.'");
      e = make(span, Member{std::move(e), name.text});
    }
    return e;
  }

  ExprPtr primary() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Number: next(); return make(t.span, NumberLit{t.number});
      case Tok::String: next(); return make(t.span, StringLit{t.text});
      case Tok::True: next(); return make(t.span, BoolLit{true});
      case Tok::False: next(); return make(t.span, BoolLit{false});
      case Tok::LParen: {
        next();
        auto e = expression();
        expect(Tok::RParen, "to close '('");
        return e;
      }
      case Tok::LBracket: {
        const auto span = next().span;
        ListLit list;
        if (!accept(Tok::RBracket)) {
          do {
            list.items.push_back(expression());
          } while (accept(Tok::Comma));
          expect(Tok::RBracket, "to close list");
        }
        return make(span, std::move(list));
      }
      case Tok::Ident: {
        const Token ident = next();
        if (peek().kind == Tok::LParen) return call(ident);
        if (peek().kind == Tok::Arrow) throw SyntaxError("lambda is only allowed as an argument of filter, map or sort_by", ident.span);
        return make(ident.span, Identifier{ident.text});
      }
      default:
        throw SyntaxError(std::string("expected an expression, found ") + describe(t.kind), t.span);
    }
  }

  ExprPtr call(const Token& callee) {
    expect(Tok::LParen, "after function name");
    Call c;
    c.callee = callee.text;
    if (!accept(Tok::RParen)) {
      do {
        Argument arg;
        if (peek().kind == Tok::Ident && peek(1).kind == Tok::Assign) {
          arg.keyword = next().text;
          next();
          arg.value = expression();
        } else if (peek().kind == Tok::Ident && peek(1).kind == Tok::Arrow) {
          const Token param = next();
          next();
          if (!takes_lambda(c.callee) || c.args.size() != 1) {
            throw SyntaxError("lambda is only allowed as the second argument of filter, map or sort_by", param.span);
          }
          arg.value = make(param.span, Lambda{param.text, expression()});
        } else {
          arg.value = expression();
        }
        c.args.push_back(std::move(arg));
      } while (accept(Tok::Comma));
      expect(Tok::RParen, "to close argument list");
    }
    return make(callee.span, std::move(c));
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

// Use-before-define and the single `solution` assignment.
class Checker {
 public:
  void check(const Program& p, SourceSpan end) {
    int solutions = 0;
    for (const auto& s : p.statements) {
      visit(*s.value);
      if (s.is_let) {
        defined_.insert(s.name);
      } else if (++solutions > 1) {
        throw SemanticError("'solution' is assigned more than once", s.span);
      }
    }
    if (solutions == 0) throw SemanticError("program never assigns 'solution'", end);
  }

 private:
  void visit(const Expr& e) {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Identifier>) {
            if (!defined_.count(n.name) && !scope_.count(n.name) && !parse_side(n.name)) {
              throw SemanticError("'" + n.name + "' is used before it is defined", e.span);
            }
          } else if constexpr (std::is_same_v<T, ListLit>) {
            for (const auto& item : n.items) visit(*item);
          } else if constexpr (std::is_same_v<T, Lambda>) {
            const auto slot = scope_.insert(n.param);
            visit(*n.body);
            scope_.erase(slot);
          } else if constexpr (std::is_same_v<T, Call>) {
            for (const auto& a : n.args) visit(*a.value);
          } else if constexpr (std::is_same_v<T, Member>) {
            visit(*n.object);
          } else if constexpr (std::is_same_v<T, Binary>) {
            visit(*n.lhs);
            visit(*n.rhs);
          } else if constexpr (std::is_same_v<T, Unary>) {
            visit(*n.operand);
          }
        },
        e.node);
  }

  std::set<std::string> defined_;
  std::multiset<std::string> scope_;
};

const char* op_text(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
    case BinaryOp::Eq: return "==";
    case BinaryOp::Ne: return "!=";
    case BinaryOp::And: return "and";
    case BinaryOp::Or: return "or";
  }
  return "?";
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    if (c == '\t') {
      out += "\\t";
      continue;
    }
    out.push_back(c);
  }
  return out + "\"";
}

}  // namespace

Program parse(const std::string& source) {
  auto tokens = lex(source);
  const SourceSpan end = tokens.back().span;
  Program program = Parser(std::move(tokens)).program();
  Checker().check(program, end);
  return program;
}

std::string print(const Expr& expr) {
  return std::visit(
      [](const auto& n) -> std::string {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, NumberLit>) {
          char buf[64];
          auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, n.value);
          return std::string(buf, ptr);
        } else if constexpr (std::is_same_v<T, StringLit>) {
          return quote(n.value);
        } else if constexpr (std::is_same_v<T, BoolLit>) {
          return n.value ? "true" : "false";
        } else if constexpr (std::is_same_v<T, Identifier>) {
          return n.name;
        } else if constexpr (std::is_same_v<T, ListLit>) {
          std::string out = "[";
          for (std::size_t i = 0; i < n.items.size(); ++i) out += (i ? ", " : "") + print(*n.items[i]);
          return out + "]";
        } else if constexpr (std::is_same_v<T, Lambda>) {
          return n.param + " -> " + print(*n.body);
        } else if constexpr (std::is_same_v<T, Call>) {
          std::string out = n.callee + "(";
          for (std::size_t i = 0; i < n.args.size(); ++i) {
            if (i) out += ", ";
            if (!n.args[i].keyword.empty()) out += n.args[i].keyword + "=";
            out += print(*n.args[i].value);
          }
          return out + ")";
        } else if constexpr (std::is_same_v<T, Member>) {
          return print(*n.object) + "." + n.name;
        } else if constexpr (std::is_same_v<T, Binary>) {
          return "(" + print(*n.lhs) + " " + op_text(n.op) + " " + print(*n.rhs) + ")";
        } else {
          return n.op == UnaryOp::Neg ? "(-" + print(*n.operand) + ")" : "(not " + print(*n.operand) + ")";
        }
      },
      expr.node);
}

std::string print(const Program& program) {
  std::string out;
  for (const auto& s : program.statements) {
    out += s.is_let ? "let " + s.name : std::string("solution");
    out += " = " + print(*s.value) + ";\n";
  }
  return out;
}

}  // namespace cadq::query
