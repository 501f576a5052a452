#include "issf/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <optional>
#include <utility>

#include "issf/error.hpp"

namespace issf {

namespace {

using Vars = std::shared_ptr<const std::vector<std::string>>;

NodePtr make_constant(double v) {
  auto n = std::make_shared<ExprNode>();
  n->kind = NodeKind::Constant;
  n->value = v;
  return n;
}

NodePtr make_variable(std::size_t index) {
  auto n = std::make_shared<ExprNode>();
  n->kind = NodeKind::Variable;
  n->index = index;
  return n;
}

NodePtr make_node(NodeKind kind, std::vector<NodePtr> args) {
  auto n = std::make_shared<ExprNode>();
  n->kind = kind;
  n->args = std::move(args);
  return n;
}

NodePtr make_call(Intrinsic fn, std::vector<NodePtr> args) {
  auto n = std::make_shared<ExprNode>();
  n->kind = NodeKind::Call;
  n->fn = fn;
  n->args = std::move(args);
  return n;
}

NodePtr make_kink(KinkRule rule, std::vector<NodePtr> args) {
  auto n = std::make_shared<ExprNode>();
  n->kind = NodeKind::Kink;
  n->rule = rule;
  n->args = std::move(args);
  return n;
}

struct IntrinsicInfo {
  const char* name;
  Intrinsic fn;
  int arity;  // -1: two or more
};

constexpr IntrinsicInfo kIntrinsics[] = {
    {"sin", Intrinsic::Sin, 1},   {"cos", Intrinsic::Cos, 1},   {"tan", Intrinsic::Tan, 1},
    {"exp", Intrinsic::Exp, 1},   {"ln", Intrinsic::Ln, 1},     {"sqrt", Intrinsic::Sqrt, 1},
    {"abs", Intrinsic::Abs, 1},   {"sign", Intrinsic::Sign, 1}, {"min", Intrinsic::Min, -1},
    {"max", Intrinsic::Max, -1},  {"pow", Intrinsic::Pow, 2},
};

const IntrinsicInfo* find_intrinsic(std::string_view name) {
  for (const auto& info : kIntrinsics) {
    if (name == info.name) return &info;
  }
  return nullptr;
}

const char* intrinsic_name(Intrinsic fn) {
  for (const auto& info : kIntrinsics) {
    if (info.fn == fn) return info.name;
  }
  return "?";
}

const char* kink_name(KinkRule rule) {
  switch (rule) {
    case KinkRule::Abs: return "__dabs";
    case KinkRule::Sign: return "__dsign";
    case KinkRule::Min: return "__dmin";
    case KinkRule::Max: return "__dmax";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Printing

int precedence(const ExprNode& n) {
  switch (n.kind) {
    case NodeKind::Add:
    case NodeKind::Subtract: return 1;
    case NodeKind::Multiply:
    case NodeKind::Divide: return 2;
    case NodeKind::Negate: return 3;
    case NodeKind::Power: return 4;
    case NodeKind::Constant: return n.value < 0 || std::signbit(n.value) ? 3 : 5;
    default: return 5;
  }
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void print(const ExprNode& n, const std::vector<std::string>& vars, std::string& out);

void print_child(const ExprNode& child, int min_prec, const std::vector<std::string>& vars,
                 std::string& out) {
  if (precedence(child) < min_prec) {
    out += '(';
    print(child, vars, out);
    out += ')';
  } else {
    print(child, vars, out);
  }
}

void print(const ExprNode& n, const std::vector<std::string>& vars, std::string& out) {
  switch (n.kind) {
    case NodeKind::Constant:
      out += format_number(n.value);
      return;
    case NodeKind::Variable:
      out += vars.at(n.index);
      return;
    case NodeKind::Negate:
      out += '-';
      print_child(*n.args[0], 3, vars, out);
      return;
    case NodeKind::Add:
    case NodeKind::Subtract:
      print_child(*n.args[0], 1, vars, out);
      out += n.kind == NodeKind::Add ? " + " : " - ";
      print_child(*n.args[1], 2, vars, out);
      return;
    case NodeKind::Multiply:
    case NodeKind::Divide:
      print_child(*n.args[0], 2, vars, out);
      out += n.kind == NodeKind::Multiply ? "*" : "/";
      print_child(*n.args[1], 3, vars, out);
      return;
    case NodeKind::Power:
      print_child(*n.args[0], 5, vars, out);
      out += '^';
      print_child(*n.args[1], 3, vars, out);
      return;
    case NodeKind::Call:
    case NodeKind::Kink: {
      out += n.kind == NodeKind::Call ? intrinsic_name(n.fn) : kink_name(n.rule);
      out += '(';
      for (std::size_t i = 0; i < n.args.size(); ++i) {
        if (i) out += ", ";
        print(*n.args[i], vars, out);
      }
      out += ')';
      return;
    }
  }
}

std::string node_text(const ExprNode& n, const std::vector<std::string>& vars) {
  std::string s;
  print(n, vars, s);
  return s;
}

// ---------------------------------------------------------------------------
// Evaluation

struct Evaluator {
  std::span<const double> values;
  EvalFlags* flags;
  const std::vector<std::string>& vars;

  [[noreturn]] void fail(const char* what, const ExprNode& n) const {
    throw DomainError(what, node_text(n, vars));
  }

  double checked(double v, const ExprNode& n) const {
    if (!std::isfinite(v)) fail("non-finite result", n);
    return v;
  }

  void mark_kink(double distance) const {
    if (flags && std::fabs(distance) <= kKinkTolerance) flags->nonsmooth = true;
  }

  double power(double base, double exponent, const ExprNode& n) const {
    if (base == 0.0 && exponent < 0.0) fail("division by zero", n);
    if (base < 0.0 && exponent != std::trunc(exponent)) fail("negative base with non-integer exponent", n);
    if (exponent == 2.0) return checked(base * base, n);
    if (exponent == 3.0) return checked(base * base * base, n);
    if (exponent == 1.0) return base;
    return checked(std::pow(base, exponent), n);
  }

  double operator()(const ExprNode& n) const {
    switch (n.kind) {
      case NodeKind::Constant: return n.value;
      case NodeKind::Variable: return values[n.index];
      case NodeKind::Negate: return -(*this)(*n.args[0]);
      case NodeKind::Add: return checked((*this)(*n.args[0]) + (*this)(*n.args[1]), n);
      case NodeKind::Subtract: return checked((*this)(*n.args[0]) - (*this)(*n.args[1]), n);
      case NodeKind::Multiply: return checked((*this)(*n.args[0]) * (*this)(*n.args[1]), n);
      case NodeKind::Divide: {
        const double num = (*this)(*n.args[0]);
        const double den = (*this)(*n.args[1]);
        if (den == 0.0) fail("division by zero", n);
        return checked(num / den, n);
      }
      case NodeKind::Power: return power((*this)(*n.args[0]), (*this)(*n.args[1]), n);
      case NodeKind::Call: return call(n);
      case NodeKind::Kink: return kink(n);
    }
    return 0.0;
  }

  double call(const ExprNode& n) const {
    const double a = (*this)(*n.args[0]);
    switch (n.fn) {
      case Intrinsic::Sin: return std::sin(a);
      case Intrinsic::Cos: return std::cos(a);
      case Intrinsic::Tan: return checked(std::tan(a), n);
      case Intrinsic::Exp: return checked(std::exp(a), n);
      case Intrinsic::Ln:
        if (a <= 0.0) fail("ln of nonpositive value", n);
        return std::log(a);
      case Intrinsic::Sqrt:
        if (a < 0.0) fail("sqrt of negative value", n);
        return std::sqrt(a);
      case Intrinsic::Abs: return std::fabs(a);
      case Intrinsic::Sign: return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0);
      case Intrinsic::Min: {
        double m = a;
        for (std::size_t i = 1; i < n.args.size(); ++i) m = std::min(m, (*this)(*n.args[i]));
        return m;
      }
      case Intrinsic::Max: {
        double m = a;
        for (std::size_t i = 1; i < n.args.size(); ++i) m = std::max(m, (*this)(*n.args[i]));
        return m;
      }
      case Intrinsic::Pow: return power(a, (*this)(*n.args[1]), n);
    }
    return 0.0;
  }

  // Right-sided derivative selection; see differentiate().
  double kink(const ExprNode& n) const {
    switch (n.rule) {
      case KinkRule::Abs: {
        const double u = (*this)(*n.args[0]);
        const double du = (*this)(*n.args[1]);
        if (u < -kKinkTolerance) return -du;
        if (u > kKinkTolerance) return du;
        mark_kink(u);
        return std::fabs(du);
      }
      case KinkRule::Sign: {
        const double u = (*this)(*n.args[0]);
        mark_kink(u);
        return 0.0;
      }
      case KinkRule::Min:
      case KinkRule::Max: {
        const double a = (*this)(*n.args[0]);
        const double b = (*this)(*n.args[1]);
        const double gap = a - b;
        const bool is_min = n.rule == KinkRule::Min;
        if (gap < -kKinkTolerance) return (*this)(*n.args[is_min ? 2 : 3]);
        if (gap > kKinkTolerance) return (*this)(*n.args[is_min ? 3 : 2]);
        mark_kink(gap);
        const double da = (*this)(*n.args[2]);
        const double db = (*this)(*n.args[3]);
        return is_min ? std::min(da, db) : std::max(da, db);
      }
    }
    return 0.0;
  }
};

bool node_references(const ExprNode& n, std::size_t index) {
  if (n.kind == NodeKind::Variable) return n.index == index;
  return std::any_of(n.args.begin(), n.args.end(),
                     [&](const NodePtr& a) { return node_references(*a, index); });
}

// ---------------------------------------------------------------------------
// Parsing

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End };

struct Token {
  Tok kind;
  std::string_view text;
  double number = 0.0;
  std::size_t line = 1;
  std::size_t column = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip_space();
    Token t;
    t.line = line_;
    t.column = column_;
    if (pos_ >= src_.size()) {
      t.kind = Tok::End;
      return t;
    }
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && pos_ + 1 < src_.size() &&
                                                        std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
      return number(t);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        advance();
      }
      t.kind = Tok::Ident;
      t.text = src_.substr(start, pos_ - start);
      return t;
    }
    advance();
    t.text = src_.substr(pos_ - 1, 1);
    switch (c) {
      case '+': t.kind = Tok::Plus; break;
      case '-': t.kind = Tok::Minus; break;
      case '*': t.kind = Tok::Star; break;
      case '/': t.kind = Tok::Slash; break;
      case '^': t.kind = Tok::Caret; break;
      case '(': t.kind = Tok::LParen; break;
      case ')': t.kind = Tok::RParen; break;
      case ',': t.kind = Tok::Comma; break;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", t.line, t.column);
    }
    return t;
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) advance();
  }

  Token number(Token t) {
    const std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
    };
    digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      advance();
      digits();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t look = pos_ + 1;
      if (look < src_.size() && (src_[look] == '+' || src_[look] == '-')) ++look;
      if (look < src_.size() && std::isdigit(static_cast<unsigned char>(src_[look]))) {
        while (pos_ < look) advance();
        digits();
      } else {
        throw ParseError("malformed exponent in numeric literal", line_, column_);
      }
    }
    t.kind = Tok::Number;
    t.text = src_.substr(start, pos_ - start);
    const auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
    if (res.ec != std::errc() || !std::isfinite(t.number)) {
      throw ParseError("numeric literal out of range", t.line, t.column);
    }
    return t;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t column_ = 1;
};

class Parser {
 public:
  Parser(std::string_view src, const std::vector<std::string>& vars) : lexer_(src), vars_(vars) {
    tok_ = lexer_.next();
  }

  NodePtr parse_all() {
    if (tok_.kind == Tok::End) throw ParseError("empty expression", tok_.line, tok_.column);
    NodePtr e = expr();
    if (tok_.kind != Tok::End) error("unexpected '" + std::string(tok_.text) + "'");
    return e;
  }

 private:
  [[noreturn]] void error(const std::string& msg) const {
    throw ParseError(msg, tok_.line, tok_.column);
  }

  void bump() { tok_ = lexer_.next(); }

  void expect(Tok kind, const char* what) {
    if (tok_.kind != kind) {
      error(std::string("expected ") + what +
            (tok_.kind == Tok::End ? " before end of input" : ", found '" + std::string(tok_.text) + "'"));
    }
    bump();
  }

  NodePtr expr() {
    NodePtr lhs = term();
    while (tok_.kind == Tok::Plus || tok_.kind == Tok::Minus) {
      const NodeKind k = tok_.kind == Tok::Plus ? NodeKind::Add : NodeKind::Subtract;
      bump();
      lhs = make_node(k, {lhs, term()});
    }
    return lhs;
  }

  NodePtr term() {
    NodePtr lhs = unary();
    while (tok_.kind == Tok::Star || tok_.kind == Tok::Slash) {
      const NodeKind k = tok_.kind == Tok::Star ? NodeKind::Multiply : NodeKind::Divide;
      bump();
      lhs = make_node(k, {lhs, unary()});
    }
    return lhs;
  }

  NodePtr unary() {
    if (tok_.kind == Tok::Minus) {
      bump();
      return make_node(NodeKind::Negate, {unary()});
    }
    if (tok_.kind == Tok::Plus) {
      bump();
      return unary();
    }
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (tok_.kind == Tok::Caret) {
      bump();
      return make_node(NodeKind::Power, {base, unary()});
    }
    return base;
  }

  NodePtr primary() {
    switch (tok_.kind) {
      case Tok::Number: {
        const double v = tok_.number;
        bump();
        return make_constant(v);
      }
      case Tok::LParen: {
        bump();
        NodePtr e = expr();
        expect(Tok::RParen, "')'");
        return e;
      }
      case Tok::Ident: return identifier();
      case Tok::End: error("unexpected end of input");
      default: error("unexpected '" + std::string(tok_.text) + "'");
    }
  }

  NodePtr identifier() {
    const Token id = tok_;
    bump();
    if (tok_.kind == Tok::LParen) {
      const IntrinsicInfo* info = find_intrinsic(id.text);
      if (!info) {
        throw ParseError("unknown function '" + std::string(id.text) + "'", id.line, id.column);
      }
      bump();
      std::vector<NodePtr> args;
      if (tok_.kind != Tok::RParen) {
        args.push_back(expr());
        while (tok_.kind == Tok::Comma) {
          bump();
          args.push_back(expr());
        }
      }
      expect(Tok::RParen, "')'");
      const bool ok = info->arity < 0 ? args.size() >= 2 : args.size() == static_cast<std::size_t>(info->arity);
      if (!ok) {
        const std::string expected = info->arity < 0 ? "at least 2" : std::to_string(info->arity);
        throw ParseError("function '" + std::string(id.text) + "' expects " + expected + " argument" +
                             (info->arity == 1 ? "" : "s") + ", got " + std::to_string(args.size()),
                         id.line, id.column);
      }
      return make_call(info->fn, std::move(args));
    }
    const auto it = std::find(vars_.begin(), vars_.end(), id.text);
    if (it == vars_.end()) {
      throw ParseError("unknown identifier '" + std::string(id.text) + "'", id.line, id.column);
    }
    return make_variable(static_cast<std::size_t>(it - vars_.begin()));
  }

  Lexer lexer_;
  const std::vector<std::string>& vars_;
  Token tok_;
};

// ---------------------------------------------------------------------------
// Tree builders with light folding (used by differentiate/simplify).

bool is_const(const NodePtr& n, double v) {
  return n->kind == NodeKind::Constant && n->value == v;
}

bool is_const(const NodePtr& n) { return n->kind == NodeKind::Constant; }

NodePtr fold_or(NodeKind kind, double v, std::vector<NodePtr> args) {
  if (std::isfinite(v)) return make_constant(v);
  return make_node(kind, std::move(args));
}

NodePtr neg(const NodePtr& a) {
  if (is_const(a)) return make_constant(-a->value);
  if (a->kind == NodeKind::Negate) return a->args[0];
  return make_node(NodeKind::Negate, {a});
}

NodePtr add(const NodePtr& a, const NodePtr& b) {
  if (is_const(a, 0.0)) return b;
  if (is_const(b, 0.0)) return a;
  if (is_const(a) && is_const(b)) return fold_or(NodeKind::Add, a->value + b->value, {a, b});
  if (b->kind == NodeKind::Negate) return make_node(NodeKind::Subtract, {a, b->args[0]});
  return make_node(NodeKind::Add, {a, b});
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
  if (is_const(b, 0.0)) return a;
  if (is_const(a, 0.0)) return neg(b);
  if (is_const(a) && is_const(b)) return fold_or(NodeKind::Subtract, a->value - b->value, {a, b});
  if (b->kind == NodeKind::Negate) return make_node(NodeKind::Add, {a, b->args[0]});
  return make_node(NodeKind::Subtract, {a, b});
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
  if (is_const(a, 0.0) || is_const(b, 0.0)) return make_constant(0.0);
  if (is_const(a, 1.0)) return b;
  if (is_const(b, 1.0)) return a;
  if (is_const(a, -1.0)) return neg(b);
  if (is_const(b, -1.0)) return neg(a);
  if (is_const(a) && is_const(b)) return fold_or(NodeKind::Multiply, a->value * b->value, {a, b});
  if (a->kind == NodeKind::Negate) return neg(mul(a->args[0], b));
  if (b->kind == NodeKind::Negate) return neg(mul(a, b->args[0]));
  return make_node(NodeKind::Multiply, {a, b});
}

NodePtr div(const NodePtr& a, const NodePtr& b) {
  if (is_const(b, 1.0)) return a;
  if (is_const(a, 0.0) && !is_const(b, 0.0)) return make_constant(0.0);
  if (is_const(a) && is_const(b) && b->value != 0.0) {
    return fold_or(NodeKind::Divide, a->value / b->value, {a, b});
  }
  return make_node(NodeKind::Divide, {a, b});
}

NodePtr pow_node(const NodePtr& a, const NodePtr& b) {
  if (is_const(b, 1.0)) return a;
  if (is_const(b, 0.0)) return make_constant(1.0);
  return make_node(NodeKind::Power, {a, b});
}

NodePtr call1(Intrinsic fn, const NodePtr& a) { return make_call(fn, {a}); }

// Binary min/max chain from a variadic call.
NodePtr pairwise(Intrinsic fn, const std::vector<NodePtr>& args) {
  NodePtr acc = args[0];
  for (std::size_t i = 1; i < args.size(); ++i) acc = make_call(fn, {acc, args[i]});
  return acc;
}

NodePtr derive(const NodePtr& n, std::size_t var) {
  if (!node_references(*n, var)) return make_constant(0.0);
  const auto& a = n->args;
  switch (n->kind) {
    case NodeKind::Constant: return make_constant(0.0);
    case NodeKind::Variable: return make_constant(n->index == var ? 1.0 : 0.0);
    case NodeKind::Negate: return neg(derive(a[0], var));
    case NodeKind::Add: return add(derive(a[0], var), derive(a[1], var));
    case NodeKind::Subtract: return sub(derive(a[0], var), derive(a[1], var));
    case NodeKind::Multiply:
      return add(mul(derive(a[0], var), a[1]), mul(a[0], derive(a[1], var)));
    case NodeKind::Divide: {
      const NodePtr num = sub(mul(derive(a[0], var), a[1]), mul(a[0], derive(a[1], var)));
      return div(num, pow_node(a[1], make_constant(2.0)));
    }
    case NodeKind::Power: {
      const NodePtr& base = a[0];
      const NodePtr& ex = a[1];
      if (!node_references(*ex, var)) {
        const NodePtr reduced =
            is_const(ex) ? make_constant(ex->value - 1.0) : sub(ex, make_constant(1.0));
        return mul(mul(ex, pow_node(base, reduced)), derive(base, var));
      }
      if (!node_references(*base, var)) {
        return mul(mul(n, call1(Intrinsic::Ln, base)), derive(ex, var));
      }
      const NodePtr inner = add(mul(derive(ex, var), call1(Intrinsic::Ln, base)),
                                div(mul(ex, derive(base, var)), base));
      return mul(n, inner);
    }
    case NodeKind::Call: {
      switch (n->fn) {
        case Intrinsic::Sin: return mul(call1(Intrinsic::Cos, a[0]), derive(a[0], var));
        case Intrinsic::Cos: return neg(mul(call1(Intrinsic::Sin, a[0]), derive(a[0], var)));
        case Intrinsic::Tan:
          return div(derive(a[0], var), pow_node(call1(Intrinsic::Cos, a[0]), make_constant(2.0)));
        case Intrinsic::Exp: return mul(n, derive(a[0], var));
        case Intrinsic::Ln: return div(derive(a[0], var), a[0]);
        case Intrinsic::Sqrt: return div(derive(a[0], var), mul(make_constant(2.0), n));
        case Intrinsic::Abs: return make_kink(KinkRule::Abs, {a[0], derive(a[0], var)});
        case Intrinsic::Sign: return make_kink(KinkRule::Sign, {a[0]});
        case Intrinsic::Min:
        case Intrinsic::Max: {
          if (a.size() > 2) return derive(pairwise(n->fn, a), var);
          const KinkRule rule = n->fn == Intrinsic::Min ? KinkRule::Min : KinkRule::Max;
          return make_kink(rule, {a[0], a[1], derive(a[0], var), derive(a[1], var)});
        }
        case Intrinsic::Pow: return derive(make_node(NodeKind::Power, {a[0], a[1]}), var);
      }
      break;
    }
    case NodeKind::Kink:
      // Second derivatives through kinks are piecewise zero or piecewise
      // smooth; select the branch the same way the first derivative does.
      switch (n->rule) {
        case KinkRule::Abs:
          return make_kink(KinkRule::Abs, {a[0], derive(a[1], var)});
        case KinkRule::Sign: return make_constant(0.0);
        case KinkRule::Min:
        case KinkRule::Max:
          return make_kink(n->rule, {a[0], a[1], derive(a[2], var), derive(a[3], var)});
      }
  }
  return make_constant(0.0);
}

NodePtr simplify_node(const NodePtr& n) {
  if (n->args.empty()) return n;
  std::vector<NodePtr> args;
  args.reserve(n->args.size());
  for (const auto& a : n->args) args.push_back(simplify_node(a));
  switch (n->kind) {
    case NodeKind::Negate: return neg(args[0]);
    case NodeKind::Add: return add(args[0], args[1]);
    case NodeKind::Subtract: return sub(args[0], args[1]);
    case NodeKind::Multiply: return mul(args[0], args[1]);
    case NodeKind::Divide: return div(args[0], args[1]);
    case NodeKind::Power: return pow_node(args[0], args[1]);
    case NodeKind::Call: return make_call(n->fn, std::move(args));
    case NodeKind::Kink: return make_kink(n->rule, std::move(args));
    default: return n;
  }
}

NodePtr rebind(const NodePtr& n, const std::vector<std::size_t>& map, std::optional<std::size_t> hole,
               const NodePtr& filler) {
  if (n->kind == NodeKind::Variable) {
    if (hole && n->index == *hole) return filler;
    return make_variable(map[n->index]);
  }
  if (n->args.empty()) return n;
  auto copy = std::make_shared<ExprNode>(*n);
  for (auto& a : copy->args) a = rebind(a, map, hole, filler);
  return copy;
}

bool same_tree(const ExprNode& a, const std::vector<std::string>& va, const ExprNode& b,
               const std::vector<std::string>& vb) {
  if (a.kind != b.kind || a.args.size() != b.args.size()) return false;
  switch (a.kind) {
    case NodeKind::Constant:
      if (std::memcmp(&a.value, &b.value, sizeof(double)) != 0) return false;
      break;
    case NodeKind::Variable:
      if (va.at(a.index) != vb.at(b.index)) return false;
      break;
    case NodeKind::Call:
      if (a.fn != b.fn) return false;
      break;
    case NodeKind::Kink:
      if (a.rule != b.rule) return false;
      break;
    default: break;
  }
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    if (!same_tree(*a.args[i], va, *b.args[i], vb)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Display rendering

std::string superscript(long k) {
  static const char* digits[] = {"⁰", "¹", "²", "³", "⁴", "⁵", "⁶", "⁷", "⁸", "⁹"};
  std::string s = std::to_string(k);
  std::string out;
  for (char c : s) out += c == '-' ? "⁻" : digits[c - '0'];
  return out;
}

void display(const ExprNode& n, const std::vector<std::string>& names, std::string& out);

void display_child(const ExprNode& c, int min_prec, const std::vector<std::string>& names,
                   std::string& out) {
  if (precedence(c) < min_prec) {
    out += '(';
    display(c, names, out);
    out += ')';
  } else {
    display(c, names, out);
  }
}

void display(const ExprNode& n, const std::vector<std::string>& names, std::string& out) {
  switch (n.kind) {
    case NodeKind::Constant: out += format_number(n.value); return;
    case NodeKind::Variable: out += names.at(n.index); return;
    case NodeKind::Negate:
      out += "−";
      display_child(*n.args[0], 3, names, out);
      return;
    case NodeKind::Add:
    case NodeKind::Subtract:
      display_child(*n.args[0], 1, names, out);
      out += n.kind == NodeKind::Add ? " + " : " − ";
      display_child(*n.args[1], 2, names, out);
      return;
    case NodeKind::Multiply:
      display_child(*n.args[0], 2, names, out);
      if (n.args[0]->kind != NodeKind::Constant || n.args[1]->kind == NodeKind::Constant) out += "·";
      display_child(*n.args[1], 3, names, out);
      return;
    case NodeKind::Divide:
      display_child(*n.args[0], 2, names, out);
      out += "/";
      display_child(*n.args[1], 3, names, out);
      return;
    case NodeKind::Power: {
      const ExprNode& ex = *n.args[1];
      display_child(*n.args[0], 5, names, out);
      if (ex.kind == NodeKind::Constant && ex.value == std::trunc(ex.value) && std::fabs(ex.value) < 1e6) {
        out += superscript(static_cast<long>(ex.value));
      } else {
        out += '^';
        display_child(ex, 3, names, out);
      }
      return;
    }
    default: print(n, names, out); return;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// ScalarExpr

ScalarExpr::ScalarExpr(NodePtr root, std::shared_ptr<const std::vector<std::string>> variables)
    : root_(std::move(root)), variables_(std::move(variables)) {}

double ScalarExpr::eval(std::span<const double> values, EvalFlags* flags) const {
  if (values.size() < variables_->size()) {
    throw DimensionError("expression over " + std::to_string(variables_->size()) +
                         " variables evaluated with " + std::to_string(values.size()) + " values");
  }
  return Evaluator{values, flags, *variables_}(*root_);
}

double ScalarExpr::eval(const std::map<std::string, double>& point, EvalFlags* flags) const {
  std::vector<double> values(variables_->size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto it = point.find((*variables_)[i]);
    if (it == point.end()) throw DimensionError("point does not assign variable '" + (*variables_)[i] + "'");
    values[i] = it->second;
  }
  return eval(std::span<const double>(values), flags);
}

bool ScalarExpr::references(std::size_t index) const { return node_references(*root_, index); }

bool ScalarExpr::references(std::string_view name) const {
  const auto it = std::find(variables_->begin(), variables_->end(), name);
  return it != variables_->end() && references(static_cast<std::size_t>(it - variables_->begin()));
}

bool ScalarExpr::is_zero() const { return root_->kind == NodeKind::Constant && root_->value == 0.0; }

bool ScalarExpr::is_constant() const {
  for (std::size_t i = 0; i < variables_->size(); ++i) {
    if (references(i)) return false;
  }
  return true;
}

std::string ScalarExpr::to_string() const { return node_text(*root_, *variables_); }

ScalarExpr parse(std::string_view source, std::vector<std::string> declared_vars) {
  for (std::size_t i = 0; i < declared_vars.size(); ++i) {
    if (find_intrinsic(declared_vars[i])) {
      throw ParseError("variable name '" + declared_vars[i] + "' shadows an intrinsic", 1, 1);
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (declared_vars[i] == declared_vars[j]) {
        throw ParseError("variable '" + declared_vars[i] + "' declared twice", 1, 1);
      }
    }
  }
  auto vars = std::make_shared<const std::vector<std::string>>(std::move(declared_vars));
  Parser p(source, *vars);
  NodePtr root = p.parse_all();
  return ScalarExpr(std::move(root), std::move(vars));
}

ScalarExpr differentiate(const ScalarExpr& e, std::string_view var) {
  const auto& vars = e.variables();
  const auto it = std::find(vars.begin(), vars.end(), var);
  if (it == vars.end()) {
    throw DimensionError("cannot differentiate with respect to undeclared variable '" + std::string(var) + "'");
  }
  return ScalarExpr(derive(e.root(), static_cast<std::size_t>(it - vars.begin())), e.shared_variables());
}

ScalarExpr substitute(const ScalarExpr& outer, std::string_view var, const ScalarExpr& inner) {
  const auto& ov = outer.variables();
  const auto& iv = inner.variables();
  std::optional<std::size_t> hole;
  std::vector<std::size_t> map(ov.size(), 0);
  for (std::size_t i = 0; i < ov.size(); ++i) {
    if (ov[i] == var) {
      hole = i;
      continue;
    }
    const auto it = std::find(iv.begin(), iv.end(), ov[i]);
    if (it == iv.end()) {
      if (outer.references(i)) {
        throw DimensionError("substitution leaves variable '" + ov[i] + "' undeclared");
      }
      continue;
    }
    map[i] = static_cast<std::size_t>(it - iv.begin());
  }
  return ScalarExpr(simplify_node(rebind(outer.root(), map, hole, inner.root())), inner.shared_variables());
}

ScalarExpr negate(const ScalarExpr& e) { return ScalarExpr(neg(e.root()), e.shared_variables()); }

ScalarExpr sum(const ScalarExpr& a, const ScalarExpr& b) {
  if (a.variables() != b.variables()) throw DimensionError("sum of expressions over different variables");
  return ScalarExpr(add(a.root(), b.root()), a.shared_variables());
}

ScalarExpr scaled(double c, const ScalarExpr& e) {
  return ScalarExpr(mul(make_constant(c), e.root()), e.shared_variables());
}

ScalarExpr constant_expr(double c, std::vector<std::string> vars) {
  return ScalarExpr(make_constant(c), std::make_shared<const std::vector<std::string>>(std::move(vars)));
}

ScalarExpr simplify(const ScalarExpr& e) { return ScalarExpr(simplify_node(e.root()), e.shared_variables()); }

bool structurally_equal(const ScalarExpr& a, const ScalarExpr& b) {
  return same_tree(*a.root(), a.variables(), *b.root(), b.variables());
}

std::string to_display(const ScalarExpr& e, const std::map<std::string, std::string>& rename) {
  std::vector<std::string> names = e.variables();
  for (auto& n : names) {
    const auto it = rename.find(n);
    if (it != rename.end()) n = it->second;
  }
  std::string out;
  display(*e.root(), names, out);
  return out;
}

}  // namespace issf
