#include "nlgpe/expression.hpp"

#include "nlgpe/error.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <vector>

namespace nlgpe {

struct Expression::Node {
  enum class Kind { number, var_x, var_y, var_t, neg, add, sub, mul, div, pow, call };
  enum class Fn { sin, cos, exp, sqrt, abs };

  Kind kind = Kind::number;
  Fn fn = Fn::sin;
  double value = 0.0;
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;

  double eval(double x, double y, double t) const {
    switch (kind) {
      case Kind::number: return value;
      case Kind::var_x: return x;
      case Kind::var_y: return y;
      case Kind::var_t: return t;
      case Kind::neg: return -lhs->eval(x, y, t);
      case Kind::add: return lhs->eval(x, y, t) + rhs->eval(x, y, t);
      case Kind::sub: return lhs->eval(x, y, t) - rhs->eval(x, y, t);
      case Kind::mul: return lhs->eval(x, y, t) * rhs->eval(x, y, t);
      case Kind::div: return lhs->eval(x, y, t) / rhs->eval(x, y, t);
      case Kind::pow: return std::pow(lhs->eval(x, y, t), rhs->eval(x, y, t));
      case Kind::call: {
        const double a = lhs->eval(x, y, t);
        switch (fn) {
          case Fn::sin: return std::sin(a);
          case Fn::cos: return std::cos(a);
          case Fn::exp: return std::exp(a);
          case Fn::sqrt: return std::sqrt(a);
          case Fn::abs: return std::abs(a);
        }
      }
    }
    return 0.0;
  }

  bool uses_t() const {
    return kind == Kind::var_t || (lhs && lhs->uses_t()) || (rhs && rhs->uses_t());
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Node = Expression::Node;

NodePtr make(Node::Kind k, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Node>();
  n->kind = k;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

class Parser {
 public:
  Parser(const std::string& s, const std::map<std::string, double>& constants)
      : s_(s), constants_(constants) {}

  NodePtr parse() {
    NodePtr e = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("expression '" + s_ + "': " + what + " at position " + std::to_string(pos_));
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+'))
        lhs = make(Node::Kind::add, lhs, term());
      else if (accept('-'))
        lhs = make(Node::Kind::sub, lhs, term());
      else
        return lhs;
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (accept('*'))
        lhs = make(Node::Kind::mul, lhs, unary());
      else if (accept('/'))
        lhs = make(Node::Kind::div, lhs, unary());
      else
        return lhs;
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Node::Kind::neg, unary());
    if (accept('+')) return unary();
    return power();
  }

  // right associative; binds tighter than unary minus on the left: -x^2 = -(x^2)
  NodePtr power() {
    NodePtr base = primary();
    if (accept('^')) return make(Node::Kind::pow, base, unary());
    return base;
  }

  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      auto n = std::make_shared<Node>();
      n->value = v;
      return n;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
        ++pos_;
      const std::string name = s_.substr(start, pos_ - start);
      if (name == "x") return make(Node::Kind::var_x);
      if (name == "y") return make(Node::Kind::var_y);
      if (name == "t") return make(Node::Kind::var_t);
      static const std::vector<std::pair<std::string, Node::Fn>> fns = {
          {"sin", Node::Fn::sin},   {"cos", Node::Fn::cos}, {"exp", Node::Fn::exp},
          {"sqrt", Node::Fn::sqrt}, {"abs", Node::Fn::abs}};
      for (const auto& [fname, fn] : fns) {
        if (name == fname) {
          if (!accept('(')) fail("expected '(' after " + name);
          NodePtr arg = expr();
          if (!accept(')')) fail("expected ')'");
          auto n = std::make_shared<Node>();
          n->kind = Node::Kind::call;
          n->fn = fn;
          n->lhs = arg;
          return n;
        }
      }
      auto n = std::make_shared<Node>();
      if (name == "pi") {
        n->value = std::numbers::pi;
        return n;
      }
      if (auto it = constants_.find(name); it != constants_.end()) {
        n->value = it->second;
        return n;
      }
      fail("unknown identifier '" + name + "'");
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  const std::string& s_;
  const std::map<std::string, double>& constants_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression Expression::parse(const std::string& text, const std::map<std::string, double>& constants) {
  Expression e;
  e.text_ = text;
  e.root_ = Parser(text, constants).parse();
  return e;
}

double Expression::operator()(double x, double y, double t) const { return root_->eval(x, y, t); }

bool Expression::depends_on_time() const { return root_->uses_t(); }

}  // namespace nlgpe
