#include "subdiff/expression.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <vector>

namespace subdiff {

struct Expression::Node {
  enum class Kind { number, var_x, var_y, negate, add, sub, mul, div, pow, call1, call2 } kind;
  double value = 0.0;
  double (*fn1)(double) = nullptr;
  double (*fn2)(double, double) = nullptr;
  std::shared_ptr<const Node> lhs, rhs;

  double eval(const Point& p) const {
    switch (kind) {
      case Kind::number: return value;
      case Kind::var_x: return p[0];
      case Kind::var_y: return p[1];
      case Kind::negate: return -lhs->eval(p);
      case Kind::add: return lhs->eval(p) + rhs->eval(p);
      case Kind::sub: return lhs->eval(p) - rhs->eval(p);
      case Kind::mul: return lhs->eval(p) * rhs->eval(p);
      case Kind::div: return lhs->eval(p) / rhs->eval(p);
      case Kind::pow: return std::pow(lhs->eval(p), rhs->eval(p));
      case Kind::call1: return fn1(lhs->eval(p));
      case Kind::call2: return fn2(lhs->eval(p), rhs->eval(p));
    }
    return 0.0;
  }
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

NodePtr make(Node::Kind kind, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

double fn_sin(double v) { return std::sin(v); }
double fn_cos(double v) { return std::cos(v); }
double fn_tan(double v) { return std::tan(v); }
double fn_exp(double v) { return std::exp(v); }
double fn_log(double v) { return std::log(v); }
double fn_sqrt(double v) { return std::sqrt(v); }
double fn_abs(double v) { return std::abs(v); }
double fn_min(double a, double b) { return std::min(a, b); }
double fn_max(double a, double b) { return std::max(a, b); }
double fn_pow(double a, double b) { return std::pow(a, b); }

class Parser {
 public:
  explicit Parser(const std::string& text) : s_(text) {}

  NodePtr parse() {
    auto root = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected character '" + std::string(1, s_[pos_]) + "'");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ExpressionError("expression '" + s_ + "': " + msg + " at offset " + std::to_string(pos_));
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
  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  NodePtr expr() {
    auto lhs = term();
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
    auto lhs = unary();
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
    if (accept('-')) return make(Node::Kind::negate, unary());
    if (accept('+')) return unary();
    return power();
  }
  NodePtr power() {
    auto base = primary();
    if (accept('^')) return make(Node::Kind::pow, base, unary());
    return base;
  }
  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (accept('(')) {
      auto inner = expr();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(s_.substr(pos_), &used);
      } catch (const std::exception&) {
        fail("malformed number");
      }
      pos_ += used;
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::number;
      n->value = v;
      return n;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      const std::string name = s_.substr(start, pos_ - start);
      if (name == "x") return make(Node::Kind::var_x);
      if (name == "y") return make(Node::Kind::var_y);
      if (name == "pi") {
        auto n = std::make_shared<Node>();
        n->kind = Node::Kind::number;
        n->value = std::numbers::pi;
        return n;
      }
      return call(name);
    }
    fail("unexpected character '" + std::string(1, c) + "'");
  }
  NodePtr call(const std::string& name) {
    static const std::vector<std::pair<std::string, double (*)(double)>> unary_fns{
        {"sin", fn_sin}, {"cos", fn_cos}, {"tan", fn_tan}, {"exp", fn_exp},
        {"log", fn_log}, {"sqrt", fn_sqrt}, {"abs", fn_abs}};
    static const std::vector<std::pair<std::string, double (*)(double, double)>> binary_fns{
        {"min", fn_min}, {"max", fn_max}, {"pow", fn_pow}};
    for (const auto& [fname, fn] : unary_fns) {
      if (fname != name) continue;
      expect('(');
      auto arg = expr();
      expect(')');
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::call1;
      n->fn1 = fn;
      n->lhs = arg;
      return n;
    }
    for (const auto& [fname, fn] : binary_fns) {
      if (fname != name) continue;
      expect('(');
      auto a = expr();
      expect(',');
      auto b = expr();
      expect(')');
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::call2;
      n->fn2 = fn;
      n->lhs = a;
      n->rhs = b;
      return n;
    }
    fail("unknown identifier '" + name + "'");
  }

  std::string s_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression::Expression(const std::string& source) : source_(source), root_(Parser(source).parse()) {}

double Expression::operator()(const Point& p) const { return root_->eval(p); }

}  // namespace subdiff
