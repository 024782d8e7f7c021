#include "emm/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>

#include "emm/error.hpp"

namespace emm {

struct Expression::Node {
  enum Kind { Number, X, Y, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Exp, Sqrt };
  Kind kind = Number;
  double value = 0.0;
  std::shared_ptr<const Node> a, b;

  double eval(double x, double y) const {
    switch (kind) {
    case Number: return value;
    case X: return x;
    case Y: return y;
    case Neg: return -a->eval(x, y);
    case Add: return a->eval(x, y) + b->eval(x, y);
    case Sub: return a->eval(x, y) - b->eval(x, y);
    case Mul: return a->eval(x, y) * b->eval(x, y);
    case Div: return a->eval(x, y) / b->eval(x, y);
    case Pow: return std::pow(a->eval(x, y), b->eval(x, y));
    case Sin: return std::sin(a->eval(x, y));
    case Cos: return std::cos(a->eval(x, y));
    case Exp: return std::exp(a->eval(x, y));
    case Sqrt: return std::sqrt(a->eval(x, y));
    }
    return 0.0;
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;

NodePtr make(Expression::Node::Kind k, NodePtr a = nullptr, NodePtr b = nullptr,
             double v = 0.0) {
  auto n = std::make_shared<Expression::Node>();
  n->kind = k;
  n->a = std::move(a);
  n->b = std::move(b);
  n->value = v;
  return n;
}

class Parser {
public:
  explicit Parser(const std::string &s) : s_(s) {}

  NodePtr parse() {
    NodePtr n = sum();
    skip();
    if (pos_ != s_.size())
      fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return n;
  }

private:
  [[noreturn]] void fail(const std::string &what) const {
    throw ParseError("expression '" + s_ + "' column " +
                     std::to_string(pos_ + 1) + ": " + what);
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_])))
      ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr sum() {
    NodePtr n = product();
    for (;;) {
      if (accept('+'))
        n = make(Expression::Node::Add, n, product());
      else if (accept('-'))
        n = make(Expression::Node::Sub, n, product());
      else
        return n;
    }
  }

  NodePtr product() {
    NodePtr n = unary();
    for (;;) {
      if (accept('*'))
        n = make(Expression::Node::Mul, n, unary());
      else if (accept('/'))
        n = make(Expression::Node::Div, n, unary());
      else
        return n;
    }
  }

  // -x^2 parses as -(x^2).
  NodePtr unary() {
    if (accept('-'))
      return make(Expression::Node::Neg, unary());
    if (accept('+'))
      return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = atom();
    if (accept('^'))
      return make(Expression::Node::Pow, base, unary());
    return base;
  }

  NodePtr atom() {
    skip();
    if (pos_ >= s_.size())
      fail("unexpected end of input");
    const char c = s_[pos_];
    if (accept('(')) {
      NodePtr n = sum();
      if (!accept(')'))
        fail("expected ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char *begin = s_.c_str() + pos_;
      char *end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin)
        fail("bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      return make(Expression::Node::Number, nullptr, nullptr, v);
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_])))
        ++pos_;
      const std::string name = s_.substr(start, pos_ - start);
      if (name == "x")
        return make(Expression::Node::X);
      if (name == "y")
        return make(Expression::Node::Y);
      if (name == "pi")
        return make(Expression::Node::Number, nullptr, nullptr, std::numbers::pi);
      Expression::Node::Kind k;
      if (name == "sin")
        k = Expression::Node::Sin;
      else if (name == "cos")
        k = Expression::Node::Cos;
      else if (name == "exp")
        k = Expression::Node::Exp;
      else if (name == "sqrt")
        k = Expression::Node::Sqrt;
      else {
        pos_ = start;
        fail("unknown identifier '" + name + "'");
      }
      if (!accept('('))
        fail("expected '(' after " + name);
      NodePtr arg = sum();
      if (!accept(')'))
        fail("expected ')'");
      return make(k, arg);
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  const std::string &s_;
  std::size_t pos_ = 0;
};

} // namespace

Expression Expression::parse(const std::string &text) {
  Expression e;
  e.text_ = text;
  e.root_ = Parser(e.text_).parse();
  return e;
}

double Expression::operator()(double x, double y) const {
  return root_ ? root_->eval(x, y) : 0.0;
}

} // namespace emm
