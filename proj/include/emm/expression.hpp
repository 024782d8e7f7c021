#ifndef EMM_EXPRESSION_HPP
#define EMM_EXPRESSION_HPP

// Small arithmetic expressions over x and y, used for analytic target fields.
// Grammar: + - * / ^ (right associative), unary minus, parentheses, numbers,
// the constant pi and the functions sin, cos, exp, sqrt.

#include <memory>
#include <string>

namespace emm {

class Expression {
public:
  /// Throws ParseError with the column of the first bad token.
  static Expression parse(const std::string &text);

  double operator()(double x, double y) const;
  const std::string &text() const { return text_; }

  struct Node;

private:
  std::string text_;
  std::shared_ptr<const Node> root_;
};

} // namespace emm

#endif // EMM_EXPRESSION_HPP
