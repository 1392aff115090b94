#pragma once

#include "subdiff/mesh.hpp"

#include <memory>
#include <stdexcept>
#include <string>

namespace subdiff {

class ExpressionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Compiled scalar expression in the variables x and y.
///
/// Grammar: numbers, `x`, `y`, `pi`, binary `+ - * / ^` (right-associative
/// power), unary minus, parentheses and the functions sin, cos, tan, exp,
/// log, sqrt, abs (one argument) and min, max, pow (two arguments).
class Expression {
 public:
  explicit Expression(const std::string& source);
  double operator()(const Point& p) const;
  const std::string& source() const noexcept { return source_; }

  struct Node;

 private:
  std::string source_;
  std::shared_ptr<const Node> root_;
};

}  // namespace subdiff
