#pragma once

#include <map>
#include <memory>
#include <string>

namespace nlgpe {

/// Restricted arithmetic expressions over x, y, t for coefficient fields.
///
/// Grammar: numbers, the variables x, y, t, named constants (pi plus any
/// supplied at parse time), + - * / ^, unary minus, parentheses and the
/// functions sin, cos, exp, sqrt, abs. Parsing happens once; evaluation walks
/// an immutable tree and is safe to call concurrently.
class Expression {
 public:
  struct Node;

  static Expression parse(const std::string& text, const std::map<std::string, double>& constants = {});

  double operator()(double x, double y, double t) const;
  const std::string& text() const { return text_; }
  bool depends_on_time() const;

 private:
  std::string text_;
  std::shared_ptr<const Node> root_;
};

}  // namespace nlgpe
