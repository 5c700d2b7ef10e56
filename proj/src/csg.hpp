#pragma once

#include <memory>
#include <string>

#include "treediff/grammar.hpp"
#include "treediff/syntax_tree.hpp"

namespace treediff::detail {

/// First terminal of a leaf-valued node (number, angle, colour, op ...).
const std::string& leaf_text(const Grammar& g, const SyntaxTree& t);
/// Value of a single-character hex digit token.
int digit_value(const std::string& token);
/// Follows single-child nodes without a head keyword down to the first node
/// that has one.
const SyntaxTree& skip_units(const Grammar& g, const SyntaxTree& t);

struct CsgShape {
  enum class Kind { kCircle, kQuad, kUnion, kDifference };
  Kind kind = Kind::kCircle;
  // Pixel units: circle centre and radius, or quad centre, half extents
  // and the rotation's cosine/sine.
  double cx = 0, cy = 0, r = 0;
  double hw = 0, hh = 0, cos_t = 1, sin_t = 0;
  std::unique_ptr<CsgShape> left, right;

  bool contains(double px, double py) const;
  bool primitive() const { return kind == Kind::kCircle || kind == Kind::kQuad; }
  bool empty() const { return kind == Kind::kCircle ? r <= 0 : (hw <= 0 || hh <= 0); }
};

CsgShape build_csg(const Grammar& g, const SyntaxTree& t);

}  // namespace treediff::detail
