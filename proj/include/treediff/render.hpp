#pragma once

#include <cstdint>

#include "treediff/canvas.hpp"
#include "treediff/grammar.hpp"
#include "treediff/syntax_tree.hpp"

namespace treediff {

/// Pixels per grammar unit for CSG2D coordinates and TinySVG sizes.
inline constexpr double kUnitPx = 8.0;
/// Pixels per unit of an Arrange gap.
inline constexpr double kGapPx = 4.0;

/// Binary occupancy canvas (1 channel). `+` is pixelwise max, `-` is
/// A * (1 - B). Circle r x y is the disk of radius 8r around (8x, 8y);
/// Quad x y w h theta is an 8w x 8h rectangle centred at (8x, 8y) rotated by
/// theta degrees about its centre. A pixel is set when its centre lies in
/// the shape; zero-size shapes are empty.
Canvas render_csg2d(const Grammar& g, const SyntaxTree& t);

/// Analytic occupancy of a CSG2D program at a point in pixel coordinates.
bool csg2d_contains(const Grammar& g, const SyntaxTree& t, double px, double py);

/// RGB layout rendering of TinySVG (and Rainbow) programs on white.
///
/// Primitives occupy 8w x 8h boxes with an inside border of `border` px;
/// ellipses are inscribed in their box. Arrange places A then B along the
/// direction with a 4 px per unit gap, centring each across the other axis.
/// Move shifts its drawing by 8 px per unit without changing its box. The
/// scene box is centred on the canvas, painted A before B, and clipped.
Canvas render_tinysvg(const Grammar& g, const SyntaxTree& t);

/// Stochastic hand-drawn rendering of a CSG2D program's outline
/// (1 channel, strokes at 1 on 0). Deterministic per seed.
Canvas sketch_render(const Grammar& g, const SyntaxTree& t, std::uint64_t seed);

/// Palette colour by token name; `none` yields false.
bool palette_color(const std::string& name, float rgb[3]);

/// |A n B| / |A u B| over single-channel canvases thresholded at 0.5;
/// 1 when both are empty.
double iou(const Canvas& a, const Canvas& b);

/// Fraction of pixels whose largest channel difference is <= tol.
double pixel_match_fraction(const Canvas& a, const Canvas& b, double tol = 0.005);

/// 8-bit quantisation used for PNG export and compression measurements.
std::vector<std::uint8_t> quantize(const Canvas& c);

}  // namespace treediff
