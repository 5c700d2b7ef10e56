#include "treediff/render.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "csg.hpp"
#include "treediff/kernels.hpp"

namespace treediff {

namespace detail {

const std::string& leaf_text(const Grammar& g, const SyntaxTree& t) {
  const auto& alt = g.alt(t.rule(), t.alt());
  for (const auto& sym : alt.symbols) {
    if (sym.terminal) return g.token_text(sym.id);
  }
  return leaf_text(g, t.child(0));
}

int digit_value(const std::string& token) {
  if (token.size() != 1) throw std::invalid_argument("not a digit token: '" + token + "'");
  const char c = token[0];
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  throw std::invalid_argument("not a digit token: '" + token + "'");
}

const SyntaxTree& skip_units(const Grammar& g, const SyntaxTree& t) {
  const SyntaxTree* cur = &t;
  while (g.alt(cur->rule(), cur->alt()).head.empty() && cur->children().size() == 1) cur = &cur->child(0);
  return *cur;
}

bool CsgShape::contains(double px, double py) const {
  switch (kind) {
    case Kind::kCircle: {
      if (empty()) return false;
      const double dx = px - cx;
      const double dy = py - cy;
      return dx * dx + dy * dy <= r * r;
    }
    case Kind::kQuad: {
      if (empty()) return false;
      const double dx = px - cx;
      const double dy = py - cy;
      return std::fabs(dx * cos_t + dy * sin_t) <= hw && std::fabs(-dx * sin_t + dy * cos_t) <= hh;
    }
    case Kind::kUnion:
      return left->contains(px, py) || right->contains(px, py);
    case Kind::kDifference:
      return left->contains(px, py) && !right->contains(px, py);
  }
  return false;
}

namespace {

void angle_cos_sin(int degrees, double& c, double& s) {
  static const double h = std::sqrt(0.5);
  static const std::map<int, std::pair<double, double>> exact = {
      {0, {1, 0}},   {45, {h, h}},    {90, {0, 1}},    {135, {-h, h}},
      {180, {-1, 0}}, {225, {-h, -h}}, {270, {0, -1}}, {315, {h, -h}},
  };
  if (auto it = exact.find(((degrees % 360) + 360) % 360); it != exact.end()) {
    c = it->second.first;
    s = it->second.second;
    return;
  }
  const double rad = degrees * 3.14159265358979323846 / 180.0;
  c = std::cos(rad);
  s = std::sin(rad);
}

int angle_value(const std::string& token) {
  const auto pos = token.find_last_not_of("0123456789");
  return std::stoi(token.substr(pos == std::string::npos ? 0 : pos + 1));
}

}  // namespace

CsgShape build_csg(const Grammar& g, const SyntaxTree& t) {
  const SyntaxTree& n = skip_units(g, t);
  const auto& alt = g.alt(n.rule(), n.alt());
  CsgShape s;
  if (alt.head == "Circle") {
    s.kind = CsgShape::Kind::kCircle;
    s.r = kUnitPx * digit_value(leaf_text(g, n.child(0)));
    s.cx = kUnitPx * digit_value(leaf_text(g, n.child(1)));
    s.cy = kUnitPx * digit_value(leaf_text(g, n.child(2)));
  } else if (alt.head == "Quad") {
    s.kind = CsgShape::Kind::kQuad;
    s.cx = kUnitPx * digit_value(leaf_text(g, n.child(0)));
    s.cy = kUnitPx * digit_value(leaf_text(g, n.child(1)));
    s.hw = kUnitPx * digit_value(leaf_text(g, n.child(2))) / 2;
    s.hh = kUnitPx * digit_value(leaf_text(g, n.child(3))) / 2;
    angle_cos_sin(angle_value(leaf_text(g, n.child(4))), s.cos_t, s.sin_t);
  } else if (n.children().size() == 3) {
    const std::string& op = leaf_text(g, n.child(0));
    if (op != "+" && op != "-") throw std::invalid_argument("unknown CSG operator '" + op + "'");
    s.kind = op == "+" ? CsgShape::Kind::kUnion : CsgShape::Kind::kDifference;
    s.left = std::make_unique<CsgShape>(build_csg(g, n.child(1)));
    s.right = std::make_unique<CsgShape>(build_csg(g, n.child(2)));
  } else {
    throw std::invalid_argument("not a CSG2D program node: '" + g.rule(n.rule()).name + "'");
  }
  return s;
}

}  // namespace detail

namespace {

using detail::CsgShape;

constexpr int kSize = kCanvasSize;

void fill_span(Canvas& c, int y, double lo, double hi) {
  // Pixel x is covered when lo <= x + 0.5 <= hi.
  const int x0 = std::max(0, static_cast<int>(std::ceil(lo - 0.5)));
  const int x1 = std::min(kSize - 1, static_cast<int>(std::floor(hi - 0.5)));
  for (int x = x0; x <= x1; ++x) c.at(x, y) = 1.0f;
}

// Intersects [lo, hi] with the dx solving |a * dx + b| <= h.
bool clip_slab(double a, double b, double h, double& lo, double& hi) {
  if (a == 0.0) return std::fabs(b) <= h;
  double p = (-h - b) / a;
  double q = (h - b) / a;
  if (p > q) std::swap(p, q);
  lo = std::max(lo, p);
  hi = std::min(hi, q);
  return lo <= hi;
}

void rasterize(const CsgShape& s, Canvas& out) {
  switch (s.kind) {
    case CsgShape::Kind::kCircle: {
      if (s.empty()) return;
      const double r2 = s.r * s.r;
      for (int y = 0; y < kSize; ++y) {
        const double dy = y + 0.5 - s.cy;
        const double rem = r2 - dy * dy;
        if (rem < 0) continue;
        const double half = std::sqrt(rem);
        fill_span(out, y, s.cx - half, s.cx + half);
      }
      return;
    }
    case CsgShape::Kind::kQuad: {
      if (s.empty()) return;
      for (int y = 0; y < kSize; ++y) {
        const double dy = y + 0.5 - s.cy;
        double lo = -1e300;
        double hi = 1e300;
        if (!clip_slab(s.cos_t, dy * s.sin_t, s.hw, lo, hi)) continue;
        if (!clip_slab(-s.sin_t, dy * s.cos_t, s.hh, lo, hi)) continue;
        fill_span(out, y, s.cx + lo, s.cx + hi);
      }
      return;
    }
    case CsgShape::Kind::kUnion:
    case CsgShape::Kind::kDifference: {
      rasterize(*s.left, out);
      Canvas rhs = Canvas::filled(1, 0.0f);
      rasterize(*s.right, rhs);
      if (s.kind == CsgShape::Kind::kUnion) {
        kernels::max_inplace(out.pixels.data(), rhs.pixels.data(), out.pixels.size());
      } else {
        kernels::subtract_inplace(out.pixels.data(), rhs.pixels.data(), out.pixels.size());
      }
      return;
    }
  }
}

// ---- TinySVG layout ----

struct Item {
  enum class Kind { kRect, kEllipse, kArrange, kMove };
  Kind kind = Kind::kRect;
  double w = 0, h = 0;
  float fill[3] = {0, 0, 0}, stroke[3] = {0, 0, 0};
  bool has_fill = false, has_stroke = false;
  double border = 0;
  bool horizontal = true;
  double gap = 0;
  double dx = 0, dy = 0;
  std::vector<Item> kids;
};

int signed_units(const std::string& sign, const std::string& digit) {
  return (sign == "-" ? -1 : 1) * detail::digit_value(digit);
}

Item build_item(const Grammar& g, const SyntaxTree& t) {
  using detail::leaf_text;
  const SyntaxTree& n = detail::skip_units(g, t);
  const std::string& head = g.alt(n.rule(), n.alt()).head;
  Item it;
  if (head == "Rectangle" || head == "Ellipse") {
    it.kind = head == "Rectangle" ? Item::Kind::kRect : Item::Kind::kEllipse;
    it.w = kUnitPx * detail::digit_value(leaf_text(g, n.child(0)));
    it.h = kUnitPx * detail::digit_value(leaf_text(g, n.child(1)));
    it.has_fill = palette_color(leaf_text(g, n.child(2)), it.fill);
    it.has_stroke = palette_color(leaf_text(g, n.child(3)), it.stroke);
    it.border = detail::digit_value(leaf_text(g, n.child(4)));
  } else if (head == "Arrange") {
    it.kind = Item::Kind::kArrange;
    const std::string& dir = leaf_text(g, n.child(0));
    if (dir != "h" && dir != "v") throw std::invalid_argument("unknown direction '" + dir + "'");
    it.horizontal = dir == "h";
    it.kids.push_back(build_item(g, n.child(1)));
    it.kids.push_back(build_item(g, n.child(2)));
    it.gap = kGapPx * detail::digit_value(leaf_text(g, n.child(3)));
    const Item& a = it.kids[0];
    const Item& b = it.kids[1];
    it.w = it.horizontal ? a.w + it.gap + b.w : std::max(a.w, b.w);
    it.h = it.horizontal ? std::max(a.h, b.h) : a.h + it.gap + b.h;
  } else if (head == "Move") {
    it.kind = Item::Kind::kMove;
    it.kids.push_back(build_item(g, n.child(0)));
    it.dx = kUnitPx * signed_units(leaf_text(g, n.child(1)), leaf_text(g, n.child(2)));
    it.dy = kUnitPx * signed_units(leaf_text(g, n.child(3)), leaf_text(g, n.child(4)));
    it.w = it.kids[0].w;
    it.h = it.kids[0].h;
  } else {
    throw std::invalid_argument("not a TinySVG program node: '" + g.rule(n.rule()).name + "'");
  }
  return it;
}

void put(Canvas& c, int x, int y, const float rgb[3]) {
  for (int k = 0; k < 3; ++k) c.at(x, y, k) = rgb[k];
}

// Pixel index range whose centres fall in [lo, lo + len).
void covered(double lo, double len, int& first, int& last) {
  first = std::max(0, static_cast<int>(std::ceil(lo - 0.5)));
  last = std::min(kSize - 1, static_cast<int>(std::ceil(lo + len - 0.5)) - 1);
}

void paint(const Item& it, Canvas& c, double x0, double y0) {
  switch (it.kind) {
    case Item::Kind::kRect: {
      int xa, xb, ya, yb;
      covered(x0, it.w, xa, xb);
      covered(y0, it.h, ya, yb);
      for (int y = ya; y <= yb; ++y) {
        const double py = y + 0.5;
        for (int x = xa; x <= xb; ++x) {
          const double px = x + 0.5;
          const bool edge = px < x0 + it.border || px >= x0 + it.w - it.border || py < y0 + it.border ||
                            py >= y0 + it.h - it.border;
          if (edge && it.border > 0) {
            if (it.has_stroke) put(c, x, y, it.stroke);
          } else if (it.has_fill) {
            put(c, x, y, it.fill);
          }
        }
      }
      return;
    }
    case Item::Kind::kEllipse: {
      const double a = it.w / 2;
      const double b = it.h / 2;
      if (a <= 0 || b <= 0) return;
      const double cx = x0 + a;
      const double cy = y0 + b;
      const double ia = a - it.border;
      const double ib = b - it.border;
      int xa, xb, ya, yb;
      covered(x0, it.w, xa, xb);
      covered(y0, it.h, ya, yb);
      for (int y = ya; y <= yb; ++y) {
        const double dy = y + 0.5 - cy;
        for (int x = xa; x <= xb; ++x) {
          const double dx = x + 0.5 - cx;
          if ((dx * dx) / (a * a) + (dy * dy) / (b * b) > 1.0) continue;
          const bool inner = ia > 0 && ib > 0 && (dx * dx) / (ia * ia) + (dy * dy) / (ib * ib) < 1.0;
          if (!inner && it.border > 0) {
            if (it.has_stroke) put(c, x, y, it.stroke);
          } else if (it.has_fill) {
            put(c, x, y, it.fill);
          }
        }
      }
      return;
    }
    case Item::Kind::kArrange: {
      const Item& a = it.kids[0];
      const Item& b = it.kids[1];
      if (it.horizontal) {
        paint(a, c, x0, y0 + (it.h - a.h) / 2);
        paint(b, c, x0 + a.w + it.gap, y0 + (it.h - b.h) / 2);
      } else {
        paint(a, c, x0 + (it.w - a.w) / 2, y0);
        paint(b, c, x0 + (it.w - b.w) / 2, y0 + a.h + it.gap);
      }
      return;
    }
    case Item::Kind::kMove:
      paint(it.kids[0], c, x0 + it.dx, y0 + it.dy);
      return;
  }
}

}  // namespace

bool palette_color(const std::string& name, float rgb[3]) {
  struct Entry {
    const char* name;
    float r, g, b;
  };
  static constexpr Entry kPalette[] = {
      {"red", 1, 0, 0},      {"green", 0, 0.5f, 0},     {"blue", 0, 0, 1},  {"yellow", 1, 1, 0},
      {"purple", 0.5f, 0, 0.5f}, {"orange", 1, 0.65f, 0}, {"black", 0, 0, 0}, {"white", 1, 1, 1},
  };
  for (const auto& e : kPalette) {
    if (name == e.name) {
      rgb[0] = e.r;
      rgb[1] = e.g;
      rgb[2] = e.b;
      return true;
    }
  }
  if (name == "none") return false;
  throw std::invalid_argument("unknown colour '" + name + "'");
}

Canvas render_csg2d(const Grammar& g, const SyntaxTree& t) {
  Canvas c = Canvas::filled(1, 0.0f);
  rasterize(detail::build_csg(g, t), c);
  return c;
}

bool csg2d_contains(const Grammar& g, const SyntaxTree& t, double px, double py) {
  return detail::build_csg(g, t).contains(px, py);
}

Canvas render_tinysvg(const Grammar& g, const SyntaxTree& t) {
  Canvas c = Canvas::filled(3, 1.0f);
  const Item root = build_item(g, t);
  paint(root, c, (kSize - root.w) / 2, (kSize - root.h) / 2);
  return c;
}

double iou(const Canvas& a, const Canvas& b) {
  if (!a.same_shape(b)) throw CanvasError("iou: canvas shapes differ");
  if (a.channels != 1) throw CanvasError("iou: needs single-channel canvases");
  const auto counts = kernels::iou_counts(a.pixels.data(), b.pixels.data(), a.pixels.size());
  if (counts.union_ == 0) return 1.0;
  return static_cast<double>(counts.intersection) / static_cast<double>(counts.union_);
}

double pixel_match_fraction(const Canvas& a, const Canvas& b, double tol) {
  if (!a.same_shape(b)) throw CanvasError("pixel_match_fraction: canvas shapes differ");
  std::vector<std::uint8_t> mask(a.pixels.size());
  kernels::exceeds_mask(a.pixels.data(), b.pixels.data(), a.pixels.size(), static_cast<float>(tol), mask.data());
  std::size_t ok = 0;
  const auto ch = static_cast<std::size_t>(a.channels);
  for (std::size_t p = 0; p < a.pixel_count(); ++p) {
    bool bad = false;
    for (std::size_t k = 0; k < ch; ++k) bad = bad || mask[p * ch + k] != 0;
    ok += static_cast<std::size_t>(!bad);
  }
  return static_cast<double>(ok) / static_cast<double>(a.pixel_count());
}

std::vector<std::uint8_t> quantize(const Canvas& c) {
  std::vector<std::uint8_t> out(c.pixels.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const float v = std::clamp(c.pixels[i], 0.0f, 1.0f);
    out[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  return out;
}

}  // namespace treediff
