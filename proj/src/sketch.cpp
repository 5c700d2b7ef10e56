#include <algorithm>
#include <cmath>
#include <vector>

#include "csg.hpp"
#include "treediff/render.hpp"
#include "treediff/rng.hpp"

namespace treediff {

namespace {

using detail::CsgShape;

constexpr double kPi = 3.14159265358979323846;
// Offset either side of an outline sample used to test for a composite edge.
constexpr double kProbe = 0.75;
constexpr double kPointJitter = 0.8;
constexpr double kEndpointJitter = 1.0;
constexpr double kArcSpacing = 12.0;
constexpr int kSplineSubdiv = 8;

struct Pt {
  double x = 0, y = 0;
};

struct Sample {
  Pt p;
  double nx = 0, ny = 0;
  double param = 0;  // angle for circles, edge fraction for quads
};

void collect_primitives(const CsgShape& s, std::vector<const CsgShape*>& out) {
  if (s.primitive()) {
    if (!s.empty()) out.push_back(&s);
    return;
  }
  collect_primitives(*s.left, out);
  collect_primitives(*s.right, out);
}

bool on_boundary(const CsgShape& root, const Sample& s) {
  return root.contains(s.p.x - kProbe * s.nx, s.p.y - kProbe * s.ny) !=
         root.contains(s.p.x + kProbe * s.nx, s.p.y + kProbe * s.ny);
}

Pt jitter(Pt p, double sd, Rng& rng) { return {p.x + sd * rng.normal(), p.y + sd * rng.normal()}; }

// Uniform Catmull-Rom spline through `ctrl`, ends clamped by repetition.
std::vector<Pt> catmull_rom(const std::vector<Pt>& ctrl) {
  if (ctrl.size() < 2) return ctrl;
  std::vector<Pt> out;
  const std::size_t n = ctrl.size();
  auto at = [&](std::ptrdiff_t i) { return ctrl[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, n - 1))]; };
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Pt p0 = at(static_cast<std::ptrdiff_t>(i) - 1);
    const Pt p1 = at(static_cast<std::ptrdiff_t>(i));
    const Pt p2 = at(static_cast<std::ptrdiff_t>(i) + 1);
    const Pt p3 = at(static_cast<std::ptrdiff_t>(i) + 2);
    for (int k = 0; k < kSplineSubdiv; ++k) {
      const double t = static_cast<double>(k) / kSplineSubdiv;
      const double t2 = t * t;
      const double t3 = t2 * t;
      auto blend = [&](double a, double b, double c, double d) {
        return 0.5 * (2 * b + (-a + c) * t + (2 * a - 5 * b + 4 * c - d) * t2 + (-a + 3 * b - 3 * c + d) * t3);
      };
      out.push_back({blend(p0.x, p1.x, p2.x, p3.x), blend(p0.y, p1.y, p2.y, p3.y)});
    }
  }
  out.push_back(ctrl.back());
  return out;
}

void draw_polyline(Canvas& c, const std::vector<Pt>& pts, double thickness) {
  const double reach = thickness / 2 + 0.5;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Pt a = pts[i];
    const Pt b = pts[i + 1];
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - reach)));
    const int x1 = std::min(c.width - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - reach)));
    const int y1 = std::min(c.height - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + reach)));
    const double vx = b.x - a.x;
    const double vy = b.y - a.y;
    const double len2 = vx * vx + vy * vy;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double px = x + 0.5 - a.x;
        const double py = y + 0.5 - a.y;
        const double t = len2 > 0 ? std::clamp((px * vx + py * vy) / len2, 0.0, 1.0) : 0.0;
        const double dx = px - t * vx;
        const double dy = py - t * vy;
        const double v = std::clamp(reach - std::sqrt(dx * dx + dy * dy), 0.0, 1.0);
        float& dst = c.at(x, y);
        dst = std::max(dst, static_cast<float>(v));
      }
    }
  }
}

double stroke_thickness(Rng& rng) { return 1.0 + 1.5 * rng.uniform(); }

// Runs of consecutive boundary samples; [first, last] inclusive indices,
// wrapping around when `closed`.
std::vector<std::pair<std::size_t, std::size_t>> runs(const std::vector<bool>& on, bool closed) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const std::size_t n = on.size();
  if (n == 0) return out;
  std::size_t start = 0;
  if (closed) {
    while (start < n && on[start]) ++start;
    if (start == n) return {{0, n - 1}};
  }
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = (start + k) % n;
    if (!on[i]) continue;
    std::size_t len = 1;
    while (k + len < n && on[(start + k + len) % n]) ++len;
    out.emplace_back(i, (i + len - 1) % n);
    k += len - 1;
  }
  return out;
}

void sketch_circle(const CsgShape& root, const CsgShape& s, Rng& rng, Canvas& c) {
  const auto count = static_cast<std::size_t>(std::max(16.0, std::ceil(2 * kPi * s.r)));
  std::vector<bool> on(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double phi = 2 * kPi * static_cast<double>(k) / static_cast<double>(count);
    Sample smp{{s.cx + s.r * std::cos(phi), s.cy + s.r * std::sin(phi)}, std::cos(phi), std::sin(phi), phi};
    on[k] = on_boundary(root, smp);
  }
  const Pt centre = jitter({s.cx, s.cy}, kEndpointJitter, rng);
  const double radius = s.r + kEndpointJitter * rng.normal();
  for (const auto& [first, last] : runs(on, true)) {
    double from = 2 * kPi * static_cast<double>(first) / static_cast<double>(count);
    double sweep;
    if (first == 0 && last == count - 1) {
      // Whole circle: random start and an over- or undershooting end.
      from = 2 * kPi * rng.uniform();
      sweep = 2 * kPi + 0.35 * rng.normal();
    } else {
      const std::size_t span = (last + count - first) % count + 1;
      sweep = 2 * kPi * static_cast<double>(span - 1) / static_cast<double>(count);
    }
    const int pieces = std::max(2, static_cast<int>(std::ceil(std::fabs(sweep) * radius / kArcSpacing)));
    std::vector<Pt> ctrl;
    for (int i = 0; i <= pieces; ++i) {
      const double phi = from + sweep * i / pieces;
      ctrl.push_back(jitter({centre.x + radius * std::cos(phi), centre.y + radius * std::sin(phi)}, kPointJitter, rng));
    }
    draw_polyline(c, catmull_rom(ctrl), stroke_thickness(rng));
  }
}

void sketch_quad(const CsgShape& root, const CsgShape& s, Rng& rng, Canvas& c) {
  // Corners counter-clockwise in the shape frame, mapped to pixels.
  const double ux = s.cos_t, uy = s.sin_t, vx = -s.sin_t, vy = s.cos_t;
  const double sx[4] = {-1, 1, 1, -1};
  const double sy[4] = {-1, -1, 1, 1};
  Pt corner[4];
  for (int k = 0; k < 4; ++k) {
    corner[k] = {s.cx + sx[k] * s.hw * ux + sy[k] * s.hh * vx, s.cy + sx[k] * s.hw * uy + sy[k] * s.hh * vy};
  }
  for (int e = 0; e < 4; ++e) {
    const Pt a = corner[e];
    const Pt b = corner[(e + 1) % 4];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const double mx = (a.x + b.x) / 2 - s.cx;
    const double my = (a.y + b.y) / 2 - s.cy;
    const double ml = std::hypot(mx, my);
    const double nx = mx / ml;
    const double ny = my / ml;
    const auto count = static_cast<std::size_t>(std::max(2.0, std::ceil(len)) + 1);
    std::vector<bool> on(count);
    std::vector<Pt> pts(count);
    for (std::size_t k = 0; k < count; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(count - 1);
      pts[k] = {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
      on[k] = on_boundary(root, {pts[k], nx, ny, t});
    }
    for (const auto& [first, last] : runs(on, false)) {
      const Pt p0 = pts[first];
      const Pt p1 = pts[last];
      if (std::hypot(p1.x - p0.x, p1.y - p0.y) < 1.0) continue;
      auto along = [&](double t) { return Pt{p0.x + t * (p1.x - p0.x), p0.y + t * (p1.y - p0.y)}; };
      const double t1 = std::clamp(0.5 + 0.05 * rng.normal(), 0.05, 0.95);
      const double t2 = std::clamp(0.75 + 0.05 * rng.normal(), t1 + 0.01, 0.99);
      std::vector<Pt> ctrl = {jitter(p0, kEndpointJitter, rng), jitter(along(t1), kPointJitter, rng),
                              jitter(along(t2), kPointJitter, rng), jitter(p1, kEndpointJitter, rng)};
      draw_polyline(c, catmull_rom(ctrl), stroke_thickness(rng));
    }
  }
}

}  // namespace

Canvas sketch_render(const Grammar& g, const SyntaxTree& t, std::uint64_t seed) {
  const CsgShape root = detail::build_csg(g, t);
  std::vector<const CsgShape*> prims;
  collect_primitives(root, prims);
  Rng rng(seed);
  Canvas c = Canvas::filled(1, 0.0f);
  for (const CsgShape* p : prims) {
    if (p->kind == CsgShape::Kind::kCircle) {
      sketch_circle(root, *p, rng, c);
    } else {
      sketch_quad(root, *p, rng, c);
    }
  }
  return c;
}

}  // namespace treediff
