#include "treediff/environment.hpp"

#include <cstdlib>
#include <stdexcept>

#include "treediff/render.hpp"

namespace treediff {

namespace {

EnvKind parse_kind(std::string_view name) {
  if (name == "csg2d") return EnvKind::kCsg2d;
  if (name == "csg2d-sketch") return EnvKind::kCsg2dSketch;
  if (name == "tinysvg") return EnvKind::kTinySvg;
  if (name == "rainbow") return EnvKind::kRainbow;
  throw std::invalid_argument("unknown environment '" + std::string(name) +
                              "' (expected csg2d, csg2d-sketch, tinysvg or rainbow)");
}

const char* grammar_file(EnvKind k) {
  switch (k) {
    case EnvKind::kCsg2d:
    case EnvKind::kCsg2dSketch:
      return "csg2d.grammar";
    case EnvKind::kTinySvg:
      return "tinysvg.grammar";
    case EnvKind::kRainbow:
      return "rainbow.grammar";
  }
  return "";
}

}  // namespace

std::filesystem::path default_grammar_dir() {
  if (const char* dir = std::getenv("TREEDIFF_GRAMMAR_DIR"); dir != nullptr && *dir != '\0') return dir;
  return TREEDIFF_GRAMMAR_DIR;
}

Environment Environment::load(std::string_view name, const std::filesystem::path& grammar_dir) {
  const EnvKind kind = parse_kind(name);
  return with_grammar(name, load_grammar_file(grammar_dir / grammar_file(kind)));
}

Environment Environment::with_grammar(std::string_view name, Grammar grammar) {
  Environment env;
  env.kind_ = parse_kind(name);
  env.name_ = std::string(name);
  env.grammar_ = std::make_shared<const Grammar>(std::move(grammar));
  return env;
}

const std::vector<std::string>& Environment::names() {
  static const std::vector<std::string> kNames = {"csg2d", "csg2d-sketch", "tinysvg", "rainbow"};
  return kNames;
}

Canvas Environment::render(const SyntaxTree& t) const {
  return is_csg() ? render_csg2d(*grammar_, t) : render_tinysvg(*grammar_, t);
}

Canvas Environment::observe(const SyntaxTree& t, std::uint64_t seed) const {
  return kind_ == EnvKind::kCsg2dSketch ? sketch_render(*grammar_, t, seed) : render(t);
}

double Environment::match_metric(const Canvas& a, const Canvas& b) const {
  return is_csg() ? iou(a, b) : pixel_match_fraction(a, b, kPixelTolerance);
}

bool Environment::is_solved(const Canvas& candidate, const Canvas& reference) const {
  return match_metric(candidate, reference) >= (is_csg() ? kIouThreshold : kPixelMatchThreshold);
}

}  // namespace treediff
