#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "treediff/canvas.hpp"
#include "treediff/grammar.hpp"
#include "treediff/syntax_tree.hpp"

namespace treediff {

enum class EnvKind { kCsg2d, kCsg2dSketch, kTinySvg, kRainbow };

/// Directory holding the shipped grammars: $TREEDIFF_GRAMMAR_DIR when set,
/// else the build-time location.
std::filesystem::path default_grammar_dir();

/// A grammar paired with its renderer and solve criterion.
class Environment {
 public:
  /// `name` is one of csg2d, csg2d-sketch, tinysvg, rainbow. The sketch
  /// environment shares csg2d.grammar.
  static Environment load(std::string_view name, const std::filesystem::path& grammar_dir = default_grammar_dir());
  /// Uses an already loaded grammar (e.g. from --grammar).
  static Environment with_grammar(std::string_view name, Grammar grammar);

  static const std::vector<std::string>& names();

  const std::string& name() const { return name_; }
  EnvKind kind() const { return kind_; }
  const Grammar& grammar() const { return *grammar_; }
  int channels() const { return kind_ == EnvKind::kTinySvg || kind_ == EnvKind::kRainbow ? 3 : 1; }
  bool is_csg() const { return kind_ == EnvKind::kCsg2d || kind_ == EnvKind::kCsg2dSketch; }

  /// Deterministic rendering of a program.
  Canvas render(const SyntaxTree& t) const;
  /// What a policy sees for a target program: the sketch for csg2d-sketch
  /// (seeded), the rendering otherwise.
  Canvas observe(const SyntaxTree& t, std::uint64_t seed) const;

  /// IoU >= 0.99 for CSG environments, 99% of pixels within 0.005 otherwise.
  bool is_solved(const Canvas& candidate, const Canvas& reference) const;
  /// The quantity is_solved thresholds (IoU or pixel match fraction).
  double match_metric(const Canvas& a, const Canvas& b) const;
  /// 1 - match_metric; 0 for identical images.
  double pixel_loss(const Canvas& a, const Canvas& b) const { return 1.0 - match_metric(a, b); }

 private:
  std::string name_;
  EnvKind kind_ = EnvKind::kCsg2d;
  std::shared_ptr<const Grammar> grammar_;
};

inline constexpr double kIouThreshold = 0.99;
inline constexpr double kPixelMatchThreshold = 0.99;
inline constexpr double kPixelTolerance = 0.005;

}  // namespace treediff
