#include "treediff/tree_path.hpp"

#include "treediff/sampler.hpp"

namespace treediff {

namespace {

// Skeleton recursion depth after which the root production is forced rather
// than resampled.
constexpr int kSkeletonRetries = 32;

class TreeDiff {
 public:
  TreeDiff(const Grammar& g, int sigma_small, Rng& rng, std::size_t* visits)
      : g_(g), sigma_small_(sigma_small), rng_(rng), visits_(visits) {}

  void diff(const SyntaxTree& a, const SyntaxTree& b, NodePath& path, std::vector<Mutation>& out, int depth) {
    if (visits_ != nullptr) *visits_ += 2;
    if (a.node_eq(b)) {
      for (std::size_t i = 0; i < a.children().size(); ++i) {
        path.push_back(static_cast<int>(i));
        diff(a.child(i), b.child(i), path, out, depth);
        path.pop_back();
      }
      return;
    }
    if (a.rule() != b.rule()) {
      throw PathError("production context mismatch: '" + g_.rule(a.rule()).name + "' vs '" + g_.rule(b.rule()).name + "'");
    }
    if (a.sigma() <= sigma_small_ && b.sigma() <= sigma_small_) {
      out.push_back({path, b});
      return;
    }
    out.push_back({path, skeleton(b, depth)});
  }

 private:
  // GenerateNewExpression followed by tightening towards `b`, kept within the
  // sigma_small budget.
  SyntaxTree skeleton(const SyntaxTree& b, int depth) {
    const RuleId r = b.rule();
    const int lo = g_.rule(r).min_sigma - 1;
    if (g_.alt(r, b.alt()).min_sigma > sigma_small_) {
      throw PathError("target production of '" + g_.rule(r).name + "' needs more than " + std::to_string(sigma_small_) +
                      " primitives and cannot be introduced by a small mutation");
    }
    SyntaxTree fresh = (depth >= kSkeletonRetries) ? constrained_sample_alt(g_, r, b.alt(), lo, sigma_small_, rng_)
                                                                : constrained_sample(g_, r, lo, sigma_small_, rng_);
    std::vector<Mutation> tightening;
    NodePath sub;
    diff(fresh, b, sub, tightening, depth + 1);
    for (const auto& m : tightening) {
      const SyntaxTree& old = fresh.at(m.target_path);
      if (fresh.sigma() - old.sigma() + m.replacement.sigma() > sigma_small_) break;
      fresh = replace_at(g_, fresh, m.target_path, m.replacement);
    }
    return fresh;
  }

  const Grammar& g_;
  int sigma_small_;
  Rng& rng_;
  std::size_t* visits_;
};

}  // namespace

int structural_distance(const SyntaxTree& a, const SyntaxTree& b) {
  if (!a.node_eq(b)) return b.size();
  int d = 0;
  for (std::size_t i = 0; i < a.children().size(); ++i) d += structural_distance(a.child(i), b.child(i));
  return d;
}

std::vector<Mutation> first_step(const Grammar& g, const SyntaxTree& a, const SyntaxTree& b, int sigma_small, Rng& rng,
                                 std::size_t* visits) {
  if (a.rule() != b.rule()) {
    throw PathError("trees derive from different rules: '" + g.rule(a.rule()).name + "' vs '" + g.rule(b.rule()).name + "'");
  }
  std::vector<Mutation> out;
  NodePath path;
  TreeDiff(g, sigma_small, rng, visits).diff(a, b, path, out, 0);
  return out;
}

EditPath full_path(const Grammar& g, const SyntaxTree& a, const SyntaxTree& b, int sigma_small, std::uint64_t seed) {
  EditPath p;
  p.source = a;
  p.target = b;
  p.seed = seed;
  Rng rng(seed);
  const std::size_t bound = 4 * static_cast<std::size_t>(a.size() + b.size());
  SyntaxTree cur = a;
  while (cur != b) {
    auto round = first_step(g, cur, b, sigma_small, rng);
    for (auto& m : round) {
      cur = apply(g, cur, m);
      p.steps.push_back(std::move(m));
      if (p.steps.size() > bound) {
        throw PathError("edit path exceeded " + std::to_string(bound) + " steps");
      }
    }
  }
  return p;
}

int edit_distance(const Grammar& g, const SyntaxTree& a, const SyntaxTree& b, int sigma_small) {
  return static_cast<int>(full_path(g, a, b, sigma_small, kCanonicalPathSeed).steps.size());
}

}  // namespace treediff
