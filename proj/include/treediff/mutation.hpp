#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "treediff/grammar.hpp"
#include "treediff/rng.hpp"
#include "treediff/syntax_tree.hpp"

namespace treediff {

inline constexpr int kDefaultSigmaSmall = 2;

class MutationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Replacement of the subtree at `target_path` by `replacement`.
struct Mutation {
  NodePath target_path;
  SyntaxTree replacement;
};

/// Nodes eligible for mutation: sigma(n) <= sigma_small and the node's rule
/// offers at least two alternatives. Preorder.
std::vector<NodePath> candidate_nodes(const Grammar& g, const SyntaxTree& t, int sigma_small);

/// Draws a replacement for `original` from the same rule with
/// sigma <= sigma_small that differs from `original`. Rejection-samples up to
/// 100 times, then falls back to exhaustive enumeration of the small set.
SyntaxTree sample_replacement(const Grammar& g, const SyntaxTree& original, int sigma_small, Rng& rng);

/// Node uniform over candidate_nodes.
Mutation sample_mutation(const Grammar& g, const SyntaxTree& t, int sigma_small, Rng& rng);

/// Rule first (uniform over the distinct rules among candidates), then a node
/// uniform among candidates of that rule.
Mutation sample_mutation_balanced(const Grammar& g, const SyntaxTree& t, int sigma_small, Rng& rng);

/// Checks the small-mutation invariants against `t`; throws MutationError.
void validate_mutation(const Grammar& g, const SyntaxTree& t, const Mutation& m, int sigma_small);

/// Replaces the target subtree. Throws MutationError when the path does not
/// resolve or the replacement derives from a different rule.
SyntaxTree apply(const Grammar& g, const SyntaxTree& t, const Mutation& m);

struct NoiseChain {
  std::vector<SyntaxTree> states;  // z_0 .. z_s
  std::vector<Mutation> mutations;
  std::uint64_t seed = 0;
};

/// s balanced mutations starting at z0.
NoiseChain noise_chain(const Grammar& g, const SyntaxTree& z0, int steps, int sigma_small, std::uint64_t seed);

/// Trace text for a chain: each state, a caret line under the mutated span
/// and `--> replacement`, ending with the final state.
std::string format_trace(const Grammar& g, const NoiseChain& chain);

}  // namespace treediff
