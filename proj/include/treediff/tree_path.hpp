#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "treediff/grammar.hpp"
#include "treediff/mutation.hpp"
#include "treediff/rng.hpp"
#include "treediff/syntax_tree.hpp"

namespace treediff {

class PathError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Seed used for value targets and edit_distance.
inline constexpr std::uint64_t kCanonicalPathSeed = 0;

struct EditPath {
  std::vector<Mutation> steps;
  SyntaxTree source;
  SyntaxTree target;
  std::uint64_t seed = 0;
};

/// Target nodes left unmatched by a simultaneous top-down walk: where the
/// productions differ, the whole target subtree counts once. Zero iff a == b.
int structural_distance(const SyntaxTree& a, const SyntaxTree& b);

/// First round of mutations turning `a` towards `b` (TreeDiff).
///
/// Walks both trees while productions agree. A differing pair that is small
/// on both sides becomes a direct replacement; otherwise a small skeleton of
/// the same rule is sampled and tightened towards `b` within the
/// sigma_small budget. The returned mutations sit at disjoint paths, are all
/// in the small-mutation action space, and each one strictly lowers
/// structural_distance to `b`. `visits` (optional) counts nodes touched.
std::vector<Mutation> first_step(const Grammar& g, const SyntaxTree& a, const SyntaxTree& b, int sigma_small, Rng& rng,
                                 std::size_t* visits = nullptr);

/// Repeated first_step rounds until `a` becomes `b`. Throws PathError if the
/// path exceeds 4 * (|a| + |b|) steps.
EditPath full_path(const Grammar& g, const SyntaxTree& a, const SyntaxTree& b, int sigma_small, std::uint64_t seed);

/// Length of the canonical path (seed kCanonicalPathSeed).
int edit_distance(const Grammar& g, const SyntaxTree& a, const SyntaxTree& b, int sigma_small = kDefaultSigmaSmall);

}  // namespace treediff
