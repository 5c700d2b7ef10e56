#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "treediff/grammar.hpp"
#include "treediff/rng.hpp"
#include "treediff/syntax_tree.hpp"

namespace treediff {

class SampleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Samples a tree derived from `rule` with sigma_min < sigma(t) <= sigma_max.
///
/// Alternatives whose achievable primitive range meets the remaining budget
/// are chosen uniformly; the budget is split across children uniformly over
/// all feasible exact allocations, so the bound always holds and sampling
/// never backtracks. Rules that derive no primitives take sigma_min = -1.
/// Throws SampleError when the bound is unsatisfiable from `rule`.
SyntaxTree constrained_sample(const Grammar& g, RuleId rule, int sigma_min, int sigma_max, Rng& rng);

/// As constrained_sample, but the root uses alternative `alt` of `rule`.
SyntaxTree constrained_sample_alt(const Grammar& g, RuleId rule, int alt, int sigma_min, int sigma_max, Rng& rng);

/// Convenience: bound (rule_min - 1, sigma_max], i.e. anything up to sigma_max.
SyntaxTree sample_up_to(const Grammar& g, RuleId rule, int sigma_max, Rng& rng);

/// Every tree from `rule` with sigma_min < sigma <= sigma_max, in a fixed
/// order. Returns nullopt if the set is infinite or building it takes more
/// than `limit` trees, intermediate subtrees included.
std::optional<std::vector<SyntaxTree>> enumerate_trees(const Grammar& g, RuleId rule, int sigma_min, int sigma_max,
                                                       std::size_t limit = 200000);

class PrefixError : public std::runtime_error {
 public:
  PrefixError(std::size_t index, const std::string& message)
      : std::runtime_error("invalid prefix at token " + std::to_string(index) + ": " + message), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// Tokens that extend `partial` towards a complete derivation from `rule`.
/// Contains g.end_token() iff `partial` is itself complete. Throws
/// PrefixError when `partial` is not a prefix of any derivation.
std::set<TokenId> legal_continuations(const Grammar& g, RuleId rule, std::span<const TokenId> partial);

}  // namespace treediff
