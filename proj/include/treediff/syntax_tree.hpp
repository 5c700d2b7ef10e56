#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "treediff/grammar.hpp"

namespace treediff {

/// Child indices from the root down to a node.
using NodePath = std::vector<int>;

class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(std::size_t index, const std::string& message)
      : std::runtime_error("syntax error at token " + std::to_string(index) + ": " + message), index_(index) {}
  /// Index of the first offending token (== token count for early end of input).
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// Immutable syntax tree node with cached aggregates. Trees share unchanged
/// subtrees; copying a SyntaxTree copies one pointer.
class SyntaxTree {
 public:
  SyntaxTree() = default;

  /// Builds a node for alternative `alt` of `rule`; `children` must match the
  /// alternative's nonterminal slots.
  static SyntaxTree make(const Grammar& g, RuleId rule, int alt, std::vector<SyntaxTree> children);

  bool empty() const { return node_ == nullptr; }
  RuleId rule() const { return node_->rule; }
  int alt() const { return node_->alt; }
  const std::vector<SyntaxTree>& children() const { return node_->children; }
  const SyntaxTree& child(std::size_t i) const { return node_->children.at(i); }
  /// Primitive count of the subtree.
  int sigma() const { return node_->sigma; }
  /// Node count of the subtree.
  int size() const { return node_->size; }
  /// Number of tokens in the serialized subtree.
  int token_count() const { return node_->token_count; }

  /// Same rule and alternative (the TreeDiff NodeEq test).
  bool node_eq(const SyntaxTree& other) const { return rule() == other.rule() && alt() == other.alt(); }
  /// Pointer identity; true for structurally shared subtrees.
  bool same_node(const SyntaxTree& other) const { return node_ == other.node_; }

  friend bool operator==(const SyntaxTree& a, const SyntaxTree& b);
  friend bool operator!=(const SyntaxTree& a, const SyntaxTree& b) { return !(a == b); }

  /// Subtree at `path`; throws std::out_of_range if the path does not resolve.
  const SyntaxTree& at(std::span<const int> path) const;

  /// Recomputes sigma from scratch (ignores caches).
  int recount_sigma(const Grammar& g) const;

 private:
  struct Node {
    RuleId rule = 0;
    int alt = 0;
    std::vector<SyntaxTree> children;
    int sigma = 0;
    int size = 1;
    int token_count = 0;
  };
  std::shared_ptr<const Node> node_;
};

/// A node's token span [start, end) and where it sits in the tree.
struct NodeSpan {
  NodePath path;
  int start = 0;
  int end = 0;
};

struct TokenSeq {
  std::vector<TokenId> tokens;
  /// Preorder node spans; spans nest.
  std::vector<NodeSpan> node_spans;
};

/// Splits program text into vocabulary tokens: whitespace separated, with
/// parentheses always standing alone.
std::vector<TokenId> tokenize(const Grammar& g, std::string_view text);

/// Predictive parse of `tokens` from `rule` (default: the start rule).
SyntaxTree parse(const Grammar& g, std::span<const TokenId> tokens, RuleId rule = -1);
SyntaxTree parse_text(const Grammar& g, std::string_view text, RuleId rule = -1);

TokenSeq serialize(const Grammar& g, const SyntaxTree& t);
std::vector<TokenId> tokens_of(const Grammar& g, const SyntaxTree& t);

/// Token text form: `(+ (Circle 8 2 1) (Quad 1 0 A 3 angle_45))`.
std::string to_text(const Grammar& g, const SyntaxTree& t);
std::string tokens_to_text(const Grammar& g, std::span<const TokenId> tokens);
std::vector<std::string> token_strings(const Grammar& g, std::span<const TokenId> tokens);

/// Text form plus the character span [start, end) of the node at `path`.
std::string to_text_marking(const Grammar& g, const SyntaxTree& t, std::span<const int> path, std::size_t& start,
                            std::size_t& end);

/// Number of primitive nodes in the subtree.
inline int sigma(const SyntaxTree& t) { return t.sigma(); }

/// Preorder paths of every node in `t`.
std::vector<NodePath> all_paths(const SyntaxTree& t);

/// Returns a copy of `t` with the subtree at `path` replaced. Nodes off the
/// path are shared with `t`.
SyntaxTree replace_at(const Grammar& g, const SyntaxTree& t, std::span<const int> path, const SyntaxTree& replacement);

}  // namespace treediff
