#pragma once

#include <climits>
#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace treediff {

using TokenId = int;
using RuleId = int;

/// Sentinel for "no upper bound" on a rule's primitive count.
inline constexpr int kUnbounded = INT_MAX / 4;

class GrammarError : public std::runtime_error {
 public:
  GrammarError(int line, const std::string& message)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct Symbol {
  bool terminal = true;
  int id = 0;  // TokenId when terminal, RuleId otherwise
  std::string label;
};

struct Alternative {
  std::vector<Symbol> symbols;
  /// Positions in `symbols` of the nonterminal children, in order.
  std::vector<int> child_slots;
  /// Head keyword ("Circle") for parenthesized alternatives, else empty.
  std::string head;
  bool primitive = false;
  int min_sigma = 0;
  int max_sigma = 0;
  /// Minimum derivation depth; used to force termination of deep samples.
  int min_depth = 0;
};

struct Rule {
  std::string name;
  std::vector<Alternative> alts;
  int min_sigma = 0;
  int max_sigma = 0;
  int min_depth = 0;
  /// True when the rule's language is finite.
  bool finite = false;
};

/// An immutable context-free grammar with a designated primitive set.
///
/// The grammar is loaded from a text spec (see load_grammar) and checked for
/// undefined references, productivity, left recursion and lookahead
/// determinism (LL(k) with k <= 3) before it is handed out.
class Grammar {
 public:
  const std::string& name() const { return name_; }
  RuleId start() const { return start_; }
  const std::vector<Rule>& rules() const { return rules_; }
  const Rule& rule(RuleId r) const { return rules_.at(static_cast<std::size_t>(r)); }
  const Alternative& alt(RuleId r, int a) const { return rule(r).alts.at(static_cast<std::size_t>(a)); }
  RuleId rule_id(std::string_view name) const;
  bool has_rule(std::string_view name) const;

  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  const std::string& token_text(TokenId t) const { return vocabulary_.at(static_cast<std::size_t>(t)); }
  /// Returns -1 for tokens outside the vocabulary.
  TokenId token_id(std::string_view text) const;

  const std::set<std::string>& primitive_heads() const { return primitive_heads_; }

  /// End-of-replacement marker emitted by legal_continuations.
  TokenId end_token() const { return end_token_; }
  TokenId edit_token() const { return edit_token_; }

  /// A rule is mutable in place when it offers at least two alternatives.
  bool is_mutable(RuleId r) const { return rule(r).alts.size() >= 2; }

  /// Lookahead depth used by the predictive parser.
  int lookahead() const { return lookahead_; }
  /// FIRST_k strings of each alternative of `r`.
  const std::vector<std::set<std::vector<TokenId>>>& first_sets(RuleId r) const {
    return first_.at(static_cast<std::size_t>(r));
  }

 private:
  friend Grammar load_grammar(std::string_view, std::string);
  std::string name_;
  RuleId start_ = 0;
  std::vector<Rule> rules_;
  std::map<std::string, RuleId, std::less<>> rule_index_;
  std::vector<std::string> vocabulary_;
  std::map<std::string, TokenId, std::less<>> token_index_;
  std::set<std::string> primitive_heads_;
  TokenId end_token_ = -1;
  TokenId edit_token_ = -1;
  int lookahead_ = 1;
  std::vector<std::vector<std::set<std::vector<TokenId>>>> first_;
};

/// Parses a grammar spec.
///
/// Format: one rule per line, `name: alt1 | alt2`; `//` starts a comment;
/// a line starting with whitespace continues the previous rule. Symbols:
///   - lowercase identifiers (optionally labelled `x=number`) reference rules;
///   - anything else (punctuation, Capitalized keywords, digits, "quoted")
///     is a terminal;
///   - a rule whose alternatives are all single bare words naming no rule is
///     a token set (`color: red | green`);
///   - `[lo to hi]` / `[lo - hi]` expands to one terminal per value, written
///     as a single hex digit when hi <= 15; `step N` and `prefix P` adjust the
///     values and spelling (`[0 to 315 step 45 prefix angle_]`).
/// Directives: `%primitives Head...` and `%start rule` (default: first rule).
Grammar load_grammar(std::string_view spec_text, std::string name = "grammar");
Grammar load_grammar_file(const std::filesystem::path& path);

}  // namespace treediff
