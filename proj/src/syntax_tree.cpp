#include "treediff/syntax_tree.hpp"

#include <algorithm>
#include <cctype>

namespace treediff {

SyntaxTree SyntaxTree::make(const Grammar& g, RuleId rule, int alt, std::vector<SyntaxTree> children) {
  const Alternative& a = g.alt(rule, alt);
  if (children.size() != a.child_slots.size()) {
    throw std::invalid_argument("rule '" + g.rule(rule).name + "' alternative " + std::to_string(alt) + " expects " +
                                std::to_string(a.child_slots.size()) + " children");
  }
  auto node = std::make_shared<Node>();
  node->rule = rule;
  node->alt = alt;
  node->sigma = a.primitive ? 1 : 0;
  node->token_count = static_cast<int>(a.symbols.size() - a.child_slots.size());
  for (std::size_t i = 0; i < children.size(); ++i) {
    const auto expected = a.symbols[static_cast<std::size_t>(a.child_slots[i])].id;
    if (children[i].empty() || children[i].rule() != expected) {
      throw std::invalid_argument("child " + std::to_string(i) + " of rule '" + g.rule(rule).name + "' must derive '" +
                                  g.rule(expected).name + "'");
    }
    node->sigma += children[i].sigma();
    node->size += children[i].size();
    node->token_count += children[i].token_count();
  }
  node->children = std::move(children);
  SyntaxTree t;
  t.node_ = std::move(node);
  return t;
}

bool operator==(const SyntaxTree& a, const SyntaxTree& b) {
  if (a.node_ == b.node_) return true;
  if (a.empty() || b.empty()) return false;
  if (!a.node_eq(b) || a.size() != b.size() || a.sigma() != b.sigma()) return false;
  const auto& ca = a.children();
  const auto& cb = b.children();
  for (std::size_t i = 0; i < ca.size(); ++i) {
    if (ca[i] != cb[i]) return false;
  }
  return true;
}

const SyntaxTree& SyntaxTree::at(std::span<const int> path) const {
  const SyntaxTree* cur = this;
  for (int i : path) {
    if (i < 0 || static_cast<std::size_t>(i) >= cur->children().size()) {
      throw std::out_of_range("node path does not resolve");
    }
    cur = &cur->children()[static_cast<std::size_t>(i)];
  }
  return *cur;
}

int SyntaxTree::recount_sigma(const Grammar& g) const {
  int s = g.alt(rule(), alt()).primitive ? 1 : 0;
  for (const auto& c : children()) s += c.recount_sigma(g);
  return s;
}

std::vector<TokenId> tokenize(const Grammar& g, std::string_view text) {
  std::vector<TokenId> out;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    const TokenId id = g.token_id(cur);
    if (id < 0) throw SyntaxError(out.size(), "unknown token '" + cur + "'");
    out.push_back(id);
    cur.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (c == '(' || c == ')') {
      flush();
      cur.push_back(c);
      flush();
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

namespace {

class Parser {
 public:
  Parser(const Grammar& g, std::span<const TokenId> toks) : g_(g), toks_(toks) {}

  SyntaxTree parse_rule(RuleId r) {
    const auto& firsts = g_.first_sets(r);
    const std::size_t remaining = toks_.size() - pos_;
    int chosen = -1;
    std::size_t best_common = 0;
    for (std::size_t a = 0; a < firsts.size() && chosen < 0; ++a) {
      for (const auto& w : firsts[a]) {
        std::size_t common = 0;
        while (common < w.size() && common < remaining && toks_[pos_ + common] == w[common]) ++common;
        if (common == w.size()) {
          chosen = static_cast<int>(a);
          break;
        }
        best_common = std::max(best_common, common);
      }
    }
    if (chosen < 0) {
      const std::size_t at = pos_ + best_common;
      throw SyntaxError(at, at >= toks_.size() ? "unexpected end of input in '" + g_.rule(r).name + "'"
                                               : "unexpected token '" + g_.token_text(toks_[at]) + "' in '" +
                                                     g_.rule(r).name + "'");
    }
    const Alternative& alt = g_.alt(r, chosen);
    std::vector<SyntaxTree> children;
    children.reserve(alt.child_slots.size());
    for (const auto& sym : alt.symbols) {
      if (sym.terminal) {
        if (pos_ >= toks_.size()) throw SyntaxError(pos_, "expected '" + g_.token_text(sym.id) + "'");
        if (toks_[pos_] != sym.id) {
          throw SyntaxError(pos_, "expected '" + g_.token_text(sym.id) + "', got '" + g_.token_text(toks_[pos_]) + "'");
        }
        ++pos_;
      } else {
        children.push_back(parse_rule(sym.id));
      }
    }
    return SyntaxTree::make(g_, r, chosen, std::move(children));
  }

  std::size_t pos() const { return pos_; }

 private:
  const Grammar& g_;
  std::span<const TokenId> toks_;
  std::size_t pos_ = 0;
};

void emit(const Grammar& g, const SyntaxTree& t, NodePath& path, TokenSeq& out) {
  const std::size_t span_index = out.node_spans.size();
  out.node_spans.push_back({path, static_cast<int>(out.tokens.size()), 0});
  const Alternative& alt = g.alt(t.rule(), t.alt());
  int child = 0;
  for (const auto& sym : alt.symbols) {
    if (sym.terminal) {
      out.tokens.push_back(sym.id);
    } else {
      path.push_back(child);
      emit(g, t.child(static_cast<std::size_t>(child)), path, out);
      path.pop_back();
      ++child;
    }
  }
  out.node_spans[span_index].end = static_cast<int>(out.tokens.size());
}

void emit_tokens(const Grammar& g, const SyntaxTree& t, std::vector<TokenId>& out) {
  const Alternative& alt = g.alt(t.rule(), t.alt());
  std::size_t child = 0;
  for (const auto& sym : alt.symbols) {
    if (sym.terminal) {
      out.push_back(sym.id);
    } else {
      emit_tokens(g, t.child(child++), out);
    }
  }
}

class TextWriter {
 public:
  explicit TextWriter(const Grammar& g) : g_(g) {}

  void token(TokenId id) {
    const std::string& s = g_.token_text(id);
    if (!text_.empty() && last_ != "(" && s != ")") text_.push_back(' ');
    if (pending_start_) {
      start_ = text_.size();
      pending_start_ = false;
    }
    text_ += s;
    last_ = s;
  }

  void tree(const SyntaxTree& t, std::span<const int> mark, std::size_t depth, bool on_path) {
    const bool marked = on_path && depth == mark.size();
    if (marked) pending_start_ = true;
    const Alternative& alt = g_.alt(t.rule(), t.alt());
    std::size_t child = 0;
    for (const auto& sym : alt.symbols) {
      if (sym.terminal) {
        token(sym.id);
      } else {
        const bool next = on_path && depth < mark.size() && mark[depth] == static_cast<int>(child);
        tree(t.child(child++), mark, depth + 1, next);
      }
    }
    if (marked) end_ = text_.size();
  }

  std::string& text() { return text_; }
  std::size_t start() const { return start_; }
  std::size_t end() const { return end_; }

 private:
  const Grammar& g_;
  std::string text_;
  std::string last_;
  bool pending_start_ = false;
  std::size_t start_ = 0;
  std::size_t end_ = 0;
};

}  // namespace

SyntaxTree parse(const Grammar& g, std::span<const TokenId> tokens, RuleId rule) {
  Parser p(g, tokens);
  SyntaxTree t = p.parse_rule(rule < 0 ? g.start() : rule);
  if (p.pos() != tokens.size()) throw SyntaxError(p.pos(), "trailing tokens after complete program");
  return t;
}

SyntaxTree parse_text(const Grammar& g, std::string_view text, RuleId rule) {
  const auto toks = tokenize(g, text);
  return parse(g, toks, rule);
}

TokenSeq serialize(const Grammar& g, const SyntaxTree& t) {
  TokenSeq out;
  out.tokens.reserve(static_cast<std::size_t>(t.token_count()));
  out.node_spans.reserve(static_cast<std::size_t>(t.size()));
  NodePath path;
  emit(g, t, path, out);
  return out;
}

std::vector<TokenId> tokens_of(const Grammar& g, const SyntaxTree& t) {
  std::vector<TokenId> out;
  out.reserve(static_cast<std::size_t>(t.token_count()));
  emit_tokens(g, t, out);
  return out;
}

std::string to_text(const Grammar& g, const SyntaxTree& t) {
  TextWriter w(g);
  w.tree(t, {}, 0, false);
  return std::move(w.text());
}

std::string tokens_to_text(const Grammar& g, std::span<const TokenId> tokens) {
  TextWriter w(g);
  for (TokenId id : tokens) w.token(id);
  return std::move(w.text());
}

std::vector<std::string> token_strings(const Grammar& g, std::span<const TokenId> tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (TokenId id : tokens) out.push_back(g.token_text(id));
  return out;
}

std::string to_text_marking(const Grammar& g, const SyntaxTree& t, std::span<const int> path, std::size_t& start,
                            std::size_t& end) {
  TextWriter w(g);
  w.tree(t, path, 0, true);
  start = w.start();
  end = w.end();
  return std::move(w.text());
}

std::vector<NodePath> all_paths(const SyntaxTree& t) {
  std::vector<NodePath> out;
  NodePath path;
  auto walk = [&](auto&& self, const SyntaxTree& n) -> void {
    out.push_back(path);
    for (std::size_t i = 0; i < n.children().size(); ++i) {
      path.push_back(static_cast<int>(i));
      self(self, n.child(i));
      path.pop_back();
    }
  };
  walk(walk, t);
  return out;
}

SyntaxTree replace_at(const Grammar& g, const SyntaxTree& t, std::span<const int> path, const SyntaxTree& replacement) {
  if (path.empty()) return replacement;
  const int i = path.front();
  if (i < 0 || static_cast<std::size_t>(i) >= t.children().size()) throw std::out_of_range("node path does not resolve");
  std::vector<SyntaxTree> children = t.children();
  children[static_cast<std::size_t>(i)] = replace_at(g, t.child(static_cast<std::size_t>(i)), path.subspan(1), replacement);
  return SyntaxTree::make(g, t.rule(), t.alt(), std::move(children));
}

}  // namespace treediff
