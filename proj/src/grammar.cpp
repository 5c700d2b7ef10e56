#include "treediff/grammar.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <sstream>

namespace treediff {

namespace {

struct RawRule {
  std::string name;
  int line = 0;
  std::vector<std::vector<std::string>> alts;
};

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

bool is_rule_word(std::string_view w) {
  if (w.empty() || !std::islower(static_cast<unsigned char>(w[0]))) return false;
  return std::all_of(w.begin(), w.end(), [](char c) {
    return std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) || c == '_';
  });
}

std::string hex_digit(int v) {
  static constexpr char kDigits[] = "0123456789ABCDEF";
  return std::string(1, kDigits[v]);
}

// Expands `[lo to hi step N prefix P]` into terminal spellings.
std::vector<std::string> expand_range(std::string_view body, int line) {
  auto words = split_ws(body);
  if (words.size() < 3 || (words[1] != "to" && words[1] != "-")) {
    throw GrammarError(line, "malformed range '[" + std::string(body) + "]'");
  }
  int lo = 0;
  int hi = 0;
  int step = 1;
  std::string prefix;
  bool has_prefix = false;
  try {
    lo = std::stoi(words[0]);
    hi = std::stoi(words[2]);
    for (std::size_t i = 3; i + 1 < words.size(); i += 2) {
      if (words[i] == "step") {
        step = std::stoi(words[i + 1]);
      } else if (words[i] == "prefix") {
        prefix = words[i + 1];
        has_prefix = true;
      } else {
        throw GrammarError(line, "unknown range option '" + words[i] + "'");
      }
    }
    if ((words.size() - 3) % 2 != 0) throw GrammarError(line, "dangling range option");
  } catch (const std::invalid_argument&) {
    throw GrammarError(line, "malformed range '[" + std::string(body) + "]'");
  }
  if (step <= 0 || hi < lo) throw GrammarError(line, "empty range '[" + std::string(body) + "]'");
  std::vector<std::string> out;
  for (int v = lo; v <= hi; v += step) {
    if (has_prefix) {
      out.push_back(prefix + std::to_string(v));
    } else if (hi <= 15 && lo >= 0) {
      out.push_back(hex_digit(v));
    } else {
      out.push_back(std::to_string(v));
    }
  }
  return out;
}

// Splits an alternative into symbol words, separating parentheses.
std::vector<std::string> tokenize_alt(std::string_view alt) {
  std::vector<std::string> out;
  for (const auto& w : split_ws(alt)) {
    if (w.size() >= 2 && w.front() == '"' && w.back() == '"') {
      out.push_back(w);
      continue;
    }
    std::string cur;
    for (char c : w) {
      if (c == '(' || c == ')') {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
        out.emplace_back(1, c);
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

using Strings = std::set<std::vector<TokenId>>;

Strings concat_k(const Strings& a, const Strings& b, std::size_t k) {
  Strings out;
  for (const auto& x : a) {
    if (x.size() >= k) {
      out.insert(x);
      continue;
    }
    for (const auto& y : b) {
      std::vector<TokenId> z = x;
      for (std::size_t i = 0; i < y.size() && z.size() < k; ++i) z.push_back(y[i]);
      out.insert(std::move(z));
    }
  }
  return out;
}

bool prefix_related(const std::vector<TokenId>& a, const std::vector<TokenId>& b) {
  const std::size_t n = std::min(a.size(), b.size());
  return std::equal(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(n), b.begin());
}

int saturating_add(int a, int b) { return (a >= kUnbounded || b >= kUnbounded) ? kUnbounded : std::min(a + b, kUnbounded); }

}  // namespace

RuleId Grammar::rule_id(std::string_view name) const {
  auto it = rule_index_.find(name);
  if (it == rule_index_.end()) throw std::out_of_range("no rule named '" + std::string(name) + "'");
  return it->second;
}

bool Grammar::has_rule(std::string_view name) const { return rule_index_.find(name) != rule_index_.end(); }

TokenId Grammar::token_id(std::string_view text) const {
  auto it = token_index_.find(text);
  return it == token_index_.end() ? -1 : it->second;
}

Grammar load_grammar(std::string_view spec_text, std::string name) {
  Grammar g;
  g.name_ = std::move(name);

  std::vector<RawRule> raw;
  std::vector<std::pair<std::string, int>> primitive_decl;
  std::string start_decl;
  int start_line = 0;

  // Line pass: comments, directives, continuations.
  {
    std::istringstream in{std::string(spec_text)};
    std::string line;
    int lineno = 0;
    std::string* pending = nullptr;
    std::vector<std::pair<std::string, int>> bodies;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto c = line.find("//"); c != std::string::npos) line.erase(c);
      if (trim(line).empty()) continue;
      const bool continuation = std::isspace(static_cast<unsigned char>(line[0])) != 0;
      std::string t = trim(line);
      if (t[0] == '%') {
        auto words = split_ws(t);
        if (words[0] == "%primitives") {
          for (std::size_t i = 1; i < words.size(); ++i) primitive_decl.emplace_back(words[i], lineno);
        } else if (words[0] == "%start" && words.size() == 2) {
          start_decl = words[1];
          start_line = lineno;
        } else {
          throw GrammarError(lineno, "unknown directive '" + words[0] + "'");
        }
        pending = nullptr;
        continue;
      }
      if (continuation && pending != nullptr) {
        *pending += " " + t;
        continue;
      }
      auto colon = t.find(':');
      if (colon == std::string::npos) throw GrammarError(lineno, "expected 'name: alternatives'");
      std::string rname = trim(std::string_view(t).substr(0, colon));
      if (!is_rule_word(rname)) throw GrammarError(lineno, "invalid rule name '" + rname + "'");
      RawRule rr;
      rr.name = rname;
      rr.line = lineno;
      raw.push_back(rr);
      bodies.emplace_back(t.substr(colon + 1), lineno);
      pending = &bodies.back().first;
    }
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const auto& body = bodies[i].first;
      std::size_t pos = 0;
      while (true) {
        std::size_t bar = body.find('|', pos);
        std::string alt = trim(std::string_view(body).substr(pos, bar == std::string::npos ? std::string::npos : bar - pos));
        if (alt.empty()) throw GrammarError(raw[i].line, "empty alternative in rule '" + raw[i].name + "'");
        if (alt.front() == '[') {
          if (alt.back() != ']') throw GrammarError(raw[i].line, "unterminated range in rule '" + raw[i].name + "'");
          for (auto& tok : expand_range(std::string_view(alt).substr(1, alt.size() - 2), raw[i].line)) {
            raw[i].alts.push_back({"\"" + tok + "\""});
          }
        } else {
          raw[i].alts.push_back(tokenize_alt(alt));
        }
        if (bar == std::string::npos) break;
        pos = bar + 1;
      }
    }
  }
  if (raw.empty()) throw GrammarError(0, "grammar defines no rules");

  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (g.rule_index_.count(raw[i].name) != 0) {
      throw GrammarError(raw[i].line, "duplicate rule name '" + raw[i].name + "'");
    }
    g.rule_index_.emplace(raw[i].name, static_cast<RuleId>(i));
  }

  auto intern = [&g](const std::string& text) {
    auto it = g.token_index_.find(text);
    if (it != g.token_index_.end()) return it->second;
    const auto id = static_cast<TokenId>(g.vocabulary_.size());
    g.vocabulary_.push_back(text);
    g.token_index_.emplace(text, id);
    return id;
  };

  g.rules_.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    Rule& rule = g.rules_[i];
    rule.name = raw[i].name;
    bool token_set = true;
    for (const auto& alt : raw[i].alts) {
      if (alt.size() != 1 || !is_rule_word(alt[0]) || g.rule_index_.count(alt[0]) != 0) {
        token_set = false;
        break;
      }
    }
    for (const auto& words : raw[i].alts) {
      Alternative a;
      for (const auto& w : words) {
        Symbol sym;
        std::string ref;
        if (w.size() >= 2 && w.front() == '"' && w.back() == '"') {
          sym.terminal = true;
          sym.id = intern(w.substr(1, w.size() - 2));
        } else if (auto eq = w.find('='); eq != std::string::npos && eq > 0) {
          sym.label = w.substr(0, eq);
          ref = w.substr(eq + 1);
        } else if (is_rule_word(w) && !token_set) {
          ref = w;
        } else {
          sym.terminal = true;
          sym.id = intern(w);
        }
        if (!ref.empty()) {
          auto it = g.rule_index_.find(ref);
          if (it == g.rule_index_.end()) {
            throw GrammarError(raw[i].line, "undefined nonterminal '" + ref + "' referenced in rule '" + rule.name + "'");
          }
          sym.terminal = false;
          sym.id = it->second;
          a.child_slots.push_back(static_cast<int>(a.symbols.size()));
        }
        a.symbols.push_back(std::move(sym));
      }
      if (a.symbols.size() >= 2 && a.symbols[0].terminal && g.vocabulary_[static_cast<std::size_t>(a.symbols[0].id)] == "(" &&
          a.symbols[1].terminal) {
        a.head = g.vocabulary_[static_cast<std::size_t>(a.symbols[1].id)];
      }
      rule.alts.push_back(std::move(a));
    }
  }

  g.edit_token_ = intern("<EDIT>");
  g.end_token_ = intern("<END>");

  // Primitives.
  for (const auto& [head, line] : primitive_decl) {
    bool found = false;
    for (auto& rule : g.rules_) {
      for (auto& a : rule.alts) {
        if (a.head == head) {
          a.primitive = true;
          found = true;
        }
      }
    }
    if (!found) throw GrammarError(line, "primitive head '" + head + "' is not produced by any rule");
    g.primitive_heads_.insert(head);
  }

  if (!start_decl.empty()) {
    auto it = g.rule_index_.find(start_decl);
    if (it == g.rule_index_.end()) throw GrammarError(start_line, "undefined start rule '" + start_decl + "'");
    g.start_ = it->second;
  }

  const std::size_t n = g.rules_.size();

  // Minimum primitive count and minimum depth; an unproductive rule keeps the
  // unbounded sentinel.
  for (auto& r : g.rules_) {
    r.min_sigma = kUnbounded;
    r.min_depth = kUnbounded;
  }
  for (bool changed = true; changed;) {
    changed = false;
    for (auto& r : g.rules_) {
      for (auto& a : r.alts) {
        int s = a.primitive ? 1 : 0;
        int d = 0;
        for (int slot : a.child_slots) {
          const Rule& c = g.rules_[static_cast<std::size_t>(a.symbols[static_cast<std::size_t>(slot)].id)];
          s = saturating_add(s, c.min_sigma);
          d = std::max(d, c.min_depth);
        }
        a.min_sigma = s;
        a.min_depth = d >= kUnbounded ? kUnbounded : d + 1;
        if (s < r.min_sigma) {
          r.min_sigma = s;
          changed = true;
        }
        if (a.min_depth < r.min_depth) {
          r.min_depth = a.min_depth;
          changed = true;
        }
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (g.rules_[i].min_depth >= kUnbounded) {
      throw GrammarError(raw[i].line, "rule '" + g.rules_[i].name + "' derives no finite program");
    }
  }

  // Maximum primitive count; growth that persists past n rounds comes from a
  // primitive-producing cycle and is unbounded.
  for (auto& r : g.rules_) r.max_sigma = 0;
  for (std::size_t round = 0;; ++round) {
    bool changed = false;
    for (auto& r : g.rules_) {
      int best = r.max_sigma;
      for (auto& a : r.alts) {
        int s = a.primitive ? 1 : 0;
        for (int slot : a.child_slots) {
          s = saturating_add(s, g.rules_[static_cast<std::size_t>(a.symbols[static_cast<std::size_t>(slot)].id)].max_sigma);
        }
        a.max_sigma = s;
        best = std::max(best, s);
      }
      if (best != r.max_sigma) {
        r.max_sigma = round > n + 1 ? kUnbounded : best;
        changed = true;
      }
    }
    if (!changed) break;
  }

  // Finiteness: a rule is finite iff it reaches no cycle.
  {
    std::vector<std::vector<int>> edges(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& a : g.rules_[i].alts) {
        for (int slot : a.child_slots) edges[i].push_back(a.symbols[static_cast<std::size_t>(slot)].id);
      }
    }
    // state: 0 = unvisited, 1 = on stack, 2 = finite, 3 = infinite
    std::vector<int> state(n, 0);
    std::function<bool(int)> visit = [&](int r) -> bool {
      auto& st = state[static_cast<std::size_t>(r)];
      if (st == 1) return false;
      if (st >= 2) return st == 2;
      st = 1;
      bool finite = true;
      for (int c : edges[static_cast<std::size_t>(r)]) finite = visit(c) && finite;
      st = finite ? 2 : 3;
      return finite;
    };
    for (std::size_t i = 0; i < n; ++i) g.rules_[i].finite = visit(static_cast<int>(i));
  }

  // Left recursion.
  {
    std::vector<int> state(n, 0);
    std::function<void(int)> visit = [&](int r) {
      state[static_cast<std::size_t>(r)] = 1;
      for (const auto& a : g.rules_[static_cast<std::size_t>(r)].alts) {
        if (a.symbols[0].terminal) continue;
        const int c = a.symbols[0].id;
        if (state[static_cast<std::size_t>(c)] == 1) {
          throw GrammarError(raw[static_cast<std::size_t>(r)].line,
                             "left recursion through rule '" + g.rules_[static_cast<std::size_t>(c)].name + "'");
        }
        if (state[static_cast<std::size_t>(c)] == 0) visit(c);
      }
      state[static_cast<std::size_t>(r)] = 2;
    };
    for (std::size_t i = 0; i < n; ++i) {
      if (state[i] == 0) visit(static_cast<int>(i));
    }
  }

  // FIRST_k sets; the smallest k that makes every rule deterministic wins.
  for (std::size_t k = 1; k <= 3; ++k) {
    std::vector<Strings> rule_first(n);
    std::vector<std::vector<Strings>> alt_first(n);
    for (std::size_t i = 0; i < n; ++i) alt_first[i].resize(g.rules_[i].alts.size());
    for (bool changed = true; changed;) {
      changed = false;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t ai = 0; ai < g.rules_[i].alts.size(); ++ai) {
          Strings acc{std::vector<TokenId>{}};
          for (const auto& sym : g.rules_[i].alts[ai].symbols) {
            if (sym.terminal) {
              acc = concat_k(acc, Strings{std::vector<TokenId>{sym.id}}, k);
            } else {
              acc = concat_k(acc, rule_first[static_cast<std::size_t>(sym.id)], k);
            }
          }
          for (const auto& s : acc) {
            if (alt_first[i][ai].insert(s).second) changed = true;
            rule_first[i].insert(s);
          }
        }
      }
    }
    bool deterministic = true;
    std::string conflict;
    for (std::size_t i = 0; i < n && deterministic; ++i) {
      const auto& alts = alt_first[i];
      for (std::size_t a = 0; a < alts.size() && deterministic; ++a) {
        for (std::size_t b = a + 1; b < alts.size() && deterministic; ++b) {
          for (const auto& x : alts[a]) {
            for (const auto& y : alts[b]) {
              if (prefix_related(x, y)) {
                deterministic = false;
                conflict = g.rules_[i].name;
                break;
              }
            }
            if (!deterministic) break;
          }
        }
      }
    }
    if (deterministic) {
      g.lookahead_ = static_cast<int>(k);
      g.first_ = std::move(alt_first);
      return g;
    }
    if (k == 3) {
      throw GrammarError(raw[static_cast<std::size_t>(g.rule_id(conflict))].line,
                         "ambiguous alternatives in rule '" + conflict + "' (grammar must be LL(3) or simpler)");
    }
  }
  return g;
}

Grammar load_grammar_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw GrammarError(0, "cannot open grammar file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return load_grammar(buf.str(), path.stem().string());
}

}  // namespace treediff
