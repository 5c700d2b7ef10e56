#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "treediff/sampler.hpp"
#include "treediff/syntax_tree.hpp"

using namespace treediff;

namespace {

std::string error_of(const std::string& spec) {
  try {
    (void)load_grammar(spec);
  } catch (const GrammarError& e) {
    return e.what();
  }
  return "";
}

std::set<std::string> rule_names(const Grammar& g) {
  std::set<std::string> out;
  for (const auto& r : g.rules()) out.insert(r.name);
  return out;
}

}  // namespace

TEST_CASE("shipped grammars expose the expected rules") {
  const Grammar& csg = testing::grammar("csg2d");
  CHECK(rule_names(csg) == std::set<std::string>{"s", "binop", "op", "number", "angle", "circle", "quad"});
  CHECK(csg.primitive_heads() == std::set<std::string>{"Circle", "Quad"});
  CHECK(csg.rule(csg.start()).name == "s");
  CHECK(csg.rule(csg.rule_id("number")).alts.size() == 16);
  CHECK(csg.rule(csg.rule_id("angle")).alts.size() == 8);
  for (const char* tok : {"0", "9", "A", "F", "angle_0", "angle_315", "+", "-", "(", ")"}) {
    CHECK_MESSAGE(csg.token_id(tok) >= 0, tok);
  }
  CHECK(csg.token_id("G") == -1);
  CHECK(csg.token_id("angle_30") == -1);

  const Grammar& svg = testing::grammar("tinysvg");
  CHECK(svg.has_rule("move"));
  CHECK(svg.rule(svg.rule_id("color")).alts.size() == 9);
  CHECK(svg.primitive_heads() == std::set<std::string>{"Rectangle", "Ellipse"});

  const Grammar& rainbow = testing::grammar("rainbow");
  CHECK_FALSE(rainbow.has_rule("move"));
  CHECK(rainbow.token_id("Move") == -1);
  CHECK(rule_names(svg).size() > rule_names(rainbow).size());
}

TEST_CASE("vocabulary has no duplicates and covers every terminal") {
  for (const char* env : {"csg2d", "tinysvg", "rainbow"}) {
    const Grammar& g = testing::grammar(env);
    const auto& vocab = g.vocabulary();
    CHECK(std::set<std::string>(vocab.begin(), vocab.end()).size() == vocab.size());
    for (const auto& r : g.rules()) {
      for (const auto& a : r.alts) {
        for (const auto& sym : a.symbols) {
          if (sym.terminal) {
            CHECK(sym.id >= 0);
            CHECK(static_cast<std::size_t>(sym.id) < vocab.size());
          }
        }
      }
    }
    CHECK(g.token_text(g.end_token()) == "<END>");
    CHECK(g.token_text(g.edit_token()) == "<EDIT>");
  }
}

TEST_CASE("load errors carry line numbers") {
  auto undefined = error_of("s: circle | shape\ncircle: (Circle n)\nn: 1 | 2\n");
  CHECK(undefined.find("'shape'") != std::string::npos);
  CHECK(undefined.find("line 1") != std::string::npos);

  auto duplicate = error_of("s: a | b\na: x | y\na: z | w\n");
  CHECK(duplicate.find("duplicate") != std::string::npos);
  CHECK(duplicate.find("line 3") != std::string::npos);

  auto empty = error_of("s: a |  | b\n");
  CHECK(empty.find("empty alternative") != std::string::npos);
  CHECK(empty.find("line 1") != std::string::npos);

  CHECK(error_of("s: (Loop s)\n").find("derives no finite program") != std::string::npos);
  CHECK(error_of("s: s X | Y\n").find("left") != std::string::npos);
  CHECK(!error_of("%primitives Square\ns: (Circle n)\nn: 1 | 2\n").empty());
  CHECK(!error_of("").empty());
}

TEST_CASE("ambiguous grammars are rejected") {
  auto msg = error_of("s: (A x) | (A y)\nx: 1 | 2\ny: 2 | 3\n");
  CHECK_FALSE(msg.empty());
  CHECK(error_of("s: (A x) | (B x)\nx: 1 | 2\n").empty());
}

TEST_CASE("continuation lines and comments") {
  Grammar g = load_grammar(
      "// leading comment\n"
      "%primitives Dot\n"
      "s: (Pair s s)   // pairs\n"
      "   | dot\n"
      "dot: (Dot v)\n"
      "v: [2 to 6 step 2 prefix v]\n");
  CHECK(g.rule(g.start()).alts.size() == 2);
  CHECK(g.rule(g.rule_id("v")).alts.size() == 3);
  CHECK(g.token_id("v4") >= 0);
  CHECK(g.token_id("v3") == -1);
  auto t = parse_text(g, "(Pair (Dot v2) (Dot v6))");
  CHECK(t.sigma() == 2);
}

TEST_CASE("parse examples") {
  const Grammar& g = testing::grammar("csg2d");
  auto t = parse_text(g, "(+ (Quad 1 0 A 3 angle_315) (Circle 8 2 1))");
  CHECK(g.rule(t.rule()).name == "s");
  const auto& binop = t.child(0);
  CHECK(g.rule(binop.rule()).name == "binop");
  CHECK(sigma(binop) == 2);
  CHECK(g.rule(binop.child(1).child(0).rule()).name == "quad");
  CHECK(g.rule(binop.child(2).child(0).rule()).name == "circle");

  auto bad = tokenize(g, "( + )");
  try {
    (void)parse(g, bad);
    FAIL("expected a syntax error");
  } catch (const SyntaxError& e) {
    CHECK(e.index() == 2);
  }
  CHECK_THROWS_AS(parse_text(g, "(Circle 1 2)"), SyntaxError);
  CHECK_THROWS_AS(parse_text(g, "(Circle 1 2 3) (Circle 1 2 3)"), SyntaxError);
  CHECK_THROWS_AS(parse_text(g, "(Circle 1 2 G)"), SyntaxError);
}

TEST_CASE("sigma counts primitive heads") {
  const Grammar& g = testing::grammar("csg2d");
  CHECK(sigma(parse_text(g, "(Circle 8 2 1)")) == 1);
  CHECK(sigma(parse_text(g, "(+ (Quad 1 0 A 3 angle_45) (Circle 8 2 1))")) == 2);
  auto opening = parse_text(g, "(+ (+ (+ (Circle A D 4) (Quad F E 4 6 angle_90)) (Quad 3 E C 2 angle_180)) (Circle C 2 1))");
  CHECK(sigma(opening) == 4);
  CHECK(opening.recount_sigma(g) == 4);
  CHECK(sigma(parse_text(g, "4", g.rule_id("number"))) == 0);
}

TEST_CASE("serialize spans nest and tokens come from the vocabulary") {
  const Grammar& g = testing::grammar("csg2d");
  auto t = parse_text(g, "(- (Circle 1 2 3) (+ (Circle 4 5 6) (Quad 1 2 3 4 angle_0)))");
  auto seq = serialize(g, t);
  CHECK(seq.tokens.size() == static_cast<std::size_t>(t.token_count()));
  CHECK(seq.node_spans.size() == static_cast<std::size_t>(t.size()));
  CHECK(seq.node_spans[0].start == 0);
  CHECK(seq.node_spans[0].end == static_cast<int>(seq.tokens.size()));
  std::map<NodePath, NodeSpan> by_path;
  for (const auto& s : seq.node_spans) by_path[s.path] = s;
  for (const auto& s : seq.node_spans) {
    CHECK(s.start < s.end);
    if (s.path.empty()) continue;
    NodePath parent(s.path.begin(), s.path.end() - 1);
    const auto& p = by_path.at(parent);
    CHECK(p.start <= s.start);
    CHECK(s.end <= p.end);
    // Unit productions (s -> binop) share their child's span.
    if (g.alt(t.at(parent).rule(), t.at(parent).alt()).symbols.size() > 1) CHECK((p.end - p.start) > (s.end - s.start));
    CHECK(serialize(g, t.at(s.path)).tokens ==
          std::vector<TokenId>(seq.tokens.begin() + s.start, seq.tokens.begin() + s.end));
  }
  CHECK(to_text(g, parse_text(g, "(Circle 1 2 3)")) == "(Circle 1 2 3)");
}

TEST_CASE("round trip over sampled programs") {
  for (const char* env : {"csg2d", "tinysvg", "rainbow"}) {
    const Grammar& g = testing::grammar(env);
    Rng rng(11);
    for (int i = 0; i < 10000; ++i) {
      auto t = sample_up_to(g, g.start(), 8, rng);
      auto toks = tokens_of(g, t);
      auto back = parse(g, toks);
      REQUIRE(back == t);
      REQUIRE(parse_text(g, to_text(g, t)) == t);
      REQUIRE(t.recount_sigma(g) == t.sigma());
    }
  }
}

TEST_CASE("serialize is injective over distinct samples") {
  const Grammar& g = testing::grammar("csg2d");
  Rng rng(5);
  std::vector<SyntaxTree> distinct;
  std::set<std::vector<TokenId>> seen;
  while (distinct.size() < 1000) {
    auto t = sample_up_to(g, g.start(), 4, rng);
    if (std::none_of(distinct.begin(), distinct.end(), [&](const SyntaxTree& d) { return d == t; })) {
      distinct.push_back(t);
      seen.insert(tokens_of(g, t));
    }
  }
  CHECK(seen.size() == 1000);
}

TEST_CASE("constrained_sample respects its bound") {
  for (const char* env : {"csg2d", "tinysvg", "rainbow"}) {
    const Grammar& g = testing::grammar(env);
    Rng rng(3);
    for (int i = 0; i < 10000; ++i) {
      auto t = constrained_sample(g, g.start(), 0, 2, rng);
      REQUIRE(t.sigma() >= 1);
      REQUIRE(t.sigma() <= 2);
    }
    for (int lo = 0; lo < 8; ++lo) {
      for (int i = 0; i < 200; ++i) {
        auto t = constrained_sample(g, g.start(), lo, 8, rng);
        REQUIRE(t.sigma() > lo);
        REQUIRE(t.sigma() <= 8);
      }
    }
  }
}

TEST_CASE("constrained_sample covers every alternative of s") {
  const Grammar& g = testing::grammar("tinysvg");
  Rng rng(17);
  std::set<int> alts;
  for (int i = 0; i < 1000; ++i) alts.insert(constrained_sample(g, g.start(), 0, 8, rng).alt());
  CHECK(alts.size() == g.rule(g.start()).alts.size());
}

TEST_CASE("constrained_sample on primitive-free rules and unsatisfiable bounds") {
  const Grammar& g = testing::grammar("csg2d");
  Rng rng(1);
  auto angle = constrained_sample(g, g.rule_id("angle"), -1, 2, rng);
  CHECK(angle.sigma() == 0);
  CHECK(g.token_text(tokens_of(g, angle)[0]).rfind("angle_", 0) == 0);
  CHECK_THROWS_AS(constrained_sample(g, g.start(), -1, 0, rng), SampleError);
  CHECK_THROWS_AS(constrained_sample(g, g.rule_id("angle"), 0, 5, rng), SampleError);
  CHECK_THROWS_AS(constrained_sample(g, g.rule_id("circle"), 1, 5, rng), SampleError);
  CHECK_THROWS_AS(constrained_sample(g, g.start(), 3, 3, rng), SampleError);
}

TEST_CASE("sampling is deterministic per seed") {
  const Grammar& g = testing::grammar("tinysvg");
  for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
    Rng a(seed);
    Rng b(seed);
    for (int i = 0; i < 50; ++i) CHECK(sample_up_to(g, g.start(), 8, a) == sample_up_to(g, g.start(), 8, b));
  }
}

TEST_CASE("enumerate_trees on finite and infinite sets") {
  const Grammar& g = testing::grammar("csg2d");
  auto numbers = enumerate_trees(g, g.rule_id("number"), -1, 2);
  REQUIRE(numbers);
  CHECK(numbers->size() == 16);
  auto circles = enumerate_trees(g, g.rule_id("circle"), 0, 1);
  REQUIRE(circles);
  CHECK(circles->size() == 16 * 16 * 16);
  auto quads = enumerate_trees(g, g.rule_id("s"), 0, 1, 2000000);
  REQUIRE(quads);
  CHECK(quads->size() == 16 * 16 * 16 + 16 * 16 * 16 * 16 * 8);
  CHECK_FALSE(enumerate_trees(g, g.start(), 0, 2, 1000).has_value());
}

TEST_CASE("legal_continuations examples") {
  const Grammar& g = testing::grammar("csg2d");
  auto ids = [&](std::initializer_list<const char*> words) {
    std::vector<TokenId> out;
    for (const char* w : words) out.push_back(g.token_id(w));
    return out;
  };
  auto op = legal_continuations(g, g.rule_id("op"), {});
  CHECK(op == std::set<TokenId>{g.token_id("+"), g.token_id("-")});

  auto circle_prefix = ids({"(", "Circle"});
  auto nums = legal_continuations(g, g.rule_id("circle"), circle_prefix);
  CHECK(nums.size() == 16);
  for (const char* n : {"0", "7", "A", "F"}) CHECK(nums.count(g.token_id(n)) == 1);

  auto complete = ids({"(", "Circle", "1", "2", "3", ")"});
  CHECK(legal_continuations(g, g.start(), complete) == std::set<TokenId>{g.end_token()});

  auto open = legal_continuations(g, g.start(), ids({"("}));
  CHECK(open == std::set<TokenId>{g.token_id("+"), g.token_id("-"), g.token_id("Circle"), g.token_id("Quad")});

  CHECK_THROWS_AS(legal_continuations(g, g.start(), ids({"(", "Circle", "1", "2", "3", ")", ")"})), PrefixError);
  CHECK_THROWS_AS(legal_continuations(g, g.rule_id("op"), ids({"Circle"})), PrefixError);
}

TEST_CASE("legal_continuations matches brute force on small rules") {
  struct Case {
    const char* env;
    const char* rule;
  };
  for (Case c : {Case{"csg2d", "op"}, Case{"csg2d", "number"}, Case{"csg2d", "angle"}, Case{"tinysvg", "color"},
                 Case{"csg2d", "circle"}, Case{"rainbow", "rect"}}) {
    const Grammar& g = testing::grammar(c.env);
    const RuleId r = g.rule_id(c.rule);
    auto all = enumerate_trees(g, r, -1, 1);
    REQUIRE(all);
    std::map<std::vector<TokenId>, std::set<TokenId>> expected;
    for (const auto& t : *all) {
      auto toks = tokens_of(g, t);
      for (std::size_t n = 0; n <= toks.size(); ++n) {
        std::vector<TokenId> prefix(toks.begin(), toks.begin() + static_cast<std::ptrdiff_t>(n));
        expected[prefix].insert(n == toks.size() ? g.end_token() : toks[n]);
      }
    }
    for (const auto& [prefix, next] : expected) {
      REQUIRE_MESSAGE(legal_continuations(g, r, prefix) == next, c.rule);
    }
  }
}
