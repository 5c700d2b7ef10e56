#include <deque>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "treediff/sampler.hpp"
#include "treediff/tree_path.hpp"

using namespace treediff;

namespace {

constexpr const char* kTiny =
    "%primitives Dot\n"
    "s: (Pair s s) | dot\n"
    "dot: (Dot c)\n"
    "c: r | g | b\n";

// Roots of maximal differing subtrees under a top-down walk.
int mismatch_roots(const SyntaxTree& a, const SyntaxTree& b) {
  if (!a.node_eq(b)) return 1;
  int n = 0;
  for (std::size_t i = 0; i < a.children().size(); ++i) n += mismatch_roots(a.child(i), b.child(i));
  return n;
}

void check_round(const Grammar& g, const SyntaxTree& a, const SyntaxTree& b, const std::vector<Mutation>& round,
                 int sigma_small) {
  SyntaxTree cur = a;
  int before = structural_distance(cur, b);
  for (const auto& m : round) {
    REQUIRE_NOTHROW(validate_mutation(g, cur, m, sigma_small));
    cur = apply(g, cur, m);
    const int after = structural_distance(cur, b);
    REQUIRE(after < before);
    before = after;
  }
}

// Shortest path lengths in the small-mutation graph restricted to sigma <= cap.
// Any mutable node may be replaced; only the replacement is size-bounded.
class Bfs {
 public:
  Bfs(const Grammar& g, int sigma_small, int cap) : g_(g), sigma_small_(sigma_small), cap_(cap) {
    replacements_ = *enumerate_trees(g, g.start(), 0, sigma_small);
    for (const char* c : {"r", "g", "b"}) colors_.push_back(parse_text(g, c, g.rule_id("c")));
  }

  std::vector<SyntaxTree> neighbours(const SyntaxTree& t) const {
    std::vector<SyntaxTree> out;
    for (const auto& p : all_paths(t)) {
      const auto& n = t.at(p);
      if (!g_.is_mutable(n.rule())) continue;
      const auto& pool = g_.rule(n.rule()).name == "s" ? replacements_ : colors_;
      for (const auto& r : pool) {
        if (r == n) continue;
        auto next = replace_at(g_, t, p, r);
        if (next.sigma() <= cap_) out.push_back(next);
      }
    }
    return out;
  }

  int distance(const SyntaxTree& a, const SyntaxTree& b) const {
    const auto key_b = to_text(g_, b);
    std::map<std::string, int> dist{{to_text(g_, a), 0}};
    std::deque<SyntaxTree> queue{a};
    while (!queue.empty()) {
      auto cur = queue.front();
      queue.pop_front();
      const int d = dist[to_text(g_, cur)];
      if (to_text(g_, cur) == key_b) return d;
      for (const auto& n : neighbours(cur)) {
        if (dist.emplace(to_text(g_, n), d + 1).second) queue.push_back(n);
      }
    }
    return -1;
  }

  bool is_edge(const SyntaxTree& a, const SyntaxTree& b) const {
    for (const auto& n : neighbours(a)) {
      if (n == b) return true;
    }
    return false;
  }

 private:
  const Grammar& g_;
  int sigma_small_;
  int cap_;
  std::vector<SyntaxTree> replacements_;
  std::vector<SyntaxTree> colors_;
};

}  // namespace

TEST_CASE("identical trees") {
  const Grammar& g = testing::grammar("csg2d");
  auto t = parse_text(g, "(+ (Circle 1 2 3) (Quad 1 2 3 4 angle_0))");
  Rng rng(0);
  CHECK(first_step(g, t, t, 2, rng).empty());
  CHECK(full_path(g, t, t, 2, 0).steps.empty());
  CHECK(edit_distance(g, t, t) == 0);
  CHECK(structural_distance(t, t) == 0);
}

TEST_CASE("structural distance counts unmatched target nodes") {
  const Grammar& g = testing::grammar("csg2d");
  auto a = parse_text(g, "(+ (Circle 1 2 3) (Circle 1 2 3))");
  auto b = parse_text(g, "(+ (Circle 1 2 4) (Quad 1 2 3 4 angle_0))");
  // number leaf: 1 node; s-quad subtree: s, quad, 4 numbers, angle.
  CHECK(structural_distance(a, b) == 1 + 7);
  CHECK(structural_distance(a, a) == 0);
}

TEST_CASE("the direct original value is proposed") {
  const Grammar& g = testing::grammar("tinysvg");
  auto green = parse_text(g, "(Arrange h (Rectangle 3 3 green none 0) (Ellipse 2 2 blue red 1) 2)");
  auto red = parse_text(g, "(Arrange h (Rectangle 3 3 red none 0) (Ellipse 2 2 blue red 1) 2)");
  Rng rng(1);
  auto round = first_step(g, green, red, 2, rng);
  REQUIRE(round.size() == 1);
  CHECK(to_text(g, round[0].replacement) == "red");
  CHECK(to_text(g, apply(g, green, round[0])) == to_text(g, red));
}

TEST_CASE("root production mismatch is an error") {
  const Grammar& g = testing::grammar("csg2d");
  auto num = parse_text(g, "4", g.rule_id("number"));
  auto s = parse_text(g, "(Circle 1 2 3)");
  Rng rng(0);
  CHECK_THROWS_AS(first_step(g, num, s, 2, rng), PathError);
}

TEST_CASE("single mutation chains invert in one step") {
  for (const char* env : {"csg2d", "tinysvg"}) {
    const Grammar& g = testing::grammar(env);
    Rng rng(12);
    int direct = 0;
    for (int i = 0; i < 1000; ++i) {
      auto z0 = sample_up_to(g, g.start(), 8, rng);
      auto chain = noise_chain(g, z0, 1, 2, rng.next());
      const auto& m = chain.mutations[0];
      const auto& original = z0.at(m.target_path);
      auto path = full_path(g, chain.states[1], z0, 2, 0);
      REQUIRE(path.steps.size() == static_cast<std::size_t>(mismatch_roots(m.replacement, original)));
      if (!m.replacement.node_eq(original)) {
        ++direct;
        REQUIRE(path.steps.size() == 1);
        CHECK(path.steps[0].target_path == m.target_path);
        CHECK(path.steps[0].replacement == original);
      }
    }
    CHECK(direct > 100);
  }
}

TEST_CASE("paths replay exactly and stay short") {
  for (const char* env : {"csg2d", "tinysvg", "rainbow"}) {
    const Grammar& g = testing::grammar(env);
    Rng rng(40);
    for (int i = 0; i < 1000; ++i) {
      auto a = sample_up_to(g, g.start(), 8, rng);
      auto b = sample_up_to(g, g.start(), 8, rng);
      auto p = full_path(g, a, b, 2, rng.next());
      SyntaxTree cur = a;
      for (const auto& m : p.steps) {
        REQUIRE_NOTHROW(validate_mutation(g, cur, m, 2));
        cur = apply(g, cur, m);
      }
      REQUIRE(cur == b);
      REQUIRE(p.steps.size() <= static_cast<std::size_t>(b.size()));
      REQUIRE(p.steps.size() <= 2 * static_cast<std::size_t>(b.size()));
    }
  }
}

TEST_CASE("every round lowers the structural distance") {
  for (const char* env : {"csg2d", "rainbow"}) {
    const Grammar& g = testing::grammar(env);
    Rng rng(41);
    for (int i = 0; i < 500; ++i) {
      auto a = sample_up_to(g, g.start(), 8, rng);
      auto b = sample_up_to(g, g.start(), 8, rng);
      auto round = first_step(g, a, b, 2, rng);
      REQUIRE(round.empty() == (a == b));
      check_round(g, a, b, round, 2);
    }
  }
}

TEST_CASE("paths are deterministic per seed") {
  const Grammar& g = testing::grammar("csg2d");
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    auto a = sample_up_to(g, g.start(), 8, rng);
    auto b = sample_up_to(g, g.start(), 8, rng);
    auto p = full_path(g, a, b, 2, 123);
    auto q = full_path(g, a, b, 2, 123);
    REQUIRE(p.steps.size() == q.steps.size());
    for (std::size_t k = 0; k < p.steps.size(); ++k) {
      CHECK(p.steps[k].target_path == q.steps[k].target_path);
      CHECK(p.steps[k].replacement == q.steps[k].replacement);
    }
    CHECK(edit_distance(g, a, b) == edit_distance(g, a, b));
    CHECK(edit_distance(g, a, b) == static_cast<int>(full_path(g, a, b, 2, kCanonicalPathSeed).steps.size()));
  }
}

TEST_CASE("canonical paths against a breadth-first oracle") {
  Grammar g = load_grammar(kTiny);
  constexpr int kCap = 5;
  const int sigma_small = 2;
  Bfs bfs(g, sigma_small, kCap);
  Rng rng(3);
  {
    for (int i = 0; i < 150; ++i) {
      auto a = sample_up_to(g, g.start(), 3, rng);
      auto b = sample_up_to(g, g.start(), 3, rng);
      auto p = full_path(g, a, b, sigma_small, kCanonicalPathSeed);
      SyntaxTree cur = a;
      for (const auto& m : p.steps) {
        auto next = apply(g, cur, m);
        REQUIRE(next.sigma() <= kCap);
        INFO(to_text(g, cur), " -> ", to_text(g, next));
        REQUIRE(bfs.is_edge(cur, next));
        cur = next;
      }
      REQUIRE(cur == b);
      const int optimal = bfs.distance(a, b);
      REQUIRE(optimal >= 0);
      CHECK(static_cast<int>(p.steps.size()) >= optimal);
      CHECK((optimal == 0) == p.steps.empty());
      Rng r2(static_cast<std::uint64_t>(i));
      check_round(g, a, b, first_step(g, a, b, sigma_small, r2), sigma_small);
    }
  }
}

TEST_CASE("unreachable target productions are reported") {
  Grammar g = load_grammar(kTiny);
  auto a = parse_text(g, "(Dot r)");
  auto b = parse_text(g, "(Pair (Dot r) (Dot g))");
  Rng rng(0);
  CHECK_THROWS_AS(first_step(g, a, b, 1, rng), PathError);
  CHECK(first_step(g, a, b, 2, rng).size() == 1);
}

TEST_CASE("rainbow pairs with few primitives") {
  const Grammar& g = testing::grammar("rainbow");
  Rng rng(13);
  for (int i = 0; i < 1000; ++i) {
    auto a = sample_up_to(g, g.start(), 3, rng);
    auto b = sample_up_to(g, g.start(), 3, rng);
    check_round(g, a, b, first_step(g, a, b, 2, rng), 2);
  }
}

TEST_CASE("first_step visits a linear number of nodes") {
  for (const char* env : {"csg2d", "tinysvg"}) {
    const Grammar& g = testing::grammar(env);
    Rng rng(14);
    double worst = 0;
    for (int i = 0; i < 2000; ++i) {
      auto a = sample_up_to(g, g.start(), 8, rng);
      auto b = sample_up_to(g, g.start(), 8, rng);
      std::size_t visits = 0;
      (void)first_step(g, a, b, 2, rng, &visits);
      worst = std::max(worst, static_cast<double>(visits) / (a.size() + b.size()));
    }
    MESSAGE(std::string(env) << " worst visits per node: " << worst);
    CHECK(worst <= 4.0);
  }
}

TEST_CASE("two-step single leaf chains point back to the original") {
  const Grammar& g = testing::grammar("tinysvg");
  const RuleId color = g.rule_id("color");
  Rng rng(15);
  for (int i = 0; i < 1000; ++i) {
    auto z0 = sample_up_to(g, g.start(), 8, rng);
    std::vector<NodePath> leaves;
    for (const auto& p : all_paths(z0)) {
      if (z0.at(p).rule() == color) leaves.push_back(p);
    }
    const auto& path = leaves[rng.below(leaves.size())];
    const auto& original = z0.at(path);
    auto mid = sample_replacement(g, original, 2, rng);
    SyntaxTree last;
    do {
      last = sample_replacement(g, mid, 2, rng);
    } while (last == original);
    auto z1 = replace_at(g, z0, path, mid);
    auto z2 = replace_at(g, z1, path, last);
    auto round = first_step(g, z2, z0, 2, rng);
    REQUIRE(round.size() == 1);
    CHECK(round[0].target_path == path);
    CHECK(round[0].replacement == original);
  }
}
