#include "treediff/sampler.hpp"

#include <algorithm>
#include <map>

namespace treediff {

namespace {

// Past this depth only the shallowest feasible alternatives are taken, which
// bounds recursion through primitive-free cycles such as s -> move -> s.
constexpr int kDepthCap = 48;

struct ChildRange {
  int lo;
  int hi;
};

// ways[i][s]: number of ways children i.. sum to exactly s.
std::vector<std::vector<double>> allocation_table(const std::vector<ChildRange>& ranges, int cap) {
  const std::size_t n = ranges.size();
  std::vector<std::vector<double>> ways(n + 1, std::vector<double>(static_cast<std::size_t>(cap) + 1, 0.0));
  ways[n][0] = 1.0;
  for (std::size_t i = n; i-- > 0;) {
    for (int s = 0; s <= cap; ++s) {
      double w = 0.0;
      for (int t = ranges[i].lo; t <= std::min(ranges[i].hi, s); ++t) w += ways[i + 1][static_cast<std::size_t>(s - t)];
      ways[i][static_cast<std::size_t>(s)] = w;
    }
  }
  return ways;
}

std::size_t pick_weighted(const std::vector<double>& weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  double x = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    if (x < weights[i]) return i;
    x -= weights[i];
  }
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return 0;
}

class Sampler {
 public:
  Sampler(const Grammar& g, Rng& rng) : g_(g), rng_(rng) {}

  SyntaxTree sample(RuleId r, int lo, int hi, int depth, int forced_alt = -1) {
    const Rule& rule = g_.rule(r);
    std::vector<int> feasible;
    for (std::size_t a = 0; a < rule.alts.size(); ++a) {
      const Alternative& alt = rule.alts[a];
      if (forced_alt >= 0 && static_cast<int>(a) != forced_alt) continue;
      if (alt.max_sigma > lo && alt.min_sigma <= hi) feasible.push_back(static_cast<int>(a));
    }
    if (feasible.empty()) {
      throw SampleError("no derivation of '" + rule.name + "' has " + std::to_string(lo) + " < sigma <= " +
                        std::to_string(hi));
    }
    if (depth > kDepthCap) {
      int shallowest = kUnbounded;
      for (int a : feasible) shallowest = std::min(shallowest, rule.alts[static_cast<std::size_t>(a)].min_depth);
      std::erase_if(feasible,
                    [&](int a) { return rule.alts[static_cast<std::size_t>(a)].min_depth != shallowest; });
    }
    const int chosen = feasible[rng_.below(feasible.size())];
    const Alternative& alt = rule.alts[static_cast<std::size_t>(chosen)];
    const int own = alt.primitive ? 1 : 0;

    std::vector<RuleId> child_rules;
    std::vector<ChildRange> ranges;
    for (int slot : alt.child_slots) {
      const RuleId c = alt.symbols[static_cast<std::size_t>(slot)].id;
      child_rules.push_back(c);
      ranges.push_back({g_.rule(c).min_sigma, std::min(g_.rule(c).max_sigma, hi)});
    }
    const int cap = std::max(0, hi - own);
    const auto ways = allocation_table(ranges, cap);
    const int sum_lo = std::max(0, lo - own + 1);
    std::vector<double> totals(static_cast<std::size_t>(cap) + 1, 0.0);
    for (int s = sum_lo; s <= cap; ++s) totals[static_cast<std::size_t>(s)] = ways[0][static_cast<std::size_t>(s)];
    int remaining = static_cast<int>(pick_weighted(totals, rng_));

    std::vector<SyntaxTree> children;
    children.reserve(child_rules.size());
    for (std::size_t i = 0; i < child_rules.size(); ++i) {
      std::vector<double> w(static_cast<std::size_t>(remaining) + 1, 0.0);
      for (int t = ranges[i].lo; t <= std::min(ranges[i].hi, remaining); ++t) {
        w[static_cast<std::size_t>(t)] = ways[i + 1][static_cast<std::size_t>(remaining - t)];
      }
      const int t = static_cast<int>(pick_weighted(w, rng_));
      remaining -= t;
      children.push_back(sample(child_rules[i], t - 1, t, depth + 1));
    }
    return SyntaxTree::make(g_, r, chosen, std::move(children));
  }

 private:
  const Grammar& g_;
  Rng& rng_;
};

struct InfiniteSet {};
struct TooMany {};

class Enumerator {
 public:
  Enumerator(const Grammar& g, std::size_t limit) : g_(g), limit_(limit) {}

  // All trees from r with sigma exactly s.
  const std::vector<SyntaxTree>& exact(RuleId r, int s) {
    const auto key = std::make_pair(r, s);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    if (!active_.insert(key).second) throw InfiniteSet{};
    std::vector<SyntaxTree> out;
    const Rule& rule = g_.rule(r);
    for (std::size_t a = 0; a < rule.alts.size(); ++a) {
      const Alternative& alt = rule.alts[a];
      if (alt.min_sigma > s || alt.max_sigma < s) continue;
      const int rest = s - (alt.primitive ? 1 : 0);
      std::vector<RuleId> kids;
      for (int slot : alt.child_slots) kids.push_back(alt.symbols[static_cast<std::size_t>(slot)].id);
      std::vector<SyntaxTree> acc;
      combine(r, static_cast<int>(a), kids, 0, rest, acc, out);
    }
    active_.erase(key);
    return memo_.emplace(key, std::move(out)).first->second;
  }

 private:
  void combine(RuleId r, int a, const std::vector<RuleId>& kids, std::size_t i, int rest, std::vector<SyntaxTree>& acc,
               std::vector<SyntaxTree>& out) {
    if (i == kids.size()) {
      if (rest == 0) {
        out.push_back(SyntaxTree::make(g_, r, a, acc));
        if (++produced_ > limit_) throw TooMany{};
      }
      return;
    }
    int later_min = 0;
    for (std::size_t j = i + 1; j < kids.size(); ++j) later_min += g_.rule(kids[j]).min_sigma;
    const Rule& c = g_.rule(kids[i]);
    for (int t = c.min_sigma; t <= std::min(c.max_sigma, rest - later_min); ++t) {
      // std::map references stay valid across inserts.
      const std::vector<SyntaxTree>& options = exact(kids[i], t);
      for (const auto& opt : options) {
        acc.push_back(opt);
        combine(r, a, kids, i + 1, rest - t, acc, out);
        acc.pop_back();
      }
    }
  }

  const Grammar& g_;
  std::size_t limit_;
  std::size_t produced_ = 0;
  std::map<std::pair<RuleId, int>, std::vector<SyntaxTree>> memo_;
  std::set<std::pair<RuleId, int>> active_;
};

// Parser stack: terminals as token ids (>= 0), rules as -(id + 1); top at back.
using Stack = std::vector<int>;

std::set<Stack> closure(const Grammar& g, const std::set<Stack>& stacks) {
  std::set<Stack> done;
  std::vector<Stack> work(stacks.begin(), stacks.end());
  while (!work.empty()) {
    Stack s = std::move(work.back());
    work.pop_back();
    if (s.empty() || s.back() >= 0) {
      done.insert(std::move(s));
      continue;
    }
    const RuleId r = -s.back() - 1;
    s.pop_back();
    for (const auto& alt : g.rule(r).alts) {
      Stack next = s;
      for (auto it = alt.symbols.rbegin(); it != alt.symbols.rend(); ++it) next.push_back(it->terminal ? it->id : -(it->id + 1));
      work.push_back(std::move(next));
    }
  }
  return done;
}

}  // namespace

SyntaxTree constrained_sample(const Grammar& g, RuleId rule, int sigma_min, int sigma_max, Rng& rng) {
  if (sigma_min >= sigma_max) {
    throw SampleError("empty primitive bound (" + std::to_string(sigma_min) + ", " + std::to_string(sigma_max) + "]");
  }
  Sampler s(g, rng);
  return s.sample(rule, sigma_min, sigma_max, 0);
}

SyntaxTree constrained_sample_alt(const Grammar& g, RuleId rule, int alt, int sigma_min, int sigma_max, Rng& rng) {
  if (sigma_min >= sigma_max) {
    throw SampleError("empty primitive bound (" + std::to_string(sigma_min) + ", " + std::to_string(sigma_max) + "]");
  }
  Sampler s(g, rng);
  return s.sample(rule, sigma_min, sigma_max, 0, alt);
}

SyntaxTree sample_up_to(const Grammar& g, RuleId rule, int sigma_max, Rng& rng) {
  return constrained_sample(g, rule, g.rule(rule).min_sigma - 1, sigma_max, rng);
}

std::optional<std::vector<SyntaxTree>> enumerate_trees(const Grammar& g, RuleId rule, int sigma_min, int sigma_max,
                                                       std::size_t limit) {
  Enumerator e(g, limit);
  std::vector<SyntaxTree> out;
  try {
    for (int s = std::max(sigma_min + 1, 0); s <= sigma_max; ++s) {
      const auto& part = e.exact(rule, s);
      out.insert(out.end(), part.begin(), part.end());
      if (out.size() > limit) return std::nullopt;
    }
  } catch (const InfiniteSet&) {
    return std::nullopt;
  } catch (const TooMany&) {
    return std::nullopt;
  }
  return out;
}

std::set<TokenId> legal_continuations(const Grammar& g, RuleId rule, std::span<const TokenId> partial) {
  std::set<Stack> stacks = closure(g, {Stack{-(rule + 1)}});
  for (std::size_t i = 0; i < partial.size(); ++i) {
    std::set<Stack> next;
    for (const auto& s : stacks) {
      if (!s.empty() && s.back() == partial[i]) next.insert(Stack(s.begin(), s.end() - 1));
    }
    if (next.empty()) {
      throw PrefixError(i, "token '" + g.token_text(partial[i]) + "' cannot continue a '" + g.rule(rule).name + "'");
    }
    stacks = closure(g, next);
  }
  std::set<TokenId> out;
  for (const auto& s : stacks) out.insert(s.empty() ? g.end_token() : s.back());
  return out;
}

}  // namespace treediff
