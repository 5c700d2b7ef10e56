#include "treediff/mutation.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "treediff/sampler.hpp"

namespace treediff {

namespace {

constexpr int kReplacementDraws = 100;

void collect(const Grammar& g, const SyntaxTree& t, int sigma_small, NodePath& path, std::vector<NodePath>& out) {
  if (t.sigma() <= sigma_small && g.is_mutable(t.rule())) out.push_back(path);
  for (std::size_t i = 0; i < t.children().size(); ++i) {
    path.push_back(static_cast<int>(i));
    collect(g, t.child(i), sigma_small, path, out);
    path.pop_back();
  }
}

}  // namespace

std::vector<NodePath> candidate_nodes(const Grammar& g, const SyntaxTree& t, int sigma_small) {
  std::vector<NodePath> out;
  NodePath path;
  collect(g, t, sigma_small, path, out);
  return out;
}

SyntaxTree sample_replacement(const Grammar& g, const SyntaxTree& original, int sigma_small, Rng& rng) {
  const RuleId r = original.rule();
  for (int i = 0; i < kReplacementDraws; ++i) {
    SyntaxTree cand = sample_up_to(g, r, sigma_small, rng);
    if (cand != original) return cand;
  }
  auto all = enumerate_trees(g, r, g.rule(r).min_sigma - 1, sigma_small);
  if (!all) throw MutationError("no replacement differing from the original found for rule '" + g.rule(r).name + "'");
  std::erase_if(*all, [&](const SyntaxTree& c) { return c == original; });
  if (all->empty()) throw MutationError("rule '" + g.rule(r).name + "' admits no alternative value");
  return (*all)[rng.below(all->size())];
}

Mutation sample_mutation(const Grammar& g, const SyntaxTree& t, int sigma_small, Rng& rng) {
  auto cands = candidate_nodes(g, t, sigma_small);
  if (cands.empty()) throw MutationError("tree has no mutable node with sigma <= " + std::to_string(sigma_small));
  NodePath path = std::move(cands[rng.below(cands.size())]);
  SyntaxTree repl = sample_replacement(g, t.at(path), sigma_small, rng);
  return {std::move(path), std::move(repl)};
}

Mutation sample_mutation_balanced(const Grammar& g, const SyntaxTree& t, int sigma_small, Rng& rng) {
  auto cands = candidate_nodes(g, t, sigma_small);
  if (cands.empty()) throw MutationError("tree has no mutable node with sigma <= " + std::to_string(sigma_small));
  std::map<RuleId, std::vector<std::size_t>> by_rule;
  for (std::size_t i = 0; i < cands.size(); ++i) by_rule[t.at(cands[i]).rule()].push_back(i);
  auto it = by_rule.begin();
  std::advance(it, static_cast<std::ptrdiff_t>(rng.below(by_rule.size())));
  const auto& members = it->second;
  NodePath path = std::move(cands[members[rng.below(members.size())]]);
  SyntaxTree repl = sample_replacement(g, t.at(path), sigma_small, rng);
  return {std::move(path), std::move(repl)};
}

void validate_mutation(const Grammar& g, const SyntaxTree& t, const Mutation& m, int sigma_small) {
  const SyntaxTree* target = nullptr;
  try {
    target = &t.at(m.target_path);
  } catch (const std::out_of_range&) {
    throw MutationError("mutation path does not resolve");
  }
  if (m.replacement.empty()) throw MutationError("mutation has no replacement");
  if (m.replacement.rule() != target->rule()) {
    throw MutationError("replacement derives '" + g.rule(m.replacement.rule()).name + "' but the target is a '" +
                        g.rule(target->rule()).name + "'");
  }
  if (!g.is_mutable(target->rule())) throw MutationError("target rule '" + g.rule(target->rule()).name + "' is not mutable");
  if (m.replacement.sigma() > sigma_small) {
    throw MutationError("replacement has " + std::to_string(m.replacement.sigma()) + " primitives (limit " +
                        std::to_string(sigma_small) + ")");
  }
  if (m.replacement == *target) throw MutationError("replacement equals the original subtree");
}

SyntaxTree apply(const Grammar& g, const SyntaxTree& t, const Mutation& m) {
  const SyntaxTree* target = nullptr;
  try {
    target = &t.at(m.target_path);
  } catch (const std::out_of_range&) {
    throw MutationError("mutation path does not resolve");
  }
  if (m.replacement.empty() || m.replacement.rule() != target->rule()) {
    throw MutationError("replacement does not fit the production context at the target");
  }
  return replace_at(g, t, m.target_path, m.replacement);
}

NoiseChain noise_chain(const Grammar& g, const SyntaxTree& z0, int steps, int sigma_small, std::uint64_t seed) {
  if (steps < 1) throw MutationError("noise chain needs at least one step");
  NoiseChain chain;
  chain.seed = seed;
  chain.states.push_back(z0);
  Rng rng(seed);
  for (int i = 0; i < steps; ++i) {
    Mutation m = sample_mutation_balanced(g, chain.states.back(), sigma_small, rng);
    chain.states.push_back(apply(g, chain.states.back(), m));
    chain.mutations.push_back(std::move(m));
  }
  return chain;
}

std::string format_trace(const Grammar& g, const NoiseChain& chain) {
  std::ostringstream out;
  for (std::size_t i = 0; i < chain.mutations.size(); ++i) {
    std::size_t start = 0;
    std::size_t end = 0;
    out << to_text_marking(g, chain.states[i], chain.mutations[i].target_path, start, end) << '\n';
    out << std::string(start, ' ') << std::string(end - start, '^') << " --> "
        << to_text(g, chain.mutations[i].replacement) << '\n';
  }
  out << to_text(g, chain.states.back()) << '\n';
  return out.str();
}

}  // namespace treediff
