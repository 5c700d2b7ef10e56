#include "treediff/policy.hpp"

#include <algorithm>

#include "treediff/tree_path.hpp"

namespace treediff {

Canvas RenderCounter::render(const SyntaxTree& t) {
  charge();
  return env_.render(t);
}

void RenderCounter::charge(long n) {
  if (count_ + n > budget_) throw BudgetExhausted{};
  count_ += n;
}

Mutation validate_proposal(const Grammar& g, const SyntaxTree& program, const EditProposal& p, int sigma_small) {
  Mutation m{p.target_path, p.replacement};
  validate_mutation(g, program, m, sigma_small);
  return m;
}

std::vector<EditProposal> OraclePolicy::propose(const PolicyQuery& q, RenderCounter& /*renders*/, Rng& /*rng*/) {
  ++stats_.queries;
  if (q.program == truth_) throw PolicyError("oracle policy queried at its target");
  auto path = full_path(g_, q.program, truth_, sigma_small_, kCanonicalPathSeed);
  EditProposal p;
  p.target_path = std::move(path.steps.front().target_path);
  p.replacement = std::move(path.steps.front().replacement);
  p.score = 0;
  return {std::move(p)};
}

std::vector<EditProposal> HillclimbPolicy::propose(const PolicyQuery& q, RenderCounter& renders, Rng& rng) {
  ++stats_.queries;
  const Grammar& g = env_.grammar();
  const int wanted = std::max(samples_, q.k);
  // Draw cap for neighbourhoods that are nearly exhausted.
  const int max_draws = 4 * wanted;
  tried_.insert(to_text(g, q.program));
  std::vector<EditProposal> out;
  for (int draw = 0; draw < max_draws && static_cast<int>(out.size()) < wanted && !renders.exhausted(); ++draw) {
    Mutation m = sample_mutation_balanced(g, q.program, sigma_small_, rng);
    SyntaxTree child = apply(g, q.program, m);
    if (!tried_.insert(to_text(g, child)).second) continue;
    EditProposal p;
    p.image = renders.render(child);
    p.score = -env_.pixel_loss(*p.image, q.target_image);
    p.target_path = std::move(m.target_path);
    p.replacement = std::move(m.replacement);
    out.push_back(std::move(p));
  }
  std::stable_sort(out.begin(), out.end(), [](const EditProposal& a, const EditProposal& b) { return a.score > b.score; });
  if (out.size() > static_cast<std::size_t>(q.k)) out.resize(static_cast<std::size_t>(q.k));
  return out;
}

double OracleValue::estimate(const SyntaxTree& program, const Canvas& /*image*/, const Canvas& /*target*/) {
  return edit_distance(g_, program, truth_, sigma_small_);
}

double PixelValue::estimate(const SyntaxTree& /*program*/, const Canvas& image, const Canvas& target) {
  return env_.pixel_loss(image, target);
}

int oracle_value(const Grammar& g, const SyntaxTree& a, const SyntaxTree& b, int sigma_small) {
  return edit_distance(g, a, b, sigma_small);
}

double pixel_value(const Environment& env, const Canvas& a, const Canvas& b) { return env.pixel_loss(a, b); }

}  // namespace treediff
