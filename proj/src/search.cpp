#include "treediff/search.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <stdexcept>
#include <unordered_set>

#include "treediff/sampler.hpp"
#include "treediff/wire.hpp"

namespace treediff {

namespace {

// Iterations in a row without a single new child before the search gives up.
constexpr int kMaxStalls = 3;
constexpr std::size_t kMaxNotes = 16;

void add_note(std::vector<std::string>& notes, const std::string& note) {
  if (notes.size() < kMaxNotes && std::find(notes.begin(), notes.end(), note) == notes.end()) notes.push_back(note);
}

bool promise_less(const SearchNode& a, const SearchNode& b) {
  if (a.value != b.value) return a.value < b.value;
  if (a.depth != b.depth) return a.depth < b.depth;
  if (a.score != b.score) return a.score > b.score;
  return a.order < b.order;
}

PolicyStats stats_delta(const PolicyStats& now, const PolicyStats& before) {
  PolicyStats d;
  d.queries = now.queries - before.queries;
  d.failures = now.failures - before.failures;
  d.rejected = now.rejected - before.rejected;
  d.accepted = now.accepted - before.accepted;
  d.latency_ms_total = now.latency_ms_total - before.latency_ms_total;
  d.latency_ms_max = now.latency_ms_max;
  return d;
}

using InitFn = std::function<std::vector<SyntaxTree>(RenderCounter&, std::vector<std::string>&)>;

class Search {
 public:
  Search(const Environment& env, Policy& policy, ValueModel* value, const SearchTarget& target, const SearchConfig& cfg,
         int beam, int k, long max_iterations)
      : env_(env),
        policy_(policy),
        value_(value),
        target_(target),
        cfg_(cfg),
        beam_(beam),
        k_(k),
        max_iterations_(max_iterations),
        renders_(env, cfg.expansion_budget),
        rng_(derive_seed(cfg.seed, 1)) {}

  SearchResult run(const InitFn& init) {
    const auto start = std::chrono::steady_clock::now();
    const PolicyStats before = policy_.stats();
    try {
      search(init);
    } catch (const RenderCounter::BudgetExhausted&) {
      // Budget spent; the best node so far stands.
    }
    result_.nodes_expanded = renders_.count();
    result_.policy_stats = stats_delta(policy_.stats(), before);
    result_.policy_stats.rejected += engine_rejected_;
    result_.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return std::move(result_);
  }

 private:
  void search(const InitFn& init) {
    std::vector<SearchNode> frontier;
    for (const auto& program : init(renders_, result_.notes)) {
      if (program.sigma() > cfg_.sigma_cap) {
        add_note(result_.notes, "initial program above the primitive cap discarded");
        continue;
      }
      if (!seen_.insert(to_text(env_.grammar(), program)).second) continue;
      Canvas image = renders_.render(program);
      if (admit(frontier, program, std::move(image), -1, 0, 0.0)) return;
    }
    if (frontier.empty()) {
      add_note(result_.notes, "no initial program");
      return;
    }
    prune(frontier);
    int stalls = 0;
    while (result_.iterations < max_iterations_ && !renders_.exhausted()) {
      ++result_.iterations;
      std::vector<SearchNode> children;
      for (const auto& node : frontier) {
        if (expand(node, children)) return;
        if (renders_.exhausted()) break;
      }
      if (children.empty()) {
        if (++stalls >= kMaxStalls) {
          add_note(result_.notes, "search stalled: no new programs proposed");
          return;
        }
        continue;
      }
      stalls = 0;
      if (cfg_.elitist) {
        frontier.insert(frontier.end(), std::make_move_iterator(children.begin()), std::make_move_iterator(children.end()));
      } else {
        frontier = std::move(children);
      }
      prune(frontier);
    }
  }

  // Returns true once solved.
  bool expand(const SearchNode& node, std::vector<SearchNode>& children) {
    const Grammar& g = env_.grammar();
    std::vector<EditProposal> props;
    try {
      props = policy_.propose({node.program, node.image, target_.observed, k_}, renders_, rng_);
    } catch (const PolicyError& e) {
      add_note(result_.notes, std::string("policy failure: ") + e.what());
      return false;
    }
    for (auto& p : props) {
      SyntaxTree child;
      try {
        child = apply(g, node.program, validate_proposal(g, node.program, p, cfg_.sigma_small));
      } catch (const MutationError&) {
        ++engine_rejected_;
        continue;
      }
      if (child.sigma() > cfg_.sigma_cap) continue;
      if (!seen_.insert(to_text(g, child)).second) continue;
      Canvas image = p.image ? std::move(*p.image) : renders_.render(child);
      if (admit(children, child, std::move(image), static_cast<int>(node.order), node.depth + 1, p.score)) return true;
    }
    return false;
  }

  // Adds a rendered node, tracks the global best; returns true once solved.
  bool admit(std::vector<SearchNode>& into, const SyntaxTree& program, Canvas image, int parent, int depth, double score) {
    SearchNode n;
    n.program = program;
    n.parent = parent;
    n.depth = depth;
    n.score = score;
    n.order = next_order_++;
    n.expansions_at_creation = renders_.count();
    n.value = estimate(program, image);
    const double metric = env_.match_metric(image, target_.reference);
    const bool solved = env_.is_solved(image, target_.reference);
    if (result_.best_program.empty() || metric > result_.best_metric) {
      result_.best_program = program;
      result_.best_image = image;
      result_.best_metric = metric;
      result_.trajectory.push_back({renders_.count(), to_text(env_.grammar(), program), metric});
      if (cfg_.record_frames) result_.frames.push_back(image);
    }
    if (solved) {
      // Report the solving program even if an unsolved one scored higher.
      if (result_.best_program != program) {
        result_.best_program = program;
        result_.best_image = image;
        result_.best_metric = metric;
        result_.trajectory.push_back({renders_.count(), to_text(env_.grammar(), program), metric});
        if (cfg_.record_frames) result_.frames.push_back(image);
      }
      result_.solved = true;
      return true;
    }
    n.image = std::move(image);
    into.push_back(std::move(n));
    return false;
  }

  double estimate(const SyntaxTree& program, const Canvas& image) {
    if (value_ == nullptr) return 0.0;
    try {
      const double v = value_->estimate(program, image, target_.observed);
      if (std::isfinite(v)) return v;
    } catch (const PolicyError& e) {
      add_note(result_.notes, std::string("value failure: ") + e.what());
    }
    ++result_.value_failures;
    return env_.pixel_loss(image, target_.observed);
  }

  void prune(std::vector<SearchNode>& nodes) const {
    std::sort(nodes.begin(), nodes.end(), promise_less);
    if (nodes.size() > static_cast<std::size_t>(beam_)) nodes.resize(static_cast<std::size_t>(beam_));
  }

  const Environment& env_;
  Policy& policy_;
  ValueModel* value_;
  const SearchTarget& target_;
  const SearchConfig& cfg_;
  int beam_;
  int k_;
  long max_iterations_;
  RenderCounter renders_;
  Rng rng_;
  std::unordered_set<std::string> seen_;
  long next_order_ = 0;
  long engine_rejected_ = 0;
  SearchResult result_;
};

}  // namespace

void SearchConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  require(beam_size >= 1, "beam_size must be positive");
  require(expansion_budget >= 1, "expansion_budget must be positive");
  require(beam_size <= expansion_budget, "beam_size must not exceed expansion_budget");
  require(proposals_per_expansion >= 1, "proposals_per_expansion must be positive");
  require(init_sigma_max >= 1, "init_sigma_max must be positive");
  require(max_rollout_steps >= 0, "max_rollout_steps must not be negative");
  require(sigma_small >= 1, "sigma_small must be positive");
  require(sigma_cap >= init_sigma_max, "sigma_cap must be at least init_sigma_max");
}

nlohmann::json SearchResult::to_json(const Environment& env, bool include_timing) const {
  nlohmann::json traj = nlohmann::json::array();
  for (const auto& p : trajectory) traj.push_back({{"expansions", p.expansions}, {"program", p.program}, {"metric", p.metric}});
  nlohmann::json stats = {{"queries", policy_stats.queries},
                          {"failures", policy_stats.failures},
                          {"rejected", policy_stats.rejected},
                          {"accepted", policy_stats.accepted},
                          {"value_failures", value_failures}};
  nlohmann::json out = {{"env", env.name()},
                        {"solved", solved},
                        {"best_program", best_program.empty() ? "" : to_text(env.grammar(), best_program)},
                        {"best_metric", best_metric},
                        {"nodes_expanded", nodes_expanded},
                        {"iterations", iterations},
                        {"trajectory", traj},
                        {"policy_stats", stats},
                        {"notes", notes}};
  if (include_timing) {
    out["wall_time_s"] = wall_time_s;
    out["policy_stats"]["latency_ms_total"] = policy_stats.latency_ms_total;
    out["policy_stats"]["latency_ms_max"] = policy_stats.latency_ms_max;
    out["policy_stats"]["latency_ms_mean"] =
        policy_stats.queries > 0 ? policy_stats.latency_ms_total / static_cast<double>(policy_stats.queries) : 0.0;
  }
  return out;
}

std::vector<SyntaxTree> init_candidates(const Environment& env, const SearchConfig& cfg, const Canvas& observed,
                                        RenderCounter& renders, Rng& rng, ExternalPolicy* external,
                                        std::vector<std::string>* notes) {
  const Grammar& g = env.grammar();
  std::vector<SyntaxTree> out;
  std::unordered_set<std::string> seen;
  auto keep = [&](const SyntaxTree& t) {
    if (t.sigma() <= cfg.init_sigma_max && seen.insert(to_text(g, t)).second) out.push_back(t);
  };
  if (cfg.init == InitSource::kExternal) {
    std::string problem;
    if (external == nullptr) {
      problem = "no external endpoint";
    } else {
      renders.charge();
      try {
        for (const auto& t : external->propose_programs(observed, cfg.beam_size)) keep(t);
        if (out.empty()) problem = "endpoint proposed no usable program";
      } catch (const PolicyError& e) {
        problem = e.what();
      }
    }
    if (out.empty()) {
      if (notes != nullptr) notes->push_back("external init unavailable (" + problem + "); using random init");
    } else {
      if (out.size() > static_cast<std::size_t>(cfg.beam_size)) out.resize(static_cast<std::size_t>(cfg.beam_size));
      return out;
    }
  }
  // Bounded retries: tiny grammars may have fewer than beam_size programs.
  for (int attempt = 0; attempt < 8 * cfg.beam_size && out.size() < static_cast<std::size_t>(cfg.beam_size); ++attempt) {
    keep(sample_up_to(g, g.start(), cfg.init_sigma_max, rng));
  }
  return out;
}

SearchResult rollout(const Environment& env, Policy& policy, const SyntaxTree& z_init, const SearchTarget& target,
                     const SearchConfig& cfg) {
  cfg.validate();
  Search s(env, policy, nullptr, target, cfg, 1, 1, cfg.max_rollout_steps);
  return s.run([&](RenderCounter&, std::vector<std::string>&) { return std::vector<SyntaxTree>{z_init}; });
}

SearchResult beam_search(const Environment& env, Policy& policy, ValueModel& value, const SearchTarget& target,
                         const SearchConfig& cfg, ExternalPolicy* external_init) {
  cfg.validate();
  Search s(env, policy, &value, target, cfg, cfg.beam_size, cfg.proposals_per_expansion, cfg.expansion_budget);
  return s.run([&](RenderCounter& renders, std::vector<std::string>& notes) {
    Rng rng(derive_seed(cfg.seed, 0));
    return init_candidates(env, cfg, target.observed, renders, rng, external_init, &notes);
  });
}

SearchResult beam_search(const Environment& env, Policy& policy, ValueModel& value, const SearchTarget& target,
                         const SearchConfig& cfg, const std::vector<SyntaxTree>& init) {
  cfg.validate();
  Search s(env, policy, &value, target, cfg, cfg.beam_size, cfg.proposals_per_expansion, cfg.expansion_budget);
  return s.run([&](RenderCounter&, std::vector<std::string>&) { return init; });
}

}  // namespace treediff
