#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "treediff/canvas.hpp"
#include "treediff/environment.hpp"
#include "treediff/policy.hpp"
#include "treediff/syntax_tree.hpp"

namespace treediff {

class ExternalPolicy;

enum class InitSource { kRandom, kExternal };

struct SearchConfig {
  int beam_size = 64;
  long expansion_budget = 5000;
  /// Proposals requested per expanded node.
  int proposals_per_expansion = 4;
  int init_sigma_max = 8;
  /// Policy queries allowed in a rollout.
  int max_rollout_steps = 1000;
  /// Programs above this many primitives are discarded during search.
  int sigma_cap = 12;
  int sigma_small = kDefaultSigmaSmall;
  InitSource init = InitSource::kRandom;
  /// Parents compete with their children for the next frontier instead of
  /// being replaced by them.
  bool elitist = false;
  /// Keep the best-so-far image at every improvement.
  bool record_frames = false;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// What the policy sees and what the solve check compares against. They
/// differ for sketch observations, where `reference` is the clean render.
struct SearchTarget {
  Canvas observed;
  Canvas reference;

  static SearchTarget from_image(const Canvas& c) { return {c, c}; }
};

struct SearchNode {
  SyntaxTree program;
  Canvas image;
  double value = 0;
  double score = 0;
  int parent = -1;
  int depth = 0;
  long expansions_at_creation = 0;
  /// Creation order; last tiebreak.
  long order = 0;
};

struct TrajectoryPoint {
  long expansions = 0;
  std::string program;
  double metric = 0;
};

struct SearchResult {
  SyntaxTree best_program;
  Canvas best_image;
  double best_metric = 0;
  bool solved = false;
  long nodes_expanded = 0;
  int iterations = 0;
  double wall_time_s = 0;
  /// Best-so-far after each improvement, in expansion order.
  std::vector<TrajectoryPoint> trajectory;
  /// Best-so-far images aligned with `trajectory` when frames are recorded.
  std::vector<Canvas> frames;
  PolicyStats policy_stats;
  long value_failures = 0;
  std::vector<std::string> notes;

  /// Timing fields (wall time, latencies) vary between runs and are only
  /// emitted when asked for.
  nlohmann::json to_json(const Environment& env, bool include_timing = false) const;
};

/// Starting programs. Random: up to beam_size distinct samples with
/// sigma <= init_sigma_max. External: whole programs from the endpoint,
/// charged as one expansion; falls back to random (with a note) when the
/// endpoint fails or offers nothing usable.
std::vector<SyntaxTree> init_candidates(const Environment& env, const SearchConfig& cfg, const Canvas& observed,
                                        RenderCounter& renders, Rng& rng, ExternalPolicy* external = nullptr,
                                        std::vector<std::string>* notes = nullptr);

/// Greedy policy following from `z_init`: one proposal per step, applied,
/// rendered and checked. The initial render is the first expansion.
SearchResult rollout(const Environment& env, Policy& policy, const SyntaxTree& z_init, const SearchTarget& target,
                     const SearchConfig& cfg);

/// Frontier beam search. Each iteration asks the policy for k proposals
/// per frontier node; new children are rendered and valued, and the
/// beam_size lowest (value, depth, -score, order) become the next frontier.
/// The global best is the node with the highest match metric.
SearchResult beam_search(const Environment& env, Policy& policy, ValueModel& value, const SearchTarget& target,
                         const SearchConfig& cfg, ExternalPolicy* external_init = nullptr);

/// As above with explicit starting programs.
SearchResult beam_search(const Environment& env, Policy& policy, ValueModel& value, const SearchTarget& target,
                         const SearchConfig& cfg, const std::vector<SyntaxTree>& init);

}  // namespace treediff
