#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "treediff/canvas.hpp"
#include "treediff/environment.hpp"
#include "treediff/mutation.hpp"
#include "treediff/rng.hpp"
#include "treediff/syntax_tree.hpp"

namespace treediff {

/// Base of every policy or value failure; search treats one as zero
/// proposals.
class PolicyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Render calls are the search cost unit. Every program materialised
/// during search goes through one of these so the count is exact.
class RenderCounter {
 public:
  RenderCounter(const Environment& env, long budget) : env_(env), budget_(budget) {}

  /// Renders and counts; throws BudgetExhausted past the budget.
  Canvas render(const SyntaxTree& t);
  void charge(long n = 1);
  long count() const { return count_; }
  long remaining() const { return budget_ - count_; }
  bool exhausted() const { return count_ >= budget_; }
  const Environment& env() const { return env_; }

  struct BudgetExhausted {};

 private:
  const Environment& env_;
  long budget_;
  long count_ = 0;
};

struct EditProposal {
  NodePath target_path;
  SyntaxTree replacement;
  /// Higher is better.
  double score = 0;
  /// Rendering of the edited program when the policy already produced it.
  std::optional<Canvas> image;
};

struct PolicyQuery {
  const SyntaxTree& program;
  const Canvas& current_image;
  const Canvas& target_image;
  int k = 1;
};

struct PolicyStats {
  long queries = 0;
  long failures = 0;
  long rejected = 0;
  long accepted = 0;
  double latency_ms_total = 0;
  double latency_ms_max = 0;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  /// Up to q.k proposals, best first.
  virtual std::vector<EditProposal> propose(const PolicyQuery& q, RenderCounter& renders, Rng& rng) = 0;
  /// True when propose ignores the random source.
  virtual bool deterministic() const { return false; }
  const PolicyStats& stats() const { return stats_; }

 protected:
  PolicyStats stats_;
};

/// Estimated distance from a program to the target; lower is better.
class ValueModel {
 public:
  virtual ~ValueModel() = default;
  virtual std::string name() const = 0;
  virtual double estimate(const SyntaxTree& program, const Canvas& image, const Canvas& target) = 0;
};

/// Checks a proposal against the program: path, production context,
/// sigma_small, difference from the original. Throws MutationError.
Mutation validate_proposal(const Grammar& g, const SyntaxTree& program, const EditProposal& p, int sigma_small);

/// First mutation of the canonical path to a known target.
class OraclePolicy : public Policy {
 public:
  OraclePolicy(const Grammar& g, SyntaxTree truth, int sigma_small = kDefaultSigmaSmall)
      : g_(g), truth_(std::move(truth)), sigma_small_(sigma_small) {}
  std::string name() const override { return "oracle"; }
  bool deterministic() const override { return true; }
  /// Throws PolicyError when the program already equals the target.
  std::vector<EditProposal> propose(const PolicyQuery& q, RenderCounter& renders, Rng& rng) override;

 private:
  const Grammar& g_;
  SyntaxTree truth_;
  int sigma_small_;
};

/// Random balanced mutations ranked by rendered pixel loss to the target.
/// Programs rendered once are remembered and never rendered again, so use
/// one instance per search.
class HillclimbPolicy : public Policy {
 public:
  /// `samples` is the number of mutations rendered per query (at least k).
  HillclimbPolicy(const Environment& env, int samples = 16, int sigma_small = kDefaultSigmaSmall)
      : env_(env), samples_(samples), sigma_small_(sigma_small) {}
  std::string name() const override { return "hillclimb"; }
  std::vector<EditProposal> propose(const PolicyQuery& q, RenderCounter& renders, Rng& rng) override;

 private:
  const Environment& env_;
  int samples_;
  int sigma_small_;
  std::unordered_set<std::string> tried_;
};

/// Canonical edit distance to a known target program.
class OracleValue : public ValueModel {
 public:
  OracleValue(const Grammar& g, SyntaxTree truth, int sigma_small = kDefaultSigmaSmall)
      : g_(g), truth_(std::move(truth)), sigma_small_(sigma_small) {}
  std::string name() const override { return "oracle"; }
  double estimate(const SyntaxTree& program, const Canvas& image, const Canvas& target) override;

 private:
  const Grammar& g_;
  SyntaxTree truth_;
  int sigma_small_;
};

/// 1 - IoU (CSG) or 1 - pixel match fraction against the target image.
class PixelValue : public ValueModel {
 public:
  explicit PixelValue(const Environment& env) : env_(env) {}
  std::string name() const override { return "pixel"; }
  double estimate(const SyntaxTree& program, const Canvas& image, const Canvas& target) override;

 private:
  const Environment& env_;
};

int oracle_value(const Grammar& g, const SyntaxTree& a, const SyntaxTree& b, int sigma_small = kDefaultSigmaSmall);
double pixel_value(const Environment& env, const Canvas& a, const Canvas& b);

}  // namespace treediff
