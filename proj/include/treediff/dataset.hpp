#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "treediff/canvas.hpp"
#include "treediff/environment.hpp"
#include "treediff/search.hpp"
#include "treediff/syntax_tree.hpp"

namespace treediff {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetConfig {
  long n = 1000;
  double rho = 0.2;
  int s_max = 5;
  int sigma_max = 8;
  int sigma_small = kDefaultSigmaSmall;
  std::uint64_t seed = 0;
  int jobs = 1;
};

/// One denoising training example: from `mutated`, the first canonical
/// step towards `target` replaces the node starting at token `edit_pos`
/// with `replacement`.
struct TrainingRecord {
  std::vector<std::string> target_tokens;
  std::vector<std::string> mutated_tokens;
  std::string target_image;
  std::string mutated_image;
  int edit_pos = 0;
  std::vector<std::string> replacement_tokens;
  /// Canonical edit distance from mutated to target.
  int value_target = 0;
  /// Noise steps; 0 for random-init records.
  int s = 0;
  bool from_random_init = false;
  /// Seed of the target observation (sketch environment only; else 0).
  std::uint64_t sketch_seed = 0;

  nlohmann::json to_json() const;
  /// Throws DatasetError naming the missing or mistyped field.
  static TrainingRecord from_json(const nlohmann::json& j);
};

/// Programs behind a record, before images are named or written.
struct RecordDraft {
  SyntaxTree target;
  SyntaxTree mutated;
  Mutation edit;
  int edit_pos = 0;
  int value_target = 0;
  int s = 0;
  bool from_random_init = false;
  std::uint64_t sketch_seed = 0;
};

/// With probability rho the mutated program is an independent sample,
/// otherwise a noise chain of s ~ U{1..s_max} steps from the target.
/// Draws are repeated while mutated == target.
RecordDraft gen_training_record(const Environment& env, Rng& rng, const DatasetConfig& cfg);

/// Record `index` of a dataset; depends only on (cfg.seed, index).
RecordDraft dataset_record(const Environment& env, const DatasetConfig& cfg, long index);

struct DatasetSummary {
  long records = 0;
  long random_init = 0;
  std::vector<long> s_histogram;
};

/// Writes `dir/manifest.ndjson` and `dir/images/*.png`. Output is
/// byte-identical for any cfg.jobs.
DatasetSummary write_dataset(const Environment& env, const DatasetConfig& cfg, const std::filesystem::path& dir);

std::vector<TrainingRecord> read_manifest(const std::filesystem::path& dir);

struct TestSetConfig {
  long n = 256;
  double percentile = 95;
  int pool_multiplier = 20;
  int sigma_max = 8;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct TestInstance {
  SyntaxTree program;
  /// What a solver is given (the sketch for csg2d-sketch).
  Canvas image;
  int compressed_size = 0;
  std::uint64_t sketch_seed = 0;
  long pool_index = 0;
};

/// Pool indices kept by the incompressibility filter: the
/// ceil((1 - percentile/100) * pool) largest sizes (ties to the lower
/// index), then the first n of those in pool order. Throws DatasetError
/// when fewer than n are eligible.
std::vector<std::size_t> select_by_percentile(const std::vector<int>& sizes, double percentile, std::size_t n);

std::vector<TestInstance> gen_test_set(const Environment& env, const TestSetConfig& cfg);

/// `dir/manifest.ndjson` (program_tokens, image, compressed_size,
/// sketch_seed, pool_index) plus `dir/images/*.png`.
void write_test_set(const Environment& env, const std::vector<TestInstance>& set, const std::filesystem::path& dir);
std::vector<TestInstance> read_test_set(const Environment& env, const std::filesystem::path& dir);

enum class SolverKind { kBeam, kRollout };

struct EvalConfig {
  SearchConfig search;
  SolverKind solver = SolverKind::kBeam;
  /// oracle, hillclimb or external.
  std::string policy = "oracle";
  /// oracle or pixel; external when the policy is external.
  std::string value = "oracle";
  std::string endpoint;
  int hillclimb_samples = 16;
  int seeds = 5;
  int jobs = 1;
  /// Budget grid points of the solve curve.
  int curve_points = 50;
};

struct EvalReport {
  nlohmann::json json;
  std::string curve_csv;
};

/// Runs the solver on every instance for every seed. Search seeds derive
/// from (cfg.search.seed, seed index, instance index), so the report is
/// identical for any cfg.jobs.
EvalReport evaluate(const Environment& env, const std::vector<TestInstance>& instances, const EvalConfig& cfg);

/// Solve fraction at each budget: instances solved within that many
/// expansions. Non-decreasing by construction.
std::vector<double> solve_curve(std::span<const SearchResult> results, const std::vector<long>& budgets);

}  // namespace treediff
