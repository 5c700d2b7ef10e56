#include "treediff/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>

#include "parallel.hpp"
#include "treediff/png_io.hpp"
#include "treediff/sampler.hpp"
#include "treediff/tree_path.hpp"
#include "treediff/wire.hpp"

namespace treediff {

namespace fs = std::filesystem;

namespace {

std::string image_name(const char* prefix, long index, const char* suffix) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "images/%s%07ld%s.png", prefix, index, suffix);
  return buf;
}

std::vector<std::string> words(const Grammar& g, const SyntaxTree& t) { return token_strings(g, tokens_of(g, t)); }

SyntaxTree from_words(const Grammar& g, const std::vector<std::string>& w) {
  std::string text;
  for (const auto& s : w) text += s + " ";
  return parse_text(g, text);
}

template <class T>
T field(const nlohmann::json& j, const char* name) {
  const auto it = j.find(name);
  if (it == j.end()) throw DatasetError(std::string("manifest record lacks field '") + name + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DatasetError(std::string("manifest field '") + name + "' has the wrong type");
  }
}

std::vector<nlohmann::json> read_ndjson(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open " + path.string());
  std::vector<nlohmann::json> out;
  std::string line;
  for (long n = 1; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception&) {
      throw DatasetError(path.string() + ":" + std::to_string(n) + ": not valid JSON");
    }
  }
  return out;
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw DatasetError("write failed: " + path.string());
}

std::uint64_t sketch_seed_for(const Environment& env, Rng& rng) {
  return env.kind() == EnvKind::kCsg2dSketch ? rng.next() : 0;
}

}  // namespace

nlohmann::json TrainingRecord::to_json() const {
  return {{"target_tokens", target_tokens},
          {"mutated_tokens", mutated_tokens},
          {"target_image", target_image},
          {"mutated_image", mutated_image},
          {"edit_pos", edit_pos},
          {"replacement_tokens", replacement_tokens},
          {"value_target", value_target},
          {"s", s},
          {"from_random_init", from_random_init},
          {"sketch_seed", sketch_seed}};
}

TrainingRecord TrainingRecord::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DatasetError("manifest record is not an object");
  TrainingRecord r;
  r.target_tokens = field<std::vector<std::string>>(j, "target_tokens");
  r.mutated_tokens = field<std::vector<std::string>>(j, "mutated_tokens");
  r.target_image = field<std::string>(j, "target_image");
  r.mutated_image = field<std::string>(j, "mutated_image");
  r.edit_pos = field<int>(j, "edit_pos");
  r.replacement_tokens = field<std::vector<std::string>>(j, "replacement_tokens");
  r.value_target = field<int>(j, "value_target");
  r.s = field<int>(j, "s");
  r.from_random_init = field<bool>(j, "from_random_init");
  r.sketch_seed = field<std::uint64_t>(j, "sketch_seed");
  return r;
}

RecordDraft gen_training_record(const Environment& env, Rng& rng, const DatasetConfig& cfg) {
  const Grammar& g = env.grammar();
  RecordDraft d;
  d.target = sample_up_to(g, g.start(), cfg.sigma_max, rng);
  d.from_random_init = rng.bernoulli(cfg.rho);
  d.s = d.from_random_init ? 0 : rng.between(1, cfg.s_max);
  do {
    d.mutated = d.from_random_init ? sample_up_to(g, g.start(), cfg.sigma_max, rng)
                                   : noise_chain(g, d.target, d.s, cfg.sigma_small, rng.next()).states.back();
  } while (d.mutated == d.target);
  auto path = full_path(g, d.mutated, d.target, cfg.sigma_small, kCanonicalPathSeed);
  d.value_target = static_cast<int>(path.steps.size());
  d.edit = std::move(path.steps.front());
  d.edit_pos = edit_position(g, d.mutated, d.edit.target_path);
  d.sketch_seed = sketch_seed_for(env, rng);
  return d;
}

RecordDraft dataset_record(const Environment& env, const DatasetConfig& cfg, long index) {
  Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(index)));
  return gen_training_record(env, rng, cfg);
}

DatasetSummary write_dataset(const Environment& env, const DatasetConfig& cfg, const fs::path& dir) {
  if (cfg.n < 1 || cfg.s_max < 1 || cfg.sigma_max < 1 || cfg.rho < 0 || cfg.rho > 1) {
    throw DatasetError("dataset parameters must be positive and rho in [0, 1]");
  }
  const Grammar& g = env.grammar();
  fs::create_directories(dir / "images");
  std::vector<TrainingRecord> records(static_cast<std::size_t>(cfg.n));
  detail::parallel_for(records.size(), cfg.jobs, [&](std::size_t, std::size_t i) {
    const RecordDraft d = dataset_record(env, cfg, static_cast<long>(i));
    TrainingRecord& r = records[i];
    r.target_tokens = words(g, d.target);
    r.mutated_tokens = words(g, d.mutated);
    r.target_image = image_name("", static_cast<long>(i), "_target");
    r.mutated_image = image_name("", static_cast<long>(i), "_mutated");
    r.edit_pos = d.edit_pos;
    r.replacement_tokens = words(g, d.edit.replacement);
    r.value_target = d.value_target;
    r.s = d.s;
    r.from_random_init = d.from_random_init;
    r.sketch_seed = d.sketch_seed;
    write_png(dir / r.target_image, env.observe(d.target, d.sketch_seed));
    write_png(dir / r.mutated_image, env.render(d.mutated));
  });
  DatasetSummary summary;
  summary.s_histogram.assign(static_cast<std::size_t>(cfg.s_max) + 1, 0);
  std::vector<std::string> lines;
  lines.reserve(records.size());
  for (const auto& r : records) {
    lines.push_back(r.to_json().dump());
    ++summary.records;
    summary.random_init += r.from_random_init;
    ++summary.s_histogram[static_cast<std::size_t>(r.s)];
  }
  write_lines(dir / "manifest.ndjson", lines);
  return summary;
}

std::vector<TrainingRecord> read_manifest(const fs::path& dir) {
  std::vector<TrainingRecord> out;
  for (const auto& j : read_ndjson(dir / "manifest.ndjson")) out.push_back(TrainingRecord::from_json(j));
  return out;
}

std::vector<std::size_t> select_by_percentile(const std::vector<int>& sizes, double percentile, std::size_t n) {
  if (percentile < 0 || percentile >= 100) throw DatasetError("percentile must be in [0, 100)");
  const auto eligible = static_cast<std::size_t>(std::ceil((1.0 - percentile / 100.0) * static_cast<double>(sizes.size()) - 1e-9));
  if (eligible < n) {
    throw DatasetError("only " + std::to_string(eligible) + " of " + std::to_string(sizes.size()) +
                       " pool instances pass the filter but " + std::to_string(n) + " are needed; enlarge the pool");
  }
  std::vector<std::size_t> order(sizes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sizes[a] > sizes[b]; });
  order.resize(eligible);
  std::sort(order.begin(), order.end());
  order.resize(n);
  return order;
}

std::vector<TestInstance> gen_test_set(const Environment& env, const TestSetConfig& cfg) {
  if (cfg.n < 1) throw DatasetError("test set size must be positive");
  if (cfg.pool_multiplier < 20) throw DatasetError("pool multiplier must be at least 20");
  const Grammar& g = env.grammar();
  const std::size_t pool = static_cast<std::size_t>(cfg.n) * static_cast<std::size_t>(cfg.pool_multiplier);
  std::vector<SyntaxTree> programs(pool);
  std::vector<int> sizes(pool);
  detail::parallel_for(pool, cfg.jobs, [&](std::size_t, std::size_t i) {
    Rng rng(derive_seed(cfg.seed, i));
    programs[i] = sample_up_to(g, g.start(), cfg.sigma_max, rng);
    sizes[i] = lz4_compressed_size(env.render(programs[i]));
  });
  const auto chosen = select_by_percentile(sizes, cfg.percentile, static_cast<std::size_t>(cfg.n));
  std::vector<TestInstance> out(chosen.size());
  detail::parallel_for(chosen.size(), cfg.jobs, [&](std::size_t, std::size_t k) {
    const std::size_t i = chosen[k];
    TestInstance& inst = out[k];
    inst.program = programs[i];
    inst.compressed_size = sizes[i];
    inst.pool_index = static_cast<long>(i);
    inst.sketch_seed = env.kind() == EnvKind::kCsg2dSketch ? derive_seed(cfg.seed, i, 1) : 0;
    inst.image = env.observe(inst.program, inst.sketch_seed);
  });
  return out;
}

void write_test_set(const Environment& env, const std::vector<TestInstance>& set, const fs::path& dir) {
  fs::create_directories(dir / "images");
  std::vector<std::string> lines;
  for (std::size_t k = 0; k < set.size(); ++k) {
    const auto& inst = set[k];
    const std::string image = image_name("test_", static_cast<long>(k), "");
    write_png(dir / image, inst.image);
    lines.push_back(nlohmann::json{{"program_tokens", words(env.grammar(), inst.program)},
                                   {"image", image},
                                   {"compressed_size", inst.compressed_size},
                                   {"sketch_seed", inst.sketch_seed},
                                   {"pool_index", inst.pool_index}}
                        .dump());
  }
  write_lines(dir / "manifest.ndjson", lines);
}

std::vector<TestInstance> read_test_set(const Environment& env, const fs::path& dir) {
  std::vector<TestInstance> out;
  for (const auto& j : read_ndjson(dir / "manifest.ndjson")) {
    if (!j.is_object()) throw DatasetError("test manifest record is not an object");
    TestInstance inst;
    try {
      inst.program = from_words(env.grammar(), field<std::vector<std::string>>(j, "program_tokens"));
    } catch (const SyntaxError& e) {
      throw DatasetError(std::string("test program does not parse: ") + e.what());
    }
    inst.image = read_png(dir / field<std::string>(j, "image"));
    inst.compressed_size = field<int>(j, "compressed_size");
    inst.sketch_seed = field<std::uint64_t>(j, "sketch_seed");
    inst.pool_index = field<long>(j, "pool_index");
    out.push_back(std::move(inst));
  }
  if (out.empty()) throw DatasetError("test set " + dir.string() + " is empty");
  return out;
}

std::vector<double> solve_curve(std::span<const SearchResult> results, const std::vector<long>& budgets) {
  std::vector<double> out;
  for (long b : budgets) {
    long solved = 0;
    for (const auto& r : results) solved += r.solved && r.nodes_expanded <= b;
    out.push_back(results.empty() ? 0.0 : static_cast<double>(solved) / static_cast<double>(results.size()));
  }
  return out;
}

namespace {

// Per-worker endpoint sessions, opened on first use.
struct WorkerSlot {
  std::unique_ptr<ExternalSession> session;
  std::unique_ptr<ExternalPolicy> policy;
  std::unique_ptr<ExternalValue> value;
};

SearchResult solve_one(const Environment& env, const TestInstance& inst, const EvalConfig& cfg, std::uint64_t seed,
                       WorkerSlot& slot) {
  const Grammar& g = env.grammar();
  SearchConfig sc = cfg.search;
  sc.seed = seed;
  const SearchTarget target{inst.image, env.render(inst.program)};
  const bool external = cfg.policy == "external" || cfg.value == "external" || sc.init == InitSource::kExternal;
  if (external && !slot.session) {
    slot.session = std::make_unique<ExternalSession>(env, cfg.endpoint, sc.sigma_small);
    slot.policy = std::make_unique<ExternalPolicy>(*slot.session);
    slot.value = std::make_unique<ExternalValue>(*slot.session);
  }
  std::unique_ptr<Policy> owned_policy;
  Policy* policy = nullptr;
  if (cfg.policy == "oracle") {
    owned_policy = std::make_unique<OraclePolicy>(g, inst.program, sc.sigma_small);
  } else if (cfg.policy == "hillclimb") {
    owned_policy = std::make_unique<HillclimbPolicy>(env, cfg.hillclimb_samples, sc.sigma_small);
  } else if (cfg.policy == "external") {
    policy = slot.policy.get();
  } else {
    throw std::invalid_argument("unknown policy '" + cfg.policy + "'");
  }
  if (owned_policy) policy = owned_policy.get();
  if (cfg.solver == SolverKind::kRollout) {
    if (sc.init == InitSource::kExternal) throw std::invalid_argument("rollouts start from a random program");
    Rng rng(derive_seed(seed, 0));
    return rollout(env, *policy, sample_up_to(g, g.start(), sc.init_sigma_max, rng), target, sc);
  }
  std::unique_ptr<ValueModel> owned_value;
  ValueModel* value = nullptr;
  if (cfg.value == "oracle") {
    owned_value = std::make_unique<OracleValue>(g, inst.program, sc.sigma_small);
  } else if (cfg.value == "pixel") {
    owned_value = std::make_unique<PixelValue>(env);
  } else if (cfg.value == "external") {
    value = slot.value.get();
  } else {
    throw std::invalid_argument("unknown value model '" + cfg.value + "'");
  }
  if (owned_value) value = owned_value.get();
  return beam_search(env, *policy, *value, target, sc, slot.policy.get());
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Sample standard deviation; 0 for fewer than two values.
double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

}  // namespace

EvalReport evaluate(const Environment& env, const std::vector<TestInstance>& instances, const EvalConfig& cfg) {
  if (instances.empty()) throw DatasetError("no test instances");
  if (cfg.seeds < 1) throw std::invalid_argument("seeds must be positive");
  cfg.search.validate();
  const std::size_t n = instances.size();
  const std::size_t tasks = n * static_cast<std::size_t>(cfg.seeds);
  std::vector<SearchResult> results(tasks);
  std::vector<WorkerSlot> slots(static_cast<std::size_t>(std::max(cfg.jobs, 1)));
  detail::parallel_for(tasks, cfg.jobs, [&](std::size_t worker, std::size_t t) {
    const std::size_t s = t / n;
    const std::size_t i = t % n;
    results[t] = solve_one(env, instances[i], cfg, derive_seed(cfg.search.seed, s, i), slots[worker]);
  });

  std::vector<long> budgets;
  const long budget = cfg.search.expansion_budget;
  const int points = std::max(1, cfg.curve_points);
  for (int j = 1; j <= points; ++j) {
    const long b = (budget * j + points - 1) / points;
    if (budgets.empty() || budgets.back() != b) budgets.push_back(b);
  }
  std::vector<std::vector<double>> per_seed;
  for (int s = 0; s < cfg.seeds; ++s) {
    per_seed.push_back(solve_curve(std::span<const SearchResult>(results).subspan(static_cast<std::size_t>(s) * n, n), budgets));
  }

  nlohmann::json curve = nlohmann::json::array();
  std::ostringstream csv;
  csv << "budget,mean,std";
  for (int s = 0; s < cfg.seeds; ++s) csv << ",seed_" << s;
  csv << '\n';
  for (std::size_t b = 0; b < budgets.size(); ++b) {
    std::vector<double> at;
    for (const auto& c : per_seed) at.push_back(c[b]);
    curve.push_back({{"budget", budgets[b]}, {"mean", mean_of(at)}, {"std", std_of(at)}});
    csv << budgets[b] << ',' << fmt(mean_of(at)) << ',' << fmt(std_of(at));
    for (double x : at) csv << ',' << fmt(x);
    csv << '\n';
  }

  nlohmann::json rows = nlohmann::json::array();
  PolicyStats total;
  long value_failures = 0;
  for (std::size_t t = 0; t < tasks; ++t) {
    const auto& r = results[t];
    rows.push_back({{"seed", t / n},
                    {"instance", t % n},
                    {"solved", r.solved},
                    {"nodes_expanded", r.nodes_expanded},
                    {"best_metric", r.best_metric},
                    {"best_program", r.best_program.empty() ? "" : to_text(env.grammar(), r.best_program)},
                    {"notes", r.notes}});
    total.queries += r.policy_stats.queries;
    total.failures += r.policy_stats.failures;
    total.rejected += r.policy_stats.rejected;
    total.accepted += r.policy_stats.accepted;
    value_failures += r.value_failures;
  }
  std::vector<double> final_rates;
  for (const auto& c : per_seed) final_rates.push_back(c.back());

  EvalReport report;
  report.json = {{"env", env.name()},
                 {"solver", cfg.solver == SolverKind::kBeam ? "beam" : "rollout"},
                 {"policy", cfg.policy},
                 {"value", cfg.value},
                 {"instances", n},
                 {"seeds", cfg.seeds},
                 {"budget", budget},
                 {"beam_size", cfg.search.beam_size},
                 {"proposals_per_expansion", cfg.search.proposals_per_expansion},
                 {"seed", cfg.search.seed},
                 {"solve_rate", {{"mean", mean_of(final_rates)}, {"std", std_of(final_rates)}, {"per_seed", final_rates}}},
                 {"curve", curve},
                 {"policy_stats",
                  {{"queries", total.queries},
                   {"failures", total.failures},
                   {"rejected", total.rejected},
                   {"accepted", total.accepted},
                   {"value_failures", value_failures}}},
                 {"results", rows}};
  report.curve_csv = csv.str();
  return report;
}

}  // namespace treediff
