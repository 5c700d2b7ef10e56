// Command-line front end. Exit status: 0 ok, 1 internal error, 2 usage or
// invalid input, 3 unsolved within budget (solve).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "treediff/dataset.hpp"
#include "treediff/environment.hpp"
#include "treediff/mutation.hpp"
#include "treediff/png_io.hpp"
#include "treediff/render.hpp"
#include "treediff/sampler.hpp"
#include "treediff/search.hpp"
#include "treediff/tree_path.hpp"
#include "treediff/wire.hpp"

using namespace treediff;
namespace fs = std::filesystem;

namespace {

constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitUnsolved = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string env = "csg2d";
  std::string grammar;
  std::optional<std::uint64_t> seed;
  int sigma_small = kDefaultSigmaSmall;
};

void add_env(CLI::App* cmd, Common& c) {
  cmd->add_option("--env", c.env, "Environment: csg2d, csg2d-sketch, tinysvg or rainbow")
      ->check(CLI::IsMember(Environment::names()))
      ->capture_default_str();
  cmd->add_option("--grammar", c.grammar, "Grammar file overriding the environment's shipped grammar");
}

void add_seed(CLI::App* cmd, Common& c, bool required) {
  auto* opt = cmd->add_option("--seed", c.seed, "Random seed (unsigned 64-bit)");
  if (required) opt->required();
}

void add_sigma_small(CLI::App* cmd, Common& c) {
  cmd->add_option("--sigma-small", c.sigma_small, "Primitive limit of a single mutation")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

Environment make_env(const Common& c) {
  if (c.grammar.empty()) return Environment::load(c.env);
  return Environment::with_grammar(c.env, load_grammar_file(c.grammar));
}

SyntaxTree program_arg(const Environment& env, const std::string& text, const char* flag) {
  try {
    return parse_text(env.grammar(), text);
  } catch (const SyntaxError& e) {
    throw UsageError(std::string(flag) + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed: '" + path + "'");
}

// ---- subcommands ----

struct SampleArgs {
  Common c;
  int sigma_max = 8;
  int count = 1;
};

int run_sample(const SampleArgs& a) {
  const auto env = make_env(a.c);
  const Grammar& g = env.grammar();
  Rng rng(*a.c.seed);
  for (int i = 0; i < a.count; ++i) std::cout << to_text(g, sample_up_to(g, g.start(), a.sigma_max, rng)) << '\n';
  return 0;
}

struct MutateArgs {
  Common c;
  int steps = 1;
  std::string program;
  int sigma_max = 8;
  bool trace = false;
};

int run_mutate(const MutateArgs& a) {
  const auto env = make_env(a.c);
  const Grammar& g = env.grammar();
  SyntaxTree z0;
  if (a.program.empty()) {
    Rng rng(derive_seed(*a.c.seed, 0));
    z0 = sample_up_to(g, g.start(), a.sigma_max, rng);
  } else {
    z0 = program_arg(env, a.program, "--program");
  }
  const auto chain = noise_chain(g, z0, a.steps, a.c.sigma_small, derive_seed(*a.c.seed, 1));
  std::cout << (a.trace ? format_trace(g, chain) : to_text(g, chain.states.back()) + "\n");
  return 0;
}

struct PathArgs {
  Common c;
  std::string from;
  std::string to;
  std::string out;
};

int run_path(const PathArgs& a) {
  const auto env = make_env(a.c);
  const Grammar& g = env.grammar();
  const auto src = program_arg(env, a.from, "--from");
  const auto dst = program_arg(env, a.to, "--to");
  const auto path = full_path(g, src, dst, a.c.sigma_small, *a.c.seed);
  nlohmann::json steps = nlohmann::json::array();
  SyntaxTree cur = src;
  for (const auto& m : path.steps) {
    const auto replaced = token_strings(g, tokens_of(g, m.replacement));
    steps.push_back({{"path", m.target_path}, {"pos", edit_position(g, cur, m.target_path)}, {"replacement", replaced}});
    cur = apply(g, cur, m);
    steps.back()["result"] = to_text(g, cur);
  }
  const nlohmann::json out = {{"env", env.name()},  {"seed", path.seed},
                              {"source", to_text(g, src)}, {"target", to_text(g, dst)},
                              {"length", path.steps.size()}, {"steps", steps}};
  write_text(a.out, out.dump(2) + "\n");
  return 0;
}

struct RenderArgs {
  Common c;
  std::string program;
  std::string out;
  bool sketch = false;
};

int run_render(const RenderArgs& a) {
  const auto env = make_env(a.c);
  const auto t = program_arg(env, a.program, "--program");
  Canvas img;
  if (a.sketch) {
    if (!env.is_csg()) throw UsageError("--sketch requires a csg2d environment");
    if (!a.c.seed) throw UsageError("--sketch requires --seed");
    img = sketch_render(env.grammar(), t, *a.c.seed);
  } else {
    img = env.render(t);
  }
  write_png(a.out, img);
  return 0;
}

struct DatasetArgs {
  Common c;
  DatasetConfig cfg;
  std::string out;
};

int run_gen_dataset(DatasetArgs a) {
  const auto env = make_env(a.c);
  a.cfg.seed = *a.c.seed;
  a.cfg.sigma_small = a.c.sigma_small;
  const auto s = write_dataset(env, a.cfg, a.out);
  std::cout << nlohmann::json{{"records", s.records}, {"random_init", s.random_init}, {"s_histogram", s.s_histogram}}.dump()
            << '\n';
  return 0;
}

struct TestSetArgs {
  Common c;
  TestSetConfig cfg;
  std::string out;
};

int run_gen_testset(TestSetArgs a) {
  const auto env = make_env(a.c);
  a.cfg.seed = *a.c.seed;
  const auto set = gen_test_set(env, a.cfg);
  if (static_cast<long>(set.size()) != a.cfg.n) throw std::logic_error("test set size mismatch");
  write_test_set(env, set, a.out);
  std::cout << nlohmann::json{{"instances", set.size()}, {"pool", a.cfg.n * a.cfg.pool_multiplier}}.dump() << '\n';
  return 0;
}

struct SearchArgs {
  Common c;
  SearchConfig search;
  std::string policy = "oracle";
  std::string value = "auto";
  std::string solver = "beam";
  std::string init = "random";
  std::string endpoint;
  int hillclimb_samples = 16;
  double timeout_s = 10;
};

void add_search_options(CLI::App* cmd, SearchArgs& a) {
  cmd->add_option("--policy", a.policy, "Edit proposer: oracle, hillclimb or external")
      ->check(CLI::IsMember({"oracle", "hillclimb", "external"}))
      ->capture_default_str();
  cmd->add_option("--value", a.value, "Node value: auto, oracle, pixel or external (auto: oracle when the truth is known)")
      ->check(CLI::IsMember({"auto", "oracle", "pixel", "external"}))
      ->capture_default_str();
  cmd->add_option("--solver", a.solver, "Search procedure: beam or rollout")
      ->check(CLI::IsMember({"beam", "rollout"}))
      ->capture_default_str();
  cmd->add_option("--init", a.init, "Initial programs: random or external")
      ->check(CLI::IsMember({"random", "external"}))
      ->capture_default_str();
  cmd->add_option("--endpoint", a.endpoint, "External endpoint: cmd:<command>, tcp:<host>:<port> or unix:<path>");
  cmd->add_option("--timeout", a.timeout_s, "External request timeout in seconds")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--beam", a.search.beam_size, "Beam size")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--budget", a.search.expansion_budget, "Node expansion (render) budget")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--k", a.search.proposals_per_expansion, "Proposals requested per expanded node")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--init-sigma-max", a.search.init_sigma_max, "Primitive limit of random initial programs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--sigma-cap", a.search.sigma_cap, "Primitive limit of any program in the search")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--max-steps", a.search.max_rollout_steps, "Policy steps allowed in a rollout")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_flag("--elitist", a.search.elitist, "Let parents compete with their children for the next frontier");
  cmd->add_option("--hillclimb-samples", a.hillclimb_samples, "Mutations rendered per hill-climb query")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

void finish_search_config(SearchArgs& a, bool truth_known) {
  a.search.seed = *a.c.seed;
  a.search.sigma_small = a.c.sigma_small;
  a.search.init = a.init == "external" ? InitSource::kExternal : InitSource::kRandom;
  if (a.value == "auto") a.value = a.policy == "external" ? "external" : truth_known ? "oracle" : "pixel";
  if ((a.policy == "external" || a.value == "external" || a.init == "external") && a.endpoint.empty()) {
    throw UsageError("external policy, value or init requires --endpoint");
  }
  try {
    a.search.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

struct SolveArgs {
  SearchArgs s;
  std::string target;
  std::string truth;
  std::string out;
  std::string frames;
  bool timing = false;
};

void check_shape(const Environment& env, const Canvas& c, const std::string& what) {
  if (c.channels != env.channels() || c.width != kCanvasSize || c.height != kCanvasSize) {
    throw UsageError(what + " must be a " + std::to_string(kCanvasSize) + "x" + std::to_string(kCanvasSize) + " " +
                     (env.channels() == 1 ? "grayscale" : "RGB") + " PNG for " + env.name());
  }
}

int run_solve(SolveArgs a) {
  const auto env = make_env(a.s.c);
  const Grammar& g = env.grammar();
  finish_search_config(a.s, !a.truth.empty());
  Canvas observed = read_png(a.target);
  check_shape(env, observed, "--target");
  std::optional<SyntaxTree> truth;
  if (!a.truth.empty()) truth = program_arg(env, a.truth, "--truth");
  if ((a.s.policy == "oracle" || a.s.value == "oracle") && !truth) throw UsageError("oracle policy or value requires --truth");
  const SearchTarget target{observed, truth ? env.render(*truth) : observed};

  std::unique_ptr<ExternalSession> session;
  std::unique_ptr<ExternalPolicy> external;
  if (!a.s.endpoint.empty()) {
    session = std::make_unique<ExternalSession>(env, a.s.endpoint, a.s.c.sigma_small,
                                                std::chrono::milliseconds(static_cast<long>(a.s.timeout_s * 1000)));
    external = std::make_unique<ExternalPolicy>(*session);
  }
  std::unique_ptr<Policy> policy;
  if (a.s.policy == "oracle") policy = std::make_unique<OraclePolicy>(g, *truth, a.s.c.sigma_small);
  if (a.s.policy == "hillclimb") policy = std::make_unique<HillclimbPolicy>(env, a.s.hillclimb_samples, a.s.c.sigma_small);
  Policy& chosen = policy ? *policy : *external;
  std::unique_ptr<ValueModel> value;
  if (a.s.value == "oracle") value = std::make_unique<OracleValue>(g, *truth, a.s.c.sigma_small);
  if (a.s.value == "pixel") value = std::make_unique<PixelValue>(env);
  if (a.s.value == "external") value = std::make_unique<ExternalValue>(*session);

  a.s.search.record_frames = !a.frames.empty();
  SearchResult r;
  if (a.s.solver == "rollout") {
    if (a.s.search.init == InitSource::kExternal) throw UsageError("rollouts start from a random program");
    Rng rng(derive_seed(a.s.search.seed, 0));
    r = rollout(env, chosen, sample_up_to(g, g.start(), a.s.search.init_sigma_max, rng), target, a.s.search);
  } else {
    r = beam_search(env, chosen, *value, target, a.s.search, external.get());
  }
  const bool timing = a.timing || a.s.policy == "external" || a.s.value == "external";
  write_text(a.out, r.to_json(env, timing).dump(2) + "\n");
  if (!a.frames.empty()) {
    fs::create_directories(a.frames);
    for (std::size_t i = 0; i < r.frames.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "frame_%04zu.png", i);
      write_png(fs::path(a.frames) / name, r.frames[i]);
    }
  }
  if (!a.out.empty() && a.out != "-") {
    std::cout << "solved=" << (r.solved ? "true" : "false") << " nodes_expanded=" << r.nodes_expanded << '\n';
  }
  return r.solved ? 0 : kExitUnsolved;
}

struct EvalArgs {
  SearchArgs s;
  std::string testset;
  std::string out;
  int seeds = 5;
  int jobs = 1;
  int curve_points = 50;
};

int run_eval(EvalArgs a) {
  const auto env = make_env(a.s.c);
  finish_search_config(a.s, true);
  const auto set = read_test_set(env, a.testset);
  for (const auto& inst : set) check_shape(env, inst.image, "test image");
  EvalConfig cfg;
  cfg.search = a.s.search;
  cfg.solver = a.s.solver == "rollout" ? SolverKind::kRollout : SolverKind::kBeam;
  cfg.policy = a.s.policy;
  cfg.value = a.s.value;
  cfg.endpoint = a.s.endpoint;
  cfg.hillclimb_samples = a.s.hillclimb_samples;
  cfg.seeds = a.seeds;
  cfg.jobs = a.jobs;
  cfg.curve_points = a.curve_points;
  const auto report = evaluate(env, set, cfg);
  fs::create_directories(a.out);
  write_text((fs::path(a.out) / "report.json").string(), report.json.dump(2) + "\n");
  write_text((fs::path(a.out) / "curve.csv").string(), report.curve_csv);
  std::cout << nlohmann::json{{"solve_rate", report.json["solve_rate"]}}.dump() << '\n';
  return 0;
}

int fail(const std::string& kind, const std::string& message, int code) {
  std::string line = message;
  for (auto& ch : line) {
    if (ch == '\n') ch = ' ';
  }
  std::cerr << "error: " << kind << ": " << line << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tree-diffusion program synthesis toolkit: grammars, mutations, edit paths, rendering, datasets and search."};
  app.name("treediff");
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML or INI file with option defaults; command-line flags win");
  app.set_version_flag("--version", "treediff 1.0");

  SampleArgs sample;
  auto* cmd_sample = app.add_subcommand("sample", "Print random programs");
  add_env(cmd_sample, sample.c);
  add_seed(cmd_sample, sample.c, true);
  cmd_sample->add_option("--sigma-max", sample.sigma_max, "Maximum primitives per program")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd_sample->add_option("--count", sample.count, "Number of programs")->check(CLI::PositiveNumber)->capture_default_str();

  MutateArgs mutate;
  auto* cmd_mutate = app.add_subcommand("mutate", "Apply a chain of random small mutations");
  add_env(cmd_mutate, mutate.c);
  add_seed(cmd_mutate, mutate.c, true);
  add_sigma_small(cmd_mutate, mutate.c);
  cmd_mutate->add_option("--steps", mutate.steps, "Number of mutations")->check(CLI::PositiveNumber)->capture_default_str();
  cmd_mutate->add_option("--program", mutate.program, "Starting program (default: a random one)");
  cmd_mutate->add_option("--sigma-max", mutate.sigma_max, "Primitive limit of the random starting program")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd_mutate->add_flag("--trace", mutate.trace, "Print every state with the mutated span underlined");

  PathArgs path;
  auto* cmd_path = app.add_subcommand("path", "Print the edit path between two programs as JSON");
  add_env(cmd_path, path.c);
  add_seed(cmd_path, path.c, true);
  add_sigma_small(cmd_path, path.c);
  cmd_path->add_option("--from", path.from, "Source program")->required();
  cmd_path->add_option("--to", path.to, "Target program")->required();
  cmd_path->add_option("--out", path.out, "Output file (default: stdout)");

  RenderArgs render;
  auto* cmd_render = app.add_subcommand("render", "Render a program to PNG");
  add_env(cmd_render, render.c);
  add_seed(cmd_render, render.c, false);
  cmd_render->add_option("--program", render.program, "Program text")->required();
  cmd_render->add_option("--out", render.out, "Output PNG")->required();
  cmd_render->add_flag("--sketch", render.sketch, "Hand-drawn sketch rendering (csg2d only; needs --seed)");

  DatasetArgs dataset;
  auto* cmd_dataset = app.add_subcommand("gen-dataset", "Generate a training dataset (manifest.ndjson + images)");
  add_env(cmd_dataset, dataset.c);
  add_seed(cmd_dataset, dataset.c, true);
  add_sigma_small(cmd_dataset, dataset.c);
  cmd_dataset->add_option("--n", dataset.cfg.n, "Number of records")->check(CLI::PositiveNumber)->capture_default_str();
  cmd_dataset->add_option("--rho", dataset.cfg.rho, "Fraction of records mutated from a random program")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd_dataset->add_option("--s-max", dataset.cfg.s_max, "Maximum noise steps")->check(CLI::PositiveNumber)->capture_default_str();
  cmd_dataset->add_option("--sigma-max", dataset.cfg.sigma_max, "Maximum primitives per target program")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd_dataset->add_option("--jobs", dataset.cfg.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  cmd_dataset->add_option("--out", dataset.out, "Output directory")->required();

  TestSetArgs testset;
  auto* cmd_testset = app.add_subcommand("gen-testset", "Generate a complexity-filtered test set");
  add_env(cmd_testset, testset.c);
  add_seed(cmd_testset, testset.c, true);
  cmd_testset->add_option("--n", testset.cfg.n, "Number of instances")->check(CLI::PositiveNumber)->capture_default_str();
  cmd_testset->add_option("--percentile", testset.cfg.percentile, "Minimum LZ4 compressed-size percentile")
      ->check(CLI::Range(0.0, 99.999))
      ->capture_default_str();
  cmd_testset->add_option("--pool-mult", testset.cfg.pool_multiplier, "Candidate pool size as a multiple of --n (>= 20)")
      ->check(CLI::Range(20, 100000))
      ->capture_default_str();
  cmd_testset->add_option("--sigma-max", testset.cfg.sigma_max, "Maximum primitives per program")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd_testset->add_option("--jobs", testset.cfg.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  cmd_testset->add_option("--out", testset.out, "Output directory")->required();

  SolveArgs solve;
  auto* cmd_solve = app.add_subcommand("solve", "Search for a program that renders to a target image");
  add_env(cmd_solve, solve.s.c);
  add_seed(cmd_solve, solve.s.c, true);
  add_sigma_small(cmd_solve, solve.s.c);
  add_search_options(cmd_solve, solve.s);
  cmd_solve->add_option("--target", solve.target, "Target PNG")->required()->check(CLI::ExistingFile);
  cmd_solve->add_option("--truth", solve.truth, "Program behind the target (enables oracle policy and value)");
  cmd_solve->add_option("--out", solve.out, "Result JSON (default: stdout)");
  cmd_solve->add_option("--frames", solve.frames, "Directory for best-so-far PNG frames");
  cmd_solve->add_flag("--timing", solve.timing, "Include wall time and latencies in the result");

  EvalArgs eval;
  auto* cmd_eval = app.add_subcommand("eval", "Solve-rate versus expansions over a test set");
  add_env(cmd_eval, eval.s.c);
  add_seed(cmd_eval, eval.s.c, true);
  add_sigma_small(cmd_eval, eval.s.c);
  add_search_options(cmd_eval, eval.s);
  cmd_eval->add_option("--testset", eval.testset, "Test set directory")->required()->check(CLI::ExistingDirectory);
  cmd_eval->add_option("--seeds", eval.seeds, "Repetitions with derived seeds")->check(CLI::PositiveNumber)->capture_default_str();
  cmd_eval->add_option("--jobs", eval.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  cmd_eval->add_option("--curve-points", eval.curve_points, "Budget grid points of the solve curve")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd_eval->add_option("--out", eval.out, "Report directory (report.json, curve.csv)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), kExitUsage);
  }

  try {
    if (*cmd_sample) return run_sample(sample);
    if (*cmd_mutate) return run_mutate(mutate);
    if (*cmd_path) return run_path(path);
    if (*cmd_render) return run_render(render);
    if (*cmd_dataset) return run_gen_dataset(dataset);
    if (*cmd_testset) return run_gen_testset(testset);
    if (*cmd_solve) return run_solve(solve);
    if (*cmd_eval) return run_eval(eval);
  } catch (const UsageError& e) {
    return fail("usage", e.what(), kExitUsage);
  } catch (const std::invalid_argument& e) {
    return fail("usage", e.what(), kExitUsage);
  } catch (const GrammarError& e) {
    return fail("grammar", e.what(), kExitUsage);
  } catch (const SyntaxError& e) {
    return fail("syntax", e.what(), kExitUsage);
  } catch (const PathError& e) {
    return fail("path", e.what(), kExitInternal);
  } catch (const MutationError& e) {
    return fail("mutation", e.what(), kExitInternal);
  } catch (const SampleError& e) {
    return fail("sample", e.what(), kExitInternal);
  } catch (const DatasetError& e) {
    return fail("dataset", e.what(), kExitInternal);
  } catch (const CanvasError& e) {
    return fail("image", e.what(), kExitInternal);
  } catch (const PolicyError& e) {
    return fail("external", e.what(), kExitInternal);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), kExitInternal);
  }
  return fail("internal", "no subcommand ran", kExitInternal);
}
