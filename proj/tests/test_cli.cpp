#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "treediff/environment.hpp"
#include "treediff/png_io.hpp"
#include "treediff/syntax_tree.hpp"

namespace fs = std::filesystem;
using namespace treediff;

namespace {

struct Run {
  int status = -1;
  std::string out;
};

// Runs the CLI with `args` through the shell; stderr is merged into out.
Run cli(const std::string& args) {
  const std::string cmd = std::string(TREEDIFF_CLI) + " " + args + " 2>&1";
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  Run r;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  const int raw = ::pclose(p);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("treediff_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

const char* kProgram = "(+ (Circle 4 8 8) (Quad 5 6 4 2 angle_45))";

}  // namespace

TEST_CASE("help text matches the frozen goldens") {
  const fs::path golden = TREEDIFF_GOLDEN_DIR;
  CHECK(cli("--help").out == slurp(golden / "help.txt"));
  for (const char* sub : {"sample", "mutate", "path", "render", "gen-dataset", "gen-testset", "solve", "eval"}) {
    INFO(std::string(sub));
    const Run r = cli(std::string(sub) + " --help");
    CHECK(r.status == 0);
    CHECK(r.out == slurp(golden / ("help_" + std::string(sub) + ".txt")));
  }
}

TEST_CASE("exit codes") {
  SUBCASE("missing seed is a usage error") {
    for (const char* sub : {"sample", "mutate --steps 2", "gen-dataset --out x", "gen-testset --out x"}) {
      INFO(std::string(sub));
      const Run r = cli(sub);
      CHECK(r.status == 2);
      CHECK(r.out.find("error: usage: --seed is required") != std::string::npos);
    }
  }
  SUBCASE("syntax errors") {
    const Run r = cli("render --program '(Circle 4 8' --out /dev/null");
    CHECK(r.status == 2);
    CHECK(r.out.rfind("error: ", 0) == 0);
  }
  SUBCASE("no subcommand") { CHECK(cli("").status == 2); }
  SUBCASE("bad grammar file") { CHECK(cli("sample --seed 1 --grammar /nonexistent.grammar").status == 2); }
  SUBCASE("sketch rendering needs a seed") {
    CHECK(cli(std::string("render --sketch --program '") + kProgram + "' --out /dev/null").status == 2);
  }
  SUBCASE("unsolved search") {
    TempDir d;
    const std::string png = (d.path / "t.png").string();
    REQUIRE(cli(std::string("render --program '") + kProgram + "' --out " + png).status == 0);
    const Run r = cli("solve --seed 1 --policy hillclimb --value pixel --beam 2 --budget 3 --target " + png);
    CHECK(r.status == 3);
    const auto j = nlohmann::json::parse(r.out.substr(0, r.out.find("\nerror")));
    CHECK(j["solved"] == false);
    CHECK(j["nodes_expanded"] == 3);
  }
  SUBCASE("solved search") {
    TempDir d;
    const std::string png = (d.path / "t.png").string();
    REQUIRE(cli(std::string("render --program '") + kProgram + "' --out " + png).status == 0);
    const Run r = cli("solve --seed 1 --target " + png + " --truth '" + kProgram + "'");
    CHECK(r.status == 0);
    CHECK(nlohmann::json::parse(r.out)["solved"] == true);
  }
}

TEST_CASE("mutate trace") {
  const Run r = cli(std::string("mutate --seed 5 --steps 4 --trace --program '") + kProgram + "'");
  REQUIRE(r.status == 0);
  const auto ls = lines(r.out);
  REQUIRE(ls.size() == 9);
  const auto env = Environment::load("csg2d");
  const Grammar& g = env.grammar();
  CHECK(ls[0] == kProgram);
  for (int step = 0; step < 4; ++step) {
    const std::string& state = ls[static_cast<std::size_t>(2 * step)];
    const std::string& mark = ls[static_cast<std::size_t>(2 * step + 1)];
    const std::string& next = ls[static_cast<std::size_t>(2 * step + 2)];
    const auto caret = mark.find('^');
    REQUIRE(caret != std::string::npos);
    CHECK(mark.find_first_not_of(' ') == caret);
    const auto arrow = mark.find("--> ");
    REQUIRE(arrow != std::string::npos);
    const std::string replacement = mark.substr(arrow + 4);
    // Everything before the marked span is unchanged, and the new state
    // continues with the replacement text.
    CHECK(next.compare(0, caret, state, 0, caret) == 0);
    CHECK(next.compare(caret, replacement.size(), replacement) == 0);
    CHECK_NOTHROW(parse_text(g, next));
  }
}

TEST_CASE("repeat runs are byte-identical") {
  const std::string a = cli("sample --seed 9 --count 20 --env rainbow").out;
  CHECK(a == cli("sample --seed 9 --count 20 --env rainbow").out);
  CHECK(a != cli("sample --seed 10 --count 20 --env rainbow").out);
  const std::string p = cli(std::string("path --seed 2 --from '(Circle 1 2 3)' --to '") + kProgram + "'").out;
  CHECK(p == cli(std::string("path --seed 2 --from '(Circle 1 2 3)' --to '") + kProgram + "'").out);
  const auto j = nlohmann::json::parse(p);
  REQUIRE(j["steps"].is_array());
  CHECK(j["length"] == j["steps"].size());
  CHECK(j["steps"].back()["result"] == kProgram);
}

TEST_CASE("render writes the environment rendering") {
  TempDir d;
  const fs::path png = d.path / "r.png";
  REQUIRE(cli(std::string("render --program '") + kProgram + "' --out " + png.string()).status == 0);
  const auto env = Environment::load("csg2d");
  CHECK(read_png(png) == quantized_copy(env.render(parse_text(env.grammar(), kProgram))));
}

TEST_CASE("config file supplies defaults and flags override it") {
  TempDir d;
  const fs::path ini = d.path / "c.ini";
  std::ofstream(ini) << "[sample]\nseed=5\ncount=3\nenv=\"tinysvg\"\n";
  const Run from_file = cli("--config " + ini.string() + " sample");
  CHECK(from_file.status == 0);
  CHECK(from_file.out == cli("sample --seed 5 --count 3 --env tinysvg").out);
  CHECK(cli("--config " + ini.string() + " sample --count 1").out == cli("sample --seed 5 --count 1 --env tinysvg").out);
}
