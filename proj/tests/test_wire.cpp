#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <string>
#include <thread>

#include "doctest.h"
#include "test_util.hpp"
#include "treediff/png_io.hpp"
#include "treediff/sampler.hpp"
#include "treediff/wire.hpp"

using namespace treediff;
using namespace std::chrono_literals;

namespace {

std::string stub(const std::string& args) { return std::string("cmd:") + STUB_SERVER + " " + args; }

const Environment& csg_env() {
  static const Environment env = Environment::load("csg2d");
  return env;
}

struct Fixture {
  SyntaxTree program = parse_text(csg_env().grammar(), "(+ (Circle 1 2 3) (Circle 4 5 6))");
  Canvas current = csg_env().render(program);
  Canvas target = csg_env().render(parse_text(csg_env().grammar(), "(Circle 4 5 6)"));
  RenderCounter renders{csg_env(), 1000};
  Rng rng{1};

  std::vector<EditProposal> ask(ExternalPolicy& p, int k) { return p.propose({program, current, target, k}, renders, rng); }
};

// A listening stub in a child process; reads its "listening <port>" banner.
class Listener {
 public:
  explicit Listener(const std::vector<std::string>& args) {
    int fds[2];
    REQUIRE(::pipe(fds) == 0);
    pid_ = ::fork();
    REQUIRE(pid_ >= 0);
    if (pid_ == 0) {
      ::dup2(fds[1], STDOUT_FILENO);
      std::vector<char*> argv{const_cast<char*>(STUB_SERVER)};
      for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
      argv.push_back(nullptr);
      ::execv(STUB_SERVER, argv.data());
      ::_exit(127);
    }
    ::close(fds[1]);
    std::string banner;
    char c;
    while (::read(fds[0], &c, 1) == 1 && c != '\n') banner.push_back(c);
    ::close(fds[0]);
    REQUIRE(banner.rfind("listening ", 0) == 0);
    port_ = std::stoi(banner.substr(10));
  }
  ~Listener() {
    ::kill(pid_, SIGTERM);
    ::waitpid(pid_, nullptr, 0);
  }
  int port() const { return port_; }

 private:
  pid_t pid_ = -1;
  int port_ = 0;
};

}  // namespace

TEST_CASE("base64 matches known vectors and round trips") {
  auto enc = [](const std::string& s) {
    return base64_encode({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
  };
  CHECK(enc("") == "");
  CHECK(enc("M") == "TQ==");
  CHECK(enc("Ma") == "TWE=");
  CHECK(enc("Man") == "TWFu");
  CHECK(enc("any carnal pleasure.") == "YW55IGNhcm5hbCBwbGVhc3VyZS4=");
  Rng rng(3);
  for (int n = 0; n < 300; ++n) {
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(n));
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.below(256));
    CHECK(base64_decode(base64_encode(bytes)) == bytes);
  }
  CHECK_THROWS_AS(base64_decode("abc"), ProtocolError);
  CHECK_THROWS_AS(base64_decode("ab!d"), ProtocolError);
  CHECK_THROWS_AS(base64_decode("a=bc"), ProtocolError);
  CHECK_THROWS_AS(base64_decode("ab==abcd"), ProtocolError);
}

TEST_CASE("resolve_edit picks the outermost mutable node at a token position") {
  const Grammar& g = csg_env().grammar();
  const auto t = parse_text(g, "(+ (Circle 1 2 3) (Circle 4 5 6))");
  auto m = resolve_edit(g, t, 2, {"(", "Quad", "1", "1", "1", "1", "angle_0", ")"}, 2);
  CHECK(m.target_path == NodePath{0, 1});
  m = resolve_edit(g, t, 4, {"7"}, 2);
  CHECK(m.target_path == NodePath{0, 1, 0, 0});
  m = resolve_edit(g, t, 1, {"-"}, 2);
  CHECK(m.target_path == NodePath{0, 0});
  CHECK(to_text(g, apply(g, t, m)) == "(- (Circle 1 2 3) (Circle 4 5 6))");

  CHECK_THROWS_AS(resolve_edit(g, t, 3, {"7"}, 2), MutationError);   // "Circle" starts no node
  CHECK_THROWS_AS(resolve_edit(g, t, 4, {"1"}, 2), MutationError);   // no-op
  CHECK_THROWS_AS(resolve_edit(g, t, 4, {"+"}, 2), MutationError);   // wrong rule
  CHECK_THROWS_AS(resolve_edit(g, t, 4, {"zz"}, 2), MutationError);  // unknown token
  CHECK_THROWS_AS(resolve_edit(g, t, 99, {"1"}, 2), MutationError);
  CHECK_THROWS_AS(
      resolve_edit(g, t, 0, {"(", "+", "(", "Circle", "1", "1", "1", ")", "(", "+", "(", "Circle", "2", "2", "2", ")", "(",
                             "Circle", "3", "3", "3", ")", ")", ")"},
                   2),
      MutationError);  // three primitives exceed sigma_small
}

TEST_CASE("edit_position and resolve_edit invert each other on sampled mutations") {
  for (const char* name : {"csg2d", "tinysvg", "rainbow"}) {
    const Grammar& g = testing::grammar(name);
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
      const auto t = sample_up_to(g, g.start(), 6, rng);
      const auto m = sample_mutation_balanced(g, t, kDefaultSigmaSmall, rng);
      const int pos = edit_position(g, t, m.target_path);
      const auto words = token_strings(g, tokens_of(g, m.replacement));
      const auto back = resolve_edit(g, t, pos, words, kDefaultSigmaSmall);
      REQUIRE(apply(g, t, back) == apply(g, t, m));
    }
  }
}

TEST_CASE("echo endpoint proposes a digit edit and a value") {
  Fixture f;
  ExternalSession session(csg_env(), stub("--mode echo --value 1.5"));
  ExternalPolicy policy(session);
  const auto props = f.ask(policy, 4);
  REQUIRE(props.size() == 1);
  CHECK(props[0].target_path == NodePath{0, 1, 0, 0});
  CHECK(to_text(csg_env().grammar(), props[0].replacement) == "2");
  CHECK(props[0].score == doctest::Approx(0.9));
  CHECK_FALSE(props[0].image.has_value());
  CHECK(f.renders.count() == 0);
  CHECK(policy.stats().queries == 1);
  CHECK(policy.stats().accepted == 1);
  CHECK(policy.stats().latency_ms_total > 0);

  ExternalValue value(session);
  CHECK(value.estimate(f.program, f.current, f.target) == 1.5);
  CHECK(value.stats().queries == 1);
  // Several requests share one connection.
  for (int i = 0; i < 20; ++i) CHECK(f.ask(policy, 2).size() == 1);
}

TEST_CASE("adversarial items are rejected individually") {
  Fixture f;
  ExternalSession session(csg_env(), stub("--mode adversarial"));
  ExternalPolicy policy(session);
  const auto props = f.ask(policy, 16);
  REQUIRE(props.size() == 1);
  CHECK(policy.stats().accepted == 1);
  CHECK(policy.stats().rejected == 8);
  CHECK(policy.stats().failures == 0);
}

TEST_CASE("whole-program proposals parse from the start rule") {
  const Grammar& g = csg_env().grammar();
  Fixture f;
  ExternalSession session(csg_env(), stub("--mode echo --program '(- (Circle 3 3 3) (Quad 1 2 3 4 angle_45))'"));
  ExternalPolicy policy(session);
  const auto programs = policy.propose_programs(f.target, 4);
  REQUIRE(programs.size() == 1);
  CHECK(to_text(g, programs[0]) == "(- (Circle 3 3 3) (Quad 1 2 3 4 angle_45))");
  CHECK(policy.stats().rejected == 1);
}

TEST_CASE("failures raise typed errors and the session recovers") {
  Fixture f;
  SUBCASE("malformed reply") {
    ExternalSession session(csg_env(), stub("--mode malformed"));
    ExternalPolicy policy(session);
    CHECK_THROWS_AS(f.ask(policy, 1), ProtocolError);
    CHECK_THROWS_AS(f.ask(policy, 1), ProtocolError);
    CHECK(policy.stats().failures == 2);
    CHECK(policy.stats().queries == 2);
  }
  SUBCASE("error reply") {
    ExternalSession session(csg_env(), stub("--mode error"));
    ExternalValue value(session);
    CHECK_THROWS_AS(value.estimate(f.program, f.current, f.target), ProtocolError);
    CHECK(value.stats().failures == 1);
  }
  SUBCASE("handshake refused") {
    ExternalSession session(csg_env(), stub("--mode reject-hello"));
    ExternalPolicy policy(session);
    CHECK_THROWS_AS(f.ask(policy, 1), ProtocolError);
  }
  SUBCASE("timeout") {
    ExternalSession session(csg_env(), stub("--mode timeout"), kDefaultSigmaSmall, 300ms);
    ExternalPolicy policy(session);
    const auto start = std::chrono::steady_clock::now();
    CHECK_THROWS_AS(f.ask(policy, 1), TimeoutError);
    CHECK(std::chrono::steady_clock::now() - start < 5s);
    CHECK(policy.stats().failures == 1);
  }
  SUBCASE("endpoint exits") {
    ExternalSession session(csg_env(), stub("--mode crash"));
    ExternalPolicy policy(session);
    CHECK_THROWS_AS(f.ask(policy, 1), TransportError);
    // Each request reconnects with a fresh handshake.
    CHECK_THROWS_AS(f.ask(policy, 1), TransportError);
    CHECK(policy.stats().failures == 2);
  }
  SUBCASE("missing command") {
    ExternalSession session(csg_env(), "cmd:/nonexistent/endpoint");
    ExternalPolicy policy(session);
    CHECK_THROWS_AS(f.ask(policy, 1), TransportError);
  }
  SUBCASE("bad endpoint syntax") {
    ExternalSession session(csg_env(), "http://example");
    ExternalPolicy policy(session);
    CHECK_THROWS_AS(f.ask(policy, 1), TransportError);
  }
}

TEST_CASE("socket transports") {
  Fixture f;
  SUBCASE("unix") {
    const auto path = std::filesystem::temp_directory_path() / ("treediff_stub_" + std::to_string(::getpid()));
    Listener server({"--mode", "echo", "--unix", path.string()});
    ExternalSession session(csg_env(), "unix:" + path.string());
    ExternalPolicy policy(session);
    CHECK(f.ask(policy, 1).size() == 1);
    CHECK(f.ask(policy, 1).size() == 1);
    std::filesystem::remove(path);
  }
  SUBCASE("tcp") {
    Listener server({"--mode", "echo", "--tcp", "0"});
    ExternalSession session(csg_env(), "tcp:127.0.0.1:" + std::to_string(server.port()));
    ExternalValue value(session);
    CHECK(value.estimate(f.program, f.current, f.target) == 1.5);
  }
  SUBCASE("refused") {
    ExternalSession session(csg_env(), "unix:/nonexistent/socket");
    ExternalValue value(session);
    CHECK_THROWS_AS(value.estimate(f.program, f.current, f.target), TransportError);
  }
}
