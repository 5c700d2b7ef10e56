#include "treediff/wire.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cmath>
#include <cstring>

#include "treediff/png_io.hpp"

namespace treediff {

namespace {

constexpr std::size_t kMaxLine = 64u << 20;

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string errno_text(const std::string& what) { return what + ": " + std::strerror(errno); }

class FdConnection : public Connection {
 public:
  FdConnection(int read_fd, int write_fd, pid_t child = -1) : rfd_(read_fd), wfd_(write_fd), child_(child) {}
  ~FdConnection() override {
    if (wfd_ != rfd_ && wfd_ >= 0) ::close(wfd_);
    if (rfd_ >= 0) ::close(rfd_);
    if (child_ > 0) {
      // The shell may have forked the command; signal the whole group.
      ::kill(-child_, SIGTERM);
      ::waitpid(child_, nullptr, 0);
    }
  }
  FdConnection(const FdConnection&) = delete;
  FdConnection& operator=(const FdConnection&) = delete;

  void send_line(const std::string& line) override {
    std::string data = line;
    data.push_back('\n');
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = ::write(wfd_, data.data() + off, data.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(errno_text("write to endpoint failed"));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line(std::chrono::milliseconds timeout) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      if (buffer_.size() > kMaxLine) throw ProtocolError("reply line exceeds size limit");
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw TimeoutError("no reply within " + std::to_string(timeout.count()) + " ms");
      pollfd p{rfd_, POLLIN, 0};
      const int r = ::poll(&p, 1, static_cast<int>(left.count()));
      if (r < 0) {
        if (errno == EINTR) continue;
        throw TransportError(errno_text("poll failed"));
      }
      if (r == 0) continue;
      std::array<char, 65536> chunk;
      const ssize_t n = ::read(rfd_, chunk.data(), chunk.size());
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(errno_text("read from endpoint failed"));
      }
      if (n == 0) throw TransportError("endpoint closed the connection");
      buffer_.append(chunk.data(), static_cast<std::size_t>(n));
    }
  }

 private:
  int rfd_;
  int wfd_;
  pid_t child_;
  std::string buffer_;
};

std::unique_ptr<Connection> spawn(const std::string& command) {
  int to_child[2];
  int from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0) throw TransportError(errno_text("pipe failed"));
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw TransportError(errno_text("pipe failed"));
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw TransportError(errno_text("fork failed"));
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  return std::make_unique<FdConnection>(from_child[0], to_child[1], pid);
}

std::unique_ptr<Connection> connect_tcp(const std::string& target) {
  const auto colon = target.rfind(':');
  if (colon == std::string::npos) throw TransportError("tcp endpoint must be tcp:<host>:<port>");
  const std::string host = target.substr(0, colon);
  const std::string port = target.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw TransportError("cannot resolve '" + target + "': " + ::gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw TransportError(errno_text("cannot connect to '" + target + "'"));
  return std::make_unique<FdConnection>(fd, fd);
}

std::unique_ptr<Connection> connect_unix(const std::string& path) {
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof addr.sun_path) throw TransportError("unix socket path too long");
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  const int fd = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw TransportError(errno_text("socket failed"));
  if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(fd);
    throw TransportError(errno_text("cannot connect to '" + path + "'"));
  }
  return std::make_unique<FdConnection>(fd, fd);
}

std::string png_b64(const Canvas& c) { return base64_encode(encode_png(c)); }

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (const std::size_t rest = bytes.size() - i; rest > 0) {
    std::uint32_t v = bytes[i] << 16;
    if (rest == 2) v |= bytes[i + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (text.size() % 4 != 0) throw ProtocolError("base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    const bool last = i + 4 == text.size();
    int v[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + static_cast<std::size_t>(k)];
      if (c == '=' && last && k >= 2) {
        v[k] = 0;
        ++pad;
        continue;
      }
      if (pad > 0 || (v[k] = value(c)) < 0) throw ProtocolError("invalid base64 character");
    }
    const std::uint32_t word = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out.push_back(static_cast<std::uint8_t>(word >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(word >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(word));
  }
  return out;
}

std::unique_ptr<Connection> Connection::open(const std::string& endpoint) {
  ::signal(SIGPIPE, SIG_IGN);
  if (endpoint.rfind("cmd:", 0) == 0) return spawn(endpoint.substr(4));
  if (endpoint.rfind("tcp:", 0) == 0) return connect_tcp(endpoint.substr(4));
  if (endpoint.rfind("unix:", 0) == 0) return connect_unix(endpoint.substr(5));
  throw TransportError("unknown endpoint '" + endpoint + "' (expected cmd:, tcp: or unix:)");
}

Mutation resolve_edit(const Grammar& g, const SyntaxTree& program, int pos, const std::vector<std::string>& replacement,
                      int sigma_small) {
  std::vector<TokenId> toks;
  toks.reserve(replacement.size());
  for (const auto& word : replacement) {
    const TokenId id = g.token_id(word);
    if (id < 0 || id == g.end_token() || id == g.edit_token()) throw MutationError("unknown replacement token '" + word + "'");
    toks.push_back(id);
  }
  const TokenSeq seq = serialize(g, program);
  bool any_start = false;
  for (const auto& span : seq.node_spans) {
    if (span.start != pos) continue;
    any_start = true;
    const SyntaxTree& node = program.at(span.path);
    if (!g.is_mutable(node.rule())) continue;
    SyntaxTree repl;
    try {
      repl = parse(g, toks, node.rule());
    } catch (const SyntaxError&) {
      continue;
    }
    Mutation m{span.path, std::move(repl)};
    validate_mutation(g, program, m, sigma_small);
    return m;
  }
  if (!any_start) throw MutationError("no node starts at token " + std::to_string(pos));
  throw MutationError("replacement does not derive from any mutable node starting at token " + std::to_string(pos));
}

int edit_position(const Grammar& g, const SyntaxTree& program, const NodePath& path) {
  for (const auto& span : serialize(g, program).node_spans) {
    if (span.path == path) return span.start;
  }
  throw std::out_of_range("node path does not resolve");
}

ExternalSession::ExternalSession(const Environment& env, std::string endpoint, int sigma_small,
                                 std::chrono::milliseconds timeout)
    : env_(env), endpoint_(std::move(endpoint)), sigma_small_(sigma_small), timeout_(timeout) {}

nlohmann::json ExternalSession::exchange(const nlohmann::json& msg) {
  conn_->send_line(msg.dump());
  const std::string line = conn_->read_line(timeout_);
  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw ProtocolError("reply is not valid JSON");
  }
  if (!reply.is_object() || !reply.contains("type") || !reply["type"].is_string()) {
    throw ProtocolError("reply lacks a string 'type'");
  }
  if (reply["type"] == "error") {
    throw ProtocolError("endpoint error: " + reply.value("message", std::string("unspecified")));
  }
  return reply;
}

void ExternalSession::ensure_connected() {
  if (conn_) return;
  conn_ = Connection::open(endpoint_);
  try {
    const auto reply = exchange({{"type", "hello"}, {"env", env_.name()}, {"sigma_small", sigma_small_}});
    if (reply["type"] != "ready") throw ProtocolError("handshake answered with '" + reply["type"].get<std::string>() + "'");
  } catch (...) {
    conn_.reset();
    throw;
  }
}

nlohmann::json ExternalSession::request(const nlohmann::json& msg, PolicyStats& stats) {
  ++stats.queries;
  const auto start = std::chrono::steady_clock::now();
  try {
    ensure_connected();
    auto reply = exchange(msg);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    stats.latency_ms_total += ms;
    stats.latency_ms_max = std::max(stats.latency_ms_max, ms);
    return reply;
  } catch (const PolicyError&) {
    ++stats.failures;
    conn_.reset();
    throw;
  }
}

nlohmann::json ExternalPolicy::policy_request(const std::vector<std::string>& tokens, const Canvas& current,
                                              const Canvas& target, int k) {
  nlohmann::json msg = {{"type", "policy"},
                        {"tokens", tokens},
                        {"current_png", png_b64(current)},
                        {"target_png", png_b64(target)},
                        {"k", k}};
  auto reply = session_.request(msg, stats_);
  if (reply["type"] != "proposals" || !reply.contains("items") || !reply["items"].is_array()) {
    ++stats_.failures;
    throw ProtocolError("expected a 'proposals' reply with an 'items' array");
  }
  return reply["items"];
}

namespace {

bool read_item(const nlohmann::json& item, int& pos, std::vector<std::string>& repl, double& score) {
  if (!item.is_object()) return false;
  const auto p = item.find("pos");
  const auto r = item.find("replacement");
  if (p == item.end() || !p->is_number_integer() || r == item.end() || !r->is_array()) return false;
  pos = p->get<int>();
  repl.clear();
  for (const auto& tok : *r) {
    if (!tok.is_string()) return false;
    repl.push_back(tok.get<std::string>());
  }
  score = 0;
  if (const auto s = item.find("score"); s != item.end()) {
    if (!s->is_number()) return false;
    score = s->get<double>();
    if (!std::isfinite(score)) return false;
  }
  return true;
}

}  // namespace

std::vector<EditProposal> ExternalPolicy::propose(const PolicyQuery& q, RenderCounter& /*renders*/, Rng& /*rng*/) {
  const Grammar& g = session_.env().grammar();
  const auto items = policy_request(token_strings(g, tokens_of(g, q.program)), q.current_image, q.target_image, q.k);
  std::vector<EditProposal> out;
  for (const auto& item : items) {
    int pos = 0;
    std::vector<std::string> repl;
    double score = 0;
    if (!read_item(item, pos, repl, score)) {
      ++stats_.rejected;
      continue;
    }
    try {
      Mutation m = resolve_edit(g, q.program, pos, repl, session_.sigma_small());
      out.push_back({std::move(m.target_path), std::move(m.replacement), score, std::nullopt});
      ++stats_.accepted;
    } catch (const MutationError&) {
      ++stats_.rejected;
    }
    if (out.size() == static_cast<std::size_t>(q.k)) break;
  }
  std::stable_sort(out.begin(), out.end(), [](const EditProposal& a, const EditProposal& b) { return a.score > b.score; });
  return out;
}

std::vector<SyntaxTree> ExternalPolicy::propose_programs(const Canvas& target, int k) {
  const Grammar& g = session_.env().grammar();
  const Canvas blank = Canvas::filled(target.channels, session_.env().is_csg() ? 0.0f : 1.0f);
  const auto items = policy_request({}, blank, target, k);
  std::vector<SyntaxTree> out;
  for (const auto& item : items) {
    int pos = 0;
    std::vector<std::string> repl;
    double score = 0;
    if (!read_item(item, pos, repl, score) || pos != 0) {
      ++stats_.rejected;
      continue;
    }
    try {
      std::vector<TokenId> toks;
      for (const auto& w : repl) {
        const TokenId id = g.token_id(w);
        if (id < 0) throw SyntaxError(toks.size(), "unknown token");
        toks.push_back(id);
      }
      out.push_back(parse(g, toks));
      ++stats_.accepted;
    } catch (const SyntaxError&) {
      ++stats_.rejected;
    }
  }
  return out;
}

double ExternalValue::estimate(const SyntaxTree& /*program*/, const Canvas& image, const Canvas& target) {
  auto reply = session_.request({{"type", "value"}, {"a_png", png_b64(image)}, {"b_png", png_b64(target)}}, stats_);
  if (reply["type"] != "value" || !reply.contains("estimate") || !reply["estimate"].is_number()) {
    ++stats_.failures;
    throw ProtocolError("expected a 'value' reply with a numeric 'estimate'");
  }
  const double v = reply["estimate"].get<double>();
  if (!std::isfinite(v)) {
    ++stats_.failures;
    throw ProtocolError("value estimate is not finite");
  }
  return v;
}

}  // namespace treediff
