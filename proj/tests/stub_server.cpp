// Scripted endpoint for the external bridge tests. Speaks the wire protocol
// over stdio, or over a listening unix / tcp socket (one client at a time).

#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <iostream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

using nlohmann::json;

namespace {

struct Options {
  std::string mode = "echo";
  std::string program;
  double value = 1.5;
};

bool is_digit_token(const std::string& t) {
  return t.size() == 1 && ((t[0] >= '0' && t[0] <= '9') || (t[0] >= 'A' && t[0] <= 'F'));
}

json policy_reply(const Options& opt, const json& msg) {
  json items = json::array();
  const auto& tokens = msg.at("tokens");
  if (tokens.empty()) {
    if (!opt.program.empty()) {
      json repl = json::array();
      std::string word;
      for (char c : opt.program + " ") {
        if (c == ' ' || c == '(' || c == ')') {
          if (!word.empty()) repl.push_back(word);
          word.clear();
          if (c != ' ') repl.push_back(std::string(1, c));
        } else {
          word.push_back(c);
        }
      }
      items.push_back({{"pos", 0}, {"replacement", repl}, {"score", 1.0}});
      items.push_back({{"pos", 0}, {"replacement", {"(", "nonsense"}}, {"score", 0.5}});
    }
    return {{"type", "proposals"}, {"items", items}};
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string t = tokens[i].get<std::string>();
    if (!is_digit_token(t)) continue;
    const std::string other = t == "1" ? "2" : "1";
    items.push_back({{"pos", i}, {"replacement", {other}}, {"score", 0.9}});
    break;
  }
  if (opt.mode == "adversarial") {
    items.push_back({{"pos", -1}, {"replacement", {"1"}}, {"score", 5.0}});
    items.push_back({{"pos", 0}, {"replacement", {"no_such_token"}}});
    items.push_back({{"pos", "zero"}, {"replacement", {"1"}}});
    items.push_back({{"pos", 0}, {"replacement", "1"}});
    items.push_back(42);
    items.push_back({{"pos", 100000}, {"replacement", {"1"}}});
    items.push_back({{"pos", 0}, {"replacement", json::array()}});
    items.push_back({{"pos", 0}, {"replacement", {"1"}}, {"score", "high"}});
  }
  return {{"type", "proposals"}, {"items", items}};
}

// Returns false when the session should end.
bool handle(const Options& opt, const std::string& line, std::string& out) {
  json msg;
  try {
    msg = json::parse(line);
  } catch (const json::exception&) {
    out = json{{"type", "error"}, {"message", "unparseable request"}}.dump();
    return true;
  }
  const std::string type = msg.value("type", "");
  if (type == "hello") {
    if (opt.mode == "reject-hello") {
      out = json{{"type", "error"}, {"message", "unsupported environment"}}.dump();
      return true;
    }
    out = json{{"type", "ready"}}.dump();
    return true;
  }
  if (opt.mode == "malformed") {
    out = "{this is not json";
    return true;
  }
  if (opt.mode == "error") {
    out = json{{"type", "error"}, {"message", "model unavailable"}}.dump();
    return true;
  }
  if (opt.mode == "timeout") {
    std::this_thread::sleep_for(std::chrono::seconds(30));
    return false;
  }
  if (opt.mode == "crash") return false;
  if (type == "policy") {
    // Every PNG starts with the same 8 signature bytes, base64 "iVBORw0KGgo".
    for (const char* key : {"current_png", "target_png"}) {
      if (msg.value(key, "").rfind("iVBORw0KGgo", 0) != 0) {
        out = json{{"type", "error"}, {"message", std::string(key) + " is not a PNG"}}.dump();
        return true;
      }
    }
    out = policy_reply(opt, msg).dump();
  } else if (type == "value") {
    out = json{{"type", "value"}, {"estimate", opt.value}}.dump();
  } else {
    out = json{{"type", "error"}, {"message", "unknown request type"}}.dump();
  }
  return true;
}

void serve_stream(const Options& opt, std::FILE* in, std::FILE* out) {
  std::string line;
  for (int c; (c = std::fgetc(in)) != EOF;) {
    if (c != '\n') {
      line.push_back(static_cast<char>(c));
      continue;
    }
    std::string reply;
    const bool more = handle(opt, line, reply);
    line.clear();
    if (!more) return;
    std::fputs(reply.c_str(), out);
    std::fputc('\n', out);
    std::fflush(out);
  }
}

int listen_socket(const std::string& unix_path, int tcp_port) {
  int fd = -1;
  if (!unix_path.empty()) {
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    std::strncpy(addr.sun_path, unix_path.c_str(), sizeof addr.sun_path - 1);
    ::unlink(unix_path.c_str());
    fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
    if (fd < 0 || ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) return -1;
  } else {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<std::uint16_t>(tcp_port));
    fd = ::socket(AF_INET, SOCK_STREAM, 0);
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (fd < 0 || ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) return -1;
  }
  if (::listen(fd, 4) != 0) return -1;
  return fd;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scripted wire-protocol endpoint for tests"};
  Options opt;
  std::string unix_path;
  int tcp_port = -1;
  app.add_option("--mode", opt.mode, "echo, adversarial, malformed, error, timeout, crash or reject-hello");
  app.add_option("--program", opt.program, "Program offered when asked for whole programs");
  app.add_option("--value", opt.value, "Value estimate returned for every value request");
  app.add_option("--unix", unix_path, "Listen on a unix socket instead of stdio");
  app.add_option("--tcp", tcp_port, "Listen on a loopback tcp port instead of stdio (0 picks one)");
  CLI11_PARSE(app, argc, argv);

  if (unix_path.empty() && tcp_port < 0) {
    serve_stream(opt, stdin, stdout);
    return 0;
  }
  const int fd = listen_socket(unix_path, tcp_port);
  if (fd < 0) {
    std::perror("listen");
    return 1;
  }
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
  std::cout << "listening " << (unix_path.empty() ? ntohs(bound.sin_port) : 0) << std::endl;
  for (;;) {
    const int client = ::accept(fd, nullptr, nullptr);
    if (client < 0) continue;
    std::FILE* in = ::fdopen(client, "r");
    std::FILE* out = ::fdopen(::dup(client), "w");
    serve_stream(opt, in, out);
    std::fclose(in);
    std::fclose(out);
  }
}
