#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "treediff/environment.hpp"
#include "treediff/policy.hpp"

namespace treediff {

// Newline-delimited JSON bridge to external policy / value processes.
//
// Endpoints:
//   cmd:<shell command>   spawn the command, talk over its stdin/stdout
//   tcp:<host>:<port>     TCP stream socket
//   unix:<path>           Unix domain stream socket
//
// Messages (one request in flight per connection):
//   {"type":"hello","env":E,"sigma_small":N}          -> {"type":"ready"}
//   {"type":"policy","tokens":[..],"current_png":B64,
//    "target_png":B64,"k":N}                           -> {"type":"proposals","items":[{"pos":P,"replacement":[..],"score":S}]}
//   {"type":"value","a_png":B64,"b_png":B64}          -> {"type":"value","estimate":X}
// `pos` is the token index where the edited node's span starts.

class ProtocolError : public PolicyError {
 public:
  using PolicyError::PolicyError;
};

class TimeoutError : public PolicyError {
 public:
  using PolicyError::PolicyError;
};

class TransportError : public PolicyError {
 public:
  using PolicyError::PolicyError;
};

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws ProtocolError on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

inline constexpr std::chrono::milliseconds kDefaultTimeout{10000};

/// A line-oriented duplex stream to an endpoint.
class Connection {
 public:
  virtual ~Connection() = default;
  /// Writes one line (a newline is appended).
  virtual void send_line(const std::string& line) = 0;
  /// Reads one line; throws TimeoutError past the deadline.
  virtual std::string read_line(std::chrono::milliseconds timeout) = 0;

  static std::unique_ptr<Connection> open(const std::string& endpoint);
};

/// Resolves a wire edit against `program`: the outermost mutable node whose
/// span starts at token `pos` and whose rule derives `replacement`. Throws
/// MutationError when no node qualifies or the edit breaks the
/// small-mutation invariants.
Mutation resolve_edit(const Grammar& g, const SyntaxTree& program, int pos, const std::vector<std::string>& replacement,
                      int sigma_small);

/// Token index of the span start of the node at `path`.
int edit_position(const Grammar& g, const SyntaxTree& program, const NodePath& path);

/// Shared session with one external endpoint. Connects and handshakes
/// lazily; a failed request drops the connection so the next one starts
/// fresh.
class ExternalSession {
 public:
  ExternalSession(const Environment& env, std::string endpoint, int sigma_small = kDefaultSigmaSmall,
                  std::chrono::milliseconds timeout = kDefaultTimeout);

  /// Sends one request and returns the parsed reply; throws PolicyError
  /// subclasses on transport, timeout or protocol failures.
  nlohmann::json request(const nlohmann::json& msg, PolicyStats& stats);

  const Environment& env() const { return env_; }
  int sigma_small() const { return sigma_small_; }
  const std::string& endpoint() const { return endpoint_; }

 private:
  void ensure_connected();
  nlohmann::json exchange(const nlohmann::json& msg);

  const Environment& env_;
  std::string endpoint_;
  int sigma_small_;
  std::chrono::milliseconds timeout_;
  std::unique_ptr<Connection> conn_;
};

class ExternalPolicy : public Policy {
 public:
  explicit ExternalPolicy(ExternalSession& session) : session_(session) {}
  std::string name() const override { return "external"; }
  /// Invalid items are dropped and counted in stats().rejected.
  std::vector<EditProposal> propose(const PolicyQuery& q, RenderCounter& renders, Rng& rng) override;
  /// Whole programs proposed from a blank current image (replacement at
  /// pos 0 of an empty program). Invalid items are counted and skipped.
  std::vector<SyntaxTree> propose_programs(const Canvas& target, int k);

 private:
  nlohmann::json policy_request(const std::vector<std::string>& tokens, const Canvas& current, const Canvas& target, int k);

  ExternalSession& session_;
};

class ExternalValue : public ValueModel {
 public:
  explicit ExternalValue(ExternalSession& session) : session_(session) {}
  std::string name() const override { return "external"; }
  double estimate(const SyntaxTree& program, const Canvas& image, const Canvas& target) override;
  const PolicyStats& stats() const { return stats_; }

 private:
  ExternalSession& session_;
  PolicyStats stats_;
};

}  // namespace treediff
