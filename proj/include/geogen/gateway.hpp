#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "geogen/error.hpp"

namespace geogen {

struct GatewayConfig {
  std::string endpoint = "http://127.0.0.1:8000/v1/chat/completions";
  std::string model = "default";
  // Environment variable holding the bearer token; empty disables auth.
  std::string token_env = "GEOGEN_API_KEY";
  double timeout_seconds = 60;
  int max_attempts = 3;
  int backoff_base_ms = 500;  // wait before retry k is base * 2^(k-1)
  double temperature = 0.2;
  int max_in_flight = 4;
  std::string audit_path;  // JSONL; empty disables the log

  void validate() const;  // InvalidArgument
};

struct CompletionRequest {
  std::string id;  // assigned by the gateway when empty
  std::string system;
  std::string exemplar_user;  // one-shot pair; both or neither
  std::string exemplar_assistant;
  std::string user;
};

struct CompletionResponse {
  std::string text;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  double latency_ms = 0;
  int attempts = 0;
};

// One attempt against a service. Throws AuthError, TransientError,
// TimeoutError or GatewayError; never retries itself.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual CompletionResponse send(const CompletionRequest& request, const GatewayConfig& config,
                                  const std::string& token) = 0;
};

// OpenAI-style chat completion over HTTP(S).
class HttpBackend : public Backend {
 public:
  CompletionResponse send(const CompletionRequest& request, const GatewayConfig& config,
                          const std::string& token) override;

  static nlohmann::json request_body(const CompletionRequest& request, const GatewayConfig& config);
  // Throws GatewayError on a malformed body.
  static CompletionResponse parse_response(const std::string& body);
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

// Retries, auth, in-flight bound and audit log around a backend.
// complete() may be called from several threads.
class Gateway {
 public:
  Gateway(GatewayConfig config, std::shared_ptr<Backend> backend, Sleeper sleeper = {});
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  // Throws AuthError (token missing or rejected; never retried),
  // RetryExhausted, TimeoutError (every attempt timed out) or GatewayError.
  CompletionResponse complete(CompletionRequest request);

  const GatewayConfig& config() const { return config_; }

 private:
  void audit(const nlohmann::json& record);
  void acquire();
  void release();

  GatewayConfig config_;
  std::shared_ptr<Backend> backend_;
  Sleeper sleeper_;
  std::mutex mutex_;  // guards in_flight_, next_id_ and the audit file
  std::condition_variable slots_;
  int in_flight_ = 0;
  std::uint64_t next_id_ = 0;
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> audit_file_;
};

// ------------------------------------------------------------------ mocks

// Responds with the request's user text.
class EchoBackend : public Backend {
 public:
  CompletionResponse send(const CompletionRequest& request, const GatewayConfig& config,
                          const std::string& token) override;
};

// Throws TransientError (or TimeoutError) for the first `failures` calls,
// then delegates.
class FlakyBackend : public Backend {
 public:
  FlakyBackend(int failures, std::shared_ptr<Backend> inner, bool timeouts = false)
      : failures_(failures), inner_(std::move(inner)), timeouts_(timeouts) {}
  CompletionResponse send(const CompletionRequest& request, const GatewayConfig& config,
                          const std::string& token) override;
  int calls() const;

 private:
  int failures_;
  std::shared_ptr<Backend> inner_;
  bool timeouts_;
  mutable std::mutex mutex_;
  int calls_ = 0;
};

inline constexpr const char* kTerminalMarker = "[END]";

// One entry per call: the candidate texts it returns.
// Line syntax: a JSON array of strings, or plain text as one candidate.
// Blank lines and lines starting with '#' are skipped.
struct Script {
  std::vector<std::vector<std::string>> calls;

  static Script parse(const std::string& text);  // ScriptFormatError
  static Script load(const std::string& path);   // IoError, ScriptFormatError
};

// Replays a script: call i returns the candidates of entry i joined by
// newlines; past the end it returns kTerminalMarker.
class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(Script script) : script_(std::move(script)) {}
  CompletionResponse send(const CompletionRequest& request, const GatewayConfig& config,
                          const std::string& token) override;

  struct Call {
    std::size_t index;
    std::string user;
    std::string response;
  };
  std::vector<Call> transcript() const;

 private:
  Script script_;
  mutable std::mutex mutex_;
  std::vector<Call> transcript_;
};

}  // namespace geogen
