#include <httplib.h>

#include "geogen/gateway.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

namespace geogen {

void GatewayConfig::validate() const {
  if (max_attempts < 1) throw Error(ErrorCode::InvalidArgument, "max_attempts must be >= 1");
  if (!(timeout_seconds > 0)) throw Error(ErrorCode::InvalidArgument, "timeout must be > 0");
  if (backoff_base_ms < 0) throw Error(ErrorCode::InvalidArgument, "backoff base must be >= 0");
  if (max_in_flight < 1) throw Error(ErrorCode::InvalidArgument, "max_in_flight must be >= 1");
}

// ------------------------------------------------------------------ http

nlohmann::json HttpBackend::request_body(const CompletionRequest& request, const GatewayConfig& config) {
  nlohmann::json messages = nlohmann::json::array();
  if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
  if (!request.exemplar_user.empty()) {
    messages.push_back({{"role", "user"}, {"content", request.exemplar_user}});
    messages.push_back({{"role", "assistant"}, {"content", request.exemplar_assistant}});
  }
  messages.push_back({{"role", "user"}, {"content", request.user}});
  return {{"model", config.model}, {"temperature", config.temperature}, {"messages", messages}};
}

CompletionResponse HttpBackend::parse_response(const std::string& body) {
  CompletionResponse out;
  try {
    auto j = nlohmann::json::parse(body);
    out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
    if (j.contains("usage")) {
      out.prompt_tokens = j["usage"].value("prompt_tokens", 0);
      out.completion_tokens = j["usage"].value("completion_tokens", 0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::GatewayError, std::string("malformed completion response: ") + e.what());
  }
  if (out.text.empty()) throw Error(ErrorCode::GatewayError, "empty completion text");
  return out;
}

namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Url split_url(const std::string& url) {
  auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorCode::InvalidArgument, "endpoint needs a scheme: " + url);
  auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

CompletionResponse HttpBackend::send(const CompletionRequest& request, const GatewayConfig& config,
                                     const std::string& token) {
  auto url = split_url(config.endpoint);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (url.origin.rfind("https://", 0) == 0) throw Error(ErrorCode::GatewayError, "built without TLS support");
#endif
  httplib::Client client(url.origin);
  auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(config.timeout_seconds));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
  auto res = client.Post(url.path, headers, request_body(request, config).dump(), "application/json");
  if (!res) {
    auto err = res.error();
    std::string what = "request failed: " + httplib::to_string(err);
    if (err == httplib::Error::ConnectionTimeout) throw Error(ErrorCode::TimeoutError, what);
    if (err == httplib::Error::Connection || err == httplib::Error::Read || err == httplib::Error::Write) {
      throw Error(ErrorCode::TransientError, what);
    }
    throw Error(ErrorCode::GatewayError, what);
  }
  std::string status = "HTTP " + std::to_string(res->status);
  if (res->status == 401 || res->status == 403) throw Error(ErrorCode::AuthError, status);
  if (res->status == 408) throw Error(ErrorCode::TimeoutError, status);
  if (res->status == 429 || res->status >= 500) throw Error(ErrorCode::TransientError, status);
  if (res->status < 200 || res->status >= 300) throw Error(ErrorCode::GatewayError, status + ": " + res->body);
  return parse_response(res->body);
}

// --------------------------------------------------------------- gateway

Gateway::Gateway(GatewayConfig config, std::shared_ptr<Backend> backend, Sleeper sleeper)
    : config_(std::move(config)), backend_(std::move(backend)), sleeper_(std::move(sleeper)),
      audit_file_(nullptr, &std::fclose) {
  config_.validate();
  if (!backend_) throw Error(ErrorCode::InvalidArgument, "gateway needs a backend");
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (!config_.audit_path.empty()) {
    audit_file_.reset(std::fopen(config_.audit_path.c_str(), "a"));
    if (!audit_file_) throw Error(ErrorCode::IoError, "cannot open audit log " + config_.audit_path);
  }
}

Gateway::~Gateway() = default;

void Gateway::acquire() {
  std::unique_lock lock(mutex_);
  slots_.wait(lock, [&] { return in_flight_ < config_.max_in_flight; });
  ++in_flight_;
}

void Gateway::release() {
  {
    std::lock_guard lock(mutex_);
    --in_flight_;
  }
  slots_.notify_one();
}

void Gateway::audit(const nlohmann::json& record) {
  std::lock_guard lock(mutex_);
  if (!audit_file_) return;
  std::string line = record.dump() + "\n";
  std::fwrite(line.data(), 1, line.size(), audit_file_.get());
  std::fflush(audit_file_.get());
}

CompletionResponse Gateway::complete(CompletionRequest request) {
  if (request.id.empty()) {
    std::lock_guard lock(mutex_);
    request.id = "req-" + std::to_string(next_id_++);
  }
  std::string token;
  if (!config_.token_env.empty()) {
    const char* value = std::getenv(config_.token_env.c_str());
    if (!value || !*value) {
      audit({{"id", request.id}, {"error", "AuthError"}, {"message", "missing " + config_.token_env}});
      throw Error(ErrorCode::AuthError, "environment variable " + config_.token_env + " is not set");
    }
    token = value;
  }
  nlohmann::json logged_request = HttpBackend::request_body(request, config_);
  bool all_timeouts = true;
  std::string last;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    if (attempt > 1) sleeper_(std::chrono::milliseconds(config_.backoff_base_ms * (1LL << (attempt - 2))));
    auto start = std::chrono::steady_clock::now();
    try {
      CompletionResponse response;
      {
        acquire();
        struct Slot {
          Gateway* g;
          ~Slot() { g->release(); }
        } slot{this};
        response = backend_->send(request, config_, token);
      }
      response.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      response.attempts = attempt;
      if (response.text.empty()) throw Error(ErrorCode::GatewayError, "empty completion text");
      audit({{"id", request.id},
             {"attempt", attempt},
             {"request", logged_request},
             {"response", response.text},
             {"usage", {{"prompt_tokens", response.prompt_tokens}, {"completion_tokens", response.completion_tokens}}}});
      return response;
    } catch (const Error& e) {
      audit({{"id", request.id}, {"attempt", attempt}, {"request", logged_request}, {"error", to_string(e.code())},
             {"message", e.what()}});
      if (e.code() != ErrorCode::TransientError && e.code() != ErrorCode::TimeoutError) throw;
      all_timeouts = all_timeouts && e.code() == ErrorCode::TimeoutError;
      last = e.what();
    }
  }
  if (all_timeouts) throw Error(ErrorCode::TimeoutError, request.id + ": " + last);
  throw Error(ErrorCode::RetryExhausted,
              request.id + " failed after " + std::to_string(config_.max_attempts) + " attempts: " + last);
}

// ------------------------------------------------------------------ mocks

CompletionResponse EchoBackend::send(const CompletionRequest& request, const GatewayConfig&, const std::string&) {
  CompletionResponse out;
  out.text = request.user;
  return out;
}

CompletionResponse FlakyBackend::send(const CompletionRequest& request, const GatewayConfig& config,
                                      const std::string& token) {
  {
    std::lock_guard lock(mutex_);
    if (calls_++ < failures_) {
      if (timeouts_) throw Error(ErrorCode::TimeoutError, "mock timeout");
      throw Error(ErrorCode::TransientError, "mock failure");
    }
  }
  return inner_->send(request, config, token);
}

int FlakyBackend::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

Script Script::parse(const std::string& text) {
  Script out;
  std::istringstream in(text);
  std::string line;
  for (int number = 1; std::getline(in, line); ++number) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    if (line[first] != '[') {
      out.calls.push_back({line});
      continue;
    }
    std::vector<std::string> candidates;
    try {
      auto j = nlohmann::json::parse(line);
      for (const auto& c : j) candidates.push_back(c.get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ScriptFormatError, "line " + std::to_string(number) + ": " + e.what());
    }
    out.calls.push_back(std::move(candidates));
  }
  return out;
}

Script Script::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read script " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse(buf.str());
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

CompletionResponse ScriptedBackend::send(const CompletionRequest& request, const GatewayConfig&, const std::string&) {
  std::lock_guard lock(mutex_);
  std::size_t index = transcript_.size();
  CompletionResponse out;
  if (index < script_.calls.size()) {
    for (const auto& c : script_.calls[index]) {
      if (!out.text.empty()) out.text += '\n';
      out.text += c;
    }
  }
  if (out.text.empty()) out.text = kTerminalMarker;
  transcript_.push_back({index, request.user, out.text});
  return out;
}

std::vector<ScriptedBackend::Call> ScriptedBackend::transcript() const {
  std::lock_guard lock(mutex_);
  return transcript_;
}

}  // namespace geogen
