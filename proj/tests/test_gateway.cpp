#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "geogen/gateway.hpp"

using namespace geogen;

namespace {

GatewayConfig offline_config() {
  GatewayConfig c;
  c.token_env.clear();
  c.max_attempts = 3;
  c.backoff_base_ms = 100;
  return c;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidArgument;
}

CompletionRequest ask(const std::string& user) {
  CompletionRequest r;
  r.system = "system";
  r.user = user;
  return r;
}

// Records the peak number of concurrent send() calls.
class SlowBackend : public Backend {
 public:
  CompletionResponse send(const CompletionRequest& r, const GatewayConfig&, const std::string&) override {
    int now = ++active;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --active;
    CompletionResponse out;
    out.text = r.user;
    return out;
  }
  std::atomic<int> active{0};
  std::atomic<int> peak{0};
};

}  // namespace

TEST_CASE("echo backend") {
  Gateway g(offline_config(), std::make_shared<EchoBackend>());
  auto r = g.complete(ask("hello"));
  CHECK(r.text == "hello");
  CHECK(r.attempts == 1);
}

TEST_CASE("retry policy") {
  std::vector<long long> waits;
  Sleeper record = [&](std::chrono::milliseconds d) { waits.push_back(d.count()); };

  SUBCASE("two failures then success") {
    auto flaky = std::make_shared<FlakyBackend>(2, std::make_shared<EchoBackend>());
    Gateway g(offline_config(), flaky, record);
    auto r = g.complete(ask("x"));
    CHECK(r.text == "x");
    CHECK(r.attempts == 3);
    CHECK(flaky->calls() == 3);
    CHECK(waits == std::vector<long long>{100, 200});
  }
  SUBCASE("exhausted") {
    auto flaky = std::make_shared<FlakyBackend>(3, std::make_shared<EchoBackend>());
    Gateway g(offline_config(), flaky, record);
    CHECK(code_of([&] { g.complete(ask("x")); }) == ErrorCode::RetryExhausted);
    CHECK(flaky->calls() == 3);
  }
  SUBCASE("every attempt timed out") {
    auto flaky = std::make_shared<FlakyBackend>(5, std::make_shared<EchoBackend>(), true);
    Gateway g(offline_config(), flaky, record);
    CHECK(code_of([&] { g.complete(ask("x")); }) == ErrorCode::TimeoutError);
  }
}

TEST_CASE("missing token fails before any call") {
  auto counting = std::make_shared<FlakyBackend>(0, std::make_shared<EchoBackend>());
  auto cfg = offline_config();
  cfg.token_env = "GEOGEN_TEST_TOKEN_THAT_IS_NOT_SET";
  ::unsetenv(cfg.token_env.c_str());
  Gateway g(cfg, counting);
  CHECK(code_of([&] { g.complete(ask("x")); }) == ErrorCode::AuthError);
  CHECK(counting->calls() == 0);
}

TEST_CASE("config validation") {
  auto cfg = offline_config();
  cfg.max_attempts = 0;
  CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::InvalidArgument);
  cfg = offline_config();
  cfg.timeout_seconds = 0;
  CHECK(code_of([&] { Gateway g(cfg, std::make_shared<EchoBackend>()); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("scripted replay") {
  SUBCASE("three lines") {
    auto backend = std::make_shared<ScriptedBackend>(Script::parse("one\n[\"two a\", \"two b\"]\n# note\n\nthree\n"));
    Gateway g(offline_config(), backend);
    CHECK(g.complete(ask("q")).text == "one");
    CHECK(g.complete(ask("q")).text == "two a\ntwo b");
    CHECK(g.complete(ask("q")).text == "three");
    CHECK(g.complete(ask("q")).text == kTerminalMarker);
    CHECK(g.complete(ask("q")).text == kTerminalMarker);
  }
  SUBCASE("empty script") {
    auto backend = std::make_shared<ScriptedBackend>(Script::parse(""));
    Gateway g(offline_config(), backend);
    CHECK(g.complete(ask("q")).text == kTerminalMarker);
  }
  SUBCASE("identical transcripts") {
    std::string text = "a\nb\n[\"c\"]\n";
    std::vector<std::vector<ScriptedBackend::Call>> runs;
    for (int run = 0; run < 2; ++run) {
      auto backend = std::make_shared<ScriptedBackend>(Script::parse(text));
      Gateway g(offline_config(), backend);
      for (int i = 0; i < 5; ++i) g.complete(ask("q" + std::to_string(i)));
      runs.push_back(backend->transcript());
    }
    REQUIRE(runs[0].size() == runs[1].size());
    for (std::size_t i = 0; i < runs[0].size(); ++i) {
      CHECK(runs[0][i].index == runs[1][i].index);
      CHECK(runs[0][i].user == runs[1][i].user);
      CHECK(runs[0][i].response == runs[1][i].response);
    }
  }
  SUBCASE("format errors") {
    CHECK(code_of([] { Script::parse("ok\n[\"unterminated\n"); }) == ErrorCode::ScriptFormatError);
    CHECK(code_of([] { Script::parse("[1, 2]\n"); }) == ErrorCode::ScriptFormatError);
    CHECK(code_of([] { Script::load("/nonexistent/script.txt"); }) == ErrorCode::IoError);
  }
}

TEST_CASE("bounded in-flight requests") {
  auto cfg = offline_config();
  cfg.max_in_flight = 2;
  auto backend = std::make_shared<SlowBackend>();
  Gateway g(cfg, backend);
  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] {
      if (g.complete(ask(std::to_string(i))).text == std::to_string(i)) ++ok;
    });
  }
  for (auto& t : threads) t.join();
  CHECK(ok == 8);
  CHECK(backend->peak <= 2);
}

TEST_CASE("audit log records every attempt") {
  std::string path = "gateway_audit_test.jsonl";
  std::remove(path.c_str());
  {
    auto cfg = offline_config();
    cfg.audit_path = path;
    Gateway g(cfg, std::make_shared<FlakyBackend>(1, std::make_shared<EchoBackend>()), [](auto) {});
    g.complete(ask("first"));
    g.complete(ask("second"));
  }
  std::ifstream in(path);
  std::vector<nlohmann::json> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(nlohmann::json::parse(line));
  REQUIRE(lines.size() == 3);
  CHECK(lines[0]["error"] == "TransientError");
  CHECK(lines[1]["response"] == "first");
  CHECK(lines[1]["attempt"] == 2);
  CHECK(lines[2]["response"] == "second");
  CHECK(lines[2]["request"]["messages"].back()["content"] == "second");
  std::remove(path.c_str());
}

TEST_CASE("http backend against a loopback server") {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::string seen_auth;
  nlohmann::json seen_body;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    seen_auth = req.get_header_value("Authorization");
    seen_body = nlohmann::json::parse(req.body);
    nlohmann::json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", "polished"}}}}}},
                            {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 2}}}};
    res.set_content(reply.dump(), "application/json");
  });
  server.Post("/unauthorized", [](const httplib::Request&, httplib::Response& res) { res.status = 401; });
  server.Post("/busy", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 503;
  });
  int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("GEOGEN_TEST_TOKEN", "secret", 1);
  auto cfg = offline_config();
  cfg.token_env = "GEOGEN_TEST_TOKEN";
  cfg.timeout_seconds = 5;
  cfg.model = "mock-model";
  std::string base = "http://127.0.0.1:" + std::to_string(port);

  cfg.endpoint = base + "/v1/chat/completions";
  {
    Gateway g(cfg, std::make_shared<HttpBackend>());
    CompletionRequest r = ask("rewrite this");
    r.exemplar_user = "example in";
    r.exemplar_assistant = "example out";
    auto resp = g.complete(r);
    CHECK(resp.text == "polished");
    CHECK(resp.prompt_tokens == 11);
    CHECK(seen_auth == "Bearer secret");
    CHECK(seen_body["model"] == "mock-model");
    REQUIRE(seen_body["messages"].size() == 4);
    CHECK(seen_body["messages"][1]["content"] == "example in");
    CHECK(seen_body["messages"][3]["content"] == "rewrite this");
  }
  cfg.endpoint = base + "/unauthorized";
  {
    Gateway g(cfg, std::make_shared<HttpBackend>(), [](auto) {});
    CHECK(code_of([&] { g.complete(ask("x")); }) == ErrorCode::AuthError);
  }
  cfg.endpoint = base + "/busy";
  hits = 0;
  {
    Gateway g(cfg, std::make_shared<HttpBackend>(), [](auto) {});
    CHECK(code_of([&] { g.complete(ask("x")); }) == ErrorCode::RetryExhausted);
    CHECK(hits == 3);
  }
  server.stop();
  worker.join();
  CHECK(code_of([] { HttpBackend::parse_response("{\"choices\": []}"); }) == ErrorCode::GatewayError);
}
