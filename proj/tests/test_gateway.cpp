#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cstdlib>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "imcts/chat.hpp"
#include "imcts/http_oracle.hpp"
#include "support.hpp"

using namespace imcts;

namespace {

GenParams fast_params(int retries = 3) {
  GenParams p;
  p.retry_budget = retries;
  p.backoff.base = std::chrono::milliseconds(1);
  return p;
}

/** Local chat-completions stub with a pluggable handler. */
struct StubServer {
  httplib::Server server;
  int port = 0;
  std::thread runner;

  explicit StubServer(httplib::Server::Handler handler) {
    server.Post("/v1/chat/completions", std::move(handler));
    port = server.bind_to_any_port("127.0.0.1");
    runner = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~StubServer() {
    server.stop();
    runner.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1"; }
};

std::string completion_body(const std::string& content) {
  nlohmann::json j;
  j["choices"] = nlohmann::json::array(
      {{{"message", {{"role", "assistant"}, {"content", content}}}}});
  return j.dump();
}

}  // namespace

TEST_CASE("chat validates roles and accounts usage") {
  ScriptedOracle oracle({"pong"});
  CHECK_THROWS_AS(oracle.chat({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(oracle.chat({{"robot", "hi"}}, {}), std::invalid_argument);
  CHECK(oracle.usage().calls == 0);

  std::string reply = oracle.chat({{"system", "be terse"}, {"user", "ping"}}, {});
  CHECK(reply == "pong");
  CHECK(oracle.usage().calls == 1);
  CHECK(oracle.usage().request_chars == std::string("be terse").size() + 4);
  CHECK(oracle.usage().response_chars == 4);
}

TEST_CASE("scripted oracle replies in order and reports exhaustion") {
  ScriptedOracle oracle({"one", "two"});
  CHECK(oracle.chat({{"user", "a"}}, {}) == "one");
  CHECK(oracle.chat({{"user", "b"}}, {}) == "two");
  CHECK(oracle.remaining() == 0);
  try {
    oracle.chat({{"user", "c"}}, {});
    FAIL("expected OracleError");
  } catch (const OracleError& e) {
    CHECK(e.kind == OracleError::Kind::exhausted);
  }
  REQUIRE(oracle.requests().size() == 3);
  CHECK(oracle.requests()[1].back().content == "b");
}

TEST_CASE("recording then replaying reproduces a transcript") {
  std::ostringstream sink;
  ScriptedOracle inner({"r1", "r2", "r3"});
  RecordingOracle recorder(inner, sink);

  CHECK(recorder.chat({{"user", "same"}}, {}) == "r1");
  CHECK(recorder.chat({{"user", "same"}}, {}) == "r2");  // identical request, new reply
  CHECK(recorder.chat({{"user", "other"}}, {}) == "r3");

  ReplayOracle replay(sink.str());
  CHECK(replay.remaining() == 3);
  // out of recording order on purpose: matching is by content, FIFO within a key
  CHECK(replay.chat({{"user", "other"}}, {}) == "r3");
  CHECK(replay.chat({{"user", "same"}}, {}) == "r1");
  CHECK(replay.chat({{"user", "same"}}, {}) == "r2");
  CHECK(replay.remaining() == 0);

  try {
    replay.chat({{"user", "same"}}, {});
    FAIL("expected OracleError");
  } catch (const OracleError& e) {
    CHECK(e.kind == OracleError::Kind::replay_mismatch);
  }
  try {
    ReplayOracle(sink.str()).chat({{"user", "never recorded"}}, {});
    FAIL("expected OracleError");
  } catch (const OracleError& e) {
    CHECK(e.kind == OracleError::Kind::replay_mismatch);
  }
}

TEST_CASE("replay files round-trip through disk") {
  std::string dir = testsup::scratch_dir("replay");
  std::string path = dir + "/rec.jsonl";
  {
    ScriptedOracle inner({"alpha"});
    RecordingOracle recorder(inner, path);
    CHECK(recorder.chat({{"user", "q"}}, {}) == "alpha");
  }
  ReplayOracle replay = ReplayOracle::from_file(path);
  CHECK(replay.chat({{"user", "q"}}, {}) == "alpha");
}

TEST_CASE("extract_json_block prefers fences and balances strings") {
  CHECK(extract_json_block(R"({"a": 1})") == R"({"a": 1})");
  CHECK(extract_json_block("junk before {\"a\": 1} junk after") == R"({"a": 1})");
  CHECK(extract_json_block("```json\n{\"fenced\": true}\n```") == R"({"fenced": true})");
  // a fenced object wins over an earlier bare one
  CHECK(extract_json_block("start {\"bare\": 1} mid ```json\n{\"fenced\": 2}\n``` end") ==
        R"({"fenced": 2})");
  // fence with no object falls back to the bare scan
  CHECK(extract_json_block("```\nno object here\n```\ntail {\"x\": 3}") == R"({"x": 3})");
  // braces inside strings do not terminate the block
  CHECK(extract_json_block(R"({"a": "}", "b": "{"})") == R"({"a": "}", "b": "{"})");
  CHECK(extract_json_block(R"({"a": "\"}\""})") == R"({"a": "\"}\""})");
  CHECK(extract_json_block(R"({"outer": {"inner": 1}})") == R"({"outer": {"inner": 1}})");
  CHECK_THROWS_AS(extract_json_block("no braces at all"), JsonExtractError);
  CHECK_THROWS_AS(extract_json_block("unterminated { \"a\": 1"), JsonExtractError);
}

TEST_CASE("http oracle round-trips a successful call") {
  std::vector<std::string> bodies;
  std::vector<bool> had_auth;
  StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
    bodies.push_back(req.body);
    had_auth.push_back(req.has_header("Authorization"));
    res.set_content(completion_body("hello from stub"), "application/json");
  });

  unsetenv("IMCTS_API_KEY");
  HttpOracleConfig cfg;
  cfg.endpoint = stub.endpoint();
  cfg.model = "stub-model";
  HttpChatOracle oracle(cfg);

  GenParams params = fast_params();
  params.temperature = 0.25;
  params.max_tokens = 128;
  std::string reply = oracle.chat({{"system", "s"}, {"user", "u"}}, params);
  CHECK(reply == "hello from stub");

  REQUIRE(bodies.size() == 1);
  nlohmann::json sent = nlohmann::json::parse(bodies[0]);
  CHECK(sent["model"] == "stub-model");
  CHECK(sent["temperature"] == 0.25);
  CHECK(sent["max_tokens"] == 128);
  REQUIRE(sent["messages"].size() == 2);
  CHECK(sent["messages"][1]["content"] == "u");
  CHECK_FALSE(had_auth[0]);
}

TEST_CASE("http oracle sends the key from the configured env var only") {
  std::vector<std::string> auth;
  StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
    auth.push_back(req.get_header_value("Authorization"));
    res.set_content(completion_body("ok"), "application/json");
  });

  setenv("IMCTS_TEST_KEY", "sk-test-123", 1);
  HttpOracleConfig cfg;
  cfg.endpoint = stub.endpoint();
  cfg.model = "m";
  cfg.api_key_env = "IMCTS_TEST_KEY";
  HttpChatOracle oracle(cfg);
  CHECK(oracle.chat({{"user", "u"}}, fast_params()) == "ok");
  unsetenv("IMCTS_TEST_KEY");

  REQUIRE(auth.size() == 1);
  CHECK(auth[0] == "Bearer sk-test-123");
}

TEST_CASE("http oracle retries 5xx with backoff and then succeeds") {
  std::atomic<int> hits{0};
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    if (hits++ == 0) {
      res.status = 503;
      res.set_content("overloaded", "text/plain");
    } else {
      res.set_content(completion_body("recovered"), "application/json");
    }
  });

  HttpOracleConfig cfg;
  cfg.endpoint = stub.endpoint();
  cfg.model = "m";
  HttpChatOracle oracle(cfg);
  CHECK(oracle.chat({{"user", "u"}}, fast_params()) == "recovered");
  CHECK(hits == 2);
}

TEST_CASE("http oracle fails fast on 4xx") {
  std::atomic<int> hits{0};
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    hits++;
    res.status = 404;
    res.set_content("no such model", "text/plain");
  });

  HttpOracleConfig cfg;
  cfg.endpoint = stub.endpoint();
  cfg.model = "m";
  HttpChatOracle oracle(cfg);
  try {
    oracle.chat({{"user", "u"}}, fast_params());
    FAIL("expected OracleError");
  } catch (const OracleError& e) {
    CHECK(e.kind == OracleError::Kind::http_status);
    CHECK(e.status == 404);
  }
  CHECK(hits == 1);
}

TEST_CASE("http oracle gives up after the retry budget on transport failure") {
  // nothing listens on this socket; connections are refused instantly
  HttpOracleConfig cfg;
  cfg.endpoint = "http://127.0.0.1:9";
  cfg.model = "m";
  cfg.connect_timeout_sec = 1;
  HttpChatOracle oracle(cfg);
  try {
    oracle.chat({{"user", "u"}}, fast_params(1));
    FAIL("expected OracleError");
  } catch (const OracleError& e) {
    CHECK(e.kind == OracleError::Kind::transport);
    CHECK(std::string(e.what()).find("2 attempts") != std::string::npos);
  }
}

TEST_CASE("http oracle flags malformed completion payloads") {
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"unexpected": "shape"})", "application/json");
  });

  HttpOracleConfig cfg;
  cfg.endpoint = stub.endpoint();
  cfg.model = "m";
  HttpChatOracle oracle(cfg);
  try {
    oracle.chat({{"user", "u"}}, fast_params());
    FAIL("expected OracleError");
  } catch (const OracleError& e) {
    CHECK(e.kind == OracleError::Kind::protocol);
  }
}

TEST_CASE("http stub speaks the shared fake critic") {
  // End-to-end shape check: HTTP transport + fake critic = valid JSON replies.
  StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body = nlohmann::json::parse(req.body);
    std::vector<ChatMessage> messages;
    for (const auto& m : body["messages"])
      messages.push_back({m["role"].get<std::string>(), m["content"].get<std::string>()});
    res.set_content(completion_body(testsup::fake_reply(messages)), "application/json");
  });

  HttpOracleConfig cfg;
  cfg.endpoint = stub.endpoint();
  cfg.model = "m";
  HttpChatOracle oracle(cfg);
  std::string reply =
      oracle.chat({{"user", "Please Draft a concise execution plan now"}}, fast_params());
  CHECK(reply.find("instructions") != std::string::npos);
}
