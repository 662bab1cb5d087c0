#pragma once

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "imcts/chat.hpp"

/**
 * Live chat oracle speaking the OpenAI-compatible chat-completions
 * protocol.  Transport failures and 5xx responses retry with exponential
 * backoff up to the per-call retry budget; 4xx responses fail immediately.
 * The API key is read from the environment only, never from config files
 * or flags.
 */

namespace imcts {

struct HttpOracleConfig {
  std::string endpoint;  // e.g. "http://127.0.0.1:8080/v1"
  std::string model;
  std::string api_key_env = "IMCTS_API_KEY";
  int connect_timeout_sec = 10;
  int read_timeout_sec = 300;
};

class HttpChatOracle : public ChatOracle {
 public:
  explicit HttpChatOracle(HttpOracleConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty())
      throw std::invalid_argument("http oracle: empty endpoint");
    split_endpoint(config_.endpoint, base_, path_prefix_);
    if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
  }

 protected:
  std::string chat_impl(const std::vector<ChatMessage>& messages,
                        const GenParams& params) override {
    nlohmann::json body;
    body["model"] = config_.model;
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    body["messages"] = msgs;
    body["temperature"] = params.temperature;
    body["max_tokens"] = params.max_tokens;
    std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= params.retry_budget; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(params.backoff.delay(attempt - 1));

      httplib::Client client(base_);
      client.set_connection_timeout(config_.connect_timeout_sec, 0);
      client.set_read_timeout(config_.read_timeout_sec, 0);
      httplib::Headers headers;
      if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

      auto res = client.Post(path_prefix_ + "/chat/completions", headers, payload,
                             "application/json");
      if (!res) {
        last_error = "transport failure: " + httplib::to_string(res.error());
        continue;  // retryable
      }
      if (res->status >= 500) {
        last_error = "server error " + std::to_string(res->status);
        continue;  // retryable
      }
      if (res->status >= 400)
        throw OracleError(OracleError::Kind::http_status,
                          "request rejected with status " + std::to_string(res->status) + ": " +
                              res->body,
                          res->status);
      return parse_reply(res->body);
    }
    throw OracleError(OracleError::Kind::transport,
                      "gave up after " + std::to_string(params.retry_budget + 1) +
                          " attempts; last error: " + last_error);
  }

 private:
  static std::string parse_reply(const std::string& body) {
    nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || j["choices"].empty() ||
        !j["choices"][0].contains("message"))
      throw OracleError(OracleError::Kind::protocol,
                        "malformed chat-completions response: " + body.substr(0, 200));
    return j["choices"][0]["message"].value("content", "");
  }

  /** "http://host:port/v1" -> base "http://host:port", prefix "/v1". */
  static void split_endpoint(const std::string& endpoint, std::string& base,
                             std::string& prefix) {
    std::size_t scheme = endpoint.find("://");
    std::size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
    std::size_t slash = endpoint.find('/', host_start);
    if (slash == std::string::npos) {
      base = endpoint;
      prefix.clear();
    } else {
      base = endpoint.substr(0, slash);
      prefix = endpoint.substr(slash);
      while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    }
  }

  HttpOracleConfig config_;
  std::string base_;
  std::string path_prefix_;
  std::string api_key_;
};

}  // namespace imcts
