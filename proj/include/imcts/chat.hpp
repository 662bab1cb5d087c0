#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

/**
 * Chat-oracle gateway: the one interface every LLM-shaped dependency goes
 * through, plus scripted / recording / replay implementations for tests and
 * offline runs.  The live HTTP client lives in http_oracle.hpp so this
 * header stays lightweight.
 */

namespace imcts {

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct BackoffSchedule {
  std::chrono::milliseconds base{1000};
  double factor = 2.0;
  bool jitter = false;

  std::chrono::milliseconds delay(int attempt) const {
    double ms = static_cast<double>(base.count());
    for (int i = 0; i < attempt; ++i) ms *= factor;
    return std::chrono::milliseconds(static_cast<std::int64_t>(ms));
  }
};

struct GenParams {
  double temperature = 0.5;
  int max_tokens = 2048;
  int retry_budget = 3;  // retries after the first attempt, transient failures only
  BackoffSchedule backoff{};
};

struct OracleUsage {
  std::uint64_t calls = 0;
  std::uint64_t request_chars = 0;
  std::uint64_t response_chars = 0;
};

struct OracleError : std::runtime_error {
  enum class Kind { exhausted, transport, http_status, protocol, replay_mismatch };

  OracleError(Kind k, const std::string& what, int http_status_code = 0)
      : std::runtime_error(what), kind(k), status(http_status_code) {}

  Kind kind;
  int status;
};

/**
 * Base oracle.  `chat` validates the request, delegates to the
 * implementation, and keeps character-level usage accounting; subclasses
 * override `chat_impl` only.
 */
class ChatOracle {
 public:
  virtual ~ChatOracle() = default;

  std::string chat(const std::vector<ChatMessage>& messages, const GenParams& params) {
    if (messages.empty()) throw std::invalid_argument("chat: empty message list");
    for (const auto& m : messages) {
      if (m.role != "system" && m.role != "user" && m.role != "assistant")
        throw std::invalid_argument("chat: unknown role '" + m.role + "'");
    }
    std::string reply = chat_impl(messages, params);
    usage_.calls += 1;
    for (const auto& m : messages) usage_.request_chars += m.content.size();
    usage_.response_chars += reply.size();
    return reply;
  }

  const OracleUsage& usage() const { return usage_; }

 protected:
  virtual std::string chat_impl(const std::vector<ChatMessage>& messages,
                                const GenParams& params) = 0;

 private:
  OracleUsage usage_;
};

/** Canonical JSON form of a message list; the replay-matching key. */
inline std::string messages_key(const std::vector<ChatMessage>& messages) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : messages) arr.push_back({{"role", m.role}, {"content", m.content}});
  return arr.dump();
}

// ============================================================================
// Scripted / recording / replay oracles
// ============================================================================

/** Returns canned replies in order; throws `exhausted` when they run out. */
class ScriptedOracle : public ChatOracle {
 public:
  ScriptedOracle() = default;
  explicit ScriptedOracle(std::vector<std::string> replies)
      : replies_(replies.begin(), replies.end()) {}

  void push_reply(std::string reply) { replies_.push_back(std::move(reply)); }
  std::size_t remaining() const { return replies_.size(); }

  /** Requests seen so far, for transcript assertions. */
  const std::vector<std::vector<ChatMessage>>& requests() const { return requests_; }

 protected:
  std::string chat_impl(const std::vector<ChatMessage>& messages, const GenParams&) override {
    requests_.push_back(messages);
    if (replies_.empty())
      throw OracleError(OracleError::Kind::exhausted, "scripted oracle out of replies");
    std::string reply = std::move(replies_.front());
    replies_.pop_front();
    return reply;
  }

 private:
  std::deque<std::string> replies_;
  std::vector<std::vector<ChatMessage>> requests_;
};

/**
 * Wraps another oracle and appends each exchange to a JSONL sink, one
 * `{"messages": [...], "reply": "..."}` object per line, flushed per call so
 * an interrupted run leaves a usable transcript.
 */
class RecordingOracle : public ChatOracle {
 public:
  RecordingOracle(ChatOracle& inner, const std::string& path)
      : inner_(inner), file_(path, std::ios::app) {
    if (!file_) throw std::runtime_error("cannot open recording file: " + path);
    sink_ = &file_;
  }

  RecordingOracle(ChatOracle& inner, std::ostream& sink) : inner_(inner), sink_(&sink) {}

 protected:
  std::string chat_impl(const std::vector<ChatMessage>& messages,
                        const GenParams& params) override {
    std::string reply = inner_.chat(messages, params);
    nlohmann::json line;
    line["messages"] = nlohmann::json::parse(messages_key(messages));
    line["reply"] = reply;
    (*sink_) << line.dump() << '\n';
    sink_->flush();
    return reply;
  }

 private:
  ChatOracle& inner_;
  std::ofstream file_;
  std::ostream* sink_ = nullptr;
};

/**
 * Replays a JSONL transcript.  Calls are matched by exact message content
 * (FIFO among identical requests), not by global position, so replaying the
 * tail of a transcript after a resume works; an unmatched request is a
 * `replay_mismatch` error.
 */
class ReplayOracle : public ChatOracle {
 public:
  static ReplayOracle from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open recording file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return ReplayOracle(buf.str());
  }

  explicit ReplayOracle(const std::string& jsonl) {
    std::istringstream in(jsonl);
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      nlohmann::json rec = nlohmann::json::parse(line);
      replies_[rec.at("messages").dump()].push_back(rec.at("reply").get<std::string>());
    }
  }

  std::size_t remaining() const {
    std::size_t n = 0;
    for (const auto& [_, q] : replies_) n += q.size();
    return n;
  }

 protected:
  std::string chat_impl(const std::vector<ChatMessage>& messages, const GenParams&) override {
    auto it = replies_.find(messages_key(messages));
    if (it == replies_.end() || it->second.empty()) {
      std::string head = messages.back().content.substr(0, 120);
      throw OracleError(OracleError::Kind::replay_mismatch,
                        "replay: no recorded reply for request starting '" + head + "'");
    }
    std::string reply = std::move(it->second.front());
    it->second.pop_front();
    return reply;
  }

 private:
  std::unordered_map<std::string, std::deque<std::string>> replies_;
};

// ============================================================================
// JSON extraction from model replies
// ============================================================================

struct JsonExtractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

/** First balanced, string-aware `{...}` block at or after `from`; npos pair if none. */
inline std::pair<std::size_t, std::size_t> balanced_object(std::string_view text,
                                                           std::size_t from) {
  for (std::size_t start = text.find('{', from); start != std::string_view::npos;
       start = text.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      char c = text[i];
      if (in_string) {
        if (escaped) escaped = false;
        else if (c == '\\') escaped = true;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}') {
        if (--depth == 0) return {start, i + 1};
      }
    }
  }
  return {std::string_view::npos, std::string_view::npos};
}

}  // namespace detail

/**
 * Pulls the first JSON object out of a model reply.  Fenced blocks
 * (```json ... ``` or bare ```) are searched first; if none of them contains
 * an object the whole text is scanned for the first balanced `{...}`.
 */
inline std::string extract_json_block(std::string_view text) {
  std::size_t fence = text.find("```");
  while (fence != std::string_view::npos) {
    std::size_t body = text.find('\n', fence + 3);
    if (body == std::string_view::npos) break;
    std::size_t close = text.find("```", body);
    std::string_view inner =
        close == std::string_view::npos ? text.substr(body) : text.substr(body, close - body);
    auto [s, e] = detail::balanced_object(inner, 0);
    if (s != std::string_view::npos) return std::string(inner.substr(s, e - s));
    if (close == std::string_view::npos) break;
    fence = text.find("```", close + 3);
  }
  auto [s, e] = detail::balanced_object(text, 0);
  if (s == std::string_view::npos)
    throw JsonExtractError("no JSON object found in oracle reply");
  return std::string(text.substr(s, e - s));
}

}  // namespace imcts
