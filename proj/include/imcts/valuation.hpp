#pragma once

#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>

#include <nlohmann/json.hpp>

#include "imcts/chat.hpp"
#include "imcts/prompts.hpp"
#include "imcts/text.hpp"

/**
 * Rubric-based plan valuation: a grader oracle scores a candidate plan on a
 * 100-point, seven-criterion rubric; the engine consumes the result as a
 * unit-interval value estimate.  One malformed reply earns a single
 * clarifying re-prompt before the error propagates.
 */

namespace imcts {

struct RubricEvaluation {
  std::string evaluation_feedback;
  int total_score = 0;  // 0..100
};

struct EvaluationParseError : std::runtime_error {
  enum class Kind { no_json, missing_field, non_integer_score, score_out_of_range };

  EvaluationParseError(Kind k, const std::string& what) : std::runtime_error(what), kind(k) {}

  Kind kind;
};

/** Builds the (system, user) message pair for one candidate plan. */
inline std::pair<ChatMessage, ChatMessage> render_evaluation_prompt(
    const std::string& user_requirement, const std::string& candidate_plan) {
  if (user_requirement.empty() || candidate_plan.empty())
    throw std::invalid_argument("render_evaluation_prompt: empty input");
  std::string user =
      render_template(prompts::kEvaluateNode,
                      {{"evaluation_Criteria", std::string(prompts::kEvaluationCriteria)},
                       {"user_requirement", user_requirement},
                       {"candidate_plan", candidate_plan}});
  return {ChatMessage{"system", std::string(prompts::kEvaluatorSystem)},
          ChatMessage{"user", std::move(user)}};
}

/**
 * Parses the grader's reply.  Accepts `total_score` or `Total_Score`; the
 * score must be a JSON integer in [0, 100].  Feedback is optional.
 */
inline RubricEvaluation parse_evaluation(const std::string& reply) {
  std::string block;
  try {
    block = extract_json_block(reply);
  } catch (const JsonExtractError& e) {
    throw EvaluationParseError(EvaluationParseError::Kind::no_json, e.what());
  }
  nlohmann::json obj = nlohmann::json::parse(block, nullptr, false);
  if (obj.is_discarded())
    throw EvaluationParseError(EvaluationParseError::Kind::no_json,
                               "reply block is not valid JSON");

  const char* key = obj.contains("total_score")    ? "total_score"
                    : obj.contains("Total_Score")  ? "Total_Score"
                                                   : nullptr;
  if (!key)
    throw EvaluationParseError(EvaluationParseError::Kind::missing_field,
                               "missing 'total_score'");
  if (!obj[key].is_number_integer())
    throw EvaluationParseError(EvaluationParseError::Kind::non_integer_score,
                               "'total_score' is not an integer");
  int score = obj[key].get<int>();
  if (score < 0 || score > 100)
    throw EvaluationParseError(EvaluationParseError::Kind::score_out_of_range,
                               "'total_score' outside [0, 100]: " + std::to_string(score));

  RubricEvaluation ev;
  ev.total_score = score;
  if (obj.contains("evaluation_feedback") && obj["evaluation_feedback"].is_string())
    ev.evaluation_feedback = obj["evaluation_feedback"].get<std::string>();
  return ev;
}

/** Rubric points to unit interval: 72 -> 0.72. */
inline double to_unit_score(const RubricEvaluation& ev) { return ev.total_score / 100.0; }

/**
 * One grading round trip.  A reply that fails to parse triggers exactly one
 * re-prompt with a terse format reminder appended; a second failure
 * propagates the parse error.
 */
inline double estimate_value(const std::string& candidate_plan,
                             const std::string& user_requirement, ChatOracle& oracle,
                             const GenParams& params) {
  auto [system_msg, user_msg] = render_evaluation_prompt(user_requirement, candidate_plan);
  std::string reply = oracle.chat({system_msg, user_msg}, params);
  try {
    return to_unit_score(parse_evaluation(reply));
  } catch (const EvaluationParseError&) {
    ChatMessage retry = user_msg;
    retry.content += "\nReturn only the JSON object.";
    reply = oracle.chat({system_msg, retry}, params);
    return to_unit_score(parse_evaluation(reply));
  }
}

/**
 * Caching wrapper keyed by caller-chosen id (the driver uses the node
 * ordinal): each key is graded at most once per run.
 */
class ValueEstimator {
 public:
  ValueEstimator(ChatOracle& oracle, GenParams params, std::string user_requirement)
      : oracle_(oracle), params_(std::move(params)), requirement_(std::move(user_requirement)) {}

  double estimate(const std::string& key, const std::string& candidate_plan) {
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    double v = estimate_value(candidate_plan, requirement_, oracle_, params_);
    cache_.emplace(key, v);
    return v;
  }

  std::size_t cache_size() const { return cache_.size(); }

 private:
  ChatOracle& oracle_;
  GenParams params_;
  std::string requirement_;
  std::unordered_map<std::string, double> cache_;
};

}  // namespace imcts
