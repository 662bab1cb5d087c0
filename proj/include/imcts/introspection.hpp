#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "imcts/chat.hpp"
#include "imcts/pipeline.hpp"
#include "imcts/prompts.hpp"
#include "imcts/text.hpp"

/**
 * Introspective node expansion: a critic oracle reads the parent's plan,
 * code, and dev score and proposes one new stage-specific insight per call.
 * Proposals are deduplicated against the growing sibling set; exhausted
 * retries degrade to a deterministic placeholder instead of aborting the
 * search.
 */

namespace imcts {

struct InsightProposal {
  PipelineStage task_type{};
  std::string critic_feedback;
  std::string insight;
  bool fallback = false;  // placeholder emitted after the retry budget ran out
};

/** Everything the critic prompt needs about the expansion point. */
struct IntrospectionContext {
  std::string current_plan;
  std::string solution_code;
  std::string current_metrics;
  double dev_score = 0.0;
  PipelineStage stage{};
  std::vector<std::string> prior_insights;  // existing siblings, oldest first
};

struct InsightParseError : std::runtime_error {
  enum class Kind { no_json, missing_field, unknown_task_type };

  InsightParseError(Kind k, const std::string& what) : std::runtime_error(what), kind(k) {}

  Kind kind;
};

/** Compact JSON array of the sibling insights; `[]` when there are none. */
inline std::string render_expansion_list(const std::vector<std::string>& prior) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : prior) arr.push_back(s);
  return arr.dump();
}

inline std::string render_introspection_prompt(const IntrospectionContext& ctx) {
  if (ctx.current_plan.empty() || ctx.solution_code.empty() || ctx.current_metrics.empty())
    throw std::invalid_argument("render_introspection_prompt: empty context field");
  return render_template(prompts::kIntrospection,
                         {{"current_plan", ctx.current_plan},
                          {"solution_code", ctx.solution_code},
                          {"current_metrics", ctx.current_metrics},
                          {"dev_score", format_double(ctx.dev_score)},
                          {"task_type", std::string(stage_name(ctx.stage))},
                          {"cur_expansion_list", render_expansion_list(ctx.prior_insights)}});
}

/**
 * Parses the critic's reply into a proposal.  Requires a JSON object with a
 * recognizable `task_type` and a non-empty `insight`; `critic_feedback` is
 * kept when present.
 */
inline InsightProposal parse_insight(const std::string& reply) {
  std::string block;
  try {
    block = extract_json_block(reply);
  } catch (const JsonExtractError& e) {
    throw InsightParseError(InsightParseError::Kind::no_json, e.what());
  }
  nlohmann::json obj = nlohmann::json::parse(block, nullptr, false);
  if (obj.is_discarded())
    throw InsightParseError(InsightParseError::Kind::no_json, "reply block is not valid JSON");

  if (!obj.contains("task_type") || !obj["task_type"].is_string())
    throw InsightParseError(InsightParseError::Kind::missing_field, "missing 'task_type'");
  if (!obj.contains("insight") || !obj["insight"].is_string() ||
      obj["insight"].get<std::string>().empty())
    throw InsightParseError(InsightParseError::Kind::missing_field, "missing 'insight'");

  auto stage = parse_stage_name(obj["task_type"].get<std::string>());
  if (!stage)
    throw InsightParseError(InsightParseError::Kind::unknown_task_type,
                            "unknown task_type '" + obj["task_type"].get<std::string>() + "'");

  InsightProposal p;
  p.task_type = *stage;
  p.insight = obj["insight"].get<std::string>();
  if (obj.contains("critic_feedback") && obj["critic_feedback"].is_string())
    p.critic_feedback = obj["critic_feedback"].get<std::string>();
  return p;
}

/** Placeholder proposal used when the retry budget is exhausted. */
inline InsightProposal fallback_insight(PipelineStage stage, int collision_rank) {
  InsightProposal p;
  p.task_type = stage;
  p.insight = "retry-exhausted placeholder for stage " + std::string(stage_name(stage));
  if (collision_rank > 1) p.insight += " #" + std::to_string(collision_rank);
  p.fallback = true;
  return p;
}

/**
 * Asks the critic for `width` distinct insights, one call per proposal.
 * A reply that fails to parse, targets the wrong stage, or duplicates an
 * earlier sibling (case/whitespace-insensitive) consumes one retry; after
 * `retries` consecutive rejections the slot is filled with a fallback
 * placeholder.  Accepted insights are appended to `ctx.prior_insights`, so
 * later prompts in the same expansion see them.
 */
inline std::vector<InsightProposal> expand_introspectively(IntrospectionContext& ctx, int width,
                                                           ChatOracle& oracle,
                                                           const GenParams& params,
                                                           int retries = 3) {
  if (width <= 0) throw std::invalid_argument("expand_introspectively: width must be positive");

  std::vector<InsightProposal> accepted;
  std::vector<std::string> seen;
  for (const auto& s : ctx.prior_insights) seen.push_back(normalize_text(s));

  auto is_duplicate = [&](const std::string& insight) {
    std::string key = normalize_text(insight);
    for (const auto& s : seen)
      if (s == key) return true;
    return false;
  };

  int fallbacks = 0;
  for (int slot = 0; slot < width; ++slot) {
    InsightProposal chosen;
    bool have = false;
    for (int attempt = 0; attempt < retries; ++attempt) {
      std::string prompt = render_introspection_prompt(ctx);
      std::string reply = oracle.chat({{"user", prompt}}, params);
      try {
        InsightProposal p = parse_insight(reply);
        if (p.task_type != ctx.stage) continue;  // wrong stage costs a retry
        if (is_duplicate(p.insight)) continue;
        chosen = std::move(p);
        have = true;
        break;
      } catch (const InsightParseError&) {
        continue;  // malformed reply costs a retry
      }
    }
    if (!have) {
      chosen = fallback_insight(ctx.stage, ++fallbacks);
      while (is_duplicate(chosen.insight))
        chosen = fallback_insight(ctx.stage, ++fallbacks);
    }
    seen.push_back(normalize_text(chosen.insight));
    ctx.prior_insights.push_back(chosen.insight);
    accepted.push_back(std::move(chosen));
  }
  return accepted;
}

}  // namespace imcts
