#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

/**
 * Domain types for staged ML-pipeline search: the five pipeline stages, the
 * insight-per-stage configuration a tree node denotes, and the plan /
 * artifact / outcome records produced when a configuration is drafted and
 * executed.
 */

namespace imcts {

enum class PipelineStage : int {
  eda = 0,
  data_preprocessing = 1,
  feature_engineering = 2,
  model_training = 3,
  model_evaluation = 4,
};

inline constexpr int kStageCount = 5;

inline constexpr std::array<PipelineStage, kStageCount> kAllStages = {
    PipelineStage::eda,
    PipelineStage::data_preprocessing,
    PipelineStage::feature_engineering,
    PipelineStage::model_training,
    PipelineStage::model_evaluation,
};

/** Display name, as used in prompts and dumps. */
inline constexpr std::string_view stage_name(PipelineStage s) {
  switch (s) {
    case PipelineStage::eda: return "Exploratory Data Analysis";
    case PipelineStage::data_preprocessing: return "Data Preprocessing";
    case PipelineStage::feature_engineering: return "Feature Engineering";
    case PipelineStage::model_training: return "Model Training";
    case PipelineStage::model_evaluation: return "Model Evaluation";
  }
  return "?";
}

/** 1-based position in the pipeline, used for numbered plan lines. */
inline constexpr int stage_number(PipelineStage s) { return static_cast<int>(s) + 1; }

inline constexpr int stage_index(PipelineStage s) { return static_cast<int>(s); }

inline PipelineStage stage_from_index(int i) {
  if (i < 0 || i >= kStageCount) throw std::out_of_range("stage index out of range");
  return static_cast<PipelineStage>(i);
}

/**
 * Tolerant name lookup: case-insensitive, runs of whitespace/underscores
 * collapse to one space, and "EDA" is accepted as shorthand.  Returns
 * nullopt for anything else.
 */
inline std::optional<PipelineStage> parse_stage_name(std::string_view text) {
  std::string key;
  key.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == '_') {
      pending_space = !key.empty();
      continue;
    }
    if (pending_space) { key.push_back(' '); pending_space = false; }
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (key == "eda" || key == "exploratory data analysis") return PipelineStage::eda;
  if (key == "data preprocessing") return PipelineStage::data_preprocessing;
  if (key == "feature engineering") return PipelineStage::feature_engineering;
  if (key == "model training") return PipelineStage::model_training;
  if (key == "model evaluation") return PipelineStage::model_evaluation;
  return std::nullopt;
}

// ============================================================================
// Configurations and plans
// ============================================================================

/**
 * A pipeline configuration: at most one insight per stage.  A search-tree
 * node denotes the configuration collecting the insights along its
 * root-to-node path; the root is the empty configuration.
 */
struct PipelineConfig {
  std::array<std::optional<std::string>, kStageCount> insights{};

  bool operator==(const PipelineConfig&) const = default;

  bool empty() const {
    for (const auto& i : insights)
      if (i) return false;
    return true;
  }

  int insight_count() const {
    int n = 0;
    for (const auto& i : insights)
      if (i) ++n;
    return n;
  }
};

/** One natural-language instruction per stage. */
struct SolutionPlan {
  std::array<std::string, kStageCount> instructions{};

  bool operator==(const SolutionPlan&) const = default;
};

/** Renders a plan as numbered lines, one per stage ("1. ...\n2. ..."). */
inline std::string plan_text(const SolutionPlan& plan) {
  std::string out;
  for (PipelineStage s : kAllStages) {
    out += std::to_string(stage_number(s));
    out += ". ";
    out += plan.instructions[stage_index(s)];
    if (stage_number(s) != kStageCount) out += '\n';
  }
  return out;
}

/** The single numbered line a child node contributes to its plan. */
inline std::string plan_line(PipelineStage stage, std::string_view insight) {
  std::string out = std::to_string(stage_number(stage));
  out += ". ";
  out += insight;
  return out;
}

/** Per-stage generated code, concatenated in stage order for valuation. */
struct SolutionArtifact {
  std::array<std::string, kStageCount> stage_code{};

  bool operator==(const SolutionArtifact&) const = default;

  std::string concatenated() const {
    std::string out;
    for (const auto& code : stage_code) {
      if (code.empty()) continue;
      if (!out.empty()) out += "\n\n";
      out += code;
    }
    return out;
  }
};

// ============================================================================
// Experiment outcomes
// ============================================================================

enum class ExecStatus { ok, failed };

/**
 * Result of building and executing one configuration.  A failed execution
 * carries zero scores; callers treat `dev_score`/`test_score` as valid only
 * when `status == ok`.
 */
struct ExperimentOutcome {
  ExecStatus status = ExecStatus::ok;
  std::optional<double> train_score;
  double dev_score = 0.0;
  double test_score = 0.0;
  SolutionArtifact artifact{};

  bool ok() const { return status == ExecStatus::ok; }
};

}  // namespace imcts
