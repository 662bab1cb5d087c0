#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "imcts/chat.hpp"
#include "imcts/pipeline.hpp"
#include "imcts/text.hpp"
#include "imcts/tree.hpp"

/**
 * Experiment execution: turns a pipeline configuration into a plan, drafts
 * stage code through a backend, runs it, and scores the result.  A
 * state-saving cache keyed by (stage, insight) prefixes makes repeated
 * prefixes free, which is what keeps a k-rollout run well under 5k backend
 * stage invocations.
 */

namespace imcts {

/** The task being optimized, as shown to planners, critics, and graders. */
struct TaskSpec {
  std::string problem;
  std::string metadata;
  std::string dataset_ref;
  std::string metric_name = "F1";
};

struct PlanParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BackendError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ============================================================================
// Planning
// ============================================================================

class Planner {
 public:
  virtual ~Planner() = default;

  /**
   * Five-stage plan for a configuration.  Stages carrying an insight embed
   * it verbatim as that stage's instruction.
   */
  virtual SolutionPlan make_plan(const TaskSpec& task, const PipelineConfig& config,
                                 RunCounters& counters) = 0;
};

inline SolutionPlan apply_insights(SolutionPlan plan, const PipelineConfig& config) {
  for (PipelineStage s : kAllStages)
    if (const auto& insight = config.insights[stage_index(s)])
      plan.instructions[stage_index(s)] = *insight;
  return plan;
}

/** Fixed instruction templates; the offline/simulated planning path. */
class BaselinePlanner : public Planner {
 public:
  SolutionPlan make_plan(const TaskSpec& task, const PipelineConfig& config,
                         RunCounters&) override {
    SolutionPlan plan;
    plan.instructions[0] =
        "Explore " + ref(task) + ": summarize feature types, distributions, and missing values.";
    plan.instructions[1] =
        "Clean the data: impute missing values, encode categoricals, and remove degenerate "
        "columns.";
    plan.instructions[2] =
        "Engineer features from the cleaned table, keeping the transform reproducible on the "
        "test split.";
    plan.instructions[3] =
        "Train a gradient-boosted baseline with a fixed seed and early stopping on the dev "
        "split.";
    plan.instructions[4] =
        "Evaluate with " + task.metric_name + " on dev and test splits and persist the scores.";
    return apply_insights(std::move(plan), config);
  }

 private:
  static std::string ref(const TaskSpec& task) {
    return task.dataset_ref.empty() ? "the dataset" : task.dataset_ref;
  }
};

/**
 * Oracle-backed planner.  The baseline five-stage plan is fetched once per run
 * and cached; per-node plans are insight overlays on that baseline, so
 * planning costs exactly one chat call no matter how many nodes exist.
 */
class ChatPlanner : public Planner {
 public:
  ChatPlanner(ChatOracle& oracle, GenParams params)
      : oracle_(oracle), params_(std::move(params)) {}

  SolutionPlan make_plan(const TaskSpec& task, const PipelineConfig& config,
                         RunCounters& counters) override {
    if (!baseline_) {
      baseline_ = fetch_baseline(task, counters);
    }
    return apply_insights(*baseline_, config);
  }

 private:
  SolutionPlan fetch_baseline(const TaskSpec& task, RunCounters& counters) {
    std::string prompt =
        "You are an experienced machine learning engineer. Draft a concise execution plan for "
        "the task below: exactly one instruction per pipeline stage.\n\n# Task\n" +
        task.problem + "\n\n# Dataset Notes\n" + task.metadata +
        "\n\nRespond as JSON:\n```json\n{\n    \"instructions\": {\n"
        "        \"Exploratory Data Analysis\": \"...\",\n"
        "        \"Data Preprocessing\": \"...\",\n"
        "        \"Feature Engineering\": \"...\",\n"
        "        \"Model Training\": \"...\",\n"
        "        \"Model Evaluation\": \"...\"\n    }\n}\n```\n";
    std::string reply = oracle_.chat({{"user", prompt}}, params_);
    counters.plan_calls += 1;

    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(extract_json_block(reply));
    } catch (const std::exception& e) {
      throw PlanParseError(std::string("plan reply: ") + e.what());
    }
    if (!obj.contains("instructions"))
      throw PlanParseError("plan reply: missing 'instructions'");

    SolutionPlan plan;
    std::array<bool, kStageCount> filled{};
    const auto& ins = obj["instructions"];
    if (ins.is_array()) {
      if (ins.size() != kStageCount)
        throw PlanParseError("plan reply: expected 5 instructions");
      for (int i = 0; i < kStageCount; ++i) {
        plan.instructions[i] = ins[i].get<std::string>();
        filled[i] = true;
      }
    } else if (ins.is_object()) {
      for (const auto& [key, value] : ins.items()) {
        auto stage = parse_stage_name(key);
        if (!stage) throw PlanParseError("plan reply: unknown stage '" + key + "'");
        plan.instructions[stage_index(*stage)] = value.get<std::string>();
        filled[stage_index(*stage)] = true;
      }
    } else {
      throw PlanParseError("plan reply: 'instructions' must be an object or array");
    }
    for (int i = 0; i < kStageCount; ++i)
      if (!filled[i] || plan.instructions[i].empty())
        throw PlanParseError("plan reply: no instruction for stage " + std::to_string(i + 1));
    return plan;
  }

  ChatOracle& oracle_;
  GenParams params_;
  std::optional<SolutionPlan> baseline_;
};

// ============================================================================
// State-saving cache
// ============================================================================

/** Canonical key of the (stage, insight) prefix through `upto`. */
inline std::string prefix_key(const PipelineConfig& config, PipelineStage upto) {
  nlohmann::json arr = nlohmann::json::array();
  for (int i = 0; i <= stage_index(upto); ++i) {
    const auto& insight = config.insights[i];
    arr.push_back({i, insight ? nlohmann::json(*insight) : nlohmann::json(nullptr)});
  }
  return arr.dump();
}

inline std::string config_key(const PipelineConfig& config) {
  return prefix_key(config, PipelineStage::model_evaluation);
}

/**
 * Two-level cache: per-stage code keyed by the ordered (stage, insight)
 * prefix leading to it, and full-config experiment outcomes.  Identical
 * prefixes reuse byte-identical stage code; an identical full configuration
 * never reaches the backend twice.
 */
class StageCache {
 public:
  const std::string* find_stage_code(const PipelineConfig& config, PipelineStage upto) const {
    auto it = stage_code_.find(prefix_key(config, upto));
    return it == stage_code_.end() ? nullptr : &it->second;
  }

  void store_stage_code(const PipelineConfig& config, PipelineStage upto, std::string code) {
    stage_code_[prefix_key(config, upto)] = std::move(code);
  }

  const ExperimentOutcome* find_outcome(const PipelineConfig& config) const {
    auto it = outcomes_.find(config_key(config));
    return it == outcomes_.end() ? nullptr : &it->second;
  }

  void store_outcome(const PipelineConfig& config, ExperimentOutcome outcome) {
    outcomes_[config_key(config)] = std::move(outcome);
  }

  std::size_t stage_entries() const { return stage_code_.size(); }
  std::size_t outcome_entries() const { return outcomes_.size(); }

 private:
  std::unordered_map<std::string, std::string> stage_code_;
  std::unordered_map<std::string, ExperimentOutcome> outcomes_;
};

struct PrefixSplit {
  std::vector<PipelineStage> reused;   // longest cached prefix, in stage order
  std::vector<PipelineStage> missing;  // stages the backend must still draft
};

/**
 * Splits the pipeline into the longest cached prefix and the remainder.
 * The prefix stops at the first miss: later stage code depends on every
 * stage before it, so an isolated hit past a miss is not reusable.
 */
inline PrefixSplit cache_prefix_lookup(const StageCache& cache, const PipelineConfig& config) {
  PrefixSplit split;
  bool broken = false;
  for (PipelineStage s : kAllStages) {
    if (!broken && cache.find_stage_code(config, s) != nullptr)
      split.reused.push_back(s);
    else {
      broken = true;
      split.missing.push_back(s);
    }
  }
  return split;
}

// ============================================================================
// Backends
// ============================================================================

struct BackendRequest {
  TaskSpec task;
  SolutionPlan plan;
  PipelineConfig config;
  std::array<std::optional<std::string>, kStageCount> reused_code{};
  int rollout_index = 0;
};

struct BackendResponse {
  SolutionArtifact artifact;  // full stage code, reused slots included
  int generated_stages = 0;
  std::optional<double> train_score;
  double dev_score = 0.0;
  double test_score = 0.0;
  ExecStatus status = ExecStatus::ok;
};

class ExperimentBackend {
 public:
  virtual ~ExperimentBackend() = default;
  virtual BackendResponse execute(const BackendRequest& request) = 0;
};

/**
 * Subprocess backend: `<command> <request.json> <response.json>` with an
 * optional `timeout(1)` guard.  The request carries the task, per-stage
 * instructions, and reusable stage code; the response returns per-stage
 * code, split scores, and an ok/failed status.  Transport problems (exit
 * code, unreadable reply) raise BackendError; a well-formed `"failed"`
 * response is a normal failed outcome.
 */
class CommandBackend : public ExperimentBackend {
 public:
  CommandBackend(std::string command, int timeout_sec = 0, std::string work_dir = ".")
      : command_(std::move(command)), timeout_sec_(timeout_sec), work_dir_(std::move(work_dir)) {
    if (command_.empty()) throw std::invalid_argument("CommandBackend: empty command");
  }

  BackendResponse execute(const BackendRequest& request) override {
    std::string req_path = work_dir_ + "/backend_request_" + std::to_string(counter_) + ".json";
    std::string resp_path = work_dir_ + "/backend_response_" + std::to_string(counter_) + ".json";
    ++counter_;

    nlohmann::json req;
    req["problem"] = request.task.problem;
    req["metadata"] = request.task.metadata;
    req["dataset_ref"] = request.task.dataset_ref;
    req["metric"] = request.task.metric_name;
    nlohmann::json instructions = nlohmann::json::object();
    nlohmann::json reused = nlohmann::json::object();
    for (PipelineStage s : kAllStages) {
      instructions[std::string(stage_name(s))] = request.plan.instructions[stage_index(s)];
      if (request.reused_code[stage_index(s)])
        reused[std::string(stage_name(s))] = *request.reused_code[stage_index(s)];
    }
    req["instructions"] = instructions;
    req["reused_stage_code"] = reused;
    {
      std::ofstream out(req_path);
      if (!out) throw BackendError("cannot write backend request: " + req_path);
      out << req.dump(2) << '\n';
    }

    std::string cmd = command_ + " " + req_path + " " + resp_path;
    if (timeout_sec_ > 0) cmd = "timeout " + std::to_string(timeout_sec_) + "s " + cmd;
    int rc = std::system(cmd.c_str());
    if (rc != 0) throw BackendError("backend command failed with status " + std::to_string(rc));

    std::ifstream in(resp_path);
    if (!in) throw BackendError("backend wrote no response: " + resp_path);
    nlohmann::json resp;
    try {
      in >> resp;
    } catch (const std::exception& e) {
      throw BackendError(std::string("unreadable backend response: ") + e.what());
    }
    std::remove(req_path.c_str());
    std::remove(resp_path.c_str());
    return parse_response(resp, request);
  }

 private:
  static BackendResponse parse_response(const nlohmann::json& resp,
                                        const BackendRequest& request) {
    BackendResponse out;
    std::string status = resp.value("status", "ok");
    out.status = status == "ok" ? ExecStatus::ok : ExecStatus::failed;
    if (resp.contains("stage_code")) {
      for (const auto& [key, value] : resp["stage_code"].items()) {
        auto stage = parse_stage_name(key);
        if (!stage) throw BackendError("backend response: unknown stage '" + key + "'");
        out.artifact.stage_code[stage_index(*stage)] = value.get<std::string>();
        out.generated_stages += 1;
      }
    }
    for (PipelineStage s : kAllStages) {
      auto& slot = out.artifact.stage_code[stage_index(s)];
      if (slot.empty() && request.reused_code[stage_index(s)])
        slot = *request.reused_code[stage_index(s)];
    }
    if (resp.contains("train_score")) out.train_score = resp["train_score"].get<double>();
    out.dev_score = resp.value("dev_score", 0.0);
    out.test_score = resp.value("test_score", 0.0);
    return out;
  }

  std::string command_;
  int timeout_sec_;
  std::string work_dir_;
  std::uint64_t counter_ = 0;
};

// ============================================================================
// Experimenter
// ============================================================================

/**
 * Plans, drafts, and executes configurations against a backend, reusing
 * cached stage code for shared prefixes and cached outcomes for repeated
 * configurations.  Every call counts as one simulation; backend stage
 * invocations grow only by the number of uncached stages.
 */
class Experimenter {
 public:
  Experimenter(TaskSpec task, Planner& planner, ExperimentBackend& backend)
      : task_(std::move(task)), planner_(planner), backend_(backend) {}

  ExperimentOutcome simulate(const PipelineConfig& config, int rollout_index,
                             RunCounters& counters) {
    counters.simulations += 1;
    if (const ExperimentOutcome* hit = cache_.find_outcome(config)) return *hit;

    SolutionPlan plan = planner_.make_plan(task_, config, counters);
    PrefixSplit split = cache_prefix_lookup(cache_, config);

    BackendRequest request;
    request.task = task_;
    request.plan = plan;
    request.config = config;
    request.rollout_index = rollout_index;
    for (PipelineStage s : split.reused)
      request.reused_code[stage_index(s)] = *cache_.find_stage_code(config, s);

    BackendResponse response = backend_.execute(request);
    counters.backend_stage_invocations += split.missing.size();

    ExperimentOutcome outcome;
    outcome.status = response.status;
    outcome.artifact = response.artifact;
    if (outcome.ok()) {
      outcome.train_score = response.train_score;
      outcome.dev_score = response.dev_score;
      outcome.test_score = response.test_score;
      // successful stage code joins the prefix cache
      for (PipelineStage s : kAllStages)
        cache_.store_stage_code(config, s, outcome.artifact.stage_code[stage_index(s)]);
    }
    cache_.store_outcome(config, outcome);
    return outcome;
  }

  const TaskSpec& task() const { return task_; }
  Planner& planner() { return planner_; }
  StageCache& cache() { return cache_; }
  const StageCache& cache() const { return cache_; }

  /** Rebuilds cache entries from a resumed tree's persisted outcomes. */
  void absorb(const Tree& tree) {
    for (const Node& n : tree.nodes) {
      if (!n.outcome) continue;
      PipelineConfig cfg = config_for_node(tree, n.id);
      if (n.status == NodeStatus::simulated)
        for (PipelineStage s : kAllStages)
          cache_.store_stage_code(cfg, s, n.outcome->artifact.stage_code[stage_index(s)]);
      cache_.store_outcome(cfg, *n.outcome);
    }
  }

 private:
  TaskSpec task_;
  Planner& planner_;
  ExperimentBackend& backend_;
  StageCache cache_;
};

}  // namespace imcts
