#pragma once

// Shared helpers for the test suite: a deterministic stand-in for a live
// chat model, ready-wired dependency bundles for simulated and chat runs,
// and small file utilities.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "imcts/chat.hpp"
#include "imcts/experimenter.hpp"
#include "imcts/landscape.hpp"
#include "imcts/pipeline.hpp"
#include "imcts/rng.hpp"
#include "imcts/search.hpp"

namespace testsup {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline std::string golden_path(const std::string& name) {
  return std::string(IMCTS_TEST_DIR) + "/golden/" + name;
}

/** Fresh scratch directory under the system temp root. */
inline std::string scratch_dir(const std::string& tag) {
  static int counter = 0;
  auto dir = std::filesystem::temp_directory_path() /
             ("imcts_test_" + tag + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

// ----------------------------------------------------------------------------
// Deterministic model stand-in
// ----------------------------------------------------------------------------

/**
 * Computes a reply for any of the three request families (planning,
 * introspection, evaluation) from the request text alone, so runs that use
 * it are exactly reproducible.  Shared by the in-process oracle below and
 * the HTTP stub servers in the gateway tests.
 */
inline std::string fake_reply(const std::vector<imcts::ChatMessage>& messages) {
  const std::string& text = messages.back().content;

  if (text.find("Draft a concise execution plan") != std::string::npos) {
    nlohmann::json ins = nlohmann::json::object();
    ins["Exploratory Data Analysis"] = "Profile the dataset and chart the target balance.";
    ins["Data Preprocessing"] = "Impute gaps, encode categoricals, drop constant columns.";
    ins["Feature Engineering"] = "Add ratio and interaction features over the core numerics.";
    ins["Model Training"] = "Fit a tuned gradient boosting model with early stopping.";
    ins["Model Evaluation"] = "Score dev and test splits and archive the metric report.";
    nlohmann::json obj;
    obj["instructions"] = ins;
    return "```json\n" + obj.dump(4) + "\n```";
  }

  if (text.find("propose ONE new insight") != std::string::npos) {
    // The stage slot renders as a line holding exactly the stage name.
    std::optional<imcts::PipelineStage> stage;
    std::istringstream lines(text);
    std::string line;
    std::string prior_line;
    bool next_is_priors = false;
    while (std::getline(lines, line)) {
      if (next_is_priors) {
        prior_line = line;
        next_is_priors = false;
      }
      if (line.find("AVOID suggesting an insight") != std::string::npos) next_is_priors = true;
      for (imcts::PipelineStage s : imcts::kAllStages)
        if (line == imcts::stage_name(s)) stage = s;
    }
    if (!stage) throw std::runtime_error("fake_reply: no stage line in introspection request");
    std::size_t prior_count = 0;
    if (!prior_line.empty()) prior_count = nlohmann::json::parse(prior_line).size();

    nlohmann::json obj;
    obj["task_type"] = std::string(imcts::stage_name(*stage));
    obj["critic_feedback"] = "The current plan underuses this stage.";
    obj["insight"] = "Apply scripted adjustment " + std::to_string(prior_count + 1) + " to " +
                     std::string(imcts::stage_name(*stage)) + ".";
    return "```json\n" + obj.dump(4) + "\n```";
  }

  // Otherwise: the rubric evaluation request.  Scores derive from the
  // request text so distinct plans rate differently but reproducibly.
  std::uint64_t h = imcts::fnv1a64(text);
  nlohmann::json obj;
  obj["evaluation_feedback"] = "Scripted rubric assessment.";
  obj["total_score"] = static_cast<int>(35 + h % 61);
  return "```json\n" + obj.dump(4) + "\n```";
}

/** In-process oracle speaking `fake_reply`. */
class FakeCritic : public imcts::ChatOracle {
 protected:
  std::string chat_impl(const std::vector<imcts::ChatMessage>& messages,
                        const imcts::GenParams&) override {
    return fake_reply(messages);
  }
};

// ----------------------------------------------------------------------------
// Dependency bundles
// ----------------------------------------------------------------------------

inline imcts::TaskSpec sim_task(std::uint64_t seed) {
  imcts::TaskSpec task;
  task.problem = "Optimize a staged ML pipeline on a simulated landscape.";
  task.metadata = "synthetic";
  task.dataset_ref = "sim://" + std::to_string(seed);
  return task;
}

/** Owns every collaborator a simulated-mode run needs. */
struct SimRig {
  imcts::SimLandscape landscape;
  imcts::BaselinePlanner planner;
  imcts::SimulatedBackend backend;
  imcts::SimExpansion introspective;
  imcts::PoolExpansion pooled;
  imcts::SimValueModel value;
  imcts::SimRandomSource random_source;
  imcts::TaskSpec task;

  SimRig(std::uint64_t seed, const imcts::SearchParams& params,
         imcts::LandscapeShape shape = {})
      : landscape(seed, shape),
        backend(landscape, seed),
        introspective(landscape, seed),
        pooled(imcts::PoolExpansion::from_static_pool(imcts::StaticInsightPool(
            landscape, params.expansion_width * params.max_depth(), seed))),
        value(landscape, seed),
        random_source(landscape, seed),
        task(sim_task(seed)) {}

  imcts::SearchDeps deps(imcts::SearchPolicy policy) {
    imcts::SearchDeps d;
    d.planner = &planner;
    d.backend = &backend;
    d.expander = imcts::policy_uses_ine(policy)
                     ? static_cast<imcts::ExpansionPolicy*>(&introspective)
                     : static_cast<imcts::ExpansionPolicy*>(&pooled);
    d.value = imcts::policy_uses_hrm(policy) ? &value : nullptr;
    d.random_source = policy == imcts::SearchPolicy::random_search ? &random_source : nullptr;
    return d;
  }
};

/**
 * Independent bookkeeping replay: walks the recorded rollout order and
 * recomputes every reward from node-level facts (cached estimate, measured
 * dev score, pre-increment visit count), accumulating (n, W) along parent
 * chains without touching the engine's backpropagation.
 */
struct ReplayedStats {
  std::vector<int> visits;
  std::vector<double> value_sum;
  bool rewards_match = true;  // recomputed rewards equal the recorded ones
};

inline ReplayedStats replay_events(const imcts::Tree& tree, bool hybrid_reward,
                                   const std::vector<imcts::RolloutEvent>& events) {
  ReplayedStats st;
  st.visits.assign(tree.nodes.size(), 0);
  st.value_sum.assign(tree.nodes.size(), 0.0);
  for (const auto& e : events) {
    const imcts::Node& target = tree.at(e.target);
    double dev = target.outcome && target.outcome->ok() ? target.outcome->dev_score : 0.0;
    double reward = dev;
    if (hybrid_reward) {
      double alpha = tree.params.gamma / (st.visits[e.target] + tree.params.gamma);
      reward = alpha * target.llm_score.value_or(0.0) + (1.0 - alpha) * dev;
    }
    if (reward != e.reward) st.rewards_match = false;
    for (imcts::NodeId cur = e.target; cur != imcts::kNoNode; cur = tree.at(cur).parent) {
      st.visits[cur] += 1;
      st.value_sum[cur] += e.reward;
    }
  }
  return st;
}

/**
 * Chat-mode bundle around an arbitrary oracle (fake, recording, or replay),
 * with the simulated backend standing in for real experiment execution.
 */
struct ChatRig {
  imcts::SimLandscape landscape;
  imcts::SimulatedBackend backend;
  imcts::ChatPlanner planner;
  imcts::ChatExpansion expander;
  imcts::ChatValueModel value;
  imcts::TaskSpec task;

  ChatRig(imcts::ChatOracle& oracle, std::uint64_t seed, imcts::GenParams params = {})
      : landscape(seed),
        backend(landscape, seed),
        planner(oracle, params),
        expander(oracle, params),
        value(oracle, params, "Predict passenger survival from tabular features."),
        task(sim_task(seed)) {}

  imcts::SearchDeps deps() {
    imcts::SearchDeps d;
    d.planner = &planner;
    d.backend = &backend;
    d.expander = &expander;
    d.value = &value;
    return d;
  }
};

}  // namespace testsup
