#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "imcts/text.hpp"
#include "imcts/tree.hpp"

/**
 * Human-readable tree dumps and versioned JSON persistence.
 *
 * The text dump is a stable, diffable rendering: one indented block per
 * node in depth-first order, then a footer naming the value-best and
 * dev-best nodes.  Golden tests pin it byte for byte, so treat every
 * space here as load-bearing.
 */

namespace imcts {

struct StateError : std::runtime_error {
  enum class Kind { version_mismatch, corrupt };

  StateError(Kind k, const std::string& what) : std::runtime_error(what), kind(k) {}

  Kind kind;
};

namespace detail {

/** Python-flavored score dict, mirroring the run-log layout. */
inline std::string score_dict(const Node& n) {
  if (!n.outcome) return "{}";
  const ExperimentOutcome& o = *n.outcome;
  if (!o.ok()) return "{'train_score': 0, 'dev_score': 0, 'test_score': 0, 'score': 0}";
  std::string out = "{";
  if (o.train_score) {
    out += "'train_score': " + format_double(*o.train_score);
    out += ", 'dev_score': " + format_double(o.dev_score);
    out += ", 'test_score': " + format_double(o.test_score);
  } else {
    out += "'test_score': " + format_double(o.test_score);
    out += ", 'dev_score': " + format_double(o.dev_score);
  }
  out += ", 'score': " + format_double(o.dev_score) + "}";
  return out;
}

inline void dump_node(const Tree& tree, NodeId id, std::string& out) {
  const Node& n = tree.at(id);
  std::string ind(static_cast<std::size_t>(n.depth), '\t');

  out += ind + "Node id: " + node_label(tree, id) + "\n";
  out += ind + "Plans: \n";
  std::istringstream plan(n.plan_lines);
  std::string line;
  while (std::getline(plan, line)) out += ind + line + "\n";
  out += ind + "Simulated: ";
  out += (n.status == NodeStatus::simulated) ? "True" : "False";
  out += "\n";
  out += ind + "Score: avg score: ";
  out += n.visits > 0 ? format_double(n.value_sum / n.visits) : "0";
  out += ", simulated score: " + score_dict(n);
  out += ", Visits: " + std::to_string(n.visits) + "\n";
  out += "\n";

  for (NodeId c : n.children) dump_node(tree, c, out);
}

}  // namespace detail

inline std::string dump_tree_text(const Tree& tree) {
  std::string out = "Number of simulations: " + std::to_string(tree.rollouts_done) + "\n";
  detail::dump_node(tree, 0, out);
  out += "Generated " + std::to_string(tree.counters.backend_stage_invocations) +
         " unique codes.\n";

  bool any_simulated = false;
  for (const Node& n : tree.nodes)
    if (n.status == NodeStatus::simulated) any_simulated = true;
  if (any_simulated) {
    BestNodes best = best_node(tree);
    out += "Best node: " + node_label(tree, best.by_q) +
           ", score: " + detail::score_dict(tree.at(best.by_q)) + "\n";
    out += "Dev best node: " + node_label(tree, best.by_dev) +
           ", score: " + detail::score_dict(tree.at(best.by_dev)) + "\n";
    out += "Grader score: " + format_double(tree.at(best.by_dev).outcome->test_score) + "\n";
  }
  return out;
}

// ============================================================================
// JSON dump (structured mirror of the text dump)
// ============================================================================

namespace detail {

inline nlohmann::json dump_node_json(const Tree& tree, NodeId id) {
  const Node& n = tree.at(id);
  nlohmann::json j;
  j["label"] = node_label(tree, id);
  j["plans"] = n.plan_lines;
  j["simulated"] = n.status == NodeStatus::simulated;
  j["status"] = std::string(node_status_name(n.status));
  j["visits"] = n.visits;
  j["avg_score"] = n.visits > 0 ? n.value_sum / n.visits : 0.0;
  if (n.outcome && n.outcome->ok()) {
    nlohmann::json scores;
    if (n.outcome->train_score) scores["train_score"] = *n.outcome->train_score;
    scores["dev_score"] = n.outcome->dev_score;
    scores["test_score"] = n.outcome->test_score;
    j["scores"] = scores;
  } else {
    j["scores"] = nlohmann::json::object();
  }
  nlohmann::json children = nlohmann::json::array();
  for (NodeId c : n.children) children.push_back(dump_node_json(tree, c));
  j["children"] = children;
  return j;
}

}  // namespace detail

inline std::string dump_tree_json(const Tree& tree) {
  nlohmann::json j;
  j["simulations"] = tree.rollouts_done;
  j["generated_codes"] = tree.counters.backend_stage_invocations;
  j["root"] = detail::dump_node_json(tree, 0);
  bool any_simulated = false;
  for (const Node& n : tree.nodes)
    if (n.status == NodeStatus::simulated) any_simulated = true;
  if (any_simulated) {
    BestNodes best = best_node(tree);
    j["best_node"] = node_label(tree, best.by_q);
    j["dev_best_node"] = node_label(tree, best.by_dev);
    j["grader_score"] = tree.at(best.by_dev).outcome->test_score;
  }
  return j.dump(2) + "\n";
}

// ============================================================================
// Versioned persistence
// ============================================================================

inline constexpr int kStateFormatVersion = 1;

namespace detail {

inline nlohmann::json outcome_to_json(const ExperimentOutcome& o) {
  nlohmann::json j;
  j["status"] = o.ok() ? "ok" : "failed";
  j["train_score"] = o.train_score ? nlohmann::json(*o.train_score) : nlohmann::json(nullptr);
  j["dev_score"] = o.dev_score;
  j["test_score"] = o.test_score;
  j["stage_code"] = o.artifact.stage_code;
  return j;
}

inline ExperimentOutcome outcome_from_json(const nlohmann::json& j) {
  ExperimentOutcome o;
  o.status = j.at("status").get<std::string>() == "ok" ? ExecStatus::ok : ExecStatus::failed;
  if (!j.at("train_score").is_null()) o.train_score = j.at("train_score").get<double>();
  o.dev_score = j.at("dev_score").get<double>();
  o.test_score = j.at("test_score").get<double>();
  auto codes = j.at("stage_code");
  if (!codes.is_array() || codes.size() != kStageCount)
    throw StateError(StateError::Kind::corrupt, "outcome stage_code must have 5 entries");
  for (int i = 0; i < kStageCount; ++i)
    o.artifact.stage_code[static_cast<std::size_t>(i)] = codes[static_cast<std::size_t>(i)].get<std::string>();
  return o;
}

}  // namespace detail

inline std::string save_state(const Tree& tree) {
  nlohmann::json j;
  j["format_version"] = kStateFormatVersion;

  nlohmann::json params;
  params["rollouts"] = tree.params.rollouts;
  params["gamma"] = tree.params.gamma;
  params["alpha_explore"] = tree.params.alpha_explore;
  params["expansion_width"] = tree.params.expansion_width;
  nlohmann::json schedule = nlohmann::json::array();
  for (PipelineStage s : tree.params.stage_schedule)
    schedule.push_back(std::string(stage_name(s)));
  params["stage_schedule"] = schedule;
  params["seed"] = tree.params.seed;
  j["params"] = params;

  j["rollouts_done"] = tree.rollouts_done;
  nlohmann::json counters;
  counters["plan_calls"] = tree.counters.plan_calls;
  counters["introspection_calls"] = tree.counters.introspection_calls;
  counters["value_calls"] = tree.counters.value_calls;
  counters["backend_stage_invocations"] = tree.counters.backend_stage_invocations;
  counters["simulations"] = tree.counters.simulations;
  j["counters"] = counters;

  nlohmann::json nodes = nlohmann::json::array();
  for (const Node& n : tree.nodes) {
    nlohmann::json nj;
    nj["id"] = n.id;
    nj["parent"] = n.parent == kNoNode ? nlohmann::json(nullptr) : nlohmann::json(n.parent);
    nj["child_rank"] = n.child_rank;
    nj["depth"] = n.depth;
    nj["stage"] = n.stage ? nlohmann::json(std::string(stage_name(*n.stage)))
                          : nlohmann::json(nullptr);
    nj["insight"] = n.insight ? nlohmann::json(*n.insight) : nlohmann::json(nullptr);
    nj["status"] = std::string(node_status_name(n.status));
    nj["visits"] = n.visits;
    nj["value_sum"] = n.value_sum;
    nj["llm_score"] = n.llm_score ? nlohmann::json(*n.llm_score) : nlohmann::json(nullptr);
    nj["outcome"] =
        n.outcome ? detail::outcome_to_json(*n.outcome) : nlohmann::json(nullptr);
    nj["sim_rollout"] = n.sim_rollout;
    nj["plan_lines"] = n.plan_lines;
    nodes.push_back(std::move(nj));
  }
  j["nodes"] = nodes;
  return j.dump(2) + "\n";
}

inline Tree load_state(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded())
    throw StateError(StateError::Kind::corrupt, "state file is not valid JSON");
  try {
    int version = j.at("format_version").get<int>();
    if (version != kStateFormatVersion)
      throw StateError(StateError::Kind::version_mismatch,
                       "unsupported state format version " + std::to_string(version));

    Tree tree;
    const auto& params = j.at("params");
    tree.params.rollouts = params.at("rollouts").get<int>();
    tree.params.gamma = params.at("gamma").get<double>();
    tree.params.alpha_explore = params.at("alpha_explore").get<double>();
    tree.params.expansion_width = params.at("expansion_width").get<int>();
    tree.params.stage_schedule.clear();
    for (const auto& name : params.at("stage_schedule")) {
      auto stage = parse_stage_name(name.get<std::string>());
      if (!stage)
        throw StateError(StateError::Kind::corrupt,
                         "unknown stage '" + name.get<std::string>() + "'");
      tree.params.stage_schedule.push_back(*stage);
    }
    tree.params.seed = params.at("seed").get<std::uint64_t>();
    validate(tree.params);

    tree.rollouts_done = j.at("rollouts_done").get<int>();
    const auto& counters = j.at("counters");
    tree.counters.plan_calls = counters.at("plan_calls").get<std::uint64_t>();
    tree.counters.introspection_calls = counters.at("introspection_calls").get<std::uint64_t>();
    tree.counters.value_calls = counters.at("value_calls").get<std::uint64_t>();
    tree.counters.backend_stage_invocations =
        counters.at("backend_stage_invocations").get<std::uint64_t>();
    tree.counters.simulations = counters.at("simulations").get<std::uint64_t>();

    for (const auto& nj : j.at("nodes")) {
      Node n;
      n.id = nj.at("id").get<NodeId>();
      n.parent = nj.at("parent").is_null() ? kNoNode : nj.at("parent").get<NodeId>();
      n.child_rank = nj.at("child_rank").get<int>();
      n.depth = nj.at("depth").get<int>();
      if (!nj.at("stage").is_null()) {
        auto stage = parse_stage_name(nj.at("stage").get<std::string>());
        if (!stage) throw StateError(StateError::Kind::corrupt, "unknown node stage");
        n.stage = *stage;
      }
      if (!nj.at("insight").is_null()) n.insight = nj.at("insight").get<std::string>();
      auto status = parse_node_status(nj.at("status").get<std::string>());
      if (!status) throw StateError(StateError::Kind::corrupt, "unknown node status");
      n.status = *status;
      n.visits = nj.at("visits").get<int>();
      n.value_sum = nj.at("value_sum").get<double>();
      if (!nj.at("llm_score").is_null()) n.llm_score = nj.at("llm_score").get<double>();
      if (!nj.at("outcome").is_null()) n.outcome = detail::outcome_from_json(nj.at("outcome"));
      n.sim_rollout = nj.at("sim_rollout").get<int>();
      n.plan_lines = nj.at("plan_lines").get<std::string>();
      tree.nodes.push_back(std::move(n));
    }

    if (tree.nodes.empty())
      throw StateError(StateError::Kind::corrupt, "state has no nodes");
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      Node& n = tree.nodes[i];
      if (n.id != static_cast<NodeId>(i))
        throw StateError(StateError::Kind::corrupt, "node ids must be dense");
      if (n.visits < 0) throw StateError(StateError::Kind::corrupt, "negative visit count");
      if (i == 0) {
        if (n.parent != kNoNode || n.depth != 0)
          throw StateError(StateError::Kind::corrupt, "malformed root node");
        continue;
      }
      if (n.parent >= static_cast<NodeId>(i))
        throw StateError(StateError::Kind::corrupt, "child precedes its parent");
      Node& p = tree.nodes[n.parent];
      if (n.depth != p.depth + 1)
        throw StateError(StateError::Kind::corrupt, "inconsistent node depth");
      if (!n.stage || !n.insight)
        throw StateError(StateError::Kind::corrupt, "non-root node missing stage or insight");
      if (n.child_rank != static_cast<int>(p.children.size()))
        throw StateError(StateError::Kind::corrupt, "child ranks out of order");
      p.children.push_back(n.id);
    }
    return tree;
  } catch (const StateError&) {
    throw;
  } catch (const std::exception& e) {
    throw StateError(StateError::Kind::corrupt, std::string("malformed state: ") + e.what());
  }
}

inline void save_state_file(const Tree& tree, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write state file: " + path);
  out << save_state(tree);
}

inline Tree load_state_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read state file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return load_state(buf.str());
}

}  // namespace imcts
