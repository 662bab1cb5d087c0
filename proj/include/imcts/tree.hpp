#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "imcts/pipeline.hpp"

/**
 * Search-tree core: nodes, UCT selection, the hybrid LLM/actual reward
 * blend, and backpropagation.  Everything here is pure bookkeeping and
 * arithmetic; oracles and execution live in the surrounding modules.
 *
 * Conventions used throughout:
 *  - node ids are ordinals into `Tree::nodes` (creation order, root = 0);
 *  - a node's human-readable label is the child-rank path from the root,
 *    "0" for the root, "0-2-4" for rank 4 under rank 2 under the root;
 *  - every tie (UCT, best-node, argmax over children) breaks toward the
 *    lowest child index / earliest creation, keeping runs deterministic.
 */

namespace imcts {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

enum class NodeStatus { fresh, expanded, simulated, failed };

inline constexpr std::string_view node_status_name(NodeStatus s) {
  switch (s) {
    case NodeStatus::fresh: return "fresh";
    case NodeStatus::expanded: return "expanded";
    case NodeStatus::simulated: return "simulated";
    case NodeStatus::failed: return "failed";
  }
  return "?";
}

inline std::optional<NodeStatus> parse_node_status(std::string_view text) {
  if (text == "fresh") return NodeStatus::fresh;
  if (text == "expanded") return NodeStatus::expanded;
  if (text == "simulated") return NodeStatus::simulated;
  if (text == "failed") return NodeStatus::failed;
  return std::nullopt;
}

struct SearchParams {
  int rollouts = 10;        // simulation budget k, root seeding included
  double gamma = 0.2;       // hybrid-reward mixing constant
  double alpha_explore = 2.0;
  int expansion_width = 5;  // children per expansion
  std::vector<PipelineStage> stage_schedule = {PipelineStage::feature_engineering,
                                               PipelineStage::model_training,
                                               PipelineStage::model_evaluation};
  std::uint64_t seed = 0;

  int max_depth() const { return static_cast<int>(stage_schedule.size()); }
};

inline void validate(const SearchParams& p) {
  if (p.rollouts < 1) throw std::invalid_argument("params: rollouts must be >= 1");
  if (!(p.gamma > 0.0)) throw std::invalid_argument("params: gamma must be > 0");
  if (!(p.alpha_explore >= 0.0))
    throw std::invalid_argument("params: alpha_explore must be >= 0");
  if (p.expansion_width < 1) throw std::invalid_argument("params: width must be >= 1");
  if (p.stage_schedule.empty())
    throw std::invalid_argument("params: stage schedule must be non-empty");
}

struct Node {
  NodeId id = 0;
  NodeId parent = kNoNode;
  std::vector<NodeId> children;
  int child_rank = 0;  // position under the parent; root uses 0
  int depth = 0;

  std::optional<PipelineStage> stage;   // unset on the root
  std::optional<std::string> insight;   // unset on the root

  NodeStatus status = NodeStatus::fresh;
  int visits = 0;        // n(x)
  double value_sum = 0;  // W(x), cumulative backpropagated reward

  std::optional<double> llm_score;           // cached s_LLM
  std::optional<ExperimentOutcome> outcome;  // s_actual and the artifact
  int sim_rollout = 0;                       // rollout of first simulation, 0 = never

  std::string plan_lines;  // what dumps print under "Plans:"
};

/** Oracle-call and backend counters; persisted with the tree for resume. */
struct RunCounters {
  std::uint64_t plan_calls = 0;
  std::uint64_t introspection_calls = 0;
  std::uint64_t value_calls = 0;
  std::uint64_t backend_stage_invocations = 0;
  std::uint64_t simulations = 0;

  bool operator==(const RunCounters&) const = default;
};

struct Tree {
  SearchParams params;
  std::vector<Node> nodes;
  int rollouts_done = 0;
  RunCounters counters;

  Node& at(NodeId id) {
    if (id >= nodes.size()) throw std::out_of_range("node id out of range");
    return nodes[id];
  }
  const Node& at(NodeId id) const {
    if (id >= nodes.size()) throw std::out_of_range("node id out of range");
    return nodes[id];
  }
  Node& root() { return nodes.front(); }
  const Node& root() const { return nodes.front(); }
};

/** Fresh single-node tree; the root's plan text is filled in by the driver. */
inline Tree new_tree(SearchParams params) {
  validate(params);
  Tree t;
  t.params = std::move(params);
  t.nodes.emplace_back();
  return t;
}

inline NodeId attach_child(Tree& tree, NodeId parent, PipelineStage stage, std::string insight,
                           std::string plan_lines) {
  Node& p = tree.at(parent);
  if (p.depth + 1 > tree.params.max_depth())
    throw std::invalid_argument("attach_child: schedule exhausted at this depth");
  Node child;
  child.id = static_cast<NodeId>(tree.nodes.size());
  child.parent = parent;
  child.child_rank = static_cast<int>(p.children.size());
  child.depth = p.depth + 1;
  child.stage = stage;
  child.insight = std::move(insight);
  child.plan_lines = std::move(plan_lines);
  p.children.push_back(child.id);
  tree.nodes.push_back(std::move(child));
  return tree.nodes.back().id;
}

/** "0", "0-2", "0-2-4": child ranks along the root-to-node path. */
inline std::string node_label(const Tree& tree, NodeId id) {
  std::vector<int> ranks;
  for (NodeId cur = id; cur != kNoNode; cur = tree.at(cur).parent)
    ranks.push_back(tree.at(cur).child_rank);
  std::string label;
  for (auto it = ranks.rbegin(); it != ranks.rend(); ++it) {
    if (!label.empty()) label += '-';
    label += std::to_string(*it);
  }
  return label;
}

/** Insights along the root-to-node path, keyed by stage. */
inline PipelineConfig config_for_node(const Tree& tree, NodeId id) {
  PipelineConfig cfg;
  for (NodeId cur = id; cur != kNoNode; cur = tree.at(cur).parent) {
    const Node& n = tree.at(cur);
    if (n.stage && n.insight) cfg.insights[stage_index(*n.stage)] = *n.insight;
  }
  return cfg;
}

// ============================================================================
// Eq.-level operations
// ============================================================================

/**
 * UCT score of a child: W/n + alpha * sqrt(ln n_parent / n).  An unvisited
 * child scores +infinity so everything gets simulated once before any
 * exploitation.
 */
inline double uct(double value_sum, int visits, int parent_visits, double alpha_explore) {
  if (visits < 0 || parent_visits < 0) throw std::invalid_argument("uct: negative visit count");
  if (visits == 0) return std::numeric_limits<double>::infinity();
  double exploit = value_sum / visits;
  double explore =
      alpha_explore * std::sqrt(std::log(static_cast<double>(parent_visits)) / visits);
  return exploit + explore;
}

/**
 * Hybrid reward: alpha * s_llm + (1 - alpha) * s_actual with
 * alpha = gamma / (n + gamma), where n is the node's visit count *before*
 * this rollout increments it.  n = 0 therefore yields the pure LLM estimate,
 * and the weight shifts toward measured scores as evidence accumulates.
 */
inline double blend(double s_llm, double s_actual, int visits, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("blend: gamma must be > 0");
  if (visits < 0) throw std::invalid_argument("blend: negative visit count");
  double alpha = gamma / (static_cast<double>(visits) + gamma);
  return alpha * s_llm + (1.0 - alpha) * s_actual;
}

/**
 * Walks from `from` to the root adding `reward` to every node's W and
 * incrementing every visit count, then counts the rollout.  One call per
 * rollout; n(root) equals rollouts_done afterwards.
 */
inline void backpropagate(Tree& tree, NodeId from, double reward) {
  if (!(reward >= 0.0 && reward <= 1.0))
    throw std::invalid_argument("backpropagate: reward outside [0, 1]");
  for (NodeId cur = from; cur != kNoNode; cur = tree.at(cur).parent) {
    Node& n = tree.at(cur);
    n.visits += 1;
    n.value_sum += reward;
  }
  tree.rollouts_done += 1;
}

/**
 * Greedy UCT descent.  Stops at the first fresh node, at schedule depth, or
 * at a node with no children (the expansion point); otherwise moves to the
 * child with the highest UCT, lowest index on ties.
 */
inline NodeId select_leaf(const Tree& tree) {
  NodeId cur = 0;
  while (true) {
    const Node& n = tree.at(cur);
    if (n.status == NodeStatus::fresh) return cur;
    if (n.depth >= tree.params.max_depth()) return cur;
    if (n.children.empty()) return cur;
    NodeId best = n.children.front();
    double best_score = -std::numeric_limits<double>::infinity();
    for (NodeId c : n.children) {
      const Node& child = tree.at(c);
      double score = uct(child.value_sum, child.visits, n.visits, tree.params.alpha_explore);
      if (score > best_score) {
        best_score = score;
        best = c;
      }
    }
    cur = best;
  }
}

struct BestNodes {
  NodeId by_dev = kNoNode;  // highest measured dev score among simulated nodes
  NodeId by_q = kNoNode;    // highest mean backpropagated value among visited nodes
};

/**
 * Final-answer extraction.  `by_dev` ranks executed nodes by dev score
 * (failed nodes excluded); `by_q` ranks visited nodes by W/n.  Earliest
 * creation wins ties.  Requires at least one simulated node.
 */
inline BestNodes best_node(const Tree& tree) {
  BestNodes best;
  double best_dev = -1.0;
  double best_q = -std::numeric_limits<double>::infinity();
  for (const Node& n : tree.nodes) {
    if (n.status == NodeStatus::simulated && n.outcome && n.outcome->dev_score > best_dev) {
      best_dev = n.outcome->dev_score;
      best.by_dev = n.id;
    }
    if (n.visits > 0) {
      double q = n.value_sum / n.visits;
      if (q > best_q) {
        best_q = q;
        best.by_q = n.id;
      }
    }
  }
  if (best.by_dev == kNoNode)
    throw std::runtime_error("best_node: tree has no simulated node");
  return best;
}

}  // namespace imcts
