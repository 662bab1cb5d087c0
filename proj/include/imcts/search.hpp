#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "imcts/chat.hpp"
#include "imcts/experimenter.hpp"
#include "imcts/introspection.hpp"
#include "imcts/landscape.hpp"
#include "imcts/rng.hpp"
#include "imcts/tree.hpp"
#include "imcts/valuation.hpp"

/**
 * The search driver: wires tree selection, introspective expansion, value
 * estimation, and experiment execution into the rollout loop, and exposes
 * the ablation policies that switch individual mechanisms off.
 *
 * One rollout = select a leaf, expand it if the schedule allows, pick the
 * most promising fresh child, execute it, and backpropagate one blended
 * reward.  The root is seeded by the first rollout, so a budget of k means
 * exactly k simulations.
 */

namespace imcts {

enum class SearchPolicy { imcts, imcts_no_ine, imcts_no_hrm, vanilla_mcts, random_search };

inline constexpr std::string_view policy_name(SearchPolicy p) {
  switch (p) {
    case SearchPolicy::imcts: return "IMCTS";
    case SearchPolicy::imcts_no_ine: return "IMCTS_no_INE";
    case SearchPolicy::imcts_no_hrm: return "IMCTS_no_HRM";
    case SearchPolicy::vanilla_mcts: return "VanillaMCTS";
    case SearchPolicy::random_search: return "RandomSearch";
  }
  return "?";
}

inline std::optional<SearchPolicy> parse_policy(std::string_view text) {
  if (text == "imcts" || text == "IMCTS") return SearchPolicy::imcts;
  if (text == "no-ine" || text == "IMCTS_no_INE") return SearchPolicy::imcts_no_ine;
  if (text == "no-hrm" || text == "IMCTS_no_HRM") return SearchPolicy::imcts_no_hrm;
  if (text == "vanilla" || text == "VanillaMCTS") return SearchPolicy::vanilla_mcts;
  if (text == "random" || text == "RandomSearch") return SearchPolicy::random_search;
  return std::nullopt;
}

/** Hybrid reward on: rewards blend s_LLM with measured dev scores. */
inline constexpr bool policy_uses_hrm(SearchPolicy p) {
  return p == SearchPolicy::imcts || p == SearchPolicy::imcts_no_ine;
}

/** Introspective expansion on: children come from the critic oracle. */
inline constexpr bool policy_uses_ine(SearchPolicy p) {
  return p == SearchPolicy::imcts || p == SearchPolicy::imcts_no_hrm;
}

// ============================================================================
// Pluggable policies
// ============================================================================

/** What an expansion sees about its parent node. */
struct ExpansionContext {
  std::string parent_plan_text;
  std::string parent_solution;
  std::string metrics_text;
  double parent_dev = 0.0;
  PipelineStage stage{};
  std::vector<std::string> sibling_insights;  // existing children, oldest first
  PipelineConfig parent_config;
  NodeId parent_id = 0;
  int next_slot = 0;  // rank the first new child will get
};

class ExpansionPolicy {
 public:
  virtual ~ExpansionPolicy() = default;

  /** Up to `width` new sibling insights; fewer only if the source exhausts. */
  virtual std::vector<InsightProposal> propose(const ExpansionContext& ctx, int width,
                                               RunCounters& counters) = 0;

  /** One more sibling, or nullopt when the source is exhausted. */
  virtual std::optional<InsightProposal> propose_one(const ExpansionContext& ctx,
                                                     RunCounters& counters) = 0;
};

class ValueModel {
 public:
  virtual ~ValueModel() = default;

  /** Unit-interval value estimate for a node's candidate plan. */
  virtual double estimate(const Tree& tree, NodeId node, const std::string& plan_text,
                          RunCounters& counters) = 0;
};

/** Per-rollout uniform configuration source for the random-search baseline. */
class RandomConfigSource {
 public:
  virtual ~RandomConfigSource() = default;
  virtual std::string draw(PipelineStage stage, int rollout) = 0;
};

// --- chat-backed implementations -------------------------------------------

class ChatExpansion : public ExpansionPolicy {
 public:
  ChatExpansion(ChatOracle& oracle, GenParams params, int retries = 3)
      : oracle_(oracle), params_(std::move(params)), retries_(retries) {}

  std::vector<InsightProposal> propose(const ExpansionContext& ctx, int width,
                                       RunCounters& counters) override {
    IntrospectionContext ic = to_introspection(ctx);
    std::uint64_t before = oracle_.usage().calls;
    auto proposals = expand_introspectively(ic, width, oracle_, params_, retries_);
    counters.introspection_calls += oracle_.usage().calls - before;
    return proposals;
  }

  std::optional<InsightProposal> propose_one(const ExpansionContext& ctx,
                                             RunCounters& counters) override {
    auto proposals = propose(ctx, 1, counters);
    return proposals.empty() ? std::nullopt : std::optional(proposals.front());
  }

 private:
  static IntrospectionContext to_introspection(const ExpansionContext& ctx) {
    IntrospectionContext ic;
    ic.current_plan = ctx.parent_plan_text;
    ic.solution_code = ctx.parent_solution.empty() ? "(no solution available)" : ctx.parent_solution;
    ic.current_metrics = ctx.metrics_text;
    ic.dev_score = ctx.parent_dev;
    ic.stage = ctx.stage;
    ic.prior_insights = ctx.sibling_insights;
    return ic;
  }

  ChatOracle& oracle_;
  GenParams params_;
  int retries_;
};

class ChatValueModel : public ValueModel {
 public:
  ChatValueModel(ChatOracle& oracle, GenParams params, std::string user_requirement)
      : oracle_(oracle), estimator_(oracle, std::move(params), std::move(user_requirement)) {}

  double estimate(const Tree& tree, NodeId node, const std::string& plan_text,
                  RunCounters& counters) override {
    std::uint64_t before = oracle_.usage().calls;
    double v = estimator_.estimate(node_label(tree, node), plan_text);
    counters.value_calls += oracle_.usage().calls - before;
    return v;
  }

 private:
  ChatOracle& oracle_;
  ValueEstimator estimator_;
};

// --- simulated implementations ----------------------------------------------

class SimExpansion : public ExpansionPolicy {
 public:
  SimExpansion(const SimLandscape& landscape, std::uint64_t seed)
      : landscape_(landscape), seed_(seed) {}

  std::vector<InsightProposal> propose(const ExpansionContext& ctx, int width,
                                       RunCounters& counters) override {
    std::vector<InsightProposal> out;
    std::vector<std::string> siblings = ctx.sibling_insights;
    for (int slot = 0; slot < width; ++slot) {
      auto p = sim_introspect(landscape_, siblings, ctx.stage, seed_, ctx.parent_id,
                              ctx.next_slot + slot);
      if (!p) break;
      counters.introspection_calls += 1;
      siblings.push_back(p->insight);
      out.push_back(std::move(*p));
    }
    // The critic surfaces a strong candidate set, but in no particular
    // quality order; ranking within the batch is the value model's job.
    std::sort(out.begin(), out.end(), [&](const InsightProposal& a, const InsightProposal& b) {
      return landscape_.id_of(a.insight) < landscape_.id_of(b.insight);
    });
    return out;
  }

  std::optional<InsightProposal> propose_one(const ExpansionContext& ctx,
                                             RunCounters& counters) override {
    auto proposals = propose(ctx, 1, counters);
    return proposals.empty() ? std::nullopt : std::optional(proposals.front());
  }

 private:
  const SimLandscape& landscape_;
  std::uint64_t seed_;
};

class SimValueModel : public ValueModel {
 public:
  SimValueModel(const SimLandscape& landscape, std::uint64_t seed)
      : landscape_(landscape), seed_(seed) {}

  double estimate(const Tree& tree, NodeId node, const std::string&,
                  RunCounters& counters) override {
    counters.value_calls += 1;
    PipelineConfig cfg = config_for_node(tree, node);
    RngStream noise(seed_, "value-noise", node);
    return clamp01(landscape_.true_quality(cfg) +
                   noise.gauss() * landscape_.shape().noise_value);
  }

 private:
  const SimLandscape& landscape_;
  std::uint64_t seed_;
};

class SimRandomSource : public RandomConfigSource {
 public:
  SimRandomSource(const SimLandscape& landscape, std::uint64_t seed)
      : landscape_(landscape), seed_(seed) {}

  std::string draw(PipelineStage stage, int rollout) override {
    RngStream rng(seed_, "random-config", static_cast<std::uint64_t>(rollout),
                  static_cast<std::uint64_t>(stage_index(stage)));
    int id = rng.uniform_int(0, landscape_.universe_size(stage) - 1);
    return SimLandscape::insight_text(stage, id);
  }

 private:
  const SimLandscape& landscape_;
  std::uint64_t seed_;
};

// --- pool-backed (introspection off) ----------------------------------------

/**
 * Expansion from a fixed pool of insights per stage, generated once at
 * startup.  The simulated flavor draws the pool from a seeded shuffle of
 * the universe; the chat flavor fills it with `build_chat_pool` below.
 */
class PoolExpansion : public ExpansionPolicy {
 public:
  explicit PoolExpansion(std::array<std::vector<std::string>, kStageCount> pool)
      : pool_(std::move(pool)) {}

  static PoolExpansion from_static_pool(const StaticInsightPool& pool) {
    std::array<std::vector<std::string>, kStageCount> texts;
    for (PipelineStage s : kAllStages) texts[stage_index(s)] = pool.entries(s);
    return PoolExpansion(std::move(texts));
  }

  std::vector<InsightProposal> propose(const ExpansionContext& ctx, int width,
                                       RunCounters&) override {
    std::vector<InsightProposal> out;
    std::vector<std::string> used = ctx.sibling_insights;
    for (const auto& text : pool_[stage_index(ctx.stage)]) {
      if (static_cast<int>(out.size()) >= width) break;
      bool taken = false;
      for (const auto& u : used)
        if (u == text) taken = true;
      if (taken) continue;
      InsightProposal p;
      p.task_type = ctx.stage;
      p.insight = text;
      used.push_back(text);
      out.push_back(std::move(p));
    }
    return out;
  }

  std::optional<InsightProposal> propose_one(const ExpansionContext& ctx,
                                             RunCounters& counters) override {
    auto proposals = propose(ctx, 1, counters);
    return proposals.empty() ? std::nullopt : std::optional(proposals.front());
  }

  const std::vector<std::string>& entries(PipelineStage s) const { return pool_[stage_index(s)]; }

 private:
  std::array<std::vector<std::string>, kStageCount> pool_;
};

class PoolRandomSource : public RandomConfigSource {
 public:
  PoolRandomSource(const PoolExpansion& pool, std::uint64_t seed) : pool_(pool), seed_(seed) {}

  std::string draw(PipelineStage stage, int rollout) override {
    const auto& entries = pool_.entries(stage);
    if (entries.empty()) throw std::runtime_error("random draw from empty pool");
    RngStream rng(seed_, "random-config", static_cast<std::uint64_t>(rollout),
                  static_cast<std::uint64_t>(stage_index(stage)));
    return entries[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(entries.size()) - 1))];
  }

 private:
  const PoolExpansion& pool_;
  std::uint64_t seed_;
};

/** Startup pool for the chat no-introspection ablation: `per_stage` insights
 *  per scheduled stage, all proposed against the root context. */
inline std::array<std::vector<std::string>, kStageCount> build_chat_pool(
    const ExpansionContext& root_ctx, const std::vector<PipelineStage>& schedule, int per_stage,
    ChatOracle& oracle, const GenParams& params, RunCounters& counters, int retries = 3) {
  std::array<std::vector<std::string>, kStageCount> pool;
  for (PipelineStage s : schedule) {
    IntrospectionContext ic;
    ic.current_plan = root_ctx.parent_plan_text;
    ic.solution_code =
        root_ctx.parent_solution.empty() ? "(no solution available)" : root_ctx.parent_solution;
    ic.current_metrics = root_ctx.metrics_text;
    ic.dev_score = root_ctx.parent_dev;
    ic.stage = s;
    std::uint64_t before = oracle.usage().calls;
    auto proposals = expand_introspectively(ic, per_stage, oracle, params, retries);
    counters.introspection_calls += oracle.usage().calls - before;
    for (auto& p : proposals) pool[stage_index(s)].push_back(std::move(p.insight));
  }
  return pool;
}

// ============================================================================
// The rollout loop
// ============================================================================

struct SearchDeps {
  Planner* planner = nullptr;
  ExperimentBackend* backend = nullptr;
  ExpansionPolicy* expander = nullptr;          // unused by random search
  ValueModel* value = nullptr;                  // required only when HRM is on
  RandomConfigSource* random_source = nullptr;  // required only by random search
};

/** One rollout as the acceptance replay sees it. */
struct RolloutEvent {
  int rollout = 0;
  NodeId target = 0;
  double reward = 0.0;
};

struct SearchReport {
  Tree tree;
  NodeId best_by_dev = kNoNode;
  NodeId best_by_q = kNoNode;
  std::string best_by_dev_label;
  std::string best_by_q_label;
  double best_dev_score = 0.0;
  double best_test_score = 0.0;
  double best_q_mean = 0.0;
  int discovery_rollout = 0;  // when the eventual dev-best was first simulated
  RunCounters counters;
  std::vector<RolloutEvent> events;
  double wall_seconds = 0.0;
};

namespace detail {

inline const SearchDeps& check_deps(const SearchDeps& deps, SearchPolicy policy) {
  if (!deps.planner || !deps.backend)
    throw std::invalid_argument("run_search: planner and backend are required");
  if (policy == SearchPolicy::random_search) {
    if (!deps.random_source)
      throw std::invalid_argument("run_search: random search needs a config source");
  } else if (!deps.expander) {
    throw std::invalid_argument("run_search: this policy needs an expansion policy");
  }
  if (policy_uses_hrm(policy) && !deps.value)
    throw std::invalid_argument("run_search: this policy needs a value model");
  return deps;
}

class SearchDriver {
 public:
  SearchDriver(Tree& tree, SearchPolicy policy, const TaskSpec& task, SearchDeps deps)
      : tree_(tree), policy_(policy), task_(task), deps_(check_deps(deps, policy)),
        experimenter_(task, *deps_.planner, *deps_.backend) {}

  std::vector<RolloutEvent> run() {
    experimenter_.absorb(tree_);
    if (tree_.root().plan_lines.empty())
      tree_.root().plan_lines = plan_text(deps_.planner->make_plan(task_, {}, tree_.counters));

    for (int rollout = tree_.rollouts_done + 1; rollout <= tree_.params.rollouts; ++rollout) {
      if (policy_ == SearchPolicy::random_search) {
        random_rollout(rollout);
        continue;
      }
      if (rollout == 1) {
        simulate_node(0, rollout);  // seed the root
        continue;
      }
      NodeId leaf = select_leaf(tree_);
      simulate_node(choose_target(leaf), rollout);
    }
    return std::move(events_);
  }

 private:
  /** Expansion stage for children of `node` per the stage schedule. */
  PipelineStage stage_below(const Node& node) const {
    return tree_.params.stage_schedule[static_cast<std::size_t>(node.depth)];
  }

  std::string full_plan_text(NodeId id) {
    return plan_text(
        deps_.planner->make_plan(task_, config_for_node(tree_, id), tree_.counters));
  }

  ExpansionContext make_ctx(NodeId parent, PipelineStage stage) {
    const Node& p = tree_.at(parent);
    ExpansionContext ctx;
    ctx.parent_plan_text = full_plan_text(parent);
    ctx.parent_solution = p.outcome ? p.outcome->artifact.concatenated() : "";
    ctx.metrics_text = task_.metric_name;
    ctx.parent_dev = (p.outcome && p.outcome->ok()) ? p.outcome->dev_score : 0.0;
    ctx.stage = stage;
    for (NodeId c : p.children) ctx.sibling_insights.push_back(*tree_.at(c).insight);
    ctx.parent_config = config_for_node(tree_, parent);
    ctx.parent_id = parent;
    ctx.next_slot = static_cast<int>(p.children.size());
    return ctx;
  }

  NodeId attach_proposal(NodeId parent, PipelineStage stage, const InsightProposal& p) {
    return attach_child(tree_, parent, stage, p.insight, plan_line(stage, p.insight));
  }

  /**
   * Turns the selected leaf into the node this rollout will execute: the
   * leaf itself when fresh; a brand-new sibling at schedule depth (or the
   * leaf again once siblings exhaust); otherwise the best of a fresh batch
   * of children.
   */
  NodeId choose_target(NodeId leaf) {
    Node& n = tree_.at(leaf);
    if (n.status == NodeStatus::fresh) return leaf;

    if (n.depth >= tree_.params.max_depth()) {
      NodeId parent = n.parent;
      if (parent == kNoNode) return leaf;  // single-stage schedule, root re-simulation
      auto proposal = deps_.expander->propose_one(make_ctx(parent, *n.stage), tree_.counters);
      if (!proposal) return leaf;  // universe exhausted: re-simulate
      return attach_proposal(parent, *n.stage, *proposal);
    }

    PipelineStage stage = stage_below(n);
    auto proposals =
        deps_.expander->propose(make_ctx(leaf, stage), tree_.params.expansion_width,
                                tree_.counters);
    if (proposals.empty()) return leaf;  // nothing left to try below: re-simulate
    std::vector<NodeId> fresh;
    fresh.reserve(proposals.size());
    for (const auto& p : proposals) fresh.push_back(attach_proposal(leaf, stage, p));
    return pick_child(fresh);
  }

  /** Highest pre-simulation value estimate wins; without HRM, lowest rank. */
  NodeId pick_child(const std::vector<NodeId>& fresh) {
    if (!policy_uses_hrm(policy_)) return fresh.front();
    NodeId best = fresh.front();
    double best_value = -std::numeric_limits<double>::infinity();
    for (NodeId c : fresh) {
      Node& child = tree_.at(c);
      if (!child.llm_score)
        child.llm_score = deps_.value->estimate(tree_, c, full_plan_text(c), tree_.counters);
      if (*child.llm_score > best_value) {
        best_value = *child.llm_score;
        best = c;
      }
    }
    return best;
  }

  void simulate_node(NodeId id, int rollout) {
    Node& n = tree_.at(id);
    ExperimentOutcome outcome =
        experimenter_.simulate(config_for_node(tree_, id), rollout, tree_.counters);
    n.outcome = outcome;
    n.status = outcome.ok() ? NodeStatus::simulated : NodeStatus::failed;
    if (n.sim_rollout == 0) n.sim_rollout = rollout;

    double s_actual = outcome.ok() ? outcome.dev_score : 0.0;
    double reward = s_actual;
    if (policy_uses_hrm(policy_)) {
      if (!n.llm_score)
        n.llm_score = deps_.value->estimate(tree_, id, full_plan_text(id), tree_.counters);
      // pre-increment visit count: a node's first reward is the pure estimate
      reward = blend(*n.llm_score, s_actual, n.visits, tree_.params.gamma);
    }
    events_.push_back({rollout, id, reward});
    backpropagate(tree_, id, reward);
  }

  void random_rollout(int rollout) {
    NodeId cur = 0;
    for (PipelineStage stage : tree_.params.stage_schedule) {
      std::string insight = deps_.random_source->draw(stage, rollout);
      cur = attach_child(tree_, cur, stage, insight, plan_line(stage, insight));
    }
    simulate_node(cur, rollout);
  }

  Tree& tree_;
  SearchPolicy policy_;
  const TaskSpec& task_;
  SearchDeps deps_;
  Experimenter experimenter_;
  std::vector<RolloutEvent> events_;
};

inline SearchReport finish_report(Tree tree, std::vector<RolloutEvent> events,
                                  double wall_seconds) {
  SearchReport report;
  BestNodes best = best_node(tree);
  report.best_by_dev = best.by_dev;
  report.best_by_q = best.by_q;
  report.best_by_dev_label = node_label(tree, best.by_dev);
  report.best_by_q_label = node_label(tree, best.by_q);
  const Node& dev_node = tree.at(best.by_dev);
  report.best_dev_score = dev_node.outcome->dev_score;
  report.best_test_score = dev_node.outcome->test_score;
  const Node& q_node = tree.at(best.by_q);
  report.best_q_mean = q_node.value_sum / q_node.visits;
  report.discovery_rollout = dev_node.sim_rollout;
  report.counters = tree.counters;
  report.events = std::move(events);
  report.wall_seconds = wall_seconds;
  report.tree = std::move(tree);
  return report;
}

}  // namespace detail

/** Runs a fresh search of `params.rollouts` simulations. */
inline SearchReport run_search(const SearchParams& params, SearchPolicy policy,
                               const TaskSpec& task, SearchDeps deps) {
  validate(params);
  auto start = std::chrono::steady_clock::now();
  Tree tree = new_tree(params);
  detail::SearchDriver driver(tree, policy, task, deps);
  auto events = driver.run();
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return detail::finish_report(std::move(tree), std::move(events), secs);
}

/** Continues a persisted tree to its rollout budget (no-op when done). */
inline SearchReport resume_search(Tree tree, SearchPolicy policy, const TaskSpec& task,
                                  SearchDeps deps) {
  validate(tree.params);
  auto start = std::chrono::steady_clock::now();
  detail::SearchDriver driver(tree, policy, task, deps);
  auto events = driver.run();
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return detail::finish_report(std::move(tree), std::move(events), secs);
}

}  // namespace imcts
