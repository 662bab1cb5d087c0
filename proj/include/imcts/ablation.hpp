#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "imcts/landscape.hpp"
#include "imcts/search.hpp"

/**
 * Offline ablation harness: runs every policy on the same seeded simulated
 * landscapes and collects the statistics the policy comparison is judged
 * on.  All randomness is derived from the per-run seed, so rerunning the
 * suite reproduces every number exactly.
 */

namespace imcts {

struct AblationRequest {
  LandscapeShape shape{};
  SearchParams base{};  // per-run seed is overwritten with the suite seeds
  std::vector<std::uint64_t> seeds;
  std::vector<SearchPolicy> policies = {
      SearchPolicy::imcts, SearchPolicy::imcts_no_ine, SearchPolicy::imcts_no_hrm,
      SearchPolicy::vanilla_mcts, SearchPolicy::random_search};
  double near_optimal_fraction = 0.98;  // "found it" threshold vs best reachable
};

/** One (policy, seed) run reduced to the comparison metrics. */
struct AblationSample {
  std::uint64_t seed = 0;
  double best_quality = 0.0;    // true quality of the dev-best configuration
  int discovery_rollout = 0;    // rollout that first simulated the dev-best node
  int rollouts_to_near_opt = 0; // first rollout reaching the threshold; k+1 if never
};

struct AblationRow {
  SearchPolicy policy{};
  std::vector<AblationSample> samples;
  double median_quality = 0.0;
  double mean_quality = 0.0;
  double median_discovery = 0.0;
  double median_to_near_opt = 0.0;
};

struct AblationResult {
  std::vector<AblationRow> rows;

  const AblationRow& row(SearchPolicy p) const {
    for (const auto& r : rows)
      if (r.policy == p) return r;
    throw std::out_of_range("no such policy in ablation result");
  }
};

inline double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median: empty input");
  std::sort(values.begin(), values.end());
  std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

/**
 * One-sided paired sign test: p-value for "first >= second" being
 * explainable by chance, i.e. P[Binom(wins + losses, 1/2) >= wins].
 * Ties contribute nothing.
 */
inline double sign_test_p(const std::vector<double>& first, const std::vector<double>& second) {
  if (first.size() != second.size() || first.empty())
    throw std::invalid_argument("sign_test_p: mismatched samples");
  int wins = 0, losses = 0;
  for (std::size_t i = 0; i < first.size(); ++i) {
    if (first[i] > second[i]) ++wins;
    else if (first[i] < second[i]) ++losses;
  }
  int n = wins + losses;
  if (n == 0) return 1.0;
  double p = 0.0;
  for (int k = wins; k <= n; ++k)
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) -
                  n * std::log(2.0));
  return std::min(p, 1.0);
}

namespace detail {

inline AblationSample run_policy_on_seed(SearchPolicy policy, std::uint64_t seed,
                                         const LandscapeShape& shape, SearchParams params,
                                         double near_fraction) {
  params.seed = seed;
  SimLandscape landscape(seed, shape);
  BaselinePlanner planner;
  SimulatedBackend backend(landscape, seed);

  SimExpansion introspective(landscape, seed);
  StaticInsightPool static_pool(landscape, params.expansion_width * params.max_depth(), seed);
  PoolExpansion pooled = PoolExpansion::from_static_pool(static_pool);
  SimValueModel value(landscape, seed);
  SimRandomSource random_source(landscape, seed);

  SearchDeps deps;
  deps.planner = &planner;
  deps.backend = &backend;
  deps.expander = policy_uses_ine(policy) ? static_cast<ExpansionPolicy*>(&introspective)
                                          : static_cast<ExpansionPolicy*>(&pooled);
  deps.value = policy_uses_hrm(policy) ? &value : nullptr;
  deps.random_source = policy == SearchPolicy::random_search ? &random_source : nullptr;

  TaskSpec task;
  task.problem = "Optimize a staged ML pipeline on a simulated landscape.";
  task.metadata = "synthetic";
  task.dataset_ref = "sim://" + std::to_string(seed);

  SearchReport report = run_search(params, policy, task, deps);

  AblationSample sample;
  sample.seed = seed;
  sample.best_quality =
      landscape.true_quality(config_for_node(report.tree, report.best_by_dev));
  sample.discovery_rollout = report.discovery_rollout;

  double threshold = near_fraction * landscape.best_reachable(params.stage_schedule);
  sample.rollouts_to_near_opt = params.rollouts + 1;
  for (const Node& n : report.tree.nodes) {
    if (n.status != NodeStatus::simulated || n.sim_rollout == 0) continue;
    if (landscape.true_quality(config_for_node(report.tree, n.id)) >= threshold)
      sample.rollouts_to_near_opt = std::min(sample.rollouts_to_near_opt, n.sim_rollout);
  }
  return sample;
}

}  // namespace detail

inline AblationResult run_sim_ablation(const AblationRequest& request) {
  if (request.seeds.empty()) throw std::invalid_argument("ablation: no seeds");
  AblationResult result;
  for (SearchPolicy policy : request.policies) {
    AblationRow row;
    row.policy = policy;
    std::vector<double> qualities, discoveries, to_opt;
    for (std::uint64_t seed : request.seeds) {
      AblationSample s = detail::run_policy_on_seed(policy, seed, request.shape, request.base,
                                                    request.near_optimal_fraction);
      qualities.push_back(s.best_quality);
      discoveries.push_back(s.discovery_rollout);
      to_opt.push_back(s.rollouts_to_near_opt);
      row.samples.push_back(s);
    }
    row.median_quality = median(qualities);
    double sum = 0.0;
    for (double q : qualities) sum += q;
    row.mean_quality = sum / static_cast<double>(qualities.size());
    row.median_discovery = median(discoveries);
    row.median_to_near_opt = median(to_opt);
    result.rows.push_back(std::move(row));
  }
  return result;
}

}  // namespace imcts
