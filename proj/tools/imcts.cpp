#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "imcts/ablation.hpp"
#include "imcts/dump.hpp"
#include "imcts/http_oracle.hpp"
#include "imcts/metrics.hpp"
#include "imcts/search.hpp"

/**
 * imcts: introspective tree search over staged ML pipelines.
 *
 *   imcts run    --config task.json [--policy imcts] [--mode sim|live|replay] ...
 *   imcts ablate --seeds 50 [--rollouts 10] ...
 *   imcts score  --csv results.csv
 *
 * `run` executes one search and writes tree.json, dump.txt|dump.json, and
 * report.json into --out; live runs also append recording.jsonl, which
 * --mode replay consumes byte for byte.  The API key for live runs comes
 * from the IMCTS_API_KEY environment variable, never from flags or files.
 */

namespace {

using nlohmann::json;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  return j;
}

imcts::TaskSpec task_from_config(const json& cfg) {
  imcts::TaskSpec task;
  task.problem = cfg.value("problem", "Optimize a staged ML pipeline.");
  task.metadata = cfg.value("metadata", "unspecified dataset");
  task.dataset_ref = cfg.value("dataset_ref", "");
  task.metric_name = cfg.value("metric", "F1");
  return task;
}

imcts::LandscapeShape shape_from_config(const json& cfg) {
  imcts::LandscapeShape shape;
  if (!cfg.contains("landscape")) return shape;
  const json& l = cfg["landscape"];
  shape.insights_per_stage = l.value("insights_per_stage", shape.insights_per_stage);
  shape.noise_dev = l.value("noise_dev", shape.noise_dev);
  shape.noise_value = l.value("noise_value", shape.noise_value);
  shape.noise_lookahead = l.value("noise_lookahead", shape.noise_lookahead);
  shape.ridge_sharpness = l.value("ridge_sharpness", shape.ridge_sharpness);
  shape.baseline_level = l.value("baseline_level", shape.baseline_level);
  shape.interaction_scale = l.value("interaction_scale", shape.interaction_scale);
  shape.weight_min = l.value("weight_min", shape.weight_min);
  shape.weight_max = l.value("weight_max", shape.weight_max);
  return shape;
}

std::vector<imcts::PipelineStage> schedule_from_config(const json& cfg) {
  std::vector<imcts::PipelineStage> schedule;
  if (!cfg.contains("stage_schedule")) return imcts::SearchParams{}.stage_schedule;
  for (const auto& name : cfg["stage_schedule"]) {
    auto stage = imcts::parse_stage_name(name.get<std::string>());
    if (!stage)
      throw std::runtime_error("config: unknown stage '" + name.get<std::string>() + "'");
    schedule.push_back(*stage);
  }
  return schedule;
}

imcts::GenParams gen_params_from_config(const json& cfg) {
  imcts::GenParams params;
  if (!cfg.contains("llm")) return params;
  const json& l = cfg["llm"];
  params.temperature = l.value("temperature", params.temperature);
  params.max_tokens = l.value("max_tokens", params.max_tokens);
  params.retry_budget = l.value("retry_budget", params.retry_budget);
  params.backoff.base =
      std::chrono::milliseconds(l.value("backoff_base_ms", static_cast<int>(params.backoff.base.count())));
  params.backoff.factor = l.value("backoff_factor", params.backoff.factor);
  return params;
}

/** Owns whichever oracle/backend/policy objects the chosen mode needs. */
struct RunAssembly {
  std::unique_ptr<imcts::SimLandscape> landscape;
  std::unique_ptr<imcts::ChatOracle> transport;   // http or replay
  std::unique_ptr<imcts::ChatOracle> oracle;      // possibly recording wrapper
  std::unique_ptr<imcts::Planner> planner;
  std::unique_ptr<imcts::ExperimentBackend> backend;
  std::unique_ptr<imcts::ExpansionPolicy> expander;
  std::unique_ptr<imcts::ValueModel> value;
  std::unique_ptr<imcts::RandomConfigSource> random_source;
  imcts::SearchDeps deps;
};

RunAssembly assemble_sim(const json& cfg, const imcts::SearchParams& params,
                         imcts::SearchPolicy policy) {
  RunAssembly a;
  a.landscape = std::make_unique<imcts::SimLandscape>(params.seed, shape_from_config(cfg));
  a.planner = std::make_unique<imcts::BaselinePlanner>();
  a.backend = std::make_unique<imcts::SimulatedBackend>(*a.landscape, params.seed);
  if (imcts::policy_uses_ine(policy)) {
    a.expander = std::make_unique<imcts::SimExpansion>(*a.landscape, params.seed);
  } else {
    imcts::StaticInsightPool pool(*a.landscape, params.expansion_width * params.max_depth(),
                                  params.seed);
    a.expander = std::make_unique<imcts::PoolExpansion>(
        imcts::PoolExpansion::from_static_pool(pool));
  }
  if (imcts::policy_uses_hrm(policy))
    a.value = std::make_unique<imcts::SimValueModel>(*a.landscape, params.seed);
  if (policy == imcts::SearchPolicy::random_search)
    a.random_source = std::make_unique<imcts::SimRandomSource>(*a.landscape, params.seed);
  return a;
}

RunAssembly assemble_chat(const json& cfg, const imcts::SearchParams& params,
                          imcts::SearchPolicy policy, const imcts::TaskSpec& task,
                          const imcts::GenParams& gen, bool live,
                          const std::string& replay_path, const std::string& recording_path,
                          imcts::RunCounters& startup_counters) {
  RunAssembly a;
  if (live) {
    if (!cfg.contains("llm"))
      throw std::runtime_error("config: live mode needs an 'llm' section");
    imcts::HttpOracleConfig http;
    http.endpoint = cfg["llm"].value("endpoint", "");
    http.model = cfg["llm"].value("model", "");
    if (http.endpoint.empty() || http.model.empty())
      throw std::runtime_error("config: llm.endpoint and llm.model are required for live mode");
    a.transport = std::make_unique<imcts::HttpChatOracle>(http);
    a.oracle = std::make_unique<imcts::RecordingOracle>(*a.transport, recording_path);
  } else {
    if (replay_path.empty()) throw std::runtime_error("replay mode needs --replay FILE");
    a.oracle = std::make_unique<imcts::ReplayOracle>(imcts::ReplayOracle::from_file(replay_path));
  }

  a.planner = std::make_unique<imcts::ChatPlanner>(*a.oracle, gen);

  if (cfg.contains("backend") && cfg["backend"].contains("command")) {
    a.backend = std::make_unique<imcts::CommandBackend>(
        cfg["backend"]["command"].get<std::string>(), cfg["backend"].value("timeout_sec", 0));
  } else {
    // no executor configured: score against the simulated landscape
    a.landscape = std::make_unique<imcts::SimLandscape>(params.seed, shape_from_config(cfg));
    a.backend = std::make_unique<imcts::SimulatedBackend>(*a.landscape, params.seed);
  }

  bool needs_pool = !imcts::policy_uses_ine(policy) || policy == imcts::SearchPolicy::random_search;
  if (imcts::policy_uses_ine(policy)) {
    a.expander = std::make_unique<imcts::ChatExpansion>(*a.oracle, gen);
  }
  if (needs_pool) {
    imcts::ExpansionContext root_ctx;
    root_ctx.parent_plan_text =
        imcts::plan_text(a.planner->make_plan(task, {}, startup_counters));
    root_ctx.parent_solution = "(no solution available)";
    root_ctx.metrics_text = task.metric_name;
    auto pool = imcts::build_chat_pool(root_ctx, params.stage_schedule,
                                       params.expansion_width * params.max_depth(), *a.oracle,
                                       gen, startup_counters);
    auto pooled = std::make_unique<imcts::PoolExpansion>(std::move(pool));
    if (policy == imcts::SearchPolicy::random_search)
      a.random_source = std::make_unique<imcts::PoolRandomSource>(*pooled, params.seed);
    // the pool object stays alive behind the expander slot either way
    if (!imcts::policy_uses_ine(policy)) a.expander = std::move(pooled);
  }
  if (imcts::policy_uses_hrm(policy))
    a.value = std::make_unique<imcts::ChatValueModel>(*a.oracle, gen, task.problem);
  return a;
}

int cmd_run(const std::string& config_path, const std::string& policy_name, int rollouts,
            double gamma, double alpha_explore, int width, std::uint64_t seed,
            const std::string& mode, const std::string& dump_format, const std::string& out_dir,
            const std::string& resume_path, const std::string& replay_path) {
  json cfg = config_path.empty() ? json::object() : read_json_file(config_path);
  auto policy = imcts::parse_policy(policy_name);
  if (!policy) throw std::runtime_error("unknown policy '" + policy_name + "'");

  imcts::SearchParams params;
  params.stage_schedule = schedule_from_config(cfg);
  params.rollouts = rollouts;
  params.gamma = gamma;
  params.alpha_explore = alpha_explore;
  params.expansion_width = width;
  params.seed = seed;

  std::optional<imcts::Tree> resumed;
  if (!resume_path.empty()) {
    resumed = imcts::load_state_file(resume_path);
    params = resumed->params;  // the persisted run owns its parameters
    if (rollouts > params.rollouts) {
      params.rollouts = rollouts;  // allow extending the budget
      resumed->params.rollouts = rollouts;
    }
  }
  imcts::validate(params);

  imcts::TaskSpec task = task_from_config(cfg);
  imcts::GenParams gen = gen_params_from_config(cfg);

  std::filesystem::create_directories(out_dir);
  imcts::RunCounters startup_counters;  // chat-pool construction cost, folded in below

  RunAssembly a;
  if (mode == "sim") {
    a = assemble_sim(cfg, params, *policy);
  } else if (mode == "live" || mode == "replay") {
    a = assemble_chat(cfg, params, *policy, task, gen, mode == "live", replay_path,
                      out_dir + "/recording.jsonl", startup_counters);
  } else {
    throw std::runtime_error("unknown mode '" + mode + "'");
  }
  a.deps.planner = a.planner.get();
  a.deps.backend = a.backend.get();
  a.deps.expander = a.expander.get();
  a.deps.value = a.value.get();
  a.deps.random_source = a.random_source.get();

  imcts::SearchReport report;
  if (resumed) {
    report = imcts::resume_search(std::move(*resumed), *policy, task, a.deps);
  } else {
    report = imcts::run_search(params, *policy, task, a.deps);
  }
  report.tree.counters.plan_calls += startup_counters.plan_calls;
  report.tree.counters.introspection_calls += startup_counters.introspection_calls;
  report.counters = report.tree.counters;

  imcts::save_state_file(report.tree, out_dir + "/tree.json");
  if (dump_format == "json") {
    std::ofstream(out_dir + "/dump.json") << imcts::dump_tree_json(report.tree);
  } else if (dump_format == "text") {
    std::ofstream(out_dir + "/dump.txt") << imcts::dump_tree_text(report.tree);
  } else {
    throw std::runtime_error("unknown dump format '" + dump_format + "'");
  }

  json rj;
  rj["policy"] = std::string(imcts::policy_name(*policy));
  rj["mode"] = mode;
  rj["seed"] = params.seed;
  rj["rollouts"] = report.tree.rollouts_done;
  rj["best_node"] = report.best_by_q_label;
  rj["dev_best_node"] = report.best_by_dev_label;
  rj["best_dev_score"] = report.best_dev_score;
  rj["best_test_score"] = report.best_test_score;
  rj["discovery_rollout"] = report.discovery_rollout;
  rj["wall_seconds"] = report.wall_seconds;
  rj["counters"] = {{"plan_calls", report.counters.plan_calls},
                    {"introspection_calls", report.counters.introspection_calls},
                    {"value_calls", report.counters.value_calls},
                    {"backend_stage_invocations", report.counters.backend_stage_invocations},
                    {"simulations", report.counters.simulations}};
  std::ofstream(out_dir + "/report.json") << rj.dump(2) << "\n";

  std::cout << "policy " << imcts::policy_name(*policy) << ", " << report.tree.rollouts_done
            << " simulations\n"
            << "best node " << report.best_by_q_label << ", dev best "
            << report.best_by_dev_label << " (dev " << imcts::format_double(report.best_dev_score)
            << ", test " << imcts::format_double(report.best_test_score) << ")\n"
            << "outputs in " << out_dir << "\n";
  return 0;
}

int cmd_ablate(const std::string& config_path, int seeds, std::uint64_t seed_base, int rollouts,
               double gamma, double alpha_explore, int width, const std::string& out_dir) {
  json cfg = config_path.empty() ? json::object() : read_json_file(config_path);

  imcts::AblationRequest request;
  request.shape = shape_from_config(cfg);
  request.base.stage_schedule = schedule_from_config(cfg);
  request.base.rollouts = rollouts;
  request.base.gamma = gamma;
  request.base.alpha_explore = alpha_explore;
  request.base.expansion_width = width;
  for (int i = 0; i < seeds; ++i) request.seeds.push_back(seed_base + static_cast<std::uint64_t>(i));

  imcts::AblationResult result = imcts::run_sim_ablation(request);

  std::filesystem::create_directories(out_dir);
  std::vector<imcts::RunRecord> records;
  for (const auto& row : result.rows)
    for (const auto& s : row.samples)
      records.push_back({"sim-" + std::to_string(s.seed), std::string(imcts::policy_name(row.policy)),
                         static_cast<int>(s.seed), s.best_quality, imcts::MetricKind::f1});
  std::ofstream(out_dir + "/results.csv") << imcts::write_results_csv(records);

  std::cout << "method,median_quality,mean_quality,median_discovery,median_to_near_opt\n";
  for (const auto& row : result.rows)
    std::cout << imcts::policy_name(row.policy) << ',' << imcts::format_double(row.median_quality)
              << ',' << imcts::format_double(row.mean_quality) << ','
              << imcts::format_double(row.median_discovery) << ','
              << imcts::format_double(row.median_to_near_opt) << "\n";
  std::cout << "results in " << out_dir << "/results.csv\n";
  return 0;
}

int cmd_score(const std::string& csv_path, const std::string& out_path) {
  auto records = imcts::parse_results_csv_file(csv_path);
  auto rows = imcts::aggregate_results(records);
  std::ostringstream out;
  out << "method,top1_rate,avg_ns,avg_best_ns\n";
  for (const auto& r : rows)
    out << r.method << ',' << imcts::format_double(r.top1_rate) << ','
        << imcts::format_double(r.avg_ns) << ',' << imcts::format_double(r.avg_best_ns) << "\n";
  if (!out_path.empty()) std::ofstream(out_path) << out.str();
  std::cout << out.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"introspective MCTS over staged ML pipelines"};
  app.require_subcommand(1);

  std::string config_path, policy = "imcts", mode = "sim", dump_format = "text";
  std::string out_dir = "imcts-out", resume_path, replay_path;
  int rollouts = 10, width = 5;
  double gamma = 0.2, alpha_explore = 2.0;
  std::uint64_t seed = 0;

  auto* run = app.add_subcommand("run", "run one search");
  run->add_option("--config", config_path, "task/config JSON");
  run->add_option("--policy", policy, "imcts|no-ine|no-hrm|vanilla|random");
  run->add_option("--rollouts", rollouts, "simulation budget k");
  run->add_option("--gamma", gamma, "hybrid-reward mixing constant");
  run->add_option("--alpha-explore", alpha_explore, "UCT exploration constant");
  run->add_option("--width", width, "children per expansion");
  run->add_option("--seed", seed, "64-bit run seed");
  run->add_option("--mode", mode, "sim|live|replay");
  run->add_option("--dump", dump_format, "text|json");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--resume", resume_path, "tree.json of an interrupted run");
  run->add_option("--replay", replay_path, "recording.jsonl for --mode replay");

  int seeds = 10;
  std::uint64_t seed_base = 1;
  auto* ablate = app.add_subcommand("ablate", "compare policies on simulated landscapes");
  ablate->add_option("--config", config_path, "landscape/config JSON");
  ablate->add_option("--seeds", seeds, "number of seeds");
  ablate->add_option("--seed-base", seed_base, "first seed");
  ablate->add_option("--rollouts", rollouts, "simulation budget k per run");
  ablate->add_option("--gamma", gamma, "hybrid-reward mixing constant");
  ablate->add_option("--alpha-explore", alpha_explore, "UCT exploration constant");
  ablate->add_option("--width", width, "children per expansion");
  ablate->add_option("--out", out_dir, "output directory");

  std::string csv_path, score_out;
  auto* score = app.add_subcommand("score", "aggregate a results CSV");
  score->add_option("--csv", csv_path, "results CSV (dataset,method,run,raw,kind)")->required();
  score->add_option("--out", score_out, "write the aggregate table here too");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(config_path, policy, rollouts, gamma, alpha_explore, width, seed, mode,
                     dump_format, out_dir, resume_path, replay_path);
    if (ablate->parsed())
      return cmd_ablate(config_path, seeds, seed_base, rollouts, gamma, alpha_explore, width,
                        out_dir);
    if (score->parsed()) return cmd_score(csv_path, score_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
