#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "imcts/landscape.hpp"
#include "imcts/rng.hpp"

using namespace imcts;

namespace {

PipelineConfig config_of(std::initializer_list<std::pair<PipelineStage, int>> ids) {
  PipelineConfig cfg;
  for (const auto& [stage, id] : ids)
    cfg.insights[stage_index(stage)] = SimLandscape::insight_text(stage, id);
  return cfg;
}

}  // namespace

TEST_CASE("rng streams are deterministic and purpose-separated") {
  RngStream a(42, "alpha", 3, 1);
  RngStream b(42, "alpha", 3, 1);
  RngStream c(42, "beta", 3, 1);
  bool all_equal = true, any_equal_cross = false;
  for (int i = 0; i < 16; ++i) {
    std::uint64_t va = a.next_u64();
    all_equal = all_equal && va == b.next_u64();
    any_equal_cross = any_equal_cross || va == c.next_u64();
  }
  CHECK(all_equal);
  CHECK_FALSE(any_equal_cross);

  RngStream u(7, "u");
  for (int i = 0; i < 1000; ++i) {
    double v = u.uniform01();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
  RngStream ints(7, "ints");
  for (int i = 0; i < 200; ++i) {
    int v = ints.uniform_int(2, 5);
    CHECK(v >= 2);
    CHECK(v <= 5);
  }
  CHECK_THROWS_AS(ints.uniform_int(3, 2), std::invalid_argument);
  RngStream g(7, "g");
  for (int i = 0; i < 100; ++i) CHECK(std::isfinite(g.gauss()));
}

TEST_CASE("landscape shape validation") {
  LandscapeShape bad;
  bad.insights_per_stage = 1;
  CHECK_THROWS_AS(SimLandscape(1, bad), std::invalid_argument);
  bad = {};
  bad.noise_dev = -0.1;
  CHECK_THROWS_AS(SimLandscape(1, bad), std::invalid_argument);
  bad = {};
  bad.ridge_sharpness = 0.0;
  CHECK_THROWS_AS(SimLandscape(1, bad), std::invalid_argument);
  bad = {};
  bad.baseline_level = 1.5;
  CHECK_THROWS_AS(SimLandscape(1, bad), std::invalid_argument);
  bad = {};
  bad.weight_min = 0.9;
  bad.weight_max = 0.5;
  CHECK_THROWS_AS(SimLandscape(1, bad), std::invalid_argument);
}

TEST_CASE("insight text carries a parsable id tag") {
  std::string text = SimLandscape::insight_text(PipelineStage::feature_engineering, 3);
  CHECK(text == "[FE#3] synthetic insight 3 for Feature Engineering");
  CHECK(SimLandscape::tagged_id(text) == 3);
  CHECK(SimLandscape::tagged_id("[MT#12] anything") == 12);
  CHECK_FALSE(SimLandscape::tagged_id("no tag here").has_value());
  CHECK_FALSE(SimLandscape::tagged_id("[FE] missing number").has_value());
  CHECK_FALSE(SimLandscape::tagged_id("[FE#x] not a digit").has_value());

  SimLandscape landscape(5);
  CHECK(landscape.id_of(text) == 3);
  CHECK(landscape.id_of("[DP#13] wraps around") == 13 % 8);
  int h1 = landscape.id_of("untagged free-form insight");
  int h2 = landscape.id_of("untagged free-form insight");
  CHECK(h1 == h2);
  CHECK(h1 >= 0);
  CHECK(h1 < 8);
}

TEST_CASE("true quality is deterministic, bounded, and spans [0, 1]") {
  LandscapeShape shape;
  shape.insights_per_stage = 3;
  SimLandscape a(123, shape);
  SimLandscape b(123, shape);
  SimLandscape other(124, shape);

  double min_seen = 1e9, max_seen = -1e9;
  bool seeds_differ = false;
  const int m = shape.insights_per_stage;
  // full enumeration over the mixed lattice (ids -1..m-1 per stage)
  for (int i0 = -1; i0 < m; ++i0)
    for (int i1 = -1; i1 < m; ++i1)
      for (int i2 = -1; i2 < m; ++i2)
        for (int i3 = -1; i3 < m; ++i3)
          for (int i4 = -1; i4 < m; ++i4) {
            PipelineConfig cfg;
            PipelineStage stages[] = {PipelineStage::eda, PipelineStage::data_preprocessing,
                                      PipelineStage::feature_engineering,
                                      PipelineStage::model_training,
                                      PipelineStage::model_evaluation};
            int ids[] = {i0, i1, i2, i3, i4};
            for (int s = 0; s < 5; ++s)
              if (ids[s] >= 0)
                cfg.insights[s] = SimLandscape::insight_text(stages[s], ids[s]);
            double q = a.true_quality(cfg);
            CHECK(q >= 0.0);
            CHECK(q <= 1.0);
            CHECK(q == b.true_quality(cfg));
            if (q != other.true_quality(cfg)) seeds_differ = true;
            min_seen = std::min(min_seen, q);
            max_seen = std::max(max_seen, q);
          }
  CHECK(min_seen == 0.0);  // calibration pins the span exactly
  CHECK(max_seen == 1.0);
  CHECK(seeds_differ);
}

TEST_CASE("best_reachable equals a brute-force maximum over the schedule") {
  LandscapeShape shape;
  shape.insights_per_stage = 4;
  SimLandscape landscape(9, shape);
  std::vector<PipelineStage> schedule = {PipelineStage::feature_engineering,
                                         PipelineStage::model_training};
  double brute = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      brute = std::max(brute, landscape.true_quality(config_of(
                                  {{PipelineStage::feature_engineering, i},
                                   {PipelineStage::model_training, j}})));
  // the no-insight baseline competes too
  brute = std::max(brute, landscape.true_quality({}));
  CHECK(landscape.best_reachable(schedule) == brute);
}

TEST_CASE("sim_introspect proposes the exact argmax when noise is off") {
  LandscapeShape shape;
  shape.noise_lookahead = 0.0;
  SimLandscape landscape(31, shape);

  std::vector<std::string> siblings;
  std::set<int> proposed;
  for (int slot = 0; slot < shape.insights_per_stage; ++slot) {
    auto p = sim_introspect(landscape, siblings, PipelineStage::feature_engineering, 31,
                            0, slot);
    REQUIRE(p.has_value());
    CHECK(p->task_type == PipelineStage::feature_engineering);

    // brute-force argmax over unused ids, lowest id on ties
    int best_id = -1;
    double best_q = -1e18;
    for (int id = 0; id < shape.insights_per_stage; ++id) {
      if (proposed.count(id)) continue;
      double q = landscape.true_quality(config_of({{PipelineStage::feature_engineering, id}}));
      if (q > best_q) {
        best_q = q;
        best_id = id;
      }
    }
    CHECK(landscape.id_of(p->insight) == best_id);

    proposed.insert(landscape.id_of(p->insight));
    siblings.push_back(p->insight);
  }
  // universe exhausted
  CHECK_FALSE(sim_introspect(landscape, siblings, PipelineStage::feature_engineering, 31, 0, 99)
                  .has_value());
  // monotone: the first proposal is the true per-stage optimum
  CHECK(proposed.size() == std::size_t(shape.insights_per_stage));
}

TEST_CASE("sim_introspect draws are keyed by parent and slot") {
  SimLandscape landscape(77);
  std::vector<std::string> none;
  auto a = sim_introspect(landscape, none, PipelineStage::model_training, 77, 4, 2);
  auto b = sim_introspect(landscape, none, PipelineStage::model_training, 77, 4, 2);
  REQUIRE(a.has_value());
  REQUIRE(b.has_value());
  CHECK(a->insight == b->insight);  // same key, same draw, same proposal
}

TEST_CASE("informed proposals beat uniform draws on average") {
  int informed_wins = 0;
  double informed_sum = 0.0, uniform_sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    SimLandscape landscape(seed);
    std::vector<std::string> none;
    auto p = sim_introspect(landscape, none, PipelineStage::feature_engineering, seed, 0, 0);
    REQUIRE(p.has_value());
    double informed =
        landscape.true_quality(config_of({{PipelineStage::feature_engineering,
                                           landscape.id_of(p->insight)}}));
    double uniform = 0.0;
    for (int id = 0; id < 8; ++id)
      uniform +=
          landscape.true_quality(config_of({{PipelineStage::feature_engineering, id}})) / 8.0;
    informed_sum += informed;
    uniform_sum += uniform;
    if (informed >= uniform) ++informed_wins;
  }
  CHECK(informed_sum > uniform_sum);
  CHECK(informed_wins >= 40);
}

TEST_CASE("static pool is a seeded sample without duplicates") {
  SimLandscape landscape(13);
  StaticInsightPool pool(landscape, 5, 13);
  StaticInsightPool same(landscape, 5, 13);
  StaticInsightPool shifted(landscape, 5, 14);

  bool any_differs = false;
  for (PipelineStage s : kAllStages) {
    const auto& entries = pool.entries(s);
    CHECK(entries.size() == 5);
    CHECK(entries == same.entries(s));
    if (entries != shifted.entries(s)) any_differs = true;
    std::set<std::string> unique(entries.begin(), entries.end());
    CHECK(unique.size() == entries.size());
    for (const auto& text : entries) {
      int id = landscape.id_of(text);
      CHECK(id >= 0);
      CHECK(id < 8);
    }
  }
  CHECK(any_differs);

  // take() returns the first entry not already used
  PipelineStage fe = PipelineStage::feature_engineering;
  auto first = pool.take(fe, {});
  REQUIRE(first.has_value());
  CHECK(*first == pool.entries(fe)[0]);
  auto second = pool.take(fe, {*first});
  REQUIRE(second.has_value());
  CHECK(*second == pool.entries(fe)[1]);
  std::vector<std::string> all(pool.entries(fe).begin(), pool.entries(fe).end());
  CHECK_FALSE(pool.take(fe, all).has_value());

  // asking for more than the universe truncates to the universe
  StaticInsightPool oversized(landscape, 99, 13);
  CHECK(oversized.entries(fe).size() == 8);
}

TEST_CASE("simulated backend keys noise by rollout and reuses code verbatim") {
  SimLandscape landscape(21);
  SimulatedBackend backend(landscape, 21);
  BaselinePlanner planner;
  RunCounters c;

  BackendRequest req;
  req.task.metric_name = "F1";
  req.plan = planner.make_plan(req.task, {}, c);
  req.config = config_of({{PipelineStage::feature_engineering, 2}});
  req.rollout_index = 3;
  req.reused_code[0] = "verbatim reused block";

  BackendResponse r1 = backend.execute(req);
  BackendResponse r2 = backend.execute(req);
  CHECK(r1.status == ExecStatus::ok);
  CHECK(r1.dev_score == r2.dev_score);  // same rollout index, same draw
  CHECK(r1.test_score == r2.test_score);
  CHECK(r1.dev_score != r1.test_score);  // separate noise streams
  CHECK(r1.artifact.stage_code[0] == "verbatim reused block");
  CHECK(r1.generated_stages == 4);
  for (int i = 1; i < kStageCount; ++i) CHECK_FALSE(r1.artifact.stage_code[i].empty());

  req.rollout_index = 4;
  BackendResponse r3 = backend.execute(req);
  CHECK(r3.dev_score != r1.dev_score);

  CHECK(r1.dev_score >= 0.0);
  CHECK(r1.dev_score <= 1.0);

  // the noisy score tracks the true quality
  double q = landscape.true_quality(req.config);
  CHECK(std::abs(r1.dev_score - q) < 0.5);
}
