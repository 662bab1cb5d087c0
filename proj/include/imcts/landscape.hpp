#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "imcts/experimenter.hpp"
#include "imcts/introspection.hpp"
#include "imcts/pipeline.hpp"
#include "imcts/rng.hpp"

/**
 * Deterministic simulated optimization landscape.  Each stage exposes a
 * small universe of synthetic insights; a configuration's quality is a
 * seeded function of the chosen insight ids (per-stage ridge profiles plus
 * pairwise interactions), affinely rescaled so the full enumeration spans
 * exactly [0, 1].  The simulated backend, introspector, and value model all
 * read this one ground truth, differing only in their noise streams, which
 * is what makes policy comparisons meaningful offline.
 */

namespace imcts {

struct LandscapeShape {
  int insights_per_stage = 8;
  double noise_dev = 0.05;       // std-dev of dev/test score noise
  double noise_value = 0.1;      // std-dev of value-estimate noise
  double noise_lookahead = 0.05;  // std-dev of the introspector's one-step lookahead noise
  double ridge_sharpness = 0.8;     // width (in id units) of each stage's quality ridge
  double baseline_level = 0.55;     // stage contribution when no insight touches it
  double interaction_scale = 0.08;  // std-dev of pairwise id-interaction terms
  double weight_min = 0.4;          // per-stage weight range
  double weight_max = 1.0;
};

inline void validate(const LandscapeShape& s) {
  if (s.insights_per_stage < 2)
    throw std::invalid_argument("landscape: need at least 2 insights per stage");
  if (s.noise_dev < 0 || s.noise_value < 0 || s.noise_lookahead < 0)
    throw std::invalid_argument("landscape: negative noise level");
  if (!(s.ridge_sharpness > 0))
    throw std::invalid_argument("landscape: ridge_sharpness must be > 0");
  if (s.baseline_level < 0 || s.baseline_level > 1)
    throw std::invalid_argument("landscape: baseline_level must lie in [0, 1]");
  if (s.weight_min > s.weight_max || s.weight_min < 0)
    throw std::invalid_argument("landscape: bad weight range");
}

class SimLandscape {
 public:
  explicit SimLandscape(std::uint64_t seed, LandscapeShape shape = {})
      : seed_(seed), shape_(shape) {
    validate(shape_);
    const int m = shape_.insights_per_stage;
    RngStream geometry(seed, "landscape-geometry");
    for (int s = 0; s < kStageCount; ++s) {
      weight_[s] =
          shape_.weight_min + (shape_.weight_max - shape_.weight_min) * geometry.uniform01();
      peak_[s] = geometry.uniform01() * (m - 1);
    }
    interactions_.assign(static_cast<std::size_t>(kStageCount * kStageCount * m * m), 0.0);
    RngStream coupling(seed, "landscape-coupling");
    for (int s = 0; s < kStageCount; ++s)
      for (int t = s + 1; t < kStageCount; ++t)
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j)
            interactions_[pair_index(s, i, t, j)] =
                coupling.gauss() * shape_.interaction_scale;
    calibrate();
  }

  std::uint64_t seed() const { return seed_; }
  const LandscapeShape& shape() const { return shape_; }
  int universe_size(PipelineStage) const { return shape_.insights_per_stage; }

  /** Ground-truth quality of a configuration, in [0, 1] by construction. */
  double true_quality(const PipelineConfig& config) const {
    return rescale(raw_quality(ids_of(config)));
  }

  /** Best quality reachable when only `schedule` stages may carry insights. */
  double best_reachable(const std::vector<PipelineStage>& schedule) const {
    std::array<int, kStageCount> ids;
    ids.fill(-1);
    double best = raw_quality(ids);
    enumerate_schedule(schedule, 0, ids, best);
    return rescale(best);
  }

  // --- synthetic insight text -------------------------------------------

  /** Id-carrying insight text, e.g. "[FE#3] synthetic insight 3 for ...". */
  static std::string insight_text(PipelineStage stage, int id) {
    std::string out = "[";
    out += stage_tag(stage);
    out += '#';
    out += std::to_string(id);
    out += "] synthetic insight ";
    out += std::to_string(id);
    out += " for ";
    out += stage_name(stage);
    return out;
  }

  /** Parses the "[XX#n]" tag; nullopt when the text carries none. */
  static std::optional<int> tagged_id(std::string_view text) {
    if (text.empty() || text.front() != '[') return std::nullopt;
    std::size_t hash = text.find('#');
    std::size_t close = text.find(']');
    if (hash == std::string_view::npos || close == std::string_view::npos || hash > close)
      return std::nullopt;
    int id = 0;
    bool any = false;
    for (std::size_t i = hash + 1; i < close; ++i) {
      if (text[i] < '0' || text[i] > '9') return std::nullopt;
      id = id * 10 + (text[i] - '0');
      any = true;
    }
    return any ? std::optional<int>(id) : std::nullopt;
  }

  /** Insight text to universe id: tag when present, stable hash otherwise. */
  int id_of(std::string_view insight) const {
    if (auto id = tagged_id(insight)) return *id % shape_.insights_per_stage;
    return static_cast<int>(fnv1a64(insight) % static_cast<std::uint64_t>(shape_.insights_per_stage));
  }

 private:
  static std::string_view stage_tag(PipelineStage s) {
    switch (s) {
      case PipelineStage::eda: return "EDA";
      case PipelineStage::data_preprocessing: return "DP";
      case PipelineStage::feature_engineering: return "FE";
      case PipelineStage::model_training: return "MT";
      case PipelineStage::model_evaluation: return "ME";
    }
    return "??";
  }

  std::size_t pair_index(int s, int i, int t, int j) const {
    const int m = shape_.insights_per_stage;
    return static_cast<std::size_t>(((s * kStageCount + t) * m + i) * m + j);
  }

  std::array<int, kStageCount> ids_of(const PipelineConfig& config) const {
    std::array<int, kStageCount> ids;
    for (int s = 0; s < kStageCount; ++s)
      ids[s] = config.insights[s] ? id_of(*config.insights[s]) : -1;
    return ids;
  }

  /** Gaussian ridge profile around the stage's peak id. */
  double bump(int stage, int id) const {
    double d = (id - peak_[stage]) / shape_.ridge_sharpness;
    return std::exp(-0.5 * d * d);
  }

  // A stage nobody has touched still runs its baseline instruction, so it
  // contributes a flat mid-level term; an insight replaces that term with the
  // ridge profile, which can land well above or below the baseline.
  double raw_quality(const std::array<int, kStageCount>& ids) const {
    double q = 0.0;
    for (int s = 0; s < kStageCount; ++s)
      q += weight_[s] * (ids[s] >= 0 ? bump(s, ids[s]) : shape_.baseline_level);
    for (int s = 0; s < kStageCount; ++s)
      for (int t = s + 1; t < kStageCount; ++t)
        if (ids[s] >= 0 && ids[t] >= 0) q += interactions_[pair_index(s, ids[s], t, ids[t])];
    return q;
  }

  double rescale(double raw) const {
    if (max_raw_ == min_raw_) return 0.0;
    return (raw - min_raw_) / (max_raw_ - min_raw_);
  }

  /** Full enumeration of the (m+1)^5 configurations fixes the [0, 1] span. */
  void calibrate() {
    const int m = shape_.insights_per_stage;
    std::array<int, kStageCount> ids;
    min_raw_ = std::numeric_limits<double>::infinity();
    max_raw_ = -min_raw_;
    const std::int64_t total = static_cast<std::int64_t>(std::pow(m + 1, kStageCount));
    for (std::int64_t code = 0; code < total; ++code) {
      std::int64_t rest = code;
      for (int s = 0; s < kStageCount; ++s) {
        ids[s] = static_cast<int>(rest % (m + 1)) - 1;
        rest /= (m + 1);
      }
      double q = raw_quality(ids);
      min_raw_ = std::min(min_raw_, q);
      max_raw_ = std::max(max_raw_, q);
    }
  }

  void enumerate_schedule(const std::vector<PipelineStage>& schedule, std::size_t pos,
                          std::array<int, kStageCount>& ids, double& best) const {
    if (pos == schedule.size()) {
      best = std::max(best, raw_quality(ids));
      return;
    }
    int s = stage_index(schedule[pos]);
    for (int id = 0; id < shape_.insights_per_stage; ++id) {
      ids[s] = id;
      enumerate_schedule(schedule, pos + 1, ids, best);
    }
    ids[s] = -1;
  }

  std::uint64_t seed_;
  LandscapeShape shape_;
  std::array<double, kStageCount> weight_{};
  std::array<double, kStageCount> peak_{};
  std::vector<double> interactions_;
  double min_raw_ = 0.0;
  double max_raw_ = 1.0;
};

// ============================================================================
// Simulated oracles
// ============================================================================

/**
 * In-process backend scoring configurations straight off the landscape.
 * Dev and test scores add independent Gaussian noise keyed by the rollout
 * index, so interleaving or resuming never changes a draw.
 */
class SimulatedBackend : public ExperimentBackend {
 public:
  SimulatedBackend(const SimLandscape& landscape, std::uint64_t seed)
      : landscape_(landscape), seed_(seed) {}

  BackendResponse execute(const BackendRequest& request) override {
    BackendResponse resp;
    for (PipelineStage s : kAllStages) {
      int i = stage_index(s);
      if (request.reused_code[i]) {
        resp.artifact.stage_code[i] = *request.reused_code[i];
      } else {
        resp.artifact.stage_code[i] = stage_code(s, request.plan.instructions[i]);
        resp.generated_stages += 1;
      }
    }
    double q = landscape_.true_quality(request.config);
    RngStream train_noise(seed_, "train-noise",
                          static_cast<std::uint64_t>(request.rollout_index));
    RngStream dev_noise(seed_, "dev-noise", static_cast<std::uint64_t>(request.rollout_index));
    RngStream test_noise(seed_, "test-noise", static_cast<std::uint64_t>(request.rollout_index));
    // train sits at or above the true quality, the usual optimistic fit
    resp.train_score = clamp01(q + std::fabs(train_noise.gauss()) * landscape_.shape().noise_dev);
    resp.dev_score = clamp01(q + dev_noise.gauss() * landscape_.shape().noise_dev);
    resp.test_score = clamp01(q + test_noise.gauss() * landscape_.shape().noise_dev);
    resp.status = ExecStatus::ok;
    return resp;
  }

 private:
  static std::string stage_code(PipelineStage s, const std::string& instruction) {
    std::string slug;
    for (char c : std::string(stage_name(s)))
      slug += (c == ' ') ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return "def run_" + slug + "(data):\n    \"\"\"" + instruction + "\"\"\"\n    return data\n";
  }

  const SimLandscape& landscape_;
  std::uint64_t seed_;
};

/**
 * Simulated critic: one-step lookahead over the stage universe.  Scores
 * every unused id by the quality of the candidate insight taken in
 * isolation (it cannot see how the candidate interacts with the rest of the
 * parent configuration) plus lookahead noise, proposes the argmax (lowest
 * id on ties), and reports exhaustion as nullopt once siblings cover the
 * whole universe.
 */
inline std::optional<InsightProposal> sim_introspect(const SimLandscape& landscape,
                                                     const std::vector<std::string>& siblings,
                                                     PipelineStage stage, std::uint64_t seed,
                                                     std::uint64_t parent_ordinal, int slot) {
  std::vector<bool> used(static_cast<std::size_t>(landscape.universe_size(stage)), false);
  for (const auto& s : siblings) used[static_cast<std::size_t>(landscape.id_of(s))] = true;

  RngStream noise(seed, "lookahead-noise", parent_ordinal,
                  static_cast<std::uint64_t>(slot));
  int best_id = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int id = 0; id < landscape.universe_size(stage); ++id) {
    double eps = noise.gauss();  // one draw per candidate, used or not, keeps streams aligned
    if (used[static_cast<std::size_t>(id)]) continue;
    PipelineConfig candidate;
    candidate.insights[stage_index(stage)] = SimLandscape::insight_text(stage, id);
    double score = landscape.true_quality(candidate) + eps * landscape.shape().noise_lookahead;
    if (score > best_score) {
      best_score = score;
      best_id = id;
    }
  }
  if (best_id < 0) return std::nullopt;

  InsightProposal p;
  p.task_type = stage;
  p.critic_feedback = "simulated lookahead critique for " + std::string(stage_name(stage));
  p.insight = SimLandscape::insight_text(stage, best_id);
  return p;
}

/**
 * The no-introspection expansion source: a fixed per-stage pool of ids
 * drawn uniformly (seeded shuffle) once at startup, consumed in order.
 */
class StaticInsightPool {
 public:
  StaticInsightPool(const SimLandscape& landscape, int per_stage, std::uint64_t seed) {
    const int m = landscape.shape().insights_per_stage;
    for (PipelineStage s : kAllStages) {
      std::vector<int> ids(static_cast<std::size_t>(m));
      for (int i = 0; i < m; ++i) ids[static_cast<std::size_t>(i)] = i;
      RngStream shuffle(seed, "static-pool", static_cast<std::uint64_t>(stage_index(s)));
      for (int i = m - 1; i > 0; --i)
        std::swap(ids[static_cast<std::size_t>(i)],
                  ids[static_cast<std::size_t>(shuffle.uniform_int(0, i))]);
      ids.resize(static_cast<std::size_t>(std::min(per_stage, m)));
      auto& texts = pool_[stage_index(s)];
      for (int id : ids) texts.push_back(SimLandscape::insight_text(s, id));
    }
  }

  /** First pool entry not yet used by a sibling; nullopt when exhausted. */
  std::optional<std::string> take(PipelineStage stage,
                                  const std::vector<std::string>& used) const {
    for (const auto& text : pool_[stage_index(stage)]) {
      bool taken = false;
      for (const auto& u : used)
        if (u == text) taken = true;
      if (!taken) return text;
    }
    return std::nullopt;
  }

  const std::vector<std::string>& entries(PipelineStage stage) const {
    return pool_[stage_index(stage)];
  }

 private:
  std::array<std::vector<std::string>, kStageCount> pool_;
};

}  // namespace imcts
