#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "imcts/text.hpp"

/**
 * Score normalization and cross-run aggregation.  Raw metrics of different
 * polarity (F1-style higher-is-better, RMSE lower-is-better) are mapped
 * onto a common higher-is-better unit scale before any averaging or
 * ranking.
 */

namespace imcts {

enum class MetricKind { f1, f1_weighted, rmse };

inline constexpr std::string_view metric_kind_name(MetricKind k) {
  switch (k) {
    case MetricKind::f1: return "f1";
    case MetricKind::f1_weighted: return "f1_weighted";
    case MetricKind::rmse: return "rmse";
  }
  return "?";
}

inline std::optional<MetricKind> parse_metric_kind(std::string_view text) {
  if (text == "f1") return MetricKind::f1;
  if (text == "f1_weighted") return MetricKind::f1_weighted;
  if (text == "rmse") return MetricKind::rmse;
  return std::nullopt;
}

/**
 * Normalized Score.  F1 variants already live on [0, 1] and pass through;
 * RMSE maps through 1 / (1 + ln(1 + raw)), so 0 -> 1, e-1 -> 0.5, and the
 * score decays toward 0 as the error grows.
 */
inline double normalized_score(MetricKind kind, double raw) {
  switch (kind) {
    case MetricKind::f1:
    case MetricKind::f1_weighted:
      if (raw < 0.0 || raw > 1.0)
        throw std::invalid_argument("normalized_score: F1 outside [0, 1]");
      return raw;
    case MetricKind::rmse:
      if (raw < 0.0) throw std::invalid_argument("normalized_score: negative RMSE");
      return 1.0 / (1.0 + std::log1p(raw));
  }
  throw std::invalid_argument("normalized_score: unknown metric kind");
}

// ============================================================================
// Result tables
// ============================================================================

struct RunRecord {
  std::string dataset;
  std::string method;
  int run = 0;
  double raw = 0.0;
  MetricKind kind = MetricKind::f1;
};

inline constexpr std::string_view kResultsCsvHeader = "dataset,method,run,raw,kind";

/** Parses the results CSV (`dataset,method,run,raw,kind`); strict header. */
inline std::vector<RunRecord> parse_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("results csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultsCsvHeader)
    throw std::invalid_argument("results csv: expected header '" +
                                std::string(kResultsCsvHeader) + "', got '" + line + "'");
  std::vector<RunRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream fs(line);
    std::string field;
    while (std::getline(fs, field, ',')) fields.push_back(field);
    if (fields.size() != 5)
      throw std::invalid_argument("results csv: line " + std::to_string(line_no) +
                                  ": expected 5 fields");
    RunRecord rec;
    rec.dataset = fields[0];
    rec.method = fields[1];
    try {
      rec.run = std::stoi(fields[2]);
      rec.raw = std::stod(fields[3]);
    } catch (const std::exception&) {
      throw std::invalid_argument("results csv: line " + std::to_string(line_no) +
                                  ": bad number");
    }
    auto kind = parse_metric_kind(fields[4]);
    if (!kind)
      throw std::invalid_argument("results csv: line " + std::to_string(line_no) +
                                  ": unknown metric kind '" + fields[4] + "'");
    rec.kind = *kind;
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::vector<RunRecord> parse_results_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("results csv: cannot open " + path);
  return parse_results_csv(in);
}

inline std::string write_results_csv(const std::vector<RunRecord>& records) {
  std::string out(kResultsCsvHeader);
  out += '\n';
  for (const auto& r : records) {
    out += r.dataset;
    out += ',';
    out += r.method;
    out += ',';
    out += std::to_string(r.run);
    out += ',';
    out += format_double(r.raw);
    out += ',';
    out += metric_kind_name(r.kind);
    out += '\n';
  }
  return out;
}

struct MethodAggregate {
  std::string method;
  double avg_ns = 0.0;       // mean over datasets of per-dataset mean NS
  double avg_best_ns = 0.0;  // mean over datasets of per-dataset best NS
  double top1_rate = 0.0;    // share of datasets whose best NS this method holds
};

/**
 * Per-method aggregation across datasets.  Within a dataset, a method's
 * runs are normalized then averaged (and maxed for "best"); across
 * datasets, the per-dataset values are averaged and first places by best
 * NS are counted, a tied first place splitting equally among the tied
 * methods.
 */
inline std::vector<MethodAggregate> aggregate_results(const std::vector<RunRecord>& records) {
  if (records.empty()) throw std::invalid_argument("aggregate_results: no records");

  std::map<std::string, std::map<std::string, std::vector<double>>> by_dataset;
  for (const auto& r : records)
    by_dataset[r.dataset][r.method].push_back(normalized_score(r.kind, r.raw));

  std::map<std::string, MethodAggregate> out;
  std::map<std::string, int> dataset_counts;
  for (const auto& [dataset, methods] : by_dataset) {
    double top_best = -1.0;
    std::map<std::string, double> best_of;
    for (const auto& [method, scores] : methods) {
      double sum = 0.0, best = 0.0;
      for (double s : scores) {
        sum += s;
        best = std::max(best, s);
      }
      best_of[method] = best;
      top_best = std::max(top_best, best);
      auto& agg = out[method];
      agg.method = method;
      agg.avg_ns += sum / static_cast<double>(scores.size());
      agg.avg_best_ns += best;
      dataset_counts[method] += 1;
    }
    int tied = 0;
    for (const auto& [method, best] : best_of)
      if (best == top_best) ++tied;
    for (const auto& [method, best] : best_of)
      if (best == top_best) out[method].top1_rate += 1.0 / static_cast<double>(tied);
  }

  std::vector<MethodAggregate> rows;
  const auto datasets = static_cast<double>(by_dataset.size());
  for (auto& [method, agg] : out) {
    const double n = static_cast<double>(dataset_counts[method]);
    agg.avg_ns /= n;
    agg.avg_best_ns /= n;
    agg.top1_rate /= datasets;
    rows.push_back(agg);
  }
  return rows;
}

}  // namespace imcts
