#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "prefcore/cf_model.hpp"
#include "prefcore/core.hpp"
#include "prefcore/engine.hpp"
#include "prefcore/simulator.hpp"

namespace prefcore {

// Named scalar metrics in insertion order plus provenance metadata.
class MetricReport {
 public:
  // Throws NumericError for non-finite values.
  void set(const std::string& name, double value);
  std::optional<double> get(const std::string& name) const;
  const std::vector<std::pair<std::string, double>>& metrics() const { return metrics_; }

  std::map<std::string, std::string> metadata;  // seed, config digest, k, ...

  bool operator==(const MetricReport&) const = default;

 private:
  std::vector<std::pair<std::string, double>> metrics_;
};

inline constexpr std::string_view kMetricsFormat = "prefcore-metrics/1";

// Two aligned columns: metadata first, then metrics to six decimals.
void write_report_text(std::ostream& out, const MetricReport& report);
// Version line, digest line, then "key=value" lines (metrics at full precision).
void write_report_kv(std::ostream& out, const MetricReport& report, const std::string& digest);

// Root mean squared error of cf_predict over the test records.
double evaluate_pointwise(const CfModel& model, const InteractionLog& test);

struct RankingMetrics {
  std::size_t k = 0;
  double ndcg = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t users = 0;  // users with at least one relevant test action
};

using ScoreFn = std::function<double(UserId, ActionId)>;

// Each user's actions 1..num_actions-1 are ranked by `score` (ties by id).
// Gains are the user's latest test feedback (0 when absent); feedback at or
// above the threshold counts as relevant. Throws DataError when no user has
// a relevant test action.
RankingMetrics evaluate_ranking(const ScoreFn& score, std::size_t num_actions,
                                const InteractionLog& test, std::size_t k,
                                double threshold = 0.75);
RankingMetrics evaluate_ranking(const CfModel& model, const InteractionLog& test,
                                std::size_t k, double threshold = 0.75);

struct PolicyReport {
  std::vector<std::uint64_t> seeds;
  std::vector<double> cumulative_feedback;  // per seed, averaged over episodes
  std::vector<double> exposure_disparity;   // per seed, averaged over episodes
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation across seeds
  double mean_disparity = 0.0;
};

// Runs the scenario loop `episodes` times per seed; seeds run concurrently.
PolicyReport evaluate_policy(const EngineConfig& engine, const ScenarioConfig& scenario,
                             std::size_t episodes, std::span<const std::uint64_t> seeds);

MetricReport to_metric_report(const PolicyReport& report);

}  // namespace prefcore
