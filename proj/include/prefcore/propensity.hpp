#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "prefcore/cf_model.hpp"
#include "prefcore/core.hpp"

namespace prefcore {

// Context tag marking records from the uniformly exposed calibration slice.
inline constexpr const char* kCalibrationTag = "calibration";

struct PropensityConfig {
  double clip_floor = 0.05;
  std::size_t num_users = 0;    // 0: distinct users in the log
  std::size_t num_actions = 0;  // 0: distinct non-calibration actions in the log
};

// Probability that (user, action) was shown in the logged data.
class PropensityTable {
 public:
  PropensityTable() = default;
  explicit PropensityTable(double clip_floor) : floor_(clip_floor) {}

  // Stores the value clipped to [floor, 1].
  void set(UserId u, ActionId a, double b);
  std::optional<double> find(UserId u, ActionId a) const;
  // Throws DataError when the pair has no propensity.
  double at(UserId u, ActionId a) const;

  double clip_floor() const { return floor_; }
  std::size_t size() const { return values_.size(); }
  const std::map<std::pair<UserId, ActionId>, double>& values() const { return values_; }

  // Set when no calibration slice was found and the estimate fell back to
  // per-action exposure frequency.
  bool fallback = false;
  // Per feedback level b(y) (naive-Bayes path only), unclipped.
  std::array<double, 5> level_raw{};

 private:
  double floor_ = 0.05;
  std::map<std::pair<UserId, ActionId>, double> values_;
};

// Naive-Bayes estimate per feedback level y:
//   b(y) = P(y | shown) P(shown) / P(y),
// with P(y) taken from the calibration-tagged records. Calibration pairs get
// the calibration exposure rate. Without calibration records every pair gets
// n_a / |U| and `fallback` is set.
PropensityTable estimate_propensities(const InteractionLog& log,
                                      const PropensityConfig& config = {});

// Per-record weights 1 / b_{u,a}; throws DataError for any record without a
// propensity.
std::vector<double> ips_weights(const InteractionLog& log, const PropensityTable& table);

CfModel cf_train_ips(const InteractionLog& log, const PropensityTable& table,
                     const CfTrainConfig& config, TrainTrace* trace = nullptr);

// Estimates of the full-exposure mean squared error from logged records:
//   naive: mean over records of e^2
//   ips:   (1 / (|U| |A|)) sum over records of e^2 / b
template <class Predict>
double naive_loss_estimate(std::span<const InteractionRecord> records, Predict predict) {
  double sum = 0.0;
  for (const auto& r : records) {
    const double e = r.feedback.value - predict(r.user, r.action);
    sum += e * e;
  }
  return records.empty() ? 0.0 : sum / static_cast<double>(records.size());
}

template <class Predict>
double ips_loss_estimate(std::span<const InteractionRecord> records,
                         const PropensityTable& table, std::size_t num_users,
                         std::size_t num_actions, Predict predict) {
  double sum = 0.0;
  for (const auto& r : records) {
    const double e = r.feedback.value - predict(r.user, r.action);
    sum += e * e / table.at(r.user, r.action);
  }
  return sum / (static_cast<double>(num_users) * static_cast<double>(num_actions));
}

bool is_calibration(const InteractionRecord& rec);

}  // namespace prefcore
