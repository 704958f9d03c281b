#include "prefcore/propensity.hpp"

#include <algorithm>
#include <set>

#include "prefcore/error.hpp"

namespace prefcore {

void PropensityTable::set(UserId u, ActionId a, double b) {
  values_[{u, a}] = std::clamp(b, floor_, 1.0);
}

std::optional<double> PropensityTable::find(UserId u, ActionId a) const {
  auto it = values_.find({u, a});
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

double PropensityTable::at(UserId u, ActionId a) const {
  auto b = find(u, a);
  if (!b) {
    throw DataError("no propensity for user " + std::to_string(raw(u)) + ", action " +
                    std::to_string(raw(a)));
  }
  return *b;
}

bool is_calibration(const InteractionRecord& rec) {
  return rec.context.count(kCalibrationTag) != 0;
}

PropensityTable estimate_propensities(const InteractionLog& log,
                                      const PropensityConfig& config) {
  if (log.empty()) throw DataError("estimate_propensities: empty interaction log");
  if (!(config.clip_floor > 0.0 && config.clip_floor <= 1.0)) {
    throw UsageError("propensity clip floor must lie in (0, 1]");
  }

  std::set<UserId> users;
  std::set<ActionId> actions;
  std::size_t n_cal = 0;
  std::size_t n_obs = 0;
  std::array<double, 5> cal_counts{};
  std::array<double, 5> obs_counts{};
  for (const auto& r : log.records()) {
    users.insert(r.user);
    actions.insert(r.action);
    const int y = feedback_level(r.feedback.value);
    if (is_calibration(r)) {
      ++n_cal;
      cal_counts[y] += 1.0;
    } else {
      ++n_obs;
      obs_counts[y] += 1.0;
    }
  }
  const double U = static_cast<double>(config.num_users ? config.num_users : users.size());
  const double A =
      static_cast<double>(config.num_actions ? config.num_actions : actions.size());

  PropensityTable table(config.clip_floor);

  if (n_cal == 0) {
    table.fallback = true;
    std::map<ActionId, std::set<UserId>> exposed;
    for (const auto& r : log.records()) exposed[r.action].insert(r.user);
    for (const auto& r : log.records()) {
      table.set(r.user, r.action, static_cast<double>(exposed[r.action].size()) / U);
    }
    return table;
  }

  const double p_shown = static_cast<double>(n_obs) / (U * A);
  for (int y = 0; y < 5; ++y) {
    const double p_y = cal_counts[y] / static_cast<double>(n_cal);
    const double p_y_shown = n_obs ? obs_counts[y] / static_cast<double>(n_obs) : 0.0;
    // A level never seen in calibration carries no evidence of selection.
    table.level_raw[y] = p_y > 0.0 ? p_y_shown * p_shown / p_y : 1.0;
  }

  const double cal_rate = static_cast<double>(n_cal) / (U * A);
  for (const auto& r : log.records()) {
    if (is_calibration(r)) {
      if (!table.find(r.user, r.action)) table.set(r.user, r.action, cal_rate);
    }
  }
  for (const auto& r : log.records()) {
    if (!is_calibration(r)) {
      table.set(r.user, r.action, table.level_raw[feedback_level(r.feedback.value)]);
    }
  }
  return table;
}

std::vector<double> ips_weights(const InteractionLog& log, const PropensityTable& table) {
  std::vector<double> w;
  w.reserve(log.size());
  for (const auto& r : log.records()) w.push_back(1.0 / table.at(r.user, r.action));
  return w;
}

CfModel cf_train_ips(const InteractionLog& log, const PropensityTable& table,
                     const CfTrainConfig& config, TrainTrace* trace) {
  const auto weights = ips_weights(log, table);
  return cf_train(log, config, weights, trace);
}

}  // namespace prefcore
