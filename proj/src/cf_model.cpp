#include "prefcore/cf_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "prefcore/error.hpp"
#include "prefcore/random.hpp"

namespace prefcore {

namespace {

double weight_at(std::span<const double> weights, std::size_t i) {
  return weights.empty() ? 1.0 : weights[i];
}

void check_ids(const CfModel& model, const InteractionRecord& rec) {
  if (raw(rec.user) >= model.num_users() || raw(rec.action) >= model.num_actions()) {
    throw DataError("record (user " + std::to_string(raw(rec.user)) + ", action " +
                    std::to_string(raw(rec.action)) + ") outside model dimensions");
  }
}

void check_weights(std::span<const InteractionRecord> records,
                   std::span<const double> weights) {
  if (!weights.empty() && weights.size() != records.size()) {
    throw DataError("weight count " + std::to_string(weights.size()) +
                    " does not match record count " + std::to_string(records.size()));
  }
}

}  // namespace

bool CfModel::knows_user(UserId u) const {
  return raw(u) < known_users.size() && known_users[raw(u)];
}

bool CfModel::operator==(const CfModel& other) const {
  return P.rows() == other.P.rows() && P.cols() == other.P.cols() &&
         Q.rows() == other.Q.rows() && P == other.P && Q == other.Q &&
         known_users == other.known_users;
}

CfModel init_cf_model(std::size_t num_users, std::size_t num_actions,
                      std::size_t dim, double init_scale, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x63665f696e6974ULL}));
  CfModel m;
  m.P.resize(static_cast<Eigen::Index>(num_users), static_cast<Eigen::Index>(dim));
  m.Q.resize(static_cast<Eigen::Index>(num_actions), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < m.P.size(); ++i) {
    m.P.data()[i] = uniform(rng, -init_scale, init_scale);
  }
  for (Eigen::Index i = 0; i < m.Q.size(); ++i) {
    m.Q.data()[i] = uniform(rng, -init_scale, init_scale);
  }
  m.known_users.assign(num_users, false);
  return m;
}

double cf_predict(const CfModel& model, UserId u, ActionId a) {
  if (raw(u) >= model.num_users()) {
    throw DataError("unknown user " + std::to_string(raw(u)));
  }
  if (raw(a) >= model.num_actions()) {
    throw DataError("unknown action " + std::to_string(raw(a)));
  }
  return model.P.row(raw(u)).dot(model.Q.row(raw(a)));
}

double cf_loss(const CfModel& model, std::span<const InteractionRecord> records,
               std::span<const double> weights, double l2) {
  check_weights(records, weights);
  if (records.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    check_ids(model, rec);
    const auto p = model.P.row(raw(rec.user));
    const auto q = model.Q.row(raw(rec.action));
    const double e = rec.feedback.value - p.dot(q);
    total += weight_at(weights, i) * e * e + l2 * (p.squaredNorm() + q.squaredNorm());
  }
  return total / static_cast<double>(records.size());
}

CfGradient cf_gradient(const CfModel& model,
                       std::span<const InteractionRecord> records,
                       std::span<const double> weights, double l2) {
  check_weights(records, weights);
  CfGradient g{Mat::Zero(model.P.rows(), model.P.cols()),
               Mat::Zero(model.Q.rows(), model.Q.cols())};
  if (records.empty()) return g;
  const double inv_n = 1.0 / static_cast<double>(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    check_ids(model, rec);
    const auto p = model.P.row(raw(rec.user));
    const auto q = model.Q.row(raw(rec.action));
    const double e = rec.feedback.value - p.dot(q);
    const double w = weight_at(weights, i);
    g.P.row(raw(rec.user)) += inv_n * (-2.0 * w * e * q + 2.0 * l2 * p);
    g.Q.row(raw(rec.action)) += inv_n * (-2.0 * w * e * p + 2.0 * l2 * q);
  }
  return g;
}

std::uint64_t cf_epoch_seed(std::uint64_t seed, int epoch) {
  return derive_seed(seed, {0x6366ULL, static_cast<std::uint64_t>(epoch)});
}

double cf_epoch_rate(const CfTrainConfig& config, int epoch) {
  return config.learning_rate * std::pow(config.decay, epoch);
}

void cf_sgd_epoch(CfModel& model, std::span<const InteractionRecord> records,
                  std::span<const double> weights, double learning_rate,
                  double l2, std::uint64_t order_seed) {
  check_weights(records, weights);
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(order_seed);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i : order) {
    const auto& rec = records[i];
    check_ids(model, rec);
    auto p = model.P.row(raw(rec.user));
    auto q = model.Q.row(raw(rec.action));
    const double e = rec.feedback.value - p.dot(q);
    const double w = weight_at(weights, i);
    const Eigen::RowVectorXd gp = -2.0 * w * e * q + 2.0 * l2 * p;
    const Eigen::RowVectorXd gq = -2.0 * w * e * p + 2.0 * l2 * q;
    p -= learning_rate * gp;
    q -= learning_rate * gq;
  }
}

CfModel cf_train(const InteractionLog& log, const CfTrainConfig& config,
                 std::span<const double> weights, TrainTrace* trace) {
  if (log.empty()) throw DataError("cf_train: empty interaction log");
  const auto records = log.records();
  check_weights(records, weights);
  const std::size_t users = std::max(config.num_users, user_extent(log));
  const std::size_t actions = std::max(config.num_actions, action_extent(log));
  CfModel model = init_cf_model(users, actions, config.dim, config.init_scale, config.seed);
  for (const auto& rec : records) model.known_users[raw(rec.user)] = true;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double rate = cf_epoch_rate(config, epoch);
    if (config.full_batch) {
      const CfGradient g = cf_gradient(model, records, weights, config.l2);
      model.P -= rate * g.P;
      model.Q -= rate * g.Q;
    } else {
      cf_sgd_epoch(model, records, weights, rate, config.l2,
                   cf_epoch_seed(config.seed, epoch));
    }
    const double loss = cf_loss(model, records, weights, config.l2);
    if (!std::isfinite(loss)) {
      throw NumericError("cf_train diverged at epoch " + std::to_string(epoch + 1) +
                         " (non-finite loss)");
    }
    if (trace) trace->epoch_losses.push_back(loss);
  }
  return model;
}

}  // namespace prefcore
