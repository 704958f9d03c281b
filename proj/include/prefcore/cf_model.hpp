#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "prefcore/core.hpp"

namespace prefcore {

struct CfTrainConfig {
  std::size_t dim = 8;
  std::size_t num_users = 0;    // 0: infer from the log
  std::size_t num_actions = 0;  // 0: infer from the log
  int epochs = 100;
  double learning_rate = 0.05;
  double decay = 0.99;  // multiplicative step decay per epoch
  double l2 = 1e-4;
  double init_scale = 0.1;  // uniform(-s, s) initialisation
  bool full_batch = false;  // full-batch gradient descent instead of SGD
  std::uint64_t seed = 1;
};

// Latent-factor model: prediction is the inner product of a user row of P and
// an action row of Q.
struct CfModel {
  Mat P;  // users x d
  Mat Q;  // actions x d
  std::vector<bool> known_users;  // rows backed by at least one record

  std::size_t dim() const { return static_cast<std::size_t>(P.cols()); }
  std::size_t num_users() const { return static_cast<std::size_t>(P.rows()); }
  std::size_t num_actions() const { return static_cast<std::size_t>(Q.rows()); }
  bool knows_user(UserId u) const;

  bool operator==(const CfModel& other) const;
};

struct CfGradient {
  Mat P;
  Mat Q;
};

struct TrainTrace {
  std::vector<double> epoch_losses;
};

CfModel init_cf_model(std::size_t num_users, std::size_t num_actions,
                      std::size_t dim, double init_scale, std::uint64_t seed);

// Throws DataError for ids outside the model (cold-start users included).
double cf_predict(const CfModel& model, UserId u, ActionId a);

// Mean weighted objective over the records:
//   (1/N) sum_i w_i (f_i - p_u . q_a)^2 + (l2/N) sum_i (|p_u|^2 + |q_a|^2).
// Empty weights mean all ones.
double cf_loss(const CfModel& model, std::span<const InteractionRecord> records,
               std::span<const double> weights, double l2);

// Exact gradient of cf_loss.
CfGradient cf_gradient(const CfModel& model,
                       std::span<const InteractionRecord> records,
                       std::span<const double> weights, double l2);

// One pass of per-record SGD in a seeded shuffled order. Only rows listed in
// the records move.
void cf_sgd_epoch(CfModel& model, std::span<const InteractionRecord> records,
                  std::span<const double> weights, double learning_rate,
                  double l2, std::uint64_t order_seed);

// Shuffle seed for a given epoch; shared with federated clients so that one
// client over the full log reproduces centralised training.
std::uint64_t cf_epoch_seed(std::uint64_t seed, int epoch);
double cf_epoch_rate(const CfTrainConfig& config, int epoch);

CfModel cf_train(const InteractionLog& log, const CfTrainConfig& config,
                 std::span<const double> weights = {},
                 TrainTrace* trace = nullptr);

}  // namespace prefcore
