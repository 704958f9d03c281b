#include "prefcore/federated.hpp"

#include <cmath>
#include <future>
#include <map>

#include "prefcore/error.hpp"

namespace prefcore {

FederatedClient::FederatedClient(std::string name, std::vector<InteractionRecord> records)
    : name_(std::move(name)), records_(std::move(records)) {}

ClientUpdate FederatedClient::local_update(const CfModel& global,
                                           const FederatedConfig& config, int round) const {
  ClientUpdate up;
  up.shard_size = records_.size();
  if (records_.empty()) {
    up.delta.P = Mat::Zero(global.P.rows(), global.P.cols());
    up.delta.Q = Mat::Zero(global.Q.rows(), global.Q.cols());
    return up;
  }
  CfModel local = global;
  const double rate = config.learning_rate * std::pow(config.decay, round);
  for (int e = 0; e < config.local_epochs; ++e) {
    if (config.local_mode == LocalMode::full_batch) {
      const CfGradient g = cf_gradient(local, records_, {}, config.l2);
      local.P -= rate * g.P;
      local.Q -= rate * g.Q;
    } else {
      const int stream = round * config.local_epochs + e;
      cf_sgd_epoch(local, records_, {}, rate, config.l2, cf_epoch_seed(config.seed, stream));
    }
  }
  up.delta.P = local.P - global.P;
  up.delta.Q = local.Q - global.Q;
  return up;
}

std::vector<FederatedClient> partition_clients(
    const InteractionLog& log, const std::function<std::string(UserId)>& group_of) {
  std::map<std::string, std::vector<InteractionRecord>> shards;
  for (const auto& rec : log.records()) shards[group_of(rec.user)].push_back(rec);
  std::vector<FederatedClient> clients;
  for (auto& [name, recs] : shards) clients.emplace_back(name, std::move(recs));
  return clients;
}

CfModel federated_round(const CfModel& global, const std::vector<FederatedClient>& clients,
                        const FederatedConfig& config, int round) {
  std::size_t total = 0;
  for (const auto& c : clients) total += c.shard_size();
  if (total == 0) throw DataError("federated_round: every client is empty");
  if (config.local_epochs < 1) throw UsageError("federated_round: local_epochs must be >= 1");

  std::vector<std::future<ClientUpdate>> pending;
  pending.reserve(clients.size());
  for (const auto& c : clients) {
    pending.push_back(std::async(std::launch::async, [&c, &global, &config, round] {
      return c.local_update(global, config, round);
    }));
  }

  Mat dP = Mat::Zero(global.P.rows(), global.P.cols());
  Mat dQ = Mat::Zero(global.Q.rows(), global.Q.cols());
  for (auto& f : pending) {
    const ClientUpdate up = f.get();
    const double w = static_cast<double>(up.shard_size) / static_cast<double>(total);
    dP += w * up.delta.P;
    dQ += w * up.delta.Q;
  }
  CfModel next = global;
  next.P += dP;
  next.Q += dQ;
  if (!next.P.allFinite() || !next.Q.allFinite()) {
    throw NumericError("federated round " + std::to_string(round + 1) + " diverged");
  }
  return next;
}

CfModel federated_train(const std::vector<FederatedClient>& clients,
                        std::size_t num_users, std::size_t num_actions,
                        const CfTrainConfig& init, const FederatedConfig& config,
                        int rounds) {
  CfModel model = init_cf_model(num_users, num_actions, init.dim, init.init_scale, init.seed);
  // Known users are the ones with records somewhere; each client reports a
  // non-zero delta row only for its own users.
  for (int r = 0; r < rounds; ++r) {
    CfModel next = federated_round(model, clients, config, r);
    for (Eigen::Index u = 0; u < next.P.rows(); ++u) {
      if (next.P.row(u) != model.P.row(u)) next.known_users[static_cast<std::size_t>(u)] = true;
    }
    model = std::move(next);
  }
  return model;
}

}  // namespace prefcore
