#pragma once

#include <functional>
#include <string>
#include <vector>

#include "prefcore/cf_model.hpp"
#include "prefcore/core.hpp"

namespace prefcore {

enum class LocalMode { full_batch, sgd };

struct FederatedConfig {
  LocalMode local_mode = LocalMode::full_batch;
  int local_epochs = 1;
  double learning_rate = 0.05;
  double decay = 0.99;
  double l2 = 1e-4;
  std::uint64_t seed = 1;
};

// Parameter change proposed by one client.
struct ClientUpdate {
  CfGradient delta;  // local parameters minus the global ones
  std::size_t shard_size = 0;
};

// A device holding one shard of the interaction log. The records stay inside
// the client; the only thing it hands out is a parameter delta.
class FederatedClient {
 public:
  FederatedClient(std::string name, std::vector<InteractionRecord> records);

  const std::string& name() const { return name_; }
  std::size_t shard_size() const { return records_.size(); }

  // Local training from the shared global parameters. `round` selects the
  // step size and the shuffle stream exactly as an epoch index does in
  // centralised training.
  ClientUpdate local_update(const CfModel& global, const FederatedConfig& config,
                            int round) const;

 private:
  std::string name_;
  std::vector<InteractionRecord> records_;
};

// One client per distinct group label, clients ordered by label. Record order
// within a shard follows the log.
std::vector<FederatedClient> partition_clients(
    const InteractionLog& log, const std::function<std::string(UserId)>& group_of);

// Clients train concurrently; the server adds the shard-size-weighted mean of
// the deltas. Throws DataError when every client is empty.
CfModel federated_round(const CfModel& global, const std::vector<FederatedClient>& clients,
                        const FederatedConfig& config, int round = 0);

// Rounds 0..rounds-1 from the same initialisation cf_train would use.
CfModel federated_train(const std::vector<FederatedClient>& clients,
                        std::size_t num_users, std::size_t num_actions,
                        const CfTrainConfig& init, const FederatedConfig& config,
                        int rounds);

}  // namespace prefcore
