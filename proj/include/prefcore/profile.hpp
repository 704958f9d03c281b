#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "prefcore/cf_model.hpp"
#include "prefcore/core.hpp"
#include "prefcore/seq_model.hpp"

namespace prefcore {

struct UserProfile {
  UserId id{};
  Vec p_cf;
  Vec p_seq;
  Vec p_seq0;  // starting state; replaying the history from it yields p_seq
  Vec p_ke;
  Vec p_ke0;
  std::optional<std::string> group;
  std::map<std::string, std::string> metadata;
  bool cold_start = false;

  bool operator==(const UserProfile& o) const;
};

// Trained models shared read-only by every profile operation.
struct ModelSet {
  std::shared_ptr<const CfModel> cf;
  std::shared_ptr<const SeqModel> seq;
  std::shared_ptr<const SeqModel> ke;
};

struct ProfileUpdateConfig {
  int local_steps = 1;  // passes over the new records when refreshing p_cf
  double local_rate = 0.05;
  double l2 = 1e-4;
};

// Builds a profile for a user the models were trained on, replaying the
// user's history to obtain the current recurrent states.
UserProfile make_profile(UserId u, const ModelSet& models, const InteractionLog& log,
                         std::size_t dim);

// Advances p_seq and p_ke through the new records and fine-tunes p_cf with
// the action embeddings frozen. Returns a new profile.
UserProfile update_profile(const UserProfile& profile,
                           std::span<const InteractionRecord> new_records,
                           const ModelSet& models, const ProfileUpdateConfig& config);

// Persona-level and global centroids of p_cf.
struct GroupStats {
  Vec global_centroid;
  std::map<std::string, Vec> group_centroids;
  std::map<std::string, std::size_t> group_sizes;
};

GroupStats compute_group_stats(std::span<const UserProfile> profiles, std::size_t dim);

// Metadata key that names a user's persona group.
inline constexpr const char* kPersonaKey = "persona";

// New-user profile: p_cf from the persona centroid when the metadata names a
// known group, else the global centroid; recurrent states start from each
// model's configured initial state.
UserProfile cold_start_profile(UserId u, const std::map<std::string, std::string>& metadata,
                               const GroupStats& stats, const ModelSet& models,
                               std::size_t dim);

}  // namespace prefcore
