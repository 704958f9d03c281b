#include "prefcore/profile.hpp"

#include <string>

#include "prefcore/error.hpp"

namespace prefcore {

namespace {

bool same(const Vec& a, const Vec& b) { return a.size() == b.size() && a == b; }

}  // namespace

bool UserProfile::operator==(const UserProfile& o) const {
  return id == o.id && same(p_cf, o.p_cf) && same(p_seq, o.p_seq) &&
         same(p_seq0, o.p_seq0) && same(p_ke, o.p_ke) && same(p_ke0, o.p_ke0) &&
         group == o.group && metadata == o.metadata && cold_start == o.cold_start;
}

UserProfile make_profile(UserId u, const ModelSet& models, const InteractionLog& log,
                         std::size_t dim) {
  UserProfile p;
  p.id = u;
  const auto d = static_cast<Eigen::Index>(dim);
  p.p_cf = models.cf && models.cf->knows_user(u)
               ? Vec(models.cf->P.row(raw(u)).transpose())
               : Vec::Zero(d);
  const auto steps = log.user_sequence(u);
  if (models.seq) {
    p.p_seq0 = models.seq->initial_state(u);
    p.p_seq = seq_state_after(*models.seq, p.p_seq0, steps);
  } else {
    p.p_seq0 = p.p_seq = Vec::Zero(d);
  }
  if (models.ke) {
    p.p_ke0 = models.ke->initial_state(u);
    p.p_ke = seq_state_after(*models.ke, p.p_ke0, steps);
  } else {
    p.p_ke0 = p.p_ke = Vec::Zero(d);
  }
  return p;
}

UserProfile update_profile(const UserProfile& profile,
                           std::span<const InteractionRecord> new_records,
                           const ModelSet& models, const ProfileUpdateConfig& config) {
  for (const auto& rec : new_records) {
    if (rec.user != profile.id) {
      throw DataError("update_profile: record for user " + std::to_string(raw(rec.user)) +
                      " applied to profile " + std::to_string(raw(profile.id)));
    }
  }
  UserProfile next = profile;
  if (new_records.empty()) return next;

  for (const auto& rec : new_records) {
    const double f = rec.feedback.value;
    if (models.seq) {
      next.p_seq = seq_step(*models.seq, next.p_seq, models.seq->embed(rec.action), f);
    }
    if (models.ke) {
      next.p_ke = seq_step(*models.ke, next.p_ke, models.ke->embed(rec.action), f);
    }
  }

  if (models.cf) {
    const auto& Q = models.cf->Q;
    for (int step = 0; step < config.local_steps; ++step) {
      for (const auto& rec : new_records) {
        if (raw(rec.action) >= static_cast<std::size_t>(Q.rows())) {
          throw DataError("update_profile: action " + std::to_string(raw(rec.action)) +
                          " outside CF model");
        }
        const Vec q = Q.row(raw(rec.action)).transpose();
        const double e = rec.feedback.value - next.p_cf.dot(q);
        next.p_cf -= config.local_rate * (-2.0 * e * q + 2.0 * config.l2 * next.p_cf);
      }
    }
  }
  return next;
}

GroupStats compute_group_stats(std::span<const UserProfile> profiles, std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  GroupStats stats;
  stats.global_centroid = Vec::Zero(d);
  std::size_t counted = 0;
  for (const auto& p : profiles) {
    if (p.cold_start || p.p_cf.size() != d) continue;
    stats.global_centroid += p.p_cf;
    ++counted;
    if (p.group) {
      auto [it, inserted] = stats.group_centroids.try_emplace(*p.group, Vec::Zero(d));
      it->second += p.p_cf;
      ++stats.group_sizes[*p.group];
    }
  }
  if (counted > 0) stats.global_centroid /= static_cast<double>(counted);
  for (auto& [g, c] : stats.group_centroids) {
    c /= static_cast<double>(stats.group_sizes[g]);
  }
  return stats;
}

UserProfile cold_start_profile(UserId u, const std::map<std::string, std::string>& metadata,
                               const GroupStats& stats, const ModelSet& models,
                               std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  UserProfile p;
  p.id = u;
  p.metadata = metadata;
  p.cold_start = true;
  p.p_cf = stats.global_centroid.size() == d ? stats.global_centroid : Vec::Zero(d);
  if (auto it = metadata.find(kPersonaKey); it != metadata.end()) {
    p.group = it->second;
    if (auto g = stats.group_centroids.find(it->second); g != stats.group_centroids.end()) {
      p.p_cf = g->second;
    }
  }
  auto start = [&](const std::shared_ptr<const SeqModel>& m) -> Vec {
    if (!m) return Vec::Zero(d);
    if (m->init_mode == InitMode::from_cf) return p.p_cf;
    return m->params.h0;
  };
  p.p_seq0 = p.p_seq = start(models.seq);
  p.p_ke0 = p.p_ke = start(models.ke);
  return p;
}

}  // namespace prefcore
