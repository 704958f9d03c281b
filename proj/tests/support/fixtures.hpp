#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "prefcore/cf_model.hpp"
#include "prefcore/core.hpp"
#include "prefcore/random.hpp"
#include "prefcore/seq_model.hpp"

namespace prefcore::testing {

// Low-rank ground truth with an observed/held-out split over the cells.
struct PlantedMatrix {
  Mat truth;  // users x actions; column 0 unused
  InteractionLog observed;
  InteractionLog held_out;
};

inline PlantedMatrix planted_rank(std::size_t users, std::size_t actions, std::size_t rank,
                                  double observed_fraction, double max_factor,
                                  std::uint64_t seed) {
  Rng rng(seed);
  Mat P(static_cast<Eigen::Index>(users), static_cast<Eigen::Index>(rank));
  Mat Q(static_cast<Eigen::Index>(actions + 1), static_cast<Eigen::Index>(rank));
  for (Eigen::Index i = 0; i < P.size(); ++i) P.data()[i] = uniform(rng, 0.0, max_factor);
  for (Eigen::Index i = 0; i < Q.size(); ++i) Q.data()[i] = uniform(rng, 0.0, max_factor);
  PlantedMatrix pm;
  pm.truth = P * Q.transpose();
  pm.truth.col(0).setZero();
  std::vector<InteractionRecord> obs, held;
  for (std::size_t u = 0; u < users; ++u) {
    Tick t = 0;
    for (std::size_t a = 1; a <= actions; ++a) {
      const double f = pm.truth(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(a));
      InteractionRecord r{t++, user_id(static_cast<std::uint32_t>(u)),
                          action_id(static_cast<std::uint32_t>(a)), Feedback(f), {}};
      (uniform(rng, 0.0, 1.0) < observed_fraction ? obs : held).push_back(r);
    }
  }
  pm.observed = InteractionLog::from_records(std::move(obs));
  pm.held_out = InteractionLog::from_records(std::move(held));
  return pm;
}

// Gaussian noise on every feedback value, clamped back into [0, 1].
inline InteractionLog with_noise(const InteractionLog& log, double sd, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, sd);
  std::vector<InteractionRecord> out;
  for (auto rec : log.records()) {
    rec.feedback = Feedback(std::clamp(rec.feedback.value + noise(rng), 0.0, 1.0));
    out.push_back(rec);
  }
  return InteractionLog::from_records(std::move(out));
}

// Central finite differences over every coordinate of `params`.
inline std::vector<double> numeric_gradient(std::vector<std::span<double>> params,
                                            const std::function<double()>& f,
                                            double h = 1e-6) {
  std::vector<double> g;
  for (auto block : params) {
    for (double& x : block) {
      const double x0 = x;
      x = x0 + h;
      const double up = f();
      x = x0 - h;
      const double down = f();
      x = x0;
      g.push_back((up - down) / (2.0 * h));
    }
  }
  return g;
}

inline std::vector<double> flatten(std::vector<std::span<const double>> blocks) {
  std::vector<double> out;
  for (auto b : blocks) out.insert(out.end(), b.begin(), b.end());
  return out;
}

// |a - b| / max(|a|, |b|) in the Euclidean norm.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
  return std::sqrt(diff) / denom;
}

inline std::vector<std::span<double>> cf_blocks(CfModel& m) {
  return {{m.P.data(), static_cast<std::size_t>(m.P.size())},
          {m.Q.data(), static_cast<std::size_t>(m.Q.size())}};
}

inline std::vector<double> cf_flat(const CfGradient& g) {
  return flatten({{g.P.data(), static_cast<std::size_t>(g.P.size())},
                  {g.Q.data(), static_cast<std::size_t>(g.Q.size())}});
}

// Random records with distinct (user, t) and feedback on the 5-level grid.
inline std::vector<InteractionRecord> random_records(std::size_t users, std::size_t actions,
                                                     std::size_t per_user, Rng& rng) {
  std::vector<InteractionRecord> recs;
  for (std::size_t u = 0; u < users; ++u) {
    for (std::size_t t = 0; t < per_user; ++t) {
      const auto a = static_cast<std::uint32_t>(
          1 + std::uniform_int_distribution<std::size_t>(0, actions - 2)(rng));
      recs.push_back({static_cast<Tick>(t), user_id(static_cast<std::uint32_t>(u)),
                      action_id(a), Feedback(quantize_feedback(uniform(rng, 0.0, 1.0))), {}});
    }
  }
  return recs;
}

}  // namespace prefcore::testing
