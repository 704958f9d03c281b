#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "prefcore/catalog.hpp"
#include "prefcore/cf_model.hpp"
#include "prefcore/core.hpp"
#include "prefcore/profile.hpp"

namespace prefcore {

// Inner product r = p . q.
double score(const Vec& p, const Vec& q);

// Convex weights over the three preference representations.
struct MixtureWeights {
  double cf = 0.4;
  double seq = 0.4;
  double ke = 0.2;

  // Zeroes unavailable components and rescales the rest to sum to one.
  MixtureWeights renormalized(bool has_cf, bool has_seq, bool has_ke) const;
  bool operator==(const MixtureWeights&) const = default;
};

// sum_m w_m (p_m . q_m) over the components with non-zero weight.
double mixture_score(const UserProfile& profile, const ActionEntry& action,
                     const MixtureWeights& weights);

enum class PairwiseKind { bpr, hinge };

// bpr(x) = ln(1 + e^-x), evaluated without overflow; hinge(x) = max(0, 1 - x).
double pairwise_loss(double diff, PairwiseKind kind);
double pairwise_loss_derivative(double diff, PairwiseKind kind);

// (user, preferred) > (user, dispreferred).
class PreferencePair {
 public:
  PreferencePair(UserId user, ActionId preferred, ActionId dispreferred);

  UserId user() const { return user_; }
  ActionId preferred() const { return preferred_; }
  ActionId dispreferred() const { return dispreferred_; }

  bool operator==(const PreferencePair&) const = default;

 private:
  UserId user_;
  ActionId preferred_;
  ActionId dispreferred_;
};

// Pairs from each user's latest feedback per action, wherever f > f'.
std::vector<PreferencePair> pairs_from_log(const InteractionLog& log);

struct PairwiseConfig {
  PairwiseKind kind = PairwiseKind::bpr;
  int epochs = 50;
  double learning_rate = 0.05;
  double decay = 0.99;
  double l2 = 1e-4;
  std::uint64_t seed = 1;
};

// sum_pairs sigma(r_ua - r_ua') + l2 sum_pairs (|p_u|^2 + |q_a|^2 + |q_a'|^2)
double pairwise_objective(const CfModel& model, std::span<const PreferencePair> pairs,
                          PairwiseKind kind, double l2);
CfGradient pairwise_gradient(const CfModel& model, std::span<const PreferencePair> pairs,
                             PairwiseKind kind, double l2);

// Per-pair SGD on the CF embeddings.
CfModel train_pairwise(CfModel model, std::span<const PreferencePair> pairs,
                       const PairwiseConfig& config, TrainTrace* trace = nullptr);

double pairwise_accuracy(const CfModel& model, std::span<const PreferencePair> pairs);

// -sum_i log(exp(r_i) / sum_{j>=i} exp(r_j)) for scores listed in ideal order.
double listwise_loss(std::span<const double> scores_in_ideal_order);
std::vector<double> listwise_gradient(std::span<const double> scores_in_ideal_order);

// Descending feedback, ties by ascending action id.
std::vector<ActionId> ideal_order(std::vector<std::pair<ActionId, double>> feedback);

struct ListwiseConfig {
  int epochs = 50;
  double learning_rate = 0.05;
  double decay = 0.99;
  double l2 = 1e-4;
  std::uint64_t seed = 1;
};

// Per-user lists (latest feedback per action) in ideal order.
std::vector<std::pair<UserId, std::vector<ActionId>>> listwise_lists(const InteractionLog& log);

double listwise_objective(const CfModel& model,
                          std::span<const std::pair<UserId, std::vector<ActionId>>> lists,
                          double l2);
CfGradient listwise_model_gradient(
    const CfModel& model, std::span<const std::pair<UserId, std::vector<ActionId>>> lists,
    double l2);

CfModel train_listwise(CfModel model, const InteractionLog& log, const ListwiseConfig& config,
                       TrainTrace* trace = nullptr);

// sum_i (2^f_i - 1) / log2(i + 1), positions counted from 1.
double dcg(std::span<const double> feedback_in_rank_order);
double dcg_at_k(std::span<const double> feedback_in_rank_order, std::size_t k);
// dcg over the ideal (descending) arrangement of the same values; 0/0 := 1.
double ndcg(std::span<const double> feedback_in_rank_order);
double ndcg_at_k(std::span<const double> feedback_in_rank_order, std::size_t k);

enum class FollowupMode { top1_only, above_all };

// A follow-up naming candidate b yields b > top-1 (or b > every action ranked
// above b). Throws DataError when b is not a candidate.
std::vector<PreferencePair> pairs_from_followup(const DecisionRepresentation& decision,
                                                ActionId target,
                                                FollowupMode mode = FollowupMode::top1_only);

// Tab-separated "rank, action, score" rows, scores to six decimals.
void write_ranked_list(std::ostream& out, const RankedList& list);

}  // namespace prefcore
