#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "prefcore/catalog.hpp"
#include "prefcore/cf_model.hpp"
#include "prefcore/core.hpp"

namespace prefcore {

// How an action's knowledge vector is combined with its sequential embedding.
enum class BindMode { hadamard, concat };

// Where a user's recurrent state starts.
enum class InitMode { from_cf, shared };

// Trainable parameters of the gated recurrent cell plus the action table.
// The cell input is the action embedding with the scalar feedback appended,
// so the input weights are d x (d + 1).
struct SeqParams {
  Mat Wz, Uz, Wr, Ur, Wn, Un;
  Vec bz, br, bn;
  Mat Q;     // actions x d
  Vec h0;    // shared initial state
  Mat proj;  // d x 2d; used by concat binding only

  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;

  static SeqParams zeros_like(const SeqParams& other);
};

struct SeqTrainConfig {
  std::size_t dim = 8;
  std::size_t num_actions = 0;  // 0: infer from log or catalog
  int epochs = 40;
  double learning_rate = 0.05;
  double decay = 0.99;
  double l2 = 1e-4;  // on action embeddings, per occurrence
  double init_scale = 0.1;
  std::size_t bptt_window = 16;  // 0: full backpropagation through time
  double clip_norm = 5.0;        // 0: no clipping
  InitMode init_mode = InitMode::from_cf;
  BindMode bind = BindMode::hadamard;
  std::uint64_t seed = 1;
};

struct SeqModel {
  SeqParams params;
  Mat knowledge;  // actions x d; empty for the plain sequential model
  BindMode bind = BindMode::hadamard;
  InitMode init_mode = InitMode::shared;
  std::map<UserId, Vec> user_init;  // fixed starting states copied from CF

  std::size_t dim() const { return static_cast<std::size_t>(params.Q.cols()); }
  std::size_t num_actions() const { return static_cast<std::size_t>(params.Q.rows()); }
  bool knowledge_bound() const { return knowledge.size() != 0; }

  // Embedding the cell consumes and scores against: q^Seq, or the
  // knowledge-bound q^KE when knowledge is attached.
  Vec embed(ActionId a) const;
  Vec initial_state(UserId u) const;

  bool operator==(const SeqModel& other) const;
};

// One user's sequence with optional per-position loss weights.
struct WeightedSequence {
  UserId user{};
  std::vector<SequenceStep> steps;
  std::vector<double> weights;  // empty: all ones
};

// Elementwise product of q^Seq and k.
Vec knowledge_bind(const Vec& q_seq, const Vec& k);

// Advances a recurrent state by one observed (action, feedback) pair.
Vec seq_step(const SeqModel& model, const Vec& state,
             const Vec& prev_action_embedding, double prev_feedback);

// Scores h_t . e_{a_t} along a sequence, starting from the user's initial
// state (the state for position 1 is the initial state itself).
std::vector<double> seq_scores(const SeqModel& model, UserId u,
                               std::span<const SequenceStep> steps);

// State after consuming every step: the state that scores the next action.
Vec seq_state_after(const SeqModel& model, const Vec& start,
                    std::span<const SequenceStep> steps);

// Summed objective: sum_u sum_t w_t (f_t - h_t . e_{a_t})^2 + l2 sum_t |q_{a_t}|^2.
double seq_loss(const SeqModel& model, std::span<const WeightedSequence> sequences,
                double l2);

// Gradient of seq_loss. A non-zero window truncates backpropagation to
// chunks of that many positions; window 0 gives the exact gradient.
SeqParams seq_gradient(const SeqModel& model,
                       std::span<const WeightedSequence> sequences, double l2,
                       std::size_t window = 0);

SeqModel init_seq_model(std::size_t num_actions, const SeqTrainConfig& config,
                        Mat knowledge = {});

// Per-user sequences of length >= 2 from the log, in user id order.
std::vector<WeightedSequence> training_sequences(const InteractionLog& log);

// Truncated-BPTT SGD on the sequential loss; throws DataError when no user
// has two or more records.
SeqModel seq_train(const InteractionLog& log, const SeqTrainConfig& config,
                   const CfModel* cf = nullptr, TrainTrace* trace = nullptr);

// seq_train over knowledge-bound embeddings taken from the catalog.
SeqModel ke_train(const InteractionLog& log, const Catalog& catalog,
                  const SeqTrainConfig& config, const CfModel* cf = nullptr,
                  TrainTrace* trace = nullptr);

// Runs epochs of truncated-BPTT SGD on an existing model in place. Epoch
// numbering continues from first_epoch for the step decay.
void seq_fit(SeqModel& model, std::span<const WeightedSequence> sequences,
             const SeqTrainConfig& config, int first_epoch, int epochs,
             TrainTrace* trace = nullptr);

}  // namespace prefcore
