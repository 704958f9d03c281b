#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "prefcore/catalog.hpp"
#include "prefcore/cf_model.hpp"
#include "prefcore/config.hpp"
#include "prefcore/core.hpp"
#include "prefcore/fairness.hpp"
#include "prefcore/profile.hpp"
#include "prefcore/propensity.hpp"
#include "prefcore/ranking.hpp"
#include "prefcore/retrieval.hpp"
#include "prefcore/seq_model.hpp"

namespace prefcore {

// What the perception stage hands to the engine for one user at one tick.
struct ObservationEvent {
  UserId user{};
  Tick tick = 0;
  ContextTags context;
};

enum class Policy { rs, popularity, random };

std::string_view policy_name(Policy p);
Policy parse_policy(std::string_view name);

struct EngineConfig {
  Policy policy = Policy::rs;
  MixtureWeights weights;
  std::size_t retrieve_k = 10;
  std::size_t dim = 8;
  bool use_cf = true;
  bool use_seq = false;
  bool use_ke = false;
  CfTrainConfig cf;
  SeqTrainConfig seq;
  int seq_refit_epochs = 10;  // warm-start epochs on scheduled retrains
  ProfileUpdateConfig profile_update;
  Tick retrain_every = 50;  // ticks between scheduled retrains; 0: never
  bool fairness = false;
  double fairness_epsilon = 0.1;
  std::size_t window = 50;  // decision history and exposure window
  std::uint64_t seed = 1;

  // Reads the [engine] keys of a config; absent keys keep their defaults.
  static EngineConfig from_config(const Config& config);
};

// Named component slots. Retriever and reranker are mandatory.
struct ComponentRegistry {
  ModelSet profilers;
  std::shared_ptr<const Retriever> retriever;
  std::shared_ptr<const Reranker> reranker;
  std::optional<FairnessConstraint> fairness;
  std::shared_ptr<const PropensityTable> propensities;

  std::string describe() const;
};

enum class Slot { profilers, retriever, reranker, fairness, propensities };

ComponentRegistry swap_component(ComponentRegistry registry, std::shared_ptr<const Retriever> r);
ComponentRegistry swap_component(ComponentRegistry registry, std::shared_ptr<const Reranker> r);
ComponentRegistry swap_component(ComponentRegistry registry, FairnessConstraint c);
ComponentRegistry swap_component(ComponentRegistry registry, ModelSet profilers);
ComponentRegistry swap_component(ComponentRegistry registry,
                                 std::shared_ptr<const PropensityTable> p);
// Empties an optional slot; throws UsageError for retriever and reranker.
ComponentRegistry remove_component(ComponentRegistry registry, Slot slot);

// A user's answer to one decision: feedback on the executed action and,
// optionally, a follow-up naming the action they actually wanted.
struct FeedbackEvent {
  Feedback on_chosen;
  struct Followup {
    ActionId target{};
    double value = 1.0;
  };
  std::optional<Followup> followup;
};

struct MemoryState {
  EngineConfig config;
  Catalog catalog;  // embeddings bound to the registered profilers
  ComponentRegistry registry;
  std::map<UserId, UserProfile> profiles;
  std::map<UserId, std::map<std::string, std::string>> metadata;
  GroupStats group_stats;
  InteractionLog log;
  std::deque<DecisionRepresentation> history;  // at most config.window
  std::map<std::uint64_t, DecisionRepresentation> pending;  // awaiting feedback
  ExposureHistory exposure;
  ActionStats stats;
  std::vector<PreferencePair> pair_buffer;
  std::uint64_t next_decision = 1;
};

// Fresh state with components chosen by the config's policy. Records in
// `initial` are logged, and when the policy trains models they are fitted
// before the state is returned.
MemoryState make_state(const Catalog& catalog, const EngineConfig& config,
                       InteractionLog initial = {},
                       std::map<UserId, std::map<std::string, std::string>> metadata = {});

// retrieve -> rerank -> optional fair_rerank. Pure in the state; the chosen
// action is the top-1 of the final list, or the no-op with an empty ranking
// when nothing survives the context filter.
DecisionRepresentation decide(const MemoryState& state, const ObservationEvent& obs);

// Registers a decision so feedback can be attributed to it.
MemoryState remember(MemoryState state, const DecisionRepresentation& decision);

// Logs the feedback (tick 2t for the executed action, 2t + 1 for a
// follow-up), routes follow-ups into the pairwise buffer, and advances the
// user's profile. Throws DataError for an unknown or already answered
// decision.
MemoryState observe_feedback(MemoryState state, std::uint64_t decision_id,
                             const FeedbackEvent& feedback);

// Refits the registered profilers on the whole log and rebuilds every
// profile. A no-op for policies that train nothing.
MemoryState retrain(MemoryState state);

// Convenience wrapper that threads one MemoryState through the loop.
class Engine {
 public:
  explicit Engine(MemoryState state) : state_(std::move(state)) {}

  DecisionRepresentation step(const ObservationEvent& obs);
  void feedback(std::uint64_t decision_id, const FeedbackEvent& fb);
  void retrain();
  void swap(ComponentRegistry registry);
  // Runs a scheduled retrain when the tick is a positive multiple of
  // retrain_every.
  void tick_finished(Tick tick);

  const MemoryState& state() const { return state_; }
  MemoryState& mutable_state() { return state_; }

 private:
  MemoryState state_;
};

}  // namespace prefcore
