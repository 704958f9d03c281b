#include "prefcore/engine.hpp"

#include <algorithm>
#include <sstream>

#include "prefcore/error.hpp"

namespace prefcore {

std::string_view policy_name(Policy p) {
  switch (p) {
    case Policy::rs: return "rs";
    case Policy::popularity: return "popularity";
    case Policy::random: return "random";
  }
  return "rs";
}

Policy parse_policy(std::string_view name) {
  if (name == "rs") return Policy::rs;
  if (name == "popularity") return Policy::popularity;
  if (name == "random") return Policy::random;
  throw UsageError("unknown policy '" + std::string(name) +
                   "' (expected rs, popularity, or random)");
}

EngineConfig EngineConfig::from_config(const Config& config) {
  const Config c = config.section("engine");
  EngineConfig e;
  e.policy = parse_policy(c.get_string("policy", std::string(policy_name(e.policy))));
  e.weights.cf = c.get_double("weight_cf", e.weights.cf);
  e.weights.seq = c.get_double("weight_seq", e.weights.seq);
  e.weights.ke = c.get_double("weight_ke", e.weights.ke);
  e.retrieve_k = c.get_uint("retrieve_k", e.retrieve_k);
  e.dim = c.get_uint("dim", e.dim);
  if (auto models = c.get("models")) {
    e.use_cf = e.use_seq = e.use_ke = false;
    std::stringstream ss(*models);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item.erase(std::remove(item.begin(), item.end(), ' '), item.end());
      if (item == "cf") e.use_cf = true;
      else if (item == "seq") e.use_seq = true;
      else if (item == "ke") e.use_ke = true;
      else if (!item.empty()) throw UsageError("unknown model '" + item + "' in engine.models");
    }
  }
  e.cf.epochs = static_cast<int>(c.get_int("cf_epochs", e.cf.epochs));
  e.cf.learning_rate = c.get_double("cf_learning_rate", e.cf.learning_rate);
  e.cf.l2 = c.get_double("cf_l2", e.cf.l2);
  e.seq.epochs = static_cast<int>(c.get_int("seq_epochs", e.seq.epochs));
  e.seq.learning_rate = c.get_double("seq_learning_rate", e.seq.learning_rate);
  e.seq.l2 = c.get_double("seq_l2", e.seq.l2);
  e.seq_refit_epochs = static_cast<int>(c.get_int("seq_refit_epochs", e.seq_refit_epochs));
  e.profile_update.local_steps =
      static_cast<int>(c.get_int("profile_local_steps", e.profile_update.local_steps));
  e.profile_update.local_rate = c.get_double("profile_local_rate", e.profile_update.local_rate);
  e.retrain_every = c.get_int("retrain_every", e.retrain_every);
  e.fairness = c.get_bool("fairness", e.fairness);
  e.fairness_epsilon = c.get_double("fairness_epsilon", e.fairness_epsilon);
  e.window = c.get_uint("window", e.window);
  e.seed = c.get_uint("seed", e.seed);
  if (e.dim == 0) throw UsageError("engine.dim must be at least 1");
  if (e.retrieve_k == 0) throw UsageError("engine.retrieve_k must be at least 1");
  if (e.window == 0) throw UsageError("engine.window must be at least 1");
  return e;
}

std::string ComponentRegistry::describe() const {
  std::ostringstream out;
  out << "retriever=" << (retriever ? retriever->name() : "none")
      << " reranker=" << (reranker ? reranker->name() : "none") << " profilers=";
  std::string p;
  if (profilers.cf) p += "cf,";
  if (profilers.seq) p += "seq,";
  if (profilers.ke) p += "ke,";
  if (p.empty()) p = "none,";
  p.pop_back();
  out << p << " fairness=" << (fairness ? "on" : "off")
      << " propensities=" << (propensities ? "on" : "off");
  return out.str();
}

ComponentRegistry swap_component(ComponentRegistry reg, std::shared_ptr<const Retriever> r) {
  if (!r) throw UsageError("the retriever slot is mandatory");
  reg.retriever = std::move(r);
  return reg;
}

ComponentRegistry swap_component(ComponentRegistry reg, std::shared_ptr<const Reranker> r) {
  if (!r) throw UsageError("the reranker slot is mandatory");
  reg.reranker = std::move(r);
  return reg;
}

ComponentRegistry swap_component(ComponentRegistry reg, FairnessConstraint c) {
  c.validate();
  reg.fairness = std::move(c);
  return reg;
}

ComponentRegistry swap_component(ComponentRegistry reg, ModelSet profilers) {
  reg.profilers = std::move(profilers);
  return reg;
}

ComponentRegistry swap_component(ComponentRegistry reg,
                                 std::shared_ptr<const PropensityTable> p) {
  reg.propensities = std::move(p);
  return reg;
}

ComponentRegistry remove_component(ComponentRegistry reg, Slot slot) {
  switch (slot) {
    case Slot::retriever: throw UsageError("the retriever slot is mandatory");
    case Slot::reranker: throw UsageError("the reranker slot is mandatory");
    case Slot::profilers: reg.profilers = {}; break;
    case Slot::fairness: reg.fairness.reset(); break;
    case Slot::propensities: reg.propensities.reset(); break;
  }
  return reg;
}

namespace {

std::shared_ptr<const Reranker> reranker_for(Policy p) {
  switch (p) {
    case Policy::popularity: return std::make_shared<PopularityReranker>();
    case Policy::random: return std::make_shared<RandomReranker>();
    case Policy::rs: break;
  }
  return std::make_shared<MixtureReranker>();
}

std::map<std::string, std::string> metadata_of(const MemoryState& s, UserId u) {
  auto it = s.metadata.find(u);
  return it == s.metadata.end() ? std::map<std::string, std::string>{} : it->second;
}

UserProfile profile_or_cold(const MemoryState& s, UserId u) {
  if (auto it = s.profiles.find(u); it != s.profiles.end()) return it->second;
  return cold_start_profile(u, metadata_of(s, u), s.group_stats, s.registry.profilers,
                            s.config.dim);
}

}  // namespace

MemoryState make_state(const Catalog& catalog, const EngineConfig& config,
                       InteractionLog initial,
                       std::map<UserId, std::map<std::string, std::string>> metadata) {
  if (catalog.dim() != config.dim) {
    throw UsageError("catalog dimension " + std::to_string(catalog.dim()) +
                     " differs from engine.dim " + std::to_string(config.dim));
  }
  MemoryState s;
  s.config = config;
  s.catalog = bind_embeddings(catalog, {});
  s.metadata = std::move(metadata);
  s.log = std::move(initial);
  s.exposure = ExposureHistory(config.window);
  s.registry.retriever = std::make_shared<ExactRetriever>();
  s.registry.reranker = reranker_for(config.policy);
  if (config.fairness) {
    s.registry.fairness =
        FairnessConstraint::from_catalog(catalog, config.fairness_epsilon, config.window);
  }
  for (const auto& rec : s.log.records()) s.stats.record(rec.action, rec.feedback.value);
  return retrain(std::move(s));
}

DecisionRepresentation decide(const MemoryState& s, const ObservationEvent& obs) {
  DecisionRepresentation d;
  d.id = s.next_decision;
  d.user = obs.user;
  d.tick = obs.tick;
  d.context = obs.context;
  d.ranking.user = obs.user;

  const bool known = s.profiles.count(obs.user) != 0;
  const UserProfile profile = profile_or_cold(s, obs.user);
  d.provenance = known ? "profile" : "cold-start";

  const auto& models = s.registry.profilers;
  // Without CF embeddings the similarity search cannot rank, so every
  // admissible action goes through to the reranker.
  const std::size_t k = models.cf ? s.config.retrieve_k : s.catalog.size();
  const auto candidates = s.registry.retriever->retrieve(obs.context, profile, s.catalog, k);
  d.audit.push_back(s.registry.describe());
  d.audit.push_back("retrieved " + std::to_string(candidates.size()) + " candidates (k=" +
                    std::to_string(k) + ")");
  if (candidates.empty()) {
    d.chosen = kNoOpAction;
    d.provenance += "; no-op: no admissible action";
    return d;
  }

  RerankRequest req;
  req.candidates = &candidates;
  req.profile = &profile;
  req.context = &obs.context;
  req.catalog = &s.catalog;
  req.weights = (models.cf || models.seq || models.ke)
                    ? s.config.weights.renormalized(bool(models.cf), bool(models.seq),
                                                    bool(models.ke))
                    : s.config.weights;
  req.stats = &s.stats;
  req.tick = obs.tick;
  req.seed = s.config.seed;
  d.ranking = s.registry.reranker->rerank(req);
  d.ranking.user = obs.user;

  if (s.registry.fairness) {
    d.ranking = fair_rerank(d.ranking, *s.registry.fairness, s.exposure, &d.audit);
  }
  d.chosen = d.ranking.entries.front().action;
  return d;
}

MemoryState remember(MemoryState s, const DecisionRepresentation& d) {
  if (d.chosen != kNoOpAction && !d.ranking.position_of(d.chosen)) {
    throw DataError("decision " + std::to_string(d.id) +
                    " executes an action outside its candidate list");
  }
  s.pending[d.id] = d;
  s.history.push_back(d);
  while (s.history.size() > s.config.window) s.history.pop_front();
  if (d.chosen != kNoOpAction) s.exposure.push(s.catalog.at(d.chosen).group);
  s.next_decision = std::max(s.next_decision, d.id + 1);
  return s;
}

MemoryState observe_feedback(MemoryState s, std::uint64_t id, const FeedbackEvent& fb) {
  auto it = s.pending.find(id);
  if (it == s.pending.end()) {
    throw DataError("feedback for unknown or already answered decision " + std::to_string(id));
  }
  const DecisionRepresentation d = std::move(it->second);
  s.pending.erase(it);
  if (d.chosen == kNoOpAction) return s;

  std::vector<InteractionRecord> added;
  added.push_back({2 * d.tick, d.user, d.chosen, fb.on_chosen, d.context});
  if (fb.followup) {
    const ActionId target = fb.followup->target;
    if (!s.catalog.contains(target) || target == kNoOpAction) {
      throw DataError("follow-up names unknown action " + std::to_string(raw(target)));
    }
    added.push_back({2 * d.tick + 1, d.user, target,
                     Feedback(fb.followup->value, Channel::followup_reorder), d.context});
    if (d.ranking.position_of(target)) {
      for (auto& p : pairs_from_followup(d, target)) s.pair_buffer.push_back(p);
    }
  }
  for (const auto& rec : added) {
    s.log.append(rec);
    s.stats.record(rec.action, rec.feedback.value);
  }

  UserProfile profile = profile_or_cold(s, d.user);
  s.profiles[d.user] =
      update_profile(profile, added, s.registry.profilers, s.config.profile_update);
  return s;
}

MemoryState retrain(MemoryState s) {
  if (s.config.policy != Policy::rs || s.log.empty()) return s;
  const auto& cfg = s.config;

  ModelSet models;
  std::shared_ptr<const CfModel> cf;
  if (cfg.use_cf) {
    CfTrainConfig c = cfg.cf;
    c.dim = cfg.dim;
    c.num_actions = s.catalog.size();
    c.seed = cfg.seed;
    cf = std::make_shared<const CfModel>(cf_train(s.log, c));
    models.cf = cf;
  }

  auto fit_recurrent = [&](const std::shared_ptr<const SeqModel>& previous,
                           bool knowledge) -> std::shared_ptr<const SeqModel> {
    const auto seqs = training_sequences(s.log);
    if (seqs.empty()) return previous;
    SeqTrainConfig c = cfg.seq;
    c.dim = cfg.dim;
    c.num_actions = s.catalog.size();
    c.seed = cfg.seed;
    if (!cf) c.init_mode = InitMode::shared;
    if (previous) {
      SeqModel m = *previous;
      if (cf && m.init_mode == InitMode::from_cf) {
        for (std::size_t u = 0; u < cf->num_users(); ++u) {
          if (cf->known_users[u]) {
            m.user_init[user_id(static_cast<std::uint32_t>(u))] =
                cf->P.row(static_cast<Eigen::Index>(u)).transpose();
          }
        }
      }
      seq_fit(m, seqs, c, c.epochs, cfg.seq_refit_epochs);
      return std::make_shared<const SeqModel>(std::move(m));
    }
    return std::make_shared<const SeqModel>(
        knowledge ? ke_train(s.log, s.catalog, c, cf.get()) : seq_train(s.log, c, cf.get()));
  };
  if (cfg.use_seq) models.seq = fit_recurrent(s.registry.profilers.seq, false);
  if (cfg.use_ke) models.ke = fit_recurrent(s.registry.profilers.ke, true);

  s.registry.profilers = models;
  s.catalog = bind_embeddings(s.catalog, models);

  s.profiles.clear();
  std::vector<UserProfile> all;
  for (UserId u : s.log.users()) {
    UserProfile p = make_profile(u, models, s.log, cfg.dim);
    p.metadata = metadata_of(s, u);
    if (auto g = p.metadata.find(kPersonaKey); g != p.metadata.end()) p.group = g->second;
    all.push_back(p);
    s.profiles.emplace(u, std::move(p));
  }
  s.group_stats = compute_group_stats(all, cfg.dim);
  return s;
}

DecisionRepresentation Engine::step(const ObservationEvent& obs) {
  DecisionRepresentation d = decide(state_, obs);
  state_ = remember(std::move(state_), d);
  return d;
}

void Engine::feedback(std::uint64_t id, const FeedbackEvent& fb) {
  state_ = observe_feedback(std::move(state_), id, fb);
}

void Engine::retrain() { state_ = prefcore::retrain(std::move(state_)); }

void Engine::swap(ComponentRegistry registry) {
  if (!registry.retriever || !registry.reranker) {
    throw UsageError("retriever and reranker slots are mandatory");
  }
  const bool models_changed = registry.profilers.cf != state_.registry.profilers.cf ||
                              registry.profilers.seq != state_.registry.profilers.seq ||
                              registry.profilers.ke != state_.registry.profilers.ke;
  state_.registry = std::move(registry);
  if (models_changed) {
    state_.catalog = bind_embeddings(state_.catalog, state_.registry.profilers);
    for (auto& [u, p] : state_.profiles) {
      UserProfile fresh = make_profile(u, state_.registry.profilers, state_.log, state_.config.dim);
      fresh.metadata = p.metadata;
      fresh.group = p.group;
      p = std::move(fresh);
    }
  }
}

void Engine::tick_finished(Tick tick) {
  const Tick every = state_.config.retrain_every;
  if (every > 0 && tick > 0 && tick % every == 0) retrain();
}

}  // namespace prefcore
