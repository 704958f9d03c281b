#include "prefcore/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "prefcore/error.hpp"
#include "prefcore/log_io.hpp"

namespace prefcore {

namespace {

// Stream salts, one per independent source of randomness.
constexpr std::uint64_t kWorldStream = 0x776f726c64;
constexpr std::uint64_t kWarmupStream = 0x7761726d;
constexpr std::uint64_t kFeedbackStream = 0x66656564;
constexpr std::uint64_t kContextStream = 0x63747874;
constexpr std::uint64_t kDriftStream = 0x64726966;
constexpr std::uint64_t kMatrixStream = 0x6d617472;
constexpr std::uint64_t kExposureStream = 0x6578706f;

const std::vector<std::string> kTimeTags = {"morning", "evening"};
const std::vector<std::string> kSocialTags = {"alone", "company"};
const std::vector<std::string> kModalities = {"verbal", "gestural"};
constexpr std::size_t kCategories = 4;

Vec random_unit(Rng& rng, std::size_t d) {
  Vec v(static_cast<Eigen::Index>(d));
  do {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = gaussian(rng);
  } while (v.norm() < 1e-12);
  return v / v.norm();
}

std::size_t pick(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

bool is_loop_preset(const std::string& p) { return p != "mnar-exposure"; }

}  // namespace

double raw_feedback(const SyntheticUser& user, const TrueAction& action) {
  const double denom = user.p.norm() * action.q_true.norm();
  double f = 0.5 + (denom > 0.0 ? 0.5 * user.p.dot(action.q_true) / denom : 0.0);
  for (const auto& attr : action.attributes) {
    if (auto it = user.affinity.find(attr); it != user.affinity.end()) f += it->second;
  }
  return f;
}

Feedback gen_feedback(const SyntheticUser& user, const TrueAction& action, Rng& rng) {
  double f = raw_feedback(user, action);
  if (user.noise > 0.0) f += gaussian(rng, 0.0, user.noise);
  return Feedback(quantize_feedback(std::clamp(f, 0.0, 1.0)));
}

void advance_drift(SyntheticUser& user, Rng& rng) {
  Vec next = user.rho * user.p + (1.0 - user.rho) * user.p0;
  if (user.drift_noise > 0.0) {
    for (Eigen::Index i = 0; i < next.size(); ++i) next[i] += gaussian(rng, 0.0, user.drift_noise);
  }
  user.p = next;
}

ScenarioConfig ScenarioConfig::preset_defaults(const std::string& name) {
  ScenarioConfig c;
  c.preset = name;
  if (name == "heterogeneous-preferences") {
    // defaults as declared
  } else if (name == "contextual-actions") {
    c.actions = 30;
    c.ticks = 300;
    c.affinity_scale = 0.1;
  } else if (name == "routine-proactive") {
    c.users = 10;
    c.actions = 6;
    c.ticks = 200;
    c.personas = 1;
    c.noise = 0.0;
    c.warmup = 12;
  } else if (name == "disambiguation") {
    c.actions = 12;
    c.ticks = 200;
    c.noise = 0.0;
    c.warmup = 6;
  } else if (name == "mnar-exposure") {
    c.users = 200;
    c.ticks = 1;
    c.warmup = 0;
  } else {
    std::string known;
    for (const char* p : kPresets) known += std::string(known.empty() ? "" : ", ") + p;
    throw UsageError("unknown scenario preset '" + name + "' (known: " + known + ")");
  }
  return c;
}

ScenarioConfig ScenarioConfig::from_config(const Config& config) {
  const Config s = config.section("scenario");
  ScenarioConfig c = preset_defaults(s.get_string("preset", "heterogeneous-preferences"));
  c.users = s.get_uint("users", c.users);
  c.actions = s.get_uint("actions", c.actions);
  c.ticks = s.get_uint("ticks", c.ticks);
  c.true_dim = s.get_uint("true_dim", c.true_dim);
  c.personas = s.get_uint("personas", c.personas);
  c.persona_spread = s.get_double("persona_spread", c.persona_spread);
  c.noise = s.get_double("noise", c.noise);
  c.rho = s.get_double("rho", c.rho);
  c.drift_noise = s.get_double("drift_noise", c.drift_noise);
  c.affinity_scale = s.get_double("affinity_scale", c.affinity_scale);
  c.warmup = s.get_uint("warmup", c.warmup);
  c.goals = s.get_uint("goals", c.goals);
  c.calibration_per_user = s.get_uint("calibration_per_user", c.calibration_per_user);
  if (auto e = s.get("exposure")) {
    std::stringstream ss(*e);
    std::string item;
    std::size_t i = 0;
    while (std::getline(ss, item, ',')) {
      if (i >= c.exposure.size()) throw UsageError("scenario.exposure takes five values");
      c.exposure[i++] = parse_double(item, "scenario.exposure");
    }
    if (i != c.exposure.size()) throw UsageError("scenario.exposure takes five values");
  }
  c.validate();
  return c;
}

void ScenarioConfig::validate() const {
  preset_defaults(preset);
  if (users == 0) throw UsageError("scenario.users must be at least 1");
  if (actions == 0) throw UsageError("scenario.actions must be at least 1");
  if (true_dim == 0) throw UsageError("scenario.true_dim must be at least 1");
  if (personas == 0) throw UsageError("scenario.personas must be at least 1");
  if (!(rho >= 0.0 && rho < 1.0)) throw UsageError("scenario.rho must lie in [0, 1)");
  if (noise < 0.0 || drift_noise < 0.0 || persona_spread < 0.0) {
    throw UsageError("scenario noise scales must be non-negative");
  }
  if (preset == "disambiguation" && (goals == 0 || actions < goals)) {
    throw UsageError("disambiguation needs at least one action per goal");
  }
  if (preset == "mnar-exposure" && calibration_per_user > actions) {
    throw UsageError("calibration_per_user exceeds the number of actions");
  }
  for (double p : exposure) {
    if (!(p > 0.0 && p <= 1.0)) throw UsageError("scenario.exposure values must lie in (0, 1]");
  }
}

namespace {

ContextTags draw_context(const World& w, Rng& rng) {
  const auto& p = w.config.preset;
  if (p == "contextual-actions") {
    return {kTimeTags[pick(rng, kTimeTags.size())], kSocialTags[pick(rng, kSocialTags.size())]};
  }
  if (p == "disambiguation") return {"goal:" + std::to_string(pick(rng, w.config.goals))};
  return {};
}

ActionId best_admissible(const World& w, const SyntheticUser& u, const ContextTags& ctx) {
  ActionId best = kNoOpAction;
  double best_f = -1e300;
  for (ActionId a : w.catalog.action_ids()) {
    if (!w.catalog.at(a).predicate.allows(ctx)) continue;
    const double f = raw_feedback(u, w.truth[raw(a)]);
    if (f > best_f) {
      best_f = f;
      best = a;
    }
  }
  return best;
}

std::string goal_of(const ContextTags& ctx) {
  for (const auto& t : ctx) {
    if (t.rfind("goal:", 0) == 0) return t;
  }
  throw DataError("disambiguation context names no goal");
}

}  // namespace

World make_world(const ScenarioConfig& config, std::size_t model_dim, std::uint64_t seed) {
  config.validate();
  World w;
  w.config = config;
  w.catalog = Catalog(model_dim);
  Rng rng(derive_seed(seed, {kWorldStream}));
  const bool routine = config.preset == "routine-proactive";
  const bool disamb = config.preset == "disambiguation";
  const bool contextual = config.preset == "contextual-actions";

  std::vector<std::string> vocab;
  for (std::size_t c = 0; c < kCategories; ++c) vocab.push_back("category:" + std::to_string(c));
  for (const auto& m : kModalities) vocab.push_back("modality:" + m);
  const KnowledgeEncoder encoder(vocab, model_dim, derive_seed(seed, {kWorldStream, 1}));

  w.truth.push_back({kNoOpAction, Vec::Zero(static_cast<Eigen::Index>(config.true_dim)), {}});
  for (std::size_t i = 0; i < config.actions; ++i) {
    ActionEntry e;
    e.name = "action-" + std::to_string(i + 1);
    const std::string modality = kModalities[pick(rng, kModalities.size())];
    e.attributes = {"category:" + std::to_string(pick(rng, kCategories)), "modality:" + modality};
    e.knowledge = encoder.encode(e.attributes);
    e.group = modality;
    if (contextual) {
      if (uniform(rng, 0.0, 1.0) < 0.5) e.predicate.required.insert(kTimeTags[pick(rng, 2)]);
      if (uniform(rng, 0.0, 1.0) < 0.3) e.predicate.excluded.insert(kSocialTags[pick(rng, 2)]);
    }
    if (disamb) e.predicate.required.insert("goal:" + std::to_string(i % config.goals));
    const AttributeSet attrs = e.attributes;
    const ActionId id = w.catalog.add(std::move(e));
    w.truth.push_back({id, random_unit(rng, config.true_dim), attrs});
  }

  std::vector<Vec> centres;
  for (std::size_t g = 0; g < config.personas; ++g) centres.push_back(random_unit(rng, config.true_dim));

  std::vector<ActionId> cycle = w.catalog.action_ids();
  std::shuffle(cycle.begin(), cycle.end(), rng);

  for (std::size_t i = 0; i < config.users; ++i) {
    SyntheticUser u;
    u.id = user_id(static_cast<std::uint32_t>(i));
    const std::size_t g = i % config.personas;
    u.persona = "persona-" + std::to_string(g);
    // Offset drawn uniformly from the ball of radius persona_spread.
    const double r = config.persona_spread *
                     std::pow(uniform(rng, 0.0, 1.0), 1.0 / static_cast<double>(config.true_dim));
    const Vec v = centres[g] + r * random_unit(rng, config.true_dim);
    u.p0 = u.p = v / v.norm();
    u.rho = config.rho;
    u.drift_noise = config.drift_noise;
    u.noise = config.noise;
    if (config.affinity_scale > 0.0) {
      for (const auto& attr : vocab) u.affinity[attr] = gaussian(rng, 0.0, config.affinity_scale);
    }
    if (routine) {
      u.routine = cycle;
      u.phase = pick(rng, cycle.size());
    }
    if (disamb) {
      for (std::size_t goal = 0; goal < config.goals; ++goal) {
        std::vector<ActionId> options;
        for (ActionId a : w.catalog.action_ids()) {
          if ((raw(a) - 1) % config.goals == goal) options.push_back(a);
        }
        u.targets["goal:" + std::to_string(goal)] = options[pick(rng, options.size())];
      }
    }
    w.metadata[u.id] = {{kPersonaKey, u.persona}};
    w.users.push_back(std::move(u));
  }

  // Pre-episode history, logged with the engine's tick numbering.
  if (is_loop_preset(config.preset)) {
    Rng hist(derive_seed(seed, {kWarmupStream}));
    std::vector<InteractionRecord> records;
    for (std::size_t t = 0; t < config.warmup; ++t) {
      for (const auto& u : w.users) {
        const ContextTags ctx = draw_context(w, hist);
        ActionId a = kNoOpAction;
        if (routine) {
          a = u.routine[(u.phase + t) % u.routine.size()];
        } else if (disamb) {
          a = u.targets.at(goal_of(ctx));
        } else {
          std::vector<ActionId> ok;
          for (ActionId b : w.catalog.action_ids()) {
            if (w.catalog.at(b).predicate.allows(ctx)) ok.push_back(b);
          }
          if (ok.empty()) continue;
          a = ok[pick(hist, ok.size())];
        }
        const Response r = respond(w, u, a, ctx, static_cast<Tick>(t), hist);
        records.push_back({2 * static_cast<Tick>(t), u.id, a, r.feedback, ctx});
      }
    }
    w.warmup = InteractionLog::from_records(std::move(records));
  }
  return w;
}

Response respond(const World& w, const SyntheticUser& user, ActionId chosen,
                 const ContextTags& context, Tick tick, Rng& rng) {
  Response r;
  const auto& p = w.config.preset;
  if (p == "routine-proactive") {
    const ActionId want = user.routine[(user.phase + static_cast<std::size_t>(tick)) %
                                       user.routine.size()];
    r.desired = want;
    r.feedback = Feedback(chosen == want ? 1.0 : 0.0);
    if (chosen != want) r.followup = FeedbackEvent::Followup{want, 1.0};
    return r;
  }
  if (p == "disambiguation") {
    const ActionId want = user.targets.at(goal_of(context));
    r.desired = want;
    r.feedback = Feedback(chosen == want ? 1.0 : 0.25);
    if (chosen != want) r.followup = FeedbackEvent::Followup{want, 1.0};
    return r;
  }
  r.desired = best_admissible(w, user, context);
  if (chosen == kNoOpAction || !w.catalog.at(chosen).predicate.allows(context)) {
    r.feedback = Feedback(0.0);
    return r;
  }
  r.feedback = gen_feedback(user, w.truth[raw(chosen)], rng);
  return r;
}

double EpisodeReport::mean_feedback() const {
  return decisions ? cumulative_feedback / static_cast<double>(decisions) : 0.0;
}

double EpisodeReport::hit_rate() const {
  return decisions ? static_cast<double>(hits) / static_cast<double>(decisions) : 0.0;
}

double EpisodeReport::final_quarter_hit_rate() const {
  return final_quarter_decisions ? static_cast<double>(final_quarter_hits) /
                                       static_cast<double>(final_quarter_decisions)
                                 : 0.0;
}

double EpisodeReport::exposure_disparity() const {
  return prefcore::exposure_disparity(group_counts);
}

void write_episode_report(std::ostream& out, const EpisodeReport& r, const std::string& digest) {
  out << kReportFormat << '\n'
      << "digest " << digest << '\n'
      << "preset = " << r.preset << '\n'
      << "seed = " << r.seed << '\n'
      << "policy = " << r.policy << '\n'
      << "ticks = " << r.ticks << '\n'
      << "decisions = " << r.decisions << '\n'
      << "noops = " << r.noops << '\n'
      << "followups = " << r.followups << '\n'
      << "cumulative_feedback = " << format_double(r.cumulative_feedback) << '\n'
      << "mean_feedback = " << format_double(r.mean_feedback()) << '\n'
      << "hit_rate = " << format_double(r.hit_rate()) << '\n'
      << "final_quarter_hit_rate = " << format_double(r.final_quarter_hit_rate()) << '\n'
      << "exposure_disparity = " << format_double(r.exposure_disparity()) << '\n';
  for (const auto& [g, n] : r.group_counts) out << "exposure." << g << " = " << n << '\n';
}

EpisodeReport run_episode(const World& w, Engine& engine, std::uint64_t seed) {
  EpisodeReport rep;
  rep.preset = w.config.preset;
  rep.seed = seed;
  rep.policy = std::string(policy_name(engine.state().config.policy));
  rep.ticks = w.config.ticks;

  Rng fb_rng(derive_seed(seed, {kFeedbackStream}));
  Rng ctx_rng(derive_seed(seed, {kContextStream}));
  Rng drift_rng(derive_seed(seed, {kDriftStream}));
  std::vector<SyntheticUser> users = w.users;
  const std::size_t quarter_start = w.config.ticks - w.config.ticks / 4;

  for (std::size_t i = 0; i < w.config.ticks; ++i) {
    const Tick tick = static_cast<Tick>(w.config.warmup + i);
    for (auto& u : users) {
      ObservationEvent obs{u.id, tick, draw_context(w, ctx_rng)};
      const DecisionRepresentation d = engine.step(obs);
      const Response r = respond(w, u, d.chosen, obs.context, tick, fb_rng);
      ++rep.decisions;
      const bool hit = r.desired && *r.desired == d.chosen;
      rep.hits += hit;
      if (i >= quarter_start) {
        ++rep.final_quarter_decisions;
        rep.final_quarter_hits += hit;
      }
      if (d.chosen == kNoOpAction) {
        ++rep.noops;
      } else {
        rep.cumulative_feedback += r.feedback.value;
        ++rep.group_counts[w.catalog.at(d.chosen).group];
      }
      rep.followups += r.followup.has_value();
      engine.feedback(d.id, FeedbackEvent{r.feedback, r.followup});
    }
    for (auto& u : users) advance_drift(u, drift_rng);
    engine.tick_finished(static_cast<Tick>(i + 1));
  }
  return rep;
}

Mat full_feedback_matrix(const World& w, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {kMatrixStream}));
  Mat f = Mat::Zero(static_cast<Eigen::Index>(w.users.size()),
                    static_cast<Eigen::Index>(w.catalog.size()));
  for (const auto& u : w.users) {
    for (ActionId a : w.catalog.action_ids()) {
      f(raw(u.id), raw(a)) = gen_feedback(u, w.truth[raw(a)], rng).value;
    }
  }
  return f;
}

InteractionLog mnar_exposure_log(const World& w, const Mat& full, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {kExposureStream}));
  const auto actions = w.catalog.action_ids();
  std::vector<InteractionRecord> records;
  for (const auto& u : w.users) {
    Tick t = 0;
    std::vector<ActionId> shuffled = actions;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    shuffled.resize(w.config.calibration_per_user);
    std::sort(shuffled.begin(), shuffled.end());
    for (ActionId a : shuffled) {
      records.push_back(
          {t++, u.id, a, Feedback(full(raw(u.id), raw(a))), ContextTags{kCalibrationTag}});
    }
    for (ActionId a : actions) {
      const double f = full(raw(u.id), raw(a));
      if (uniform(rng, 0.0, 1.0) < w.config.exposure[feedback_level(f)]) {
        records.push_back({t++, u.id, a, Feedback(f), {}});
      }
    }
  }
  return InteractionLog::from_records(std::move(records));
}

ScenarioRun run_scenario(const ScenarioConfig& config, const EngineConfig& engine,
                         std::uint64_t seed) {
  config.validate();
  ScenarioRun run;
  run.report.preset = config.preset;
  run.report.seed = seed;
  run.report.policy = std::string(policy_name(engine.policy));
  run.report.ticks = config.ticks;
  if (config.ticks == 0) return run;

  const World world = make_world(config, engine.dim, seed);
  if (!is_loop_preset(config.preset)) {
    const Mat full = full_feedback_matrix(world, seed);
    run.log = mnar_exposure_log(world, full, seed);
    run.report.decisions = run.log.size();
    for (const auto& r : run.log.records()) run.report.cumulative_feedback += r.feedback.value;
    return run;
  }
  EngineConfig e = engine;
  e.seed = seed;
  Engine eng(make_state(world.catalog, e, world.warmup, world.metadata));
  run.report = run_episode(world, eng, seed);
  run.log = eng.state().log;
  return run;
}

}  // namespace prefcore
