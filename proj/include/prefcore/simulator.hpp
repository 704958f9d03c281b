#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "prefcore/catalog.hpp"
#include "prefcore/config.hpp"
#include "prefcore/core.hpp"
#include "prefcore/engine.hpp"
#include "prefcore/random.hpp"

namespace prefcore {

// Ground-truth user. Nothing in here is visible to the engine.
struct SyntheticUser {
  UserId id{};
  Vec p0;  // long-term preference
  Vec p;   // current preference, drifts around p0
  std::string persona;
  double rho = 0.0;  // drift persistence in [0, 1)
  double drift_noise = 0.0;
  std::map<std::string, double> affinity;  // per knowledge attribute
  double noise = 0.0;  // feedback noise scale

  std::vector<ActionId> routine;  // daily cycle (routine preset)
  std::size_t phase = 0;
  std::map<std::string, ActionId> targets;  // goal -> favoured action (disambiguation)
};

// Ground-truth side of a catalog action.
struct TrueAction {
  ActionId id{};
  Vec q_true;
  AttributeSet attributes;
};

// 0.5 + 0.5 cos(p, q_true) plus the summed affinities of the action's
// attributes, before noise and clamping.
double raw_feedback(const SyntheticUser& user, const TrueAction& action);

// Adds N(0, noise), clamps to [0, 1] and snaps to the five-level grid.
Feedback gen_feedback(const SyntheticUser& user, const TrueAction& action, Rng& rng);

// p <- rho p + (1 - rho) p0 + N(0, drift_noise) per coordinate.
void advance_drift(SyntheticUser& user, Rng& rng);

inline constexpr std::array<const char*, 5> kPresets = {
    "heterogeneous-preferences", "contextual-actions", "routine-proactive",
    "disambiguation", "mnar-exposure"};

struct ScenarioConfig {
  std::string preset = "heterogeneous-preferences";
  std::size_t users = 20;
  std::size_t actions = 50;
  std::size_t ticks = 500;  // episode length per user
  std::size_t true_dim = 8;
  std::size_t personas = 4;
  double persona_spread = 0.3;  // max norm of a user's offset from the persona centre
  double noise = 0.05;
  double rho = 0.0;
  double drift_noise = 0.0;
  double affinity_scale = 0.0;
  std::size_t warmup = 10;  // history records per user before the episode
  std::size_t goals = 3;              // disambiguation
  std::size_t calibration_per_user = 5;  // mnar-exposure
  std::array<double, 5> exposure = {0.06, 0.12, 0.24, 0.4, 0.6};  // P(shown | level)

  // Built-in defaults of a registered preset; UsageError otherwise.
  static ScenarioConfig preset_defaults(const std::string& name);
  // [scenario] keys of a config, starting from the named preset's defaults.
  static ScenarioConfig from_config(const Config& config);
  void validate() const;
};

// Everything a scenario needs: the public catalog the engine sees and the
// hidden truth behind it.
struct World {
  ScenarioConfig config;
  Catalog catalog;
  std::vector<TrueAction> truth;  // indexed by action id; entry 0 is the no-op
  std::vector<SyntheticUser> users;
  std::map<UserId, std::map<std::string, std::string>> metadata;
  InteractionLog warmup;
};

World make_world(const ScenarioConfig& config, std::size_t model_dim, std::uint64_t seed);

// Ground-truth reaction of a user to an executed action in context.
struct Response {
  Feedback feedback;
  std::optional<ActionId> desired;  // the action the user was after, if defined
  std::optional<FeedbackEvent::Followup> followup;
};

Response respond(const World& world, const SyntheticUser& user, ActionId chosen,
                 const ContextTags& context, Tick tick, Rng& rng);

struct EpisodeReport {
  std::string preset;
  std::uint64_t seed = 0;
  std::string policy;
  std::size_t ticks = 0;
  std::size_t decisions = 0;
  std::size_t noops = 0;
  std::size_t followups = 0;
  double cumulative_feedback = 0.0;
  std::size_t hits = 0;  // chosen == desired
  std::size_t final_quarter_decisions = 0;
  std::size_t final_quarter_hits = 0;
  std::map<std::string, std::size_t> group_counts;  // top-1 exposure per action group

  double mean_feedback() const;
  double hit_rate() const;
  double final_quarter_hit_rate() const;
  double exposure_disparity() const;
};

inline constexpr std::string_view kReportFormat = "prefcore-report/1";

// key = value lines after a version line and a digest line.
void write_episode_report(std::ostream& out, const EpisodeReport& report,
                          const std::string& digest);

struct ScenarioRun {
  InteractionLog log;
  EpisodeReport report;
};

// Runs the perception -> decision -> feedback loop for every user at every
// tick. "mnar-exposure" has no loop: it returns the calibration slice plus
// one biased exposure draw and ignores the engine config.
ScenarioRun run_scenario(const ScenarioConfig& config, const EngineConfig& engine,
                         std::uint64_t seed);

// Lower-level loop over an existing world and engine.
EpisodeReport run_episode(const World& world, Engine& engine, std::uint64_t seed);

// Users x catalog-size matrix of the feedback each user would give each
// action (column 0, the no-op, stays zero).
Mat full_feedback_matrix(const World& world, std::uint64_t seed);

// Calibration slice (uniform exposure, tagged "calibration") followed by the
// biased exposure, where P(shown) depends on the feedback level.
InteractionLog mnar_exposure_log(const World& world, const Mat& full, std::uint64_t seed);

}  // namespace prefcore
