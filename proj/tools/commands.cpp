#include "commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "prefcore/cf_model.hpp"
#include "prefcore/config.hpp"
#include "prefcore/error.hpp"
#include "prefcore/evaluation.hpp"
#include "prefcore/federated.hpp"
#include "prefcore/log_io.hpp"
#include "prefcore/propensity.hpp"
#include "prefcore/ranking.hpp"
#include "prefcore/seq_model.hpp"
#include "prefcore/simulator.hpp"
#include "prefcore/snapshot.hpp"
#include "prefcore/unlearning.hpp"

namespace prefcore::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kAuditFormat = "prefcore-audit/1";

enum class Level { quiet, info, debug };

class Logger {
 public:
  Logger(std::ostream& err) : err_(err) {
    const char* env = std::getenv("PREFCORE_LOG_LEVEL");
    const std::string v = env ? env : "info";
    if (v == "quiet") level_ = Level::quiet;
    else if (v == "debug") level_ = Level::debug;
    else if (v == "info" || v.empty()) level_ = Level::info;
    else throw UsageError("PREFCORE_LOG_LEVEL must be quiet, info, or debug (got '" + v + "')");
  }

  void info(const std::string& msg) const {
    if (level_ != Level::quiet) err_ << "prefcore: " << msg << '\n';
  }
  void warn(const std::string& msg) const {
    if (level_ != Level::quiet) err_ << "prefcore: warning: " << msg << '\n';
  }
  void debug(const std::string& msg) const {
    if (level_ == Level::debug) err_ << "prefcore: [debug] " << msg << '\n';
  }

 private:
  std::ostream& err_;
  Level level_ = Level::info;
};

// Options shared by every subcommand.
struct Globals {
  std::uint64_t seed = 1;
  std::string config_path;
};

Config load_config(const Globals& g) {
  Config c = g.config_path.empty() ? Config{} : Config::load(g.config_path);
  c.set("seed", std::to_string(g.seed));
  return c;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

CfTrainConfig cf_config(const Config& c) {
  const Config t = c.section("train");
  CfTrainConfig cfg;
  cfg.dim = t.get_uint("dim", cfg.dim);
  cfg.epochs = static_cast<int>(t.get_int("epochs", cfg.epochs));
  cfg.learning_rate = t.get_double("learning_rate", cfg.learning_rate);
  cfg.decay = t.get_double("decay", cfg.decay);
  cfg.l2 = t.get_double("l2", cfg.l2);
  cfg.init_scale = t.get_double("init_scale", cfg.init_scale);
  cfg.full_batch = t.get_bool("full_batch", cfg.full_batch);
  cfg.seed = c.get_uint("seed", cfg.seed);
  if (cfg.dim == 0) throw UsageError("train.dim must be at least 1");
  if (cfg.epochs < 0) throw UsageError("train.epochs must be >= 0");
  return cfg;
}

SeqTrainConfig seq_config(const Config& c) {
  const Config t = c.section("train");
  SeqTrainConfig cfg;
  cfg.dim = t.get_uint("dim", cfg.dim);
  cfg.epochs = static_cast<int>(t.get_int("seq_epochs", cfg.epochs));
  cfg.learning_rate = t.get_double("learning_rate", cfg.learning_rate);
  cfg.decay = t.get_double("decay", cfg.decay);
  cfg.l2 = t.get_double("l2", cfg.l2);
  cfg.init_scale = t.get_double("init_scale", cfg.init_scale);
  cfg.bptt_window = t.get_uint("bptt_window", cfg.bptt_window);
  cfg.clip_norm = t.get_double("clip_norm", cfg.clip_norm);
  const auto init = t.get_string("seq_init", "from_cf");
  if (init == "from_cf") cfg.init_mode = InitMode::from_cf;
  else if (init == "shared") cfg.init_mode = InitMode::shared;
  else throw UsageError("train.seq_init must be from_cf or shared");
  cfg.seed = c.get_uint("seed", cfg.seed);
  return cfg;
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// ---- simulate ----

struct SimulateOpts {
  std::string preset;
  std::string out_dir;
  std::optional<std::size_t> ticks;
};

int cmd_simulate(const Globals& g, const SimulateOpts& o, std::ostream& out, const Logger& log) {
  Config c = load_config(g);
  if (!o.preset.empty()) c.set("scenario.preset", o.preset);
  if (o.ticks) c.set("scenario.ticks", std::to_string(*o.ticks));
  const ScenarioConfig sc = ScenarioConfig::from_config(c);
  const EngineConfig ec = EngineConfig::from_config(c);
  if (sc.ticks == 0) log.warn("episode length is 0; the log will be empty");

  const std::string digest = c.digest();
  log.debug("config digest " + digest);
  const ScenarioRun run = run_scenario(sc, ec, g.seed);

  const fs::path dir(o.out_dir);
  fs::create_directories(dir);
  save_log(dir / "log.txt", run.log, digest);
  std::ofstream rep(dir / "report.txt", std::ios::binary);
  if (!rep) throw DataError("cannot write " + (dir / "report.txt").string());
  write_episode_report(rep, run.report, digest);

  out << "preset " << sc.preset << ": " << run.log.size() << " records, cumulative feedback "
      << fmt6(run.report.cumulative_feedback) << '\n';
  log.info("wrote " + (dir / "log.txt").string() + " and " + (dir / "report.txt").string());
  return 0;
}

// ---- train ----

struct TrainOpts {
  std::string log_path;
  std::string out_path;
  std::string objective = "pointwise";
  std::string propensities;
  std::optional<int> epochs;
  std::optional<std::size_t> dim;
};

int cmd_train(const Globals& g, const TrainOpts& o, std::ostream& out, const Logger& log) {
  Config c = load_config(g);
  c.set("train.objective", o.objective);
  if (o.epochs) c.set("train.epochs", std::to_string(*o.epochs));
  if (o.dim) c.set("train.dim", std::to_string(*o.dim));
  if (!o.propensities.empty()) c.set("train.propensities", o.propensities);

  const std::string& obj = o.objective;
  if (obj == "ips" && o.propensities.empty()) {
    throw UsageError(
        "objective 'ips' needs a propensity source; pass --propensities estimate to run "
        "estimate_propensities on the log");
  }
  if (!o.propensities.empty() && o.propensities != "estimate") {
    throw UsageError("--propensities accepts only 'estimate'");
  }

  const LoadedLog loaded = load_log(o.log_path);
  const InteractionLog& data = loaded.log;
  if (data.empty()) throw DataError("log " + o.log_path + " has no records");
  const CfTrainConfig cfg = cf_config(c);
  const std::string digest = c.digest();

  ModelSnapshot snap;
  snap.digest = digest;
  TrainTrace trace;
  if (obj == "pointwise") {
    snap.cf = cf_train(data, cfg, {}, &trace);
  } else if (obj == "ips") {
    const PropensityTable table = estimate_propensities(data);
    if (table.fallback) {
      log.warn("no calibration records; propensities fall back to action exposure frequency");
    }
    snap.cf = cf_train_ips(data, table, cfg, &trace);
  } else if (obj == "pairwise" || obj == "listwise") {
    const Config t = c.section("train");
    CfModel init = init_cf_model(user_extent(data), action_extent(data), cfg.dim,
                                 cfg.init_scale, cfg.seed);
    for (const auto& r : data.records()) init.known_users[raw(r.user)] = true;
    if (obj == "pairwise") {
      PairwiseConfig pc;
      const auto kind = t.get_string("pairwise_loss", "bpr");
      if (kind == "bpr") pc.kind = PairwiseKind::bpr;
      else if (kind == "hinge") pc.kind = PairwiseKind::hinge;
      else throw UsageError("train.pairwise_loss must be bpr or hinge");
      pc.epochs = cfg.epochs;
      pc.learning_rate = cfg.learning_rate;
      pc.decay = cfg.decay;
      pc.l2 = cfg.l2;
      pc.seed = cfg.seed;
      const auto pairs = pairs_from_log(data);
      if (pairs.empty()) throw DataError("log yields no preference pairs");
      snap.cf = train_pairwise(std::move(init), pairs, pc, &trace);
    } else {
      ListwiseConfig lc;
      lc.epochs = cfg.epochs;
      lc.learning_rate = cfg.learning_rate;
      lc.decay = cfg.decay;
      lc.l2 = cfg.l2;
      lc.seed = cfg.seed;
      snap.cf = train_listwise(std::move(init), data, lc, &trace);
    }
  } else if (obj == "sequential") {
    SeqTrainConfig sc = seq_config(c);
    std::optional<CfModel> cf;
    if (sc.init_mode == InitMode::from_cf) cf = cf_train(data, cfg);
    snap.seq = seq_train(data, sc, cf ? &*cf : nullptr, &trace);
  } else {
    throw UsageError("unknown objective '" + obj +
                     "' (expected pointwise, pairwise, listwise, ips, or sequential)");
  }

  ensure_parent(o.out_path);
  save_snapshot(o.out_path, snap);
  if (!trace.epoch_losses.empty()) {
    log.debug("final training loss " + format_double(trace.epoch_losses.back()));
  }
  out << "trained " << obj << " model (" << snap.kind() << ") -> " << o.out_path
      << " digest " << digest << '\n';
  return 0;
}

// ---- evaluate ----

struct EvaluateOpts {
  std::string model_path;
  std::string log_path;
  std::string test_path;
  double holdout = 0.2;
  std::size_t k = 10;
  double threshold = 0.75;
  std::string preset;
  std::size_t seeds = 10;
  std::size_t episodes = 1;
  std::string out_path;
};

// Scores for a sequential model: each user's state after the history.
ScoreFn seq_score_fn(const SeqModel& m, const InteractionLog& history) {
  auto states = std::make_shared<std::map<UserId, Vec>>();
  for (UserId u : history.users()) {
    const auto steps = history.user_sequence(u);
    (*states)[u] = seq_state_after(m, m.initial_state(u), steps);
  }
  return [&m, states](UserId u, ActionId a) {
    auto it = states->find(u);
    const Vec h = it == states->end() ? m.initial_state(u) : it->second;
    return h.dot(m.embed(a));
  };
}

int cmd_evaluate(const Globals& g, const EvaluateOpts& o, std::ostream& out,
                 const Logger& log) {
  Config c = load_config(g);
  MetricReport report;

  if (o.model_path.empty()) {
    if (!o.preset.empty()) c.set("scenario.preset", o.preset);
    c.set("evaluate.seeds", std::to_string(o.seeds));
    c.set("evaluate.episodes", std::to_string(o.episodes));
    const ScenarioConfig sc = ScenarioConfig::from_config(c);
    const EngineConfig ec = EngineConfig::from_config(c);
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < o.seeds; ++i) seeds.push_back(g.seed + i);
    report = to_metric_report(evaluate_policy(ec, sc, o.episodes, seeds));
    report.metadata["preset"] = sc.preset;
    report.metadata["policy"] = std::string(policy_name(ec.policy));
  } else {
    if (o.log_path.empty()) throw UsageError("evaluate --model needs --log");
    c.set("evaluate.k", std::to_string(o.k));
    c.set("evaluate.threshold", format_double(o.threshold));
    const ModelSnapshot snap = load_snapshot(o.model_path);
    const InteractionLog history_all = load_log(o.log_path).log;
    InteractionLog history;
    InteractionLog test;
    if (!o.test_path.empty()) {
      history = history_all;
      test = load_log(o.test_path).log;
    } else {
      c.set("evaluate.holdout", format_double(o.holdout));
      auto split = split_log(history_all, o.holdout, g.seed);
      history = std::move(split.train);
      test = std::move(split.test);
    }
    if (test.empty()) throw DataError("evaluation test set is empty");
    report.metadata["model"] = snap.kind();
    report.metadata["test_records"] = std::to_string(test.size());

    std::optional<RankingMetrics> rm;
    try {
      if (snap.cf) {
        report.set("rmse", evaluate_pointwise(*snap.cf, test));
        rm = evaluate_ranking(*snap.cf, test, o.k, o.threshold);
      } else {
        const SeqModel& m = *snap.seq;
        // Pointwise error of the next-step scores along the full sequence.
        double sse = 0.0;
        std::size_t n = 0;
        for (UserId u : test.users()) {
          auto steps = history.user_sequence(u);
          const std::size_t seen = steps.size();
          for (const auto& s : test.user_sequence(u)) steps.push_back(s);
          const auto scores = seq_scores(m, u, steps);
          for (std::size_t i = seen; i < steps.size(); ++i) {
            const double e = steps[i].feedback.value - scores[i];
            sse += e * e;
            ++n;
          }
        }
        report.set("rmse", std::sqrt(sse / static_cast<double>(n)));
        rm = evaluate_ranking(seq_score_fn(m, history), m.num_actions(), test, o.k, o.threshold);
      }
    } catch (const DataError& e) {
      if (!report.get("rmse")) throw;
      log.warn(std::string("ranking metrics skipped: ") + e.what());
    }
    if (rm) {
      const std::string k = std::to_string(rm->k);
      report.set("ndcg@" + k, rm->ndcg);
      report.set("precision@" + k, rm->precision);
      report.set("recall@" + k, rm->recall);
      report.metadata["k"] = k;
      report.metadata["ranking_users"] = std::to_string(rm->users);
    }
  }
  const std::string digest = c.digest();
  report.metadata["seed"] = std::to_string(g.seed);
  report.metadata["config_digest"] = digest;
  write_report_text(out, report);
  if (!o.out_path.empty()) {
    ensure_parent(o.out_path);
    std::ofstream f(o.out_path, std::ios::binary);
    if (!f) throw DataError("cannot write " + o.out_path);
    write_report_kv(f, report, digest);
  }
  return 0;
}

// ---- rank ----

struct RankOpts {
  std::string model_path;
  std::string log_path;
  std::uint32_t user = 0;
  std::size_t k = 0;
};

int cmd_rank(const Globals&, const RankOpts& o, std::ostream& out, const Logger&) {
  const ModelSnapshot snap = load_snapshot(o.model_path);
  const UserId u = user_id(o.user);
  RankedList list;
  list.user = u;
  if (snap.cf) {
    const CfModel& m = *snap.cf;
    if (raw(u) >= m.num_users()) throw DataError("user " + std::to_string(o.user) + " unknown to the model");
    for (std::size_t i = 1; i < m.num_actions(); ++i) {
      const ActionId a = action_id(static_cast<std::uint32_t>(i));
      list.entries.push_back({a, cf_predict(m, u, a)});
    }
  } else {
    InteractionLog history;
    if (!o.log_path.empty()) history = load_log(o.log_path).log;
    const ScoreFn fn = seq_score_fn(*snap.seq, history);
    for (std::size_t i = 1; i < snap.seq->num_actions(); ++i) {
      const ActionId a = action_id(static_cast<std::uint32_t>(i));
      list.entries.push_back({a, fn(u, a)});
    }
  }
  sort_ranked(list.entries);
  if (o.k > 0 && list.entries.size() > o.k) list.entries.resize(o.k);
  write_ranked_list(out, list);
  return 0;
}

// ---- unlearn ----

struct UnlearnOpts {
  std::string model_path;
  std::string log_path;
  std::string out_path;
  std::uint32_t user = 0;
  std::vector<std::uint32_t> actions;
  std::optional<Tick> from;
  std::optional<Tick> to;
  double beta = 1.0;
  int iterations = 50;
  double rate = 0.05;
  std::string retain = "all";
};

int cmd_unlearn(const Globals& g, const UnlearnOpts& o, std::ostream& out, const Logger& log) {
  Config c = load_config(g);
  c.set("unlearn.user", std::to_string(o.user));
  c.set("unlearn.beta", format_double(o.beta));
  c.set("unlearn.iterations", std::to_string(o.iterations));
  c.set("unlearn.learning_rate", format_double(o.rate));
  c.set("unlearn.retain", o.retain);
  std::string acts;
  for (auto a : o.actions) acts += (acts.empty() ? "" : ",") + std::to_string(a);
  c.set("unlearn.actions", acts);
  if (o.from) c.set("unlearn.from", std::to_string(*o.from));
  if (o.to) c.set("unlearn.to", std::to_string(*o.to));

  ForgetRequest req;
  req.user = user_id(o.user);
  req.from = o.from;
  req.to = o.to;
  req.beta = o.beta;
  for (auto a : o.actions) req.actions.insert(action_id(a));

  UnlearnConfig uc;
  uc.iterations = o.iterations;
  uc.learning_rate = o.rate;
  if (o.retain == "user") uc.retain_scope = RetainScope::user;
  else if (o.retain == "all") uc.retain_scope = RetainScope::all;
  else throw UsageError("--retain must be user or all");
  uc.l2 = c.section("train").get_double("l2", uc.l2);

  const ModelSnapshot snap = load_snapshot(o.model_path);
  const InteractionLog data = load_log(o.log_path).log;
  const std::string digest = c.digest();
  ModelSnapshot next;
  next.digest = digest;
  UnlearnAudit audit;
  if (snap.cf) {
    auto r = unlearn(*snap.cf, data, req, uc);
    next.cf = std::move(r.model);
    audit = r.audit;
  } else {
    auto r = unlearn(*snap.seq, data, req, uc);
    next.seq = std::move(r.model);
    audit = r.audit;
  }
  if (audit.stopped_early) log.info("stopped early: retain loss tolerance reached");

  ensure_parent(o.out_path);
  save_snapshot(o.out_path, next);
  const std::string audit_path = o.out_path + ".audit";
  std::ofstream f(audit_path, std::ios::binary);
  if (!f) throw DataError("cannot write " + audit_path);
  f << kAuditFormat << '\n' << "digest " << digest << '\n';
  write_audit(f, audit);
  write_audit(out, audit);
  log.info("wrote " + o.out_path + " and " + audit_path);
  return 0;
}

// ---- federate ----

struct FederateOpts {
  std::string log_path;
  std::string out_path;
  std::size_t clients = 2;
  std::optional<int> rounds;
  std::string local_mode;
};

int cmd_federate(const Globals& g, const FederateOpts& o, std::ostream& out, const Logger& log) {
  Config c = load_config(g);
  c.set("federate.clients", std::to_string(o.clients));
  if (o.rounds) c.set("train.epochs", std::to_string(*o.rounds));
  if (o.clients == 0) throw UsageError("--clients must be at least 1");
  const CfTrainConfig cfg = cf_config(c);

  FederatedConfig fc;
  fc.local_mode = cfg.full_batch ? LocalMode::full_batch : LocalMode::sgd;
  if (!o.local_mode.empty()) {
    if (o.local_mode == "full_batch") fc.local_mode = LocalMode::full_batch;
    else if (o.local_mode == "sgd") fc.local_mode = LocalMode::sgd;
    else throw UsageError("--local-mode must be full_batch or sgd");
    c.set("federate.local_mode", o.local_mode);
  }
  fc.learning_rate = cfg.learning_rate;
  fc.decay = cfg.decay;
  fc.l2 = cfg.l2;
  fc.seed = cfg.seed;

  const InteractionLog data = load_log(o.log_path).log;
  if (data.empty()) throw DataError("log " + o.log_path + " has no records");
  const std::size_t n = o.clients;
  const auto clients = partition_clients(data, [n](UserId u) {
    return "client-" + std::to_string(raw(u) % n);
  });
  for (const auto& cl : clients) {
    log.debug(cl.name() + " holds " + std::to_string(cl.shard_size()) + " records");
  }
  const std::string digest = c.digest();
  ModelSnapshot snap;
  snap.digest = digest;
  snap.cf = federated_train(clients, std::max(cfg.num_users, user_extent(data)),
                            std::max(cfg.num_actions, action_extent(data)), cfg, fc,
                            cfg.epochs);
  ensure_parent(o.out_path);
  save_snapshot(o.out_path, snap);
  out << "federated " << clients.size() << " clients, " << cfg.epochs << " rounds -> "
      << o.out_path << " digest " << digest << '\n';
  return 0;
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage: return 1;
    case ErrorKind::data: return 2;
    case ErrorKind::numeric: return 3;
  }
  return 2;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Preference learning toolkit for social-robot decision making", "prefcore"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random stream")->capture_default_str();
  app.add_option("--config", g.config_path, "INI configuration file")->check(CLI::ExistingFile);

  SimulateOpts sim;
  auto* simulate = app.add_subcommand("simulate", "Run a scenario and write its log and report");
  simulate->add_option("--preset", sim.preset, "Scenario preset");
  simulate->add_option("--out", sim.out_dir, "Output directory")->required();
  simulate->add_option("--episodes,--ticks", sim.ticks, "Episode length in ticks");

  TrainOpts tr;
  auto* train = app.add_subcommand("train", "Fit a model on a log and write a snapshot");
  train->add_option("--log", tr.log_path, "Interaction log")->required();
  train->add_option("--out", tr.out_path, "Snapshot path")->required();
  train->add_option("--objective", tr.objective,
                    "pointwise, pairwise, listwise, ips, or sequential")
      ->capture_default_str();
  train->add_option("--propensities", tr.propensities,
                    "Propensity source for ips ('estimate')");
  train->add_option("--epochs", tr.epochs, "Training epochs");
  train->add_option("--dim", tr.dim, "Embedding dimension");

  EvaluateOpts ev;
  auto* evaluate = app.add_subcommand("evaluate", "Offline metrics for a model, or a policy run");
  evaluate->add_option("--model", ev.model_path, "Snapshot to evaluate");
  evaluate->add_option("--log", ev.log_path, "History log (split when --test is absent)");
  evaluate->add_option("--test", ev.test_path, "Separate test log");
  evaluate->add_option("--holdout", ev.holdout, "Fraction held out per user")
      ->capture_default_str();
  evaluate->add_option("--k", ev.k, "Cut-off for @k metrics")->capture_default_str();
  evaluate->add_option("--threshold", ev.threshold, "Relevance threshold")
      ->capture_default_str();
  evaluate->add_option("--preset", ev.preset, "Scenario preset for a policy evaluation");
  evaluate->add_option("--seeds", ev.seeds, "Number of seeds (policy evaluation)")
      ->capture_default_str();
  evaluate->add_option("--episodes", ev.episodes, "Episodes per seed (policy evaluation)")
      ->capture_default_str();
  evaluate->add_option("--out", ev.out_path, "key=value report path");

  RankOpts rk;
  auto* rank = app.add_subcommand("rank", "Print a user's ranked action list");
  rank->add_option("--model", rk.model_path, "Snapshot")->required();
  rank->add_option("--user", rk.user, "User id")->required();
  rank->add_option("--log", rk.log_path, "History replayed by sequential models");
  rank->add_option("--k", rk.k, "Keep only the top k (0: all)");

  UnlearnOpts ul;
  auto* unl = app.add_subcommand("unlearn", "Remove a user's records from a trained model");
  unl->add_option("--model", ul.model_path, "Snapshot")->required();
  unl->add_option("--log", ul.log_path, "Log the model was trained on")->required();
  unl->add_option("--out", ul.out_path, "Output snapshot")->required();
  unl->add_option("--user", ul.user, "User whose records are forgotten")->required();
  unl->add_option("--actions", ul.actions, "Restrict to these action ids")->delimiter(',');
  unl->add_option("--from", ul.from, "First tick to forget");
  unl->add_option("--to", ul.to, "Last tick to forget");
  unl->add_option("--beta", ul.beta, "Retain-loss weight")->capture_default_str();
  unl->add_option("--iterations", ul.iterations, "Gradient steps")->capture_default_str();
  unl->add_option("--learning-rate", ul.rate, "Step size")->capture_default_str();
  unl->add_option("--retain", ul.retain, "Retain set: user or all")->capture_default_str();

  FederateOpts fd;
  auto* fed = app.add_subcommand("federate", "Federated CF training over user shards");
  fed->add_option("--log", fd.log_path, "Interaction log, sharded by user id")->required();
  fed->add_option("--out", fd.out_path, "Snapshot path")->required();
  fed->add_option("--clients", fd.clients, "Number of clients")->capture_default_str();
  fed->add_option("--rounds", fd.rounds, "Rounds (default: train.epochs)");
  fed->add_option("--local-mode", fd.local_mode, "full_batch or sgd");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    const Logger log(err);
    if (simulate->parsed()) return cmd_simulate(g, sim, out, log);
    if (train->parsed()) return cmd_train(g, tr, out, log);
    if (evaluate->parsed()) return cmd_evaluate(g, ev, out, log);
    if (rank->parsed()) return cmd_rank(g, rk, out, log);
    if (unl->parsed()) return cmd_unlearn(g, ul, out, log);
    if (fed->parsed()) return cmd_federate(g, fd, out, log);
  } catch (const Error& e) {
    err << "prefcore: error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "prefcore: error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "prefcore: error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace prefcore::cli
