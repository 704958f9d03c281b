// Acceptance gate: one PASS/FAIL line per criterion; exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "../support/fixtures.hpp"
#include "commands.hpp"
#include "prefcore/cf_model.hpp"
#include "prefcore/evaluation.hpp"
#include "prefcore/fairness.hpp"
#include "prefcore/federated.hpp"
#include "prefcore/log_io.hpp"
#include "prefcore/propensity.hpp"
#include "prefcore/ranking.hpp"
#include "prefcore/retrieval.hpp"
#include "prefcore/seq_model.hpp"
#include "prefcore/simulator.hpp"
#include "prefcore/snapshot.hpp"
#include "prefcore/unlearning.hpp"

namespace fs = std::filesystem;
using namespace prefcore;
using namespace prefcore::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------- 1

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  Rng rng(20240601);
  double worst_cf = 0, worst_seq = 0, worst_bpr = 0, worst_hinge = 0, worst_list = 0;
  const int instances = 25;
  for (int i = 0; i < instances; ++i) {
    const std::size_t d = 1 + static_cast<std::size_t>(i % 4);
    const std::size_t users = 3, actions = 5;
    const auto recs = random_records(users, actions, 4, rng);
    std::vector<double> w;
    for (std::size_t k = 0; k < recs.size(); ++k) w.push_back(uniform(rng, 0.5, 2.0));
    const double l2 = 0.01;

    // Pointwise CF.
    CfModel m = init_cf_model(users, actions, d, 0.5, 1000 + i);
    {
      const auto analytic = cf_flat(cf_gradient(m, recs, w, l2));
      const auto numeric = numeric_gradient(cf_blocks(m), [&] { return cf_loss(m, recs, w, l2); });
      worst_cf = std::max(worst_cf, relative_error(analytic, numeric));
    }

    // Pairwise, both surrogates.
    std::vector<PreferencePair> pairs;
    for (int k = 0; k < 6; ++k) {
      const auto u = user_id(static_cast<std::uint32_t>(k % users));
      const auto a = static_cast<std::uint32_t>(1 + k % (actions - 1));
      const auto b = static_cast<std::uint32_t>(1 + (k + 2) % (actions - 1));
      if (a != b) pairs.emplace_back(u, action_id(a), action_id(b));
    }
    for (PairwiseKind kind : {PairwiseKind::bpr, PairwiseKind::hinge}) {
      const auto analytic = cf_flat(pairwise_gradient(m, pairs, kind, l2));
      const auto numeric = numeric_gradient(
          cf_blocks(m), [&] { return pairwise_objective(m, pairs, kind, l2); });
      double& worst = kind == PairwiseKind::bpr ? worst_bpr : worst_hinge;
      worst = std::max(worst, relative_error(analytic, numeric));
    }

    // Listwise over per-user ideal orders.
    std::vector<std::pair<UserId, std::vector<ActionId>>> lists;
    for (std::size_t u = 0; u < users; ++u) {
      std::vector<ActionId> order;
      for (std::uint32_t a = 1; a < actions; ++a) order.push_back(action_id(a));
      std::shuffle(order.begin(), order.end(), rng);
      lists.emplace_back(user_id(static_cast<std::uint32_t>(u)), order);
    }
    {
      const auto analytic = cf_flat(listwise_model_gradient(m, lists, l2));
      const auto numeric =
          numeric_gradient(cf_blocks(m), [&] { return listwise_objective(m, lists, l2); });
      worst_list = std::max(worst_list, relative_error(analytic, numeric));
    }

    // Sequential loss, alternating plain, Hadamard-bound and concat-bound models.
    SeqTrainConfig sc;
    sc.dim = d;
    sc.init_scale = 0.5;
    sc.seed = 500 + i;
    Mat knowledge;
    if (i % 3 != 0) {
      knowledge = Mat(static_cast<Eigen::Index>(actions), static_cast<Eigen::Index>(d));
      for (Eigen::Index k = 0; k < knowledge.size(); ++k) knowledge.data()[k] = uniform(rng, 0.5, 1.5);
      sc.bind = i % 3 == 1 ? BindMode::hadamard : BindMode::concat;
    }
    SeqModel sm = init_seq_model(actions, sc, knowledge);
    std::vector<WeightedSequence> seqs;
    for (std::size_t u = 0; u < users; ++u) {
      WeightedSequence s{user_id(static_cast<std::uint32_t>(u)), {}, {}};
      for (const auto& r : recs) {
        if (r.user == s.user) {
          s.steps.push_back({r.action, r.feedback});
          s.weights.push_back(uniform(rng, 0.0, 2.0));
        }
      }
      seqs.push_back(s);
    }
    if (i % 2 == 0) sm.user_init[user_id(1)] = Vec::Constant(static_cast<Eigen::Index>(d), 0.2);
    {
      const SeqParams g = seq_gradient(sm, seqs, l2, 0);
      const auto analytic = flatten(g.blocks());
      const auto numeric =
          numeric_gradient(sm.params.blocks(), [&] { return seq_loss(sm, seqs, l2); });
      worst_seq = std::max(worst_seq, relative_error(analytic, numeric));
    }
  }
  const double worst = std::max({worst_cf, worst_seq, worst_bpr, worst_hinge, worst_list});
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst < 1e-4 && secs < 10.0;
  o.detail = std::to_string(instances) + " instances per loss, max rel err cf " +
             fmt("%.2e", worst_cf) + ", seq " + fmt("%.2e", worst_seq) + ", bpr " +
             fmt("%.2e", worst_bpr) + ", hinge " + fmt("%.2e", worst_hinge) + ", listwise " +
             fmt("%.2e", worst_list) + "; " + fmt("%.2f", secs) + " s";
  return o;
}

// ---------------------------------------------------------------- 2

CfTrainConfig recovery_config() {
  CfTrainConfig c;
  c.dim = 3;
  c.epochs = 500;
  c.learning_rate = 0.05;
  c.decay = 0.999;
  c.l2 = 1e-6;
  c.init_scale = 0.3;
  c.seed = 3;
  return c;
}

Outcome cf_recovery() {
  const auto t0 = Clock::now();
  const PlantedMatrix pm = planted_rank(30, 40, 3, 0.6, 0.55, 17);
  const CfModel m = cf_train(pm.observed, recovery_config());
  const double rmse = evaluate_pointwise(m, pm.held_out);
  const double secs = seconds_since(t0);
  return {rmse < 0.05 && secs < 30.0,
          "held-out RMSE " + fmt("%.4f", rmse) + " on " + std::to_string(pm.held_out.size()) +
              " cells after 500 epochs; " + fmt("%.2f", secs) + " s"};
}

// ---------------------------------------------------------------- 3

Outcome ranking_oracles() {
  Rng rng(99);
  // Listwise loss over every arrangement of a fixed score set.
  bool listwise_ok = true;
  std::size_t perms_checked = 0;
  for (int n = 1; n <= 5; ++n) {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> scores;
      for (int i = 0; i < n; ++i) scores.push_back(uniform(rng, -3.0, 3.0));
      std::sort(scores.rbegin(), scores.rend());
      const double best = listwise_loss(scores);
      std::vector<int> idx(static_cast<std::size_t>(n));
      std::iota(idx.begin(), idx.end(), 0);
      while (std::next_permutation(idx.begin(), idx.end())) {
        std::vector<double> arranged;
        for (int i : idx) arranged.push_back(scores[static_cast<std::size_t>(i)]);
        ++perms_checked;
        if (listwise_loss(arranged) < best - 1e-12) listwise_ok = false;
      }
    }
  }

  const std::vector<double> g = {3, 1, 0};
  const double d = dcg(g);
  const bool dcg_ok = std::abs(d - 7.63093) < 1e-5;

  bool ndcg_ok = true;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> f(1 + static_cast<std::size_t>(i % 12));
    for (auto& x : f) x = quantize_feedback(uniform(rng, 0.0, 1.0));
    const double v = ndcg(f);
    const double vk = ndcg_at_k(f, 1 + static_cast<std::size_t>(i % 5));
    if (!(v >= 0.0 && v <= 1.0 && vk >= 0.0 && vk <= 1.0)) ndcg_ok = false;
  }

  bool retrieve_ok = true;
  const std::vector<std::string> tags = {"morning", "evening", "quiet", "busy"};
  for (int c = 0; c < 100; ++c) {
    const std::size_t dim = 4;
    Catalog cat(dim);
    const std::size_t n = 5 + static_cast<std::size_t>(c % 30);
    for (std::size_t i = 0; i < n; ++i) {
      ActionEntry e;
      e.name = "a" + std::to_string(i);
      if (uniform(rng, 0, 1) < 0.3) e.predicate.required.insert(tags[i % 4]);
      if (uniform(rng, 0, 1) < 0.2) e.predicate.excluded.insert(tags[(i + 1) % 4]);
      e.q_cf = Vec(static_cast<Eigen::Index>(dim));
      // Coarse values so ties occur and exercise the id tie-break.
      for (Eigen::Index k = 0; k < e.q_cf.size(); ++k) e.q_cf[k] = std::round(uniform(rng, -2, 2));
      cat.add(e);
    }
    UserProfile p;
    p.p_cf = Vec(static_cast<Eigen::Index>(dim));
    for (Eigen::Index k = 0; k < p.p_cf.size(); ++k) p.p_cf[k] = std::round(uniform(rng, -2, 2));
    ContextTags ctx;
    for (const auto& t : tags) {
      if (uniform(rng, 0, 1) < 0.5) ctx.insert(t);
    }
    const std::size_t k = 1 + static_cast<std::size_t>(c % 8);
    // Brute force: score everything admissible, full sort.
    std::vector<std::pair<double, std::uint32_t>> all;
    for (std::size_t i = 1; i < cat.size(); ++i) {
      const auto& e = cat.at(action_id(static_cast<std::uint32_t>(i)));
      if (e.predicate.allows(ctx)) all.push_back({-p.p_cf.dot(e.q_cf), static_cast<std::uint32_t>(i)});
    }
    std::sort(all.begin(), all.end());
    std::vector<ActionId> expect;
    for (std::size_t i = 0; i < std::min(k, all.size()); ++i) expect.push_back(action_id(all[i].second));
    if (retrieve(ctx, p, cat, k) != expect) retrieve_ok = false;
  }

  return {listwise_ok && dcg_ok && ndcg_ok && retrieve_ok,
          "listwise identity-minimal over " + std::to_string(perms_checked) +
              " arrangements: " + (listwise_ok ? "yes" : "no") + "; dcg([3,1,0]) = " +
              fmt("%.6f", d) + "; ndcg in [0,1] on 1000 lists: " + (ndcg_ok ? "yes" : "no") +
              "; retrieve = brute force on 100 catalogs: " + (retrieve_ok ? "yes" : "no")};
}

// ---------------------------------------------------------------- 4

Outcome ips_unbiasedness() {
  const auto t0 = Clock::now();
  const std::uint64_t seed = 11;
  const ScenarioConfig sc = ScenarioConfig::preset_defaults("mnar-exposure");
  const World world = make_world(sc, 8, seed);
  const Mat full = full_feedback_matrix(world, seed);
  const std::size_t U = world.users.size();
  const std::size_t A = world.catalog.size() - 1;

  // Fixed predictors, all fitted on one biased draw that is not reused below.
  const InteractionLog first = mnar_exposure_log(world, full, derive_seed(seed, {0}));
  std::vector<InteractionRecord> first_biased;
  for (const auto& rec : first.records()) {
    if (!is_calibration(rec)) first_biased.push_back(rec);
  }
  std::vector<double> action_sum(A + 1, 0.0), action_n(A + 1, 0.0);
  double global = 0.0;
  for (const auto& rec : first_biased) {
    action_sum[raw(rec.action)] += rec.feedback.value;
    action_n[raw(rec.action)] += 1.0;
    global += rec.feedback.value / static_cast<double>(first_biased.size());
  }
  CfTrainConfig cc;
  cc.epochs = 60;
  cc.seed = seed;
  const CfModel model = cf_train(first, cc);

  using Predictor = std::function<double(UserId, ActionId)>;
  const std::vector<std::pair<std::string, Predictor>> predictors = {
      {"action popularity",
       [&](UserId, ActionId a) {
         const auto i = raw(a);
         return action_n[i] > 0 ? action_sum[i] / action_n[i] : global;
       }},
      {"global mean", [&](UserId, ActionId) { return global; }},
      {"naive CF", [&](UserId u, ActionId a) { return cf_predict(model, u, a); }},
  };

  const int resamples = 50;
  std::vector<PropensityTable> tables;
  std::vector<std::vector<InteractionRecord>> draws;
  for (int r = 0; r < resamples; ++r) {
    const InteractionLog log = mnar_exposure_log(world, full, derive_seed(seed, {1000u + r}));
    tables.push_back(estimate_propensities(log));
    draws.emplace_back();
    for (const auto& rec : log.records()) {
      if (!is_calibration(rec)) draws.back().push_back(rec);
    }
  }

  bool pass = true;
  std::string detail;
  for (std::size_t k = 0; k < predictors.size(); ++k) {
    const auto& predict = predictors[k].second;
    double truth = 0.0;
    for (std::size_t u = 0; u < U; ++u) {
      for (std::size_t a = 1; a <= A; ++a) {
        const double e = full(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(a)) -
                         predict(user_id(static_cast<std::uint32_t>(u)),
                                 action_id(static_cast<std::uint32_t>(a)));
        truth += e * e;
      }
    }
    truth /= static_cast<double>(U * A);
    double ips = 0.0, naive = 0.0;
    for (int r = 0; r < resamples; ++r) {
      ips += ips_loss_estimate(draws[r], tables[r], U, A, predict) / resamples;
      naive += naive_loss_estimate(draws[r], predict) / resamples;
    }
    const double ips_dev = std::abs(ips - truth) / truth;
    const double naive_dev = std::abs(naive - truth) / truth;
    // IPS must hold for every predictor; the naive miss is required on the
    // popularity predictor, whose errors track exposure.
    pass = pass && ips_dev < 0.05 && (k != 0 || naive_dev > 0.15);
    detail += (k ? "; " : "") + predictors[k].first + ": true " + fmt("%.4f", truth) +
              ", IPS dev " + fmt("%.1f%%", 100 * ips_dev) + ", naive dev " +
              fmt("%.1f%%", 100 * naive_dev);
  }
  const double secs = seconds_since(t0);
  return {pass && secs < 60.0,
          detail + " (means over 50 resamples); " + fmt("%.2f", secs) + " s"};
}

// ---------------------------------------------------------------- 5

struct UnlearnTrial {
  double shrink = 0.0;
  double retain_degradation = 0.0;       // every record outside the forget set
  double user_retain_degradation = 0.0;  // the requesting user's remaining records
  double oracle_user_degradation = 0.0;  // same, for the retrained model
  int iterations = 0;
  bool audit_ok = false;
};

UnlearnTrial unlearn_trial(std::uint64_t seed) {
  const PlantedMatrix pm = planted_rank(30, 40, 3, 0.6, 0.55, seed);
  InteractionLog log = with_noise(pm.observed, 0.05, seed * 7);
  // User 0 gets an out-of-pattern habit on an action it never otherwise rated.
  const UserId u = user_id(0);
  ActionId target{};
  for (std::uint32_t a = 1; a <= 40; ++a) {
    bool seen = false;
    for (const auto& r : log.user_records(u)) seen |= r.action == action_id(a);
    if (!seen && pm.truth(0, a) < 0.4) {
      target = action_id(a);
      break;
    }
  }
  const Tick last = *log.last_tick(u);
  for (int k = 1; k <= 3; ++k) log.append({last + k, u, target, Feedback(1.0), {}});

  CfTrainConfig cc;
  cc.dim = 4;
  cc.epochs = 300;
  cc.decay = 0.999;
  cc.init_scale = 0.3;
  cc.seed = 3;
  const CfModel before = cf_train(log, cc);

  ForgetRequest req;
  req.user = u;
  req.actions = {target};
  std::vector<InteractionRecord> kept, user_kept;
  for (const auto& r : log.records()) {
    if (req.selects(r)) continue;
    kept.push_back(r);
    if (r.user == u) user_kept.push_back(r);
  }
  const CfModel oracle = cf_train(InteractionLog::from_records(kept), cc);

  const auto result = unlearn(before, log, req, UnlearnConfig{});

  UnlearnTrial t;
  const double p_oracle = cf_predict(oracle, u, target);
  const double gap_before = std::abs(cf_predict(before, u, target) - p_oracle);
  const double gap_after = std::abs(cf_predict(result.model, u, target) - p_oracle);
  t.shrink = 1.0 - gap_after / gap_before;
  auto rmse = [](const CfModel& m, const std::vector<InteractionRecord>& recs) {
    return std::sqrt(cf_loss(m, recs, {}, 0.0));
  };
  t.retain_degradation = rmse(result.model, kept) / rmse(before, kept) - 1.0;
  t.user_retain_degradation = rmse(result.model, user_kept) / rmse(before, user_kept) - 1.0;
  t.oracle_user_degradation = rmse(oracle, user_kept) / rmse(before, user_kept) - 1.0;
  t.iterations = result.audit.iterations;

  std::ostringstream audit;
  write_audit(audit, result.audit);
  const std::string text = audit.str();
  t.audit_ok = text.find("forget_loss_before") != std::string::npos &&
               text.find("retain_loss_after") != std::string::npos &&
               text.find("beta") != std::string::npos;
  return t;
}

Outcome unlearning_efficacy() {
  const auto t0 = Clock::now();
  bool pass = true;
  double min_shrink = 1.0, max_deg = -1.0;
  std::string user_deg;
  std::string iters;
  for (std::uint64_t seed = 23; seed < 28; ++seed) {
    const UnlearnTrial t = unlearn_trial(seed);
    pass = pass && t.shrink >= 0.5 && t.retain_degradation < 0.10 && t.audit_ok;
    min_shrink = std::min(min_shrink, t.shrink);
    max_deg = std::max(max_deg, t.retain_degradation);
    user_deg += (user_deg.empty() ? "" : ", ") + fmt("%+.0f%%", 100 * t.user_retain_degradation) +
                " vs retrained " + fmt("%+.0f%%", 100 * t.oracle_user_degradation);
    iters += (iters.empty() ? "" : "/") + std::to_string(t.iterations);
  }
  const double secs = seconds_since(t0);
  return {pass && secs < 60.0,
          "5 planted scenarios: gap to retrained oracle shrinks >= " +
              fmt("%.1f%%", 100 * min_shrink) + ", retain RMSE change <= " +
              fmt("%+.1f%%", 100 * max_deg) + ", iterations " + iters +
              "; requesting user's own records " + user_deg +
              ", audit emitted; " + fmt("%.2f", secs) + " s"};
}

// ---------------------------------------------------------------- 6

Outcome federation_identity() {
  Rng rng(5);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t users = 8, actions = 12;
    std::vector<InteractionRecord> recs = random_records(users, actions, 6, rng);
    const InteractionLog log = InteractionLog::from_records(recs);
    // Users 0-3 on one device, 4-7 on the other: equal shard sizes.
    const auto clients =
        partition_clients(log, [](UserId u) { return raw(u) < 4 ? "a" : "b"; });
    const CfModel global = init_cf_model(users, actions, 4, 0.3, 77 + trial);
    FederatedConfig fc;
    fc.local_mode = LocalMode::full_batch;
    fc.learning_rate = 0.1;
    const CfModel fed = federated_round(global, clients, fc, 0);
    CfModel central = global;
    const CfGradient g = cf_gradient(global, log.records(), {}, fc.l2);
    central.P -= fc.learning_rate * g.P;
    central.Q -= fc.learning_rate * g.Q;
    worst = std::max({worst, (fed.P - central.P).cwiseAbs().maxCoeff(),
                      (fed.Q - central.Q).cwiseAbs().maxCoeff()});
  }
  return {worst < 1e-9, "max elementwise difference " + fmt("%.3e", worst) + " over 10 trials"};
}

// ---------------------------------------------------------------- 7

Outcome fairness() {
  ScenarioConfig sc = ScenarioConfig::preset_defaults("heterogeneous-preferences");
  const World world = make_world(sc, 8, 31);
  FairnessConstraint c = FairnessConstraint::from_catalog(world.catalog, 0.1, 50);
  ExposureHistory history(c.window);
  std::map<std::string, std::size_t> counts, raw_counts;
  double ndcg_loss = 0.0;
  bool permutation_ok = true;
  std::size_t promoted = 0;
  const std::size_t decisions = 1000;
  for (std::size_t i = 0; i < decisions; ++i) {
    const SyntheticUser& u = world.users[i % world.users.size()];
    RankedList list;
    list.user = u.id;
    for (ActionId a : world.catalog.action_ids()) {
      list.entries.push_back({a, raw_feedback(u, world.truth[raw(a)])});
    }
    sort_ranked(list.entries);
    list.entries.resize(10);
    std::vector<std::string> audit;
    const RankedList fair = fair_rerank(list, c, history, &audit);
    promoted += !audit.empty();

    auto a = list.entries, b = fair.entries;
    auto by_id = [](const ScoredAction& x, const ScoredAction& y) { return raw(x.action) < raw(y.action); };
    std::sort(a.begin(), a.end(), by_id);
    std::sort(b.begin(), b.end(), by_id);
    if (a != b) permutation_ok = false;

    auto gains = [&](const RankedList& l) {
      std::vector<double> g;
      for (const auto& e : l.entries) g.push_back(std::clamp(e.score, 0.0, 1.0));
      return g;
    };
    ndcg_loss += (ndcg(gains(list)) - ndcg(gains(fair))) / decisions;
    const std::string& top = c.group(fair.entries.front().action);
    history.push(top);
    ++counts[top];
    ++raw_counts[c.group(list.entries.front().action)];
  }
  double worst_dev = 0.0;
  std::string shares;
  for (const auto& g : c.groups()) {
    const double s = static_cast<double>(counts[g]) / decisions;
    worst_dev = std::max(worst_dev, std::abs(s - c.target(g)));
    shares += (shares.empty() ? "" : ", ") + g + " " + fmt("%.3f", s) + " (unconstrained " +
              fmt("%.3f", static_cast<double>(raw_counts[g]) / decisions) + ")";
  }
  return {worst_dev <= c.epsilon && ndcg_loss < 0.05 && permutation_ok,
          "top-1 shares " + shares + "; max deviation " + fmt("%.3f", worst_dev) +
              ", mean NDCG loss " + fmt("%.4f", ndcg_loss) + ", " + std::to_string(promoted) +
              " promotions, permutation " + (permutation_ok ? "always" : "violated")};
}

// ---------------------------------------------------------------- 8

Outcome policy_gap() {
  const auto t0 = Clock::now();
  ScenarioConfig het = ScenarioConfig::preset_defaults("heterogeneous-preferences");
  het.users = 20;
  het.actions = 50;
  het.ticks = 500;
  EngineConfig rs;
  rs.cf.epochs = 60;
  rs.retrain_every = 50;
  EngineConfig pop = rs;
  pop.policy = Policy::popularity;
  EngineConfig rnd = rs;
  rnd.policy = Policy::random;

  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 1; s <= 10; ++s) seeds.push_back(s);
  const PolicyReport r_rs = evaluate_policy(rs, het, 1, seeds);
  const PolicyReport r_pop = evaluate_policy(pop, het, 1, seeds);
  const PolicyReport r_rnd = evaluate_policy(rnd, het, 1, seeds);
  int wins = 0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    wins += r_rs.cumulative_feedback[i] > r_pop.cumulative_feedback[i] &&
            r_rs.cumulative_feedback[i] > r_rnd.cumulative_feedback[i];
  }

  ScenarioConfig routine = ScenarioConfig::preset_defaults("routine-proactive");
  EngineConfig seq;
  seq.use_cf = false;
  seq.use_seq = true;
  seq.weights = {0.0, 1.0, 0.0};
  seq.retrain_every = 20;
  seq.seq.epochs = 40;
  seq.seq_refit_epochs = 10;
  double worst_hit = 1.0;
  std::string hits;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    const ScenarioRun run = run_scenario(routine, seq, s);
    worst_hit = std::min(worst_hit, run.report.final_quarter_hit_rate());
    hits += fmt("%.3f", run.report.final_quarter_hit_rate()) + (s < 3 ? "/" : "");
  }
  const double secs = seconds_since(t0);
  return {wins >= 9 && worst_hit >= 0.9 && secs < 300.0,
          "heterogeneous-preferences: RS beats both baselines in " + std::to_string(wins) +
              "/10 seeds (means rs " + fmt("%.1f", r_rs.mean) + ", popularity " +
              fmt("%.1f", r_pop.mean) + ", random " + fmt("%.1f", r_rnd.mean) +
              "); routine-proactive final-quarter hit rate " + hits + " (seeds 1-3); " +
              fmt("%.1f", secs) + " s"};
}

// ---------------------------------------------------------------- 9

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  std::vector<std::string> full = {"prefcore"};
  full.insert(full.end(), args.begin(), args.end());
  return cli::run(full, out, err);
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "prefcore-acceptance";
  fs::remove_all(root);
  const std::string preset = std::string(PREFCORE_SOURCE_DIR) + "/presets/disambiguation.ini";
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  for (const char* run : {"a", "b"}) {
    const fs::path d = root / run;
    expect(cli({"--seed", "7", "--config", preset, "simulate", "--out", (d / "sim").string()}) == 0,
           "simulate");
    const std::string log = (d / "sim" / "log.txt").string();
    expect(cli({"--seed", "7", "train", "--log", log, "--out", (d / "cf.model").string(),
                "--epochs", "20"}) == 0,
           "train");
    expect(cli({"--seed", "7", "train", "--log", log, "--out", (d / "seq.model").string(),
                "--objective", "sequential", "--epochs", "5"}) == 0,
           "train sequential");
    expect(cli({"--seed", "7", "evaluate", "--model", (d / "cf.model").string(), "--log", log,
                "--out", (d / "metrics.txt").string()}) == 0,
           "evaluate");
  }
  for (const char* f : {"sim/log.txt", "sim/report.txt", "cf.model", "seq.model", "metrics.txt"}) {
    const std::string a = slurp(root / "a" / f), b = slurp(root / "b" / f);
    expect(!a.empty() && a == b, std::string("identical ") + f);
  }

  // Round trips: parse, compare objects, re-serialise, compare bytes.
  const LoadedLog loaded = load_log(root / "a" / "sim" / "log.txt");
  std::ostringstream relog;
  write_log(relog, loaded.log, loaded.digest);
  expect(relog.str() == slurp(root / "a" / "sim" / "log.txt"), "log bytes round trip");
  std::istringstream relog_in(relog.str());
  expect(read_log(relog_in).log == loaded.log, "log object round trip");
  for (const char* f : {"cf.model", "seq.model"}) {
    const ModelSnapshot snap = load_snapshot(root / "a" / f);
    std::ostringstream again;
    write_snapshot(again, snap);
    expect(again.str() == slurp(root / "a" / f), std::string(f) + " bytes round trip");
    std::istringstream in(again.str());
    const ModelSnapshot back = read_snapshot(in);
    const bool same = snap.cf ? (back.cf && *back.cf == *snap.cf) : (back.seq && *back.seq == *snap.seq);
    expect(same, std::string(f) + " object round trip");
  }
  fs::remove_all(root);
  std::string detail = "logs, reports, snapshots, metrics byte-identical across two runs; log and "
                       "model files round-trip";
  if (!failures.empty()) {
    detail = "failed:";
    for (const auto& f : failures) detail += " [" + f + "]";
  }
  return {failures.empty(), detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"CF recovery", cf_recovery},
      {"ranking oracles", ranking_oracles},
      {"IPS unbiasedness", ips_unbiasedness},
      {"unlearning efficacy", unlearning_efficacy},
      {"federation identity", federation_identity},
      {"fairness", fairness},
      {"end-to-end policy gap", policy_gap},
      {"determinism and round trips", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "criterion " << (i + 1) << " [" << criteria[i].first << "]: "
              << (o.pass ? "PASS" : "FAIL") << " - " << o.detail << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criterion(s) failed" : "all criteria passed")
            << std::endl;
  return failed ? 1 : 0;
}
