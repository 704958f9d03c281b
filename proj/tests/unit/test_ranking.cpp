#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "../support/fixtures.hpp"
#include "prefcore/catalog.hpp"
#include "prefcore/error.hpp"
#include "prefcore/profile.hpp"
#include "prefcore/ranking.hpp"
#include "prefcore/retrieval.hpp"

using namespace prefcore;
using namespace prefcore::testing;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// Catalog whose q_cf / q_seq rows are set directly.
Catalog random_catalog(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Catalog cat(d);
  for (std::size_t i = 0; i < n; ++i) {
    ActionEntry e;
    e.q_cf = Vec(static_cast<Eigen::Index>(d));
    e.q_seq = Vec(static_cast<Eigen::Index>(d));
    for (Eigen::Index j = 0; j < e.q_cf.size(); ++j) {
      e.q_cf[j] = uniform(rng, -1, 1);
      e.q_seq[j] = uniform(rng, -1, 1);
    }
    cat.add(e);
  }
  return cat;
}

UserProfile profile_with(Vec p_cf, Vec p_seq = {}) {
  UserProfile p;
  p.id = user_id(0);
  p.p_cf = std::move(p_cf);
  p.p_seq = p_seq.size() ? std::move(p_seq) : Vec::Zero(p.p_cf.size());
  p.p_ke = Vec::Zero(p.p_cf.size());
  return p;
}

constexpr MixtureWeights kCfOnly{1.0, 0.0, 0.0};

}  // namespace

TEST_SUITE("scoring") {
  TEST_CASE("score is the inner product") {
    CHECK(score(vec({1, 0}), vec({0, 3})) == 0.0);
    CHECK(score(vec({0.6, 0.8}), vec({0.6, 0.8})) == doctest::Approx(1.0));
    CHECK_THROWS_AS(score(vec({1, 0}), vec({1, 0, 0})), DataError);
  }

  TEST_CASE("a degenerate mixture equals the single component") {
    ActionEntry a;
    a.q_cf = vec({1, 2});
    a.q_seq = vec({-3, 1});
    a.q_ke = vec({0.5, 0.5});
    const UserProfile p = profile_with(vec({0.2, 0.4}), vec({1, 1}));
    CHECK(mixture_score(p, a, kCfOnly) == score(p.p_cf, a.q_cf));
    CHECK(mixture_score(p, a, {0, 1, 0}) == score(p.p_seq, a.q_seq));
  }

  TEST_CASE("mixture weights renormalize over available models") {
    const MixtureWeights w;
    CHECK(w.renormalized(true, true, true) == w);
    const MixtureWeights two = w.renormalized(true, true, false);
    CHECK(two.cf == doctest::Approx(0.5));
    CHECK(two.seq == doctest::Approx(0.5));
    CHECK(two.ke == 0.0);
    const MixtureWeights one = w.renormalized(true, false, false);
    CHECK(one.cf == doctest::Approx(1.0));
  }
}

TEST_SUITE("pairwise") {
  TEST_CASE("loss values") {
    CHECK(pairwise_loss(0, PairwiseKind::bpr) == doctest::Approx(std::log(2.0)));
    CHECK(pairwise_loss(1, PairwiseKind::hinge) == 0.0);
    CHECK(pairwise_loss(-1, PairwiseKind::hinge) == 2.0);
    const double far = pairwise_loss(1000, PairwiseKind::bpr);
    CHECK(std::isfinite(far));
    CHECK(far < 1e-300);
    CHECK(pairwise_loss(-1000, PairwiseKind::bpr) == doctest::Approx(1000.0));
    for (double x : {-1e4, -50.0, 0.5, 50.0, 1e4}) {
      for (auto kind : {PairwiseKind::bpr, PairwiseKind::hinge}) {
        CHECK(std::isfinite(pairwise_loss(x, kind)));
        CHECK(std::isfinite(pairwise_loss_derivative(x, kind)));
      }
    }
  }

  TEST_CASE("loss derivative matches finite differences") {
    for (double x : {-3.0, -0.4, 0.2, 2.5}) {
      const double h = 1e-6;
      const double fd = (pairwise_loss(x + h, PairwiseKind::bpr) -
                         pairwise_loss(x - h, PairwiseKind::bpr)) / (2 * h);
      CHECK(pairwise_loss_derivative(x, PairwiseKind::bpr) == doctest::Approx(fd).epsilon(1e-6));
    }
  }

  TEST_CASE("pairs need distinct actions") {
    CHECK_THROWS_AS(PreferencePair(user_id(0), action_id(2), action_id(2)), DataError);
  }

  TEST_CASE("pairs from a log use strict feedback order") {
    const auto log = InteractionLog::from_records({
        {0, user_id(0), action_id(1), Feedback(1.0), {}},
        {1, user_id(0), action_id(2), Feedback(0.5), {}},
        {2, user_id(0), action_id(3), Feedback(0.5), {}},
        {0, user_id(1), action_id(1), Feedback(0.0), {}},
    });
    const auto pairs = pairs_from_log(log);
    CHECK(pairs.size() == 2);
    for (const auto& p : pairs) {
      CHECK(p.user() == user_id(0));
      CHECK(p.preferred() == action_id(1));
    }
  }

  TEST_CASE("2 users x 2 actions reach full training-pair accuracy") {
    const std::vector<PreferencePair> pairs = {{user_id(0), action_id(1), action_id(2)},
                                               {user_id(1), action_id(2), action_id(1)}};
    for (auto kind : {PairwiseKind::bpr, PairwiseKind::hinge}) {
      PairwiseConfig cfg;
      cfg.kind = kind;
      cfg.epochs = 200;
      const CfModel m = train_pairwise(init_cf_model(2, 3, 4, 0.1, 3), pairs, cfg);
      CHECK(pairwise_accuracy(m, pairs) == 1.0);
    }
    CHECK_THROWS_AS(train_pairwise(init_cf_model(2, 3, 4, 0.1, 3), {}, PairwiseConfig{}),
                    DataError);
  }

  TEST_CASE("analytic pairwise gradient matches finite differences") {
    Rng rng(6);
    for (int trial = 0; trial < 8; ++trial) {
      std::vector<PreferencePair> pairs;
      for (int i = 0; i < 4; ++i) {
        const auto a = static_cast<std::uint32_t>(1 + i % 4);
        pairs.emplace_back(user_id(static_cast<std::uint32_t>(i % 3)), action_id(a),
                           action_id(a % 4 + 1));
      }
      const auto kind = trial % 2 ? PairwiseKind::hinge : PairwiseKind::bpr;
      CfModel m = init_cf_model(3, 5, 3, 0.6, 50 + trial);
      const auto analytic = cf_flat(pairwise_gradient(m, pairs, kind, 0.01));
      const auto numeric = numeric_gradient(
          cf_blocks(m), [&] { return pairwise_objective(m, pairs, kind, 0.01); }, 1e-5);
      CHECK(relative_error(analytic, numeric) < 1e-4);
    }
  }

  TEST_CASE("a duplicated pair orders like the single pair trained twice as long") {
    const PreferencePair p(user_id(0), action_id(3), action_id(1));
    PairwiseConfig cfg;
    cfg.decay = 1.0;
    cfg.epochs = 20;
    const CfModel init = init_cf_model(2, 5, 3, 0.3, 8);
    const std::vector<PreferencePair> twice = {p, p};
    const CfModel a = train_pairwise(init, twice, cfg);
    cfg.epochs = 40;
    const CfModel b = train_pairwise(init, std::vector<PreferencePair>{p}, cfg);
    auto order = [](const CfModel& m) {
      std::vector<ScoredAction> e;
      for (std::uint32_t x = 1; x < 5; ++x) e.push_back({action_id(x), cf_predict(m, user_id(0), action_id(x))});
      sort_ranked(e);
      std::vector<ActionId> out;
      for (const auto& s : e) out.push_back(s.action);
      return out;
    };
    CHECK(order(a) == order(b));
    CHECK((a.P - b.P).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("pairwise objective trends down on separable data") {
    const auto pm = planted_rank(10, 8, 2, 1.0, 0.7, 4);
    const auto pairs = pairs_from_log(pm.observed);
    PairwiseConfig cfg;
    cfg.epochs = 60;
    TrainTrace trace;
    const CfModel m = train_pairwise(init_cf_model(10, 9, 4, 0.1, 2), pairs, cfg, &trace);
    REQUIRE(trace.epoch_losses.size() == 60);
    CHECK(trace.epoch_losses.back() < trace.epoch_losses.front());
    CHECK(pairwise_accuracy(m, pairs) >= 0.9);
  }
}

TEST_SUITE("listwise") {
  TEST_CASE("loss values") {
    CHECK(listwise_loss(std::vector<double>{0.3}) == 0.0);
    CHECK(listwise_loss(std::vector<double>{1.0, 1.0}) == doctest::Approx(std::log(2.0)));
    CHECK(listwise_loss(std::vector<double>{10, 0}) < 1e-4);
    CHECK(listwise_loss(std::vector<double>{25, 15, 5}) < 1e-4);
    // Each placement with gap g to every later item costs log(1 + sum e^-g).
    const double four = std::log1p(std::exp(-10) + std::exp(-20) + std::exp(-30)) +
                        std::log1p(std::exp(-10) + std::exp(-20)) + std::log1p(std::exp(-10));
    CHECK(listwise_loss(std::vector<double>{30, 20, 10, 0}) == doctest::Approx(four).epsilon(1e-9));
    CHECK_THROWS_AS(listwise_loss(std::vector<double>{}), DataError);
    const std::vector<double> big = {1e4, -1e4, 5e3, 0};
    CHECK(std::isfinite(listwise_loss(big)));
    for (double g : listwise_gradient(big)) CHECK(std::isfinite(g));
  }

  TEST_CASE("strictly descending scores minimise the loss over all arrangements") {
    Rng rng(14);
    for (std::size_t n = 1; n <= 5; ++n) {
      std::vector<double> scores;
      for (std::size_t i = 0; i < n; ++i) scores.push_back(uniform(rng, -2, 2));
      std::sort(scores.begin(), scores.end(), std::greater<>());
      const double best = listwise_loss(scores);
      std::vector<double> perm = scores;
      std::sort(perm.begin(), perm.end());
      do {
        CHECK(listwise_loss(perm) >= best - 1e-12);
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
  }

  TEST_CASE("listwise gradient matches finite differences") {
    const std::vector<double> s = {0.4, -1.0, 2.0, 0.1};
    const auto g = listwise_gradient(s);
    for (std::size_t i = 0; i < s.size(); ++i) {
      auto up = s, down = s;
      up[i] += 1e-6;
      down[i] -= 1e-6;
      CHECK(g[i] == doctest::Approx((listwise_loss(up) - listwise_loss(down)) / 2e-6).epsilon(1e-6));
    }
    Rng rng(10);
    const auto log = InteractionLog::from_records(random_records(3, 6, 4, rng));
    const auto lists = listwise_lists(log);
    CfModel m = init_cf_model(3, 6, 3, 0.5, 1);
    const auto analytic = cf_flat(listwise_model_gradient(m, lists, 0.01));
    const auto numeric = numeric_gradient(
        cf_blocks(m), [&] { return listwise_objective(m, lists, 0.01); }, 1e-5);
    CHECK(relative_error(analytic, numeric) < 1e-4);
  }

  TEST_CASE("ideal order breaks ties by ascending id") {
    const auto order = ideal_order({{action_id(4), 0.5}, {action_id(2), 0.5}, {action_id(3), 1.0}});
    CHECK(order == std::vector<ActionId>{action_id(3), action_id(2), action_id(4)});
  }

  TEST_CASE("listwise training lowers its objective") {
    const auto pm = planted_rank(8, 6, 2, 1.0, 0.7, 12);
    ListwiseConfig cfg;
    cfg.epochs = 40;
    TrainTrace trace;
    train_listwise(init_cf_model(8, 7, 3, 0.1, 1), pm.observed, cfg, &trace);
    CHECK(trace.epoch_losses.back() < trace.epoch_losses.front());
  }
}

TEST_SUITE("dcg") {
  TEST_CASE("hand-evaluated values") {
    CHECK(dcg(std::vector<double>{3, 1, 0}) == doctest::Approx(7.0 + 1.0 / std::log2(3.0)));
    CHECK(dcg(std::vector<double>{3, 1, 0}) == doctest::Approx(7.63093).epsilon(1e-6));
    CHECK(dcg(std::vector<double>{0, 0, 0}) == 0.0);
    CHECK(ndcg(std::vector<double>{0, 0, 0}) == 1.0);
    CHECK(dcg(std::vector<double>{0.75}) == doctest::Approx(std::pow(2.0, 0.75) - 1));
    CHECK(dcg_at_k(std::vector<double>{3, 1, 0}, 1) == doctest::Approx(7.0));
  }

  TEST_CASE("ndcg is in [0, 1] and equals 1 exactly for ideal orders") {
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> f;
      const int n = 1 + trial % 7;
      for (int i = 0; i < n; ++i) f.push_back(quantize_feedback(uniform(rng, 0, 1)));
      const double v = ndcg(f);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0 + 1e-12);
      auto sorted = f;
      std::sort(sorted.begin(), sorted.end(), std::greater<>());
      CHECK(ndcg(sorted) == doctest::Approx(1.0));
      // Only a ranking that is non-increasing in feedback reaches 1.
      const bool ideal = std::is_sorted(f.begin(), f.end(), std::greater<>());
      CHECK((v > 1.0 - 1e-12) == ideal);
    }
  }
}

TEST_SUITE("retrieval and reranking") {
  TEST_CASE("predicates filter and k saturates") {
    Catalog cat = random_catalog(5, 2, 3);
    cat.at(action_id(2)).predicate.required = {"at-home"};
    const UserProfile p = profile_with(vec({1, 1}));
    const auto outdoors = retrieve({"outdoors"}, p, cat, 50);
    CHECK(outdoors.size() == 4);
    CHECK(std::find(outdoors.begin(), outdoors.end(), action_id(2)) == outdoors.end());
    CHECK(retrieve({"at-home"}, p, cat, 50).size() == 5);
    CHECK(retrieve({"at-home"}, p, cat, 2).size() == 2);

    Catalog closed = random_catalog(2, 2, 1);
    for (auto a : closed.action_ids()) closed.at(a).predicate.excluded = {"night"};
    CHECK(retrieve({"night"}, p, closed, 3).empty());
  }

  TEST_CASE("exact retrieval equals brute-force top-k") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const Catalog cat = random_catalog(50, 4, seed);
      Rng rng(seed + 100);
      Vec p(4);
      for (Eigen::Index j = 0; j < 4; ++j) p[j] = uniform(rng, -1, 1);
      std::vector<ScoredAction> all;
      for (auto a : cat.action_ids()) all.push_back({a, p.dot(cat.at(a).q_cf)});
      sort_ranked(all);
      for (std::size_t k : {1, 7, 10, 50}) {
        std::vector<ActionId> expected;
        for (std::size_t i = 0; i < k; ++i) expected.push_back(all[i].action);
        CHECK(retrieve({}, profile_with(p), cat, k) == expected);
      }
    }
  }

  TEST_CASE("rerank: single candidate, opposing mixtures, input order") {
    Catalog cat(2);
    ActionEntry up, down;
    up.q_cf = up.q_seq = vec({1, 0});
    down.q_cf = down.q_seq = vec({-1, 0});
    const ActionId a = cat.add(up);
    const ActionId b = cat.add(down);
    const UserProfile p = profile_with(vec({1, 0}), vec({-1, 0}));

    const RankedList one = rerank({b}, p, {}, cat, kCfOnly);
    REQUIRE(one.entries.size() == 1);
    CHECK(one.entries[0].action == b);
    CHECK(one.entries[0].score == doctest::Approx(-1.0));

    CHECK(rerank({a, b}, p, {}, cat, kCfOnly).actions() == std::vector<ActionId>{a, b});
    CHECK(rerank({a, b}, p, {}, cat, {0, 1, 0}).actions() == std::vector<ActionId>{b, a});

    const Catalog big = random_catalog(12, 3, 7);
    const UserProfile q = profile_with(vec({0.3, -0.2, 0.9}), vec({-0.5, 0.4, 0.1}));
    std::vector<ActionId> cands = big.action_ids();
    const RankedList ref = rerank(cands, q, {}, big, {0.5, 0.5, 0});
    Rng rng(1);
    for (int i = 0; i < 10; ++i) {
      std::shuffle(cands.begin(), cands.end(), rng);
      CHECK(rerank(cands, q, {}, big, {0.5, 0.5, 0}) == ref);
    }
  }

  TEST_CASE("ranked lists are sorted with id tie-breaks") {
    Catalog cat(1);
    for (int i = 0; i < 4; ++i) {
      ActionEntry e;
      e.q_cf = vec({i == 2 ? 2.0 : 1.0});
      cat.add(e);
    }
    const RankedList r = rerank({action_id(4), action_id(1), action_id(3), action_id(2)},
                                profile_with(vec({1})), {}, cat, kCfOnly);
    CHECK(r.actions() == std::vector<ActionId>{action_id(3), action_id(1), action_id(2), action_id(4)});
    CHECK(r.position_of(action_id(2)) == std::optional<std::size_t>(2));
  }

  TEST_CASE("adding a constant to every score keeps the order") {
    const Catalog cat = random_catalog(15, 3, 2);
    // Append a constant coordinate: every score moves by the same amount.
    Catalog wide(4);
    for (auto a : cat.action_ids()) {
      ActionEntry e = cat.at(a);
      e.knowledge = Vec();
      e.q_cf = Vec(4);
      e.q_cf << cat.at(a).q_cf, 1.0;
      e.q_seq = e.q_cf;
      wide.add(e);
    }
    const Vec p = vec({0.4, -0.7, 0.2});
    Vec pw(4);
    pw << p, 25.0;
    const auto base = rerank(cat.action_ids(), profile_with(p), {}, cat, kCfOnly);
    const auto moved = rerank(wide.action_ids(), profile_with(pw), {}, wide, kCfOnly);
    CHECK(base.actions() == moved.actions());
  }

  TEST_CASE("retrieve then rerank equals rerank of everything truncated") {
    const Catalog cat = random_catalog(40, 4, 9);
    const UserProfile p = profile_with(vec({0.1, 0.9, -0.3, 0.5}));
    const auto full = rerank(cat.action_ids(), p, {}, cat, kCfOnly);
    for (std::size_t k : {1, 5, 10}) {
      const auto staged = rerank(retrieve({}, p, cat, k), p, {}, cat, kCfOnly);
      CHECK(staged.entries == std::vector<ScoredAction>(full.entries.begin(),
                                                        full.entries.begin() + static_cast<long>(k)));
    }
  }

  TEST_CASE("scores stay finite at magnitude 1e4") {
    Catalog cat(2);
    ActionEntry e;
    e.q_cf = vec({100, -100});
    cat.add(e);
    e.q_cf = vec({-100, 100});
    cat.add(e);
    const auto r = rerank(cat.action_ids(), profile_with(vec({100, 0})), {}, cat, kCfOnly);
    CHECK(r.entries[0].score == doctest::Approx(1e4));
    std::vector<double> s;
    for (const auto& x : r.entries) s.push_back(x.score);
    CHECK(std::isfinite(listwise_loss(s)));
    CHECK(std::isfinite(pairwise_loss(s[0] - s[1], PairwiseKind::bpr)));
    CHECK(std::isfinite(pairwise_loss(s[1] - s[0], PairwiseKind::bpr)));
  }
}

TEST_SUITE("follow-up pairs") {
  DecisionRepresentation decision_xyz() {
    DecisionRepresentation d;
    d.user = user_id(3);
    d.ranking.user = d.user;
    d.ranking.entries = {{action_id(7), 0.9}, {action_id(8), 0.5}, {action_id(9), 0.1}};
    d.chosen = action_id(7);
    return d;
  }

  TEST_CASE("examples") {
    const auto d = decision_xyz();
    CHECK(pairs_from_followup(d, action_id(7)).empty());
    const auto one = pairs_from_followup(d, action_id(9));
    REQUIRE(one.size() == 1);
    CHECK(one[0] == PreferencePair(user_id(3), action_id(9), action_id(7)));
    const auto all = pairs_from_followup(d, action_id(9), FollowupMode::above_all);
    CHECK(all == std::vector<PreferencePair>{{user_id(3), action_id(9), action_id(7)},
                                             {user_id(3), action_id(9), action_id(8)}});
    CHECK_THROWS_AS(pairs_from_followup(d, action_id(2)), DataError);
  }
}

TEST_SUITE("ranked-list report") {
  TEST_CASE("tab-separated rank, action and six-decimal score") {
    RankedList r;
    r.entries = {{action_id(4), 0.5}, {action_id(2), -1.0 / 3.0}};
    std::ostringstream out;
    write_ranked_list(out, r);
    CHECK(out.str() == "1\t4\t0.500000\n2\t2\t-0.333333\n");
  }
}
