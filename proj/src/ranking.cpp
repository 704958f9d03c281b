#include "prefcore/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>
#include <string>

#include "prefcore/error.hpp"
#include "prefcore/random.hpp"

namespace prefcore {

double score(const Vec& p, const Vec& q) {
  if (p.size() != q.size()) {
    throw DataError("score: dimension mismatch (" + std::to_string(p.size()) + " vs " +
                    std::to_string(q.size()) + ")");
  }
  return p.dot(q);
}

MixtureWeights MixtureWeights::renormalized(bool has_cf, bool has_seq, bool has_ke) const {
  MixtureWeights w{has_cf ? cf : 0.0, has_seq ? seq : 0.0, has_ke ? ke : 0.0};
  const double total = w.cf + w.seq + w.ke;
  if (total <= 0.0) {
    throw UsageError("mixture weights leave no available preference model");
  }
  w.cf /= total;
  w.seq /= total;
  w.ke /= total;
  return w;
}

double mixture_score(const UserProfile& profile, const ActionEntry& action,
                     const MixtureWeights& weights) {
  double s = 0.0;
  if (weights.cf != 0.0) s += weights.cf * score(profile.p_cf, action.q_cf);
  if (weights.seq != 0.0) s += weights.seq * score(profile.p_seq, action.q_seq);
  if (weights.ke != 0.0) s += weights.ke * score(profile.p_ke, action.q_ke);
  return s;
}

double pairwise_loss(double x, PairwiseKind kind) {
  if (kind == PairwiseKind::hinge) return std::max(0.0, 1.0 - x);
  // ln(1 + e^-x): for x > 0 use log1p(e^-x), otherwise -x + log1p(e^x).
  if (x > 0) return std::log1p(std::exp(-x));
  return -x + std::log1p(std::exp(x));
}

double pairwise_loss_derivative(double x, PairwiseKind kind) {
  if (kind == PairwiseKind::hinge) return x < 1.0 ? -1.0 : 0.0;
  // d/dx ln(1 + e^-x) = -1 / (1 + e^x)
  if (x > 0) {
    const double e = std::exp(-x);
    return -e / (1.0 + e);
  }
  return -1.0 / (1.0 + std::exp(x));
}

PreferencePair::PreferencePair(UserId user, ActionId preferred, ActionId dispreferred)
    : user_(user), preferred_(preferred), dispreferred_(dispreferred) {
  if (preferred == dispreferred) {
    throw DataError("preference pair needs two distinct actions (got " +
                    std::to_string(raw(preferred)) + " twice)");
  }
}

namespace {

// Latest feedback per (user, action), users and actions in ascending order.
std::map<UserId, std::map<ActionId, double>> latest_feedback(const InteractionLog& log) {
  std::map<UserId, std::map<ActionId, std::pair<Tick, double>>> latest;
  for (const auto& rec : log.records()) {
    auto& slot = latest[rec.user];
    auto it = slot.find(rec.action);
    if (it == slot.end() || rec.t > it->second.first) {
      slot[rec.action] = {rec.t, rec.feedback.value};
    }
  }
  std::map<UserId, std::map<ActionId, double>> out;
  for (const auto& [u, m] : latest) {
    for (const auto& [a, tf] : m) out[u][a] = tf.second;
  }
  return out;
}

void check_pair(const CfModel& model, const PreferencePair& pr) {
  if (raw(pr.user()) >= model.num_users() || raw(pr.preferred()) >= model.num_actions() ||
      raw(pr.dispreferred()) >= model.num_actions()) {
    throw DataError("preference pair outside model dimensions");
  }
}

}  // namespace

std::vector<PreferencePair> pairs_from_log(const InteractionLog& log) {
  std::vector<PreferencePair> pairs;
  for (const auto& [u, fb] : latest_feedback(log)) {
    for (const auto& [a, f] : fb) {
      for (const auto& [b, g] : fb) {
        if (f > g) pairs.emplace_back(u, a, b);
      }
    }
  }
  return pairs;
}

double pairwise_objective(const CfModel& model, std::span<const PreferencePair> pairs,
                          PairwiseKind kind, double l2) {
  double total = 0.0;
  for (const auto& pr : pairs) {
    check_pair(model, pr);
    const auto p = model.P.row(raw(pr.user()));
    const auto qa = model.Q.row(raw(pr.preferred()));
    const auto qb = model.Q.row(raw(pr.dispreferred()));
    total += pairwise_loss(p.dot(qa) - p.dot(qb), kind) +
             l2 * (p.squaredNorm() + qa.squaredNorm() + qb.squaredNorm());
  }
  return total;
}

CfGradient pairwise_gradient(const CfModel& model, std::span<const PreferencePair> pairs,
                             PairwiseKind kind, double l2) {
  CfGradient g{Mat::Zero(model.P.rows(), model.P.cols()),
               Mat::Zero(model.Q.rows(), model.Q.cols())};
  for (const auto& pr : pairs) {
    check_pair(model, pr);
    const auto p = model.P.row(raw(pr.user()));
    const auto qa = model.Q.row(raw(pr.preferred()));
    const auto qb = model.Q.row(raw(pr.dispreferred()));
    const double s = pairwise_loss_derivative(p.dot(qa) - p.dot(qb), kind);
    g.P.row(raw(pr.user())) += s * (qa - qb) + 2.0 * l2 * p;
    g.Q.row(raw(pr.preferred())) += s * p + 2.0 * l2 * qa;
    g.Q.row(raw(pr.dispreferred())) += -s * p + 2.0 * l2 * qb;
  }
  return g;
}

CfModel train_pairwise(CfModel model, std::span<const PreferencePair> pairs,
                       const PairwiseConfig& config, TrainTrace* trace) {
  if (pairs.empty()) throw DataError("train_pairwise: no preference pairs");
  for (const auto& pr : pairs) {
    check_pair(model, pr);
    model.known_users[raw(pr.user())] = true;
  }
  std::vector<std::size_t> order(pairs.size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double rate = config.learning_rate * std::pow(config.decay, epoch);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(config.seed, {0x70616972ULL, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      const auto& pr = pairs[i];
      auto p = model.P.row(raw(pr.user()));
      auto qa = model.Q.row(raw(pr.preferred()));
      auto qb = model.Q.row(raw(pr.dispreferred()));
      const double s = pairwise_loss_derivative(p.dot(qa) - p.dot(qb), config.kind);
      const Eigen::RowVectorXd gp = s * (qa - qb) + 2.0 * config.l2 * p;
      const Eigen::RowVectorXd ga = s * p + 2.0 * config.l2 * qa;
      const Eigen::RowVectorXd gb = -s * p + 2.0 * config.l2 * qb;
      p -= rate * gp;
      qa -= rate * ga;
      qb -= rate * gb;
    }
    const double loss = pairwise_objective(model, pairs, config.kind, config.l2);
    if (!std::isfinite(loss)) {
      throw NumericError("train_pairwise diverged at epoch " + std::to_string(epoch + 1));
    }
    if (trace) trace->epoch_losses.push_back(loss / static_cast<double>(pairs.size()));
  }
  return model;
}

double pairwise_accuracy(const CfModel& model, std::span<const PreferencePair> pairs) {
  if (pairs.empty()) return 1.0;
  std::size_t correct = 0;
  for (const auto& pr : pairs) {
    if (cf_predict(model, pr.user(), pr.preferred()) >
        cf_predict(model, pr.user(), pr.dispreferred())) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

namespace {

double log_add_exp(double a, double b) {
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

// suffix[i] = log sum_{j >= i} exp(r_j)
std::vector<double> suffix_lse(std::span<const double> r) {
  std::vector<double> out(r.size());
  double acc = 0.0;
  for (std::size_t i = r.size(); i-- > 0;) {
    acc = (i + 1 == r.size()) ? r[i] : log_add_exp(r[i], acc);
    out[i] = acc;
  }
  return out;
}

}  // namespace

double listwise_loss(std::span<const double> r) {
  if (r.empty()) throw DataError("listwise_loss: empty list");
  const auto lse = suffix_lse(r);
  double loss = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) loss += lse[i] - r[i];
  return loss;
}

std::vector<double> listwise_gradient(std::span<const double> r) {
  if (r.empty()) throw DataError("listwise_gradient: empty list");
  const auto lse = suffix_lse(r);
  std::vector<double> g(r.size(), -1.0);
  for (std::size_t k = 0; k < r.size(); ++k) {
    for (std::size_t i = 0; i <= k; ++i) g[k] += std::exp(r[k] - lse[i]);
  }
  return g;
}

std::vector<ActionId> ideal_order(std::vector<std::pair<ActionId, double>> feedback) {
  std::sort(feedback.begin(), feedback.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return raw(a.first) < raw(b.first);
  });
  std::vector<ActionId> out;
  out.reserve(feedback.size());
  for (const auto& [a, f] : feedback) out.push_back(a);
  return out;
}

std::vector<std::pair<UserId, std::vector<ActionId>>> listwise_lists(const InteractionLog& log) {
  std::vector<std::pair<UserId, std::vector<ActionId>>> lists;
  for (const auto& [u, fb] : latest_feedback(log)) {
    lists.emplace_back(u, ideal_order({fb.begin(), fb.end()}));
  }
  return lists;
}

namespace {

void check_list(const CfModel& model, UserId u, const std::vector<ActionId>& list) {
  if (raw(u) >= model.num_users()) throw DataError("listwise: user outside model");
  for (ActionId a : list) {
    if (raw(a) >= model.num_actions()) throw DataError("listwise: action outside model");
  }
}

}  // namespace

double listwise_objective(const CfModel& model,
                          std::span<const std::pair<UserId, std::vector<ActionId>>> lists,
                          double l2) {
  double total = 0.0;
  std::vector<double> r;
  for (const auto& [u, list] : lists) {
    check_list(model, u, list);
    if (list.empty()) continue;
    const auto p = model.P.row(raw(u));
    r.clear();
    for (ActionId a : list) {
      r.push_back(p.dot(model.Q.row(raw(a))));
      total += l2 * model.Q.row(raw(a)).squaredNorm();
    }
    total += listwise_loss(r) + l2 * p.squaredNorm();
  }
  return total;
}

CfGradient listwise_model_gradient(
    const CfModel& model, std::span<const std::pair<UserId, std::vector<ActionId>>> lists,
    double l2) {
  CfGradient g{Mat::Zero(model.P.rows(), model.P.cols()),
               Mat::Zero(model.Q.rows(), model.Q.cols())};
  std::vector<double> r;
  for (const auto& [u, list] : lists) {
    check_list(model, u, list);
    if (list.empty()) continue;
    const auto p = model.P.row(raw(u));
    r.clear();
    for (ActionId a : list) r.push_back(p.dot(model.Q.row(raw(a))));
    const auto dr = listwise_gradient(r);
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto row = raw(list[i]);
      g.P.row(raw(u)) += dr[i] * model.Q.row(row);
      g.Q.row(row) += dr[i] * p + 2.0 * l2 * model.Q.row(row);
    }
    g.P.row(raw(u)) += 2.0 * l2 * p;
  }
  return g;
}

CfModel train_listwise(CfModel model, const InteractionLog& log, const ListwiseConfig& config,
                       TrainTrace* trace) {
  const auto lists = listwise_lists(log);
  if (lists.empty()) throw DataError("train_listwise: empty log");
  for (const auto& [u, list] : lists) {
    check_list(model, u, list);
    model.known_users[raw(u)] = true;
  }
  std::vector<std::size_t> order(lists.size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double rate = config.learning_rate * std::pow(config.decay, epoch);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(config.seed, {0x6c697374ULL, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t idx : order) {
      const auto one = std::span(lists).subspan(idx, 1);
      const CfGradient g = listwise_model_gradient(model, one, config.l2);
      const auto u = raw(one[0].first);
      model.P.row(u) -= rate * g.P.row(u);
      for (ActionId a : one[0].second) model.Q.row(raw(a)) -= rate * g.Q.row(raw(a));
    }
    const double loss = listwise_objective(model, lists, config.l2);
    if (!std::isfinite(loss)) {
      throw NumericError("train_listwise diverged at epoch " + std::to_string(epoch + 1));
    }
    if (trace) trace->epoch_losses.push_back(loss);
  }
  return model;
}

double dcg(std::span<const double> f) { return dcg_at_k(f, f.size()); }

double dcg_at_k(std::span<const double> f, std::size_t k) {
  double total = 0.0;
  const std::size_t n = std::min(k, f.size());
  for (std::size_t i = 0; i < n; ++i) {
    total += (std::exp2(f[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
  }
  return total;
}

double ndcg(std::span<const double> f) { return ndcg_at_k(f, f.size()); }

double ndcg_at_k(std::span<const double> f, std::size_t k) {
  std::vector<double> ideal(f.begin(), f.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double best = dcg_at_k(ideal, k);
  const double got = dcg_at_k(f, k);
  if (best == 0.0) return got == 0.0 ? 1.0 : 0.0;
  return got / best;
}

std::vector<PreferencePair> pairs_from_followup(const DecisionRepresentation& decision,
                                                ActionId target, FollowupMode mode) {
  const auto pos = decision.ranking.position_of(target);
  if (!pos) {
    throw DataError("follow-up names action " + std::to_string(raw(target)) +
                    " which was not among the decision's candidates");
  }
  std::vector<PreferencePair> pairs;
  if (*pos == 0) return pairs;
  const std::size_t upto = mode == FollowupMode::above_all ? *pos : 1;
  for (std::size_t i = 0; i < upto; ++i) {
    pairs.emplace_back(decision.user, target, decision.ranking.entries[i].action);
  }
  return pairs;
}

void write_ranked_list(std::ostream& out, const RankedList& list) {
  char buf[64];
  for (std::size_t i = 0; i < list.entries.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.6f", list.entries[i].score);
    out << (i + 1) << '\t' << raw(list.entries[i].action) << '\t' << buf << '\n';
  }
}

}  // namespace prefcore
