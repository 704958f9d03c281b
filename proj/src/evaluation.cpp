#include "prefcore/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <ostream>

#include "prefcore/error.hpp"
#include "prefcore/log_io.hpp"
#include "prefcore/random.hpp"
#include "prefcore/ranking.hpp"

namespace prefcore {

void MetricReport::set(const std::string& name, double value) {
  if (!std::isfinite(value)) throw NumericError("metric '" + name + "' is not finite");
  for (auto& [k, v] : metrics_) {
    if (k == name) {
      v = value;
      return;
    }
  }
  metrics_.emplace_back(name, value);
}

std::optional<double> MetricReport::get(const std::string& name) const {
  for (const auto& [k, v] : metrics_) {
    if (k == name) return v;
  }
  return std::nullopt;
}

void write_report_text(std::ostream& out, const MetricReport& report) {
  std::size_t width = 0;
  for (const auto& [k, v] : report.metadata) width = std::max(width, k.size());
  for (const auto& [k, v] : report.metrics()) width = std::max(width, k.size());
  auto pad = [&](const std::string& k) { return k + std::string(width - k.size() + 2, ' '); };
  for (const auto& [k, v] : report.metadata) out << pad(k) << v << '\n';
  char buf[64];
  for (const auto& [k, v] : report.metrics()) {
    std::snprintf(buf, sizeof buf, "%.6f", v);
    out << pad(k) << buf << '\n';
  }
}

void write_report_kv(std::ostream& out, const MetricReport& report, const std::string& digest) {
  out << kMetricsFormat << '\n' << "digest " << digest << '\n';
  for (const auto& [k, v] : report.metadata) out << k << '=' << v << '\n';
  for (const auto& [k, v] : report.metrics()) out << k << '=' << format_double(v) << '\n';
}

double evaluate_pointwise(const CfModel& model, const InteractionLog& test) {
  if (test.empty()) throw DataError("evaluate_pointwise: empty test log");
  double sum = 0.0;
  for (const auto& r : test.records()) {
    const double e = r.feedback.value - cf_predict(model, r.user, r.action);
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(test.size()));
}

RankingMetrics evaluate_ranking(const ScoreFn& score, std::size_t num_actions,
                                const InteractionLog& test, std::size_t k, double threshold) {
  if (k == 0) throw UsageError("evaluate_ranking: k must be at least 1");
  std::map<UserId, std::map<ActionId, std::pair<Tick, double>>> latest;
  for (const auto& r : test.records()) {
    auto& slot = latest[r.user];
    auto it = slot.find(r.action);
    if (it == slot.end() || r.t > it->second.first) slot[r.action] = {r.t, r.feedback.value};
  }

  RankingMetrics m;
  m.k = k;
  for (const auto& [u, gains] : latest) {
    std::size_t relevant = 0;
    for (const auto& [a, tf] : gains) relevant += tf.second >= threshold;
    if (relevant == 0) continue;

    std::vector<ScoredAction> ranked;
    for (std::size_t i = 1; i < num_actions; ++i) {
      const ActionId a = action_id(static_cast<std::uint32_t>(i));
      ranked.push_back({a, score(u, a)});
    }
    sort_ranked(ranked);
    std::vector<double> gain_order;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      auto it = gains.find(ranked[i].action);
      const double g = it == gains.end() ? 0.0 : it->second.second;
      gain_order.push_back(g);
      if (i < k && g >= threshold) ++hits;
    }
    m.ndcg += ndcg_at_k(gain_order, k);
    m.precision += static_cast<double>(hits) / static_cast<double>(k);
    m.recall += static_cast<double>(hits) / static_cast<double>(relevant);
    ++m.users;
  }
  if (m.users == 0) {
    throw DataError("evaluate_ranking: no user has a relevant test action");
  }
  const double n = static_cast<double>(m.users);
  m.ndcg /= n;
  m.precision /= n;
  m.recall /= n;
  return m;
}

RankingMetrics evaluate_ranking(const CfModel& model, const InteractionLog& test,
                                std::size_t k, double threshold) {
  return evaluate_ranking([&](UserId u, ActionId a) { return cf_predict(model, u, a); },
                          model.num_actions(), test, k, threshold);
}

PolicyReport evaluate_policy(const EngineConfig& engine, const ScenarioConfig& scenario,
                             std::size_t episodes, std::span<const std::uint64_t> seeds) {
  if (episodes == 0) throw UsageError("evaluate_policy: episodes must be at least 1");
  if (seeds.empty()) throw UsageError("evaluate_policy: no seeds given");
  scenario.validate();

  auto run_seed = [&](std::uint64_t seed) {
    double fb = 0.0, disp = 0.0;
    for (std::size_t e = 0; e < episodes; ++e) {
      const std::uint64_t s = e == 0 ? seed : derive_seed(seed, {e});
      const ScenarioRun run = run_scenario(scenario, engine, s);
      fb += run.report.cumulative_feedback;
      disp += run.report.exposure_disparity();
    }
    const double n = static_cast<double>(episodes);
    return std::pair<double, double>{fb / n, disp / n};
  };

  std::vector<std::future<std::pair<double, double>>> futures;
  for (std::uint64_t seed : seeds) futures.push_back(std::async(std::launch::async, run_seed, seed));

  PolicyReport rep;
  rep.seeds.assign(seeds.begin(), seeds.end());
  for (auto& f : futures) {
    const auto [fb, disp] = f.get();
    rep.cumulative_feedback.push_back(fb);
    rep.exposure_disparity.push_back(disp);
  }
  const double n = static_cast<double>(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    rep.mean += rep.cumulative_feedback[i] / n;
    rep.mean_disparity += rep.exposure_disparity[i] / n;
  }
  if (seeds.size() > 1) {
    double ss = 0.0;
    for (double v : rep.cumulative_feedback) ss += (v - rep.mean) * (v - rep.mean);
    rep.stddev = std::sqrt(ss / (n - 1.0));
  }
  return rep;
}

MetricReport to_metric_report(const PolicyReport& r) {
  MetricReport m;
  m.set("cumulative-feedback.mean", r.mean);
  m.set("cumulative-feedback.stddev", r.stddev);
  m.set("exposure-disparity", r.mean_disparity);
  for (std::size_t i = 0; i < r.seeds.size(); ++i) {
    m.set("cumulative-feedback.seed-" + std::to_string(r.seeds[i]), r.cumulative_feedback[i]);
  }
  return m;
}

}  // namespace prefcore
