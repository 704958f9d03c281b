#include "prefcore/retrieval.hpp"

#include <algorithm>

#include "prefcore/error.hpp"
#include "prefcore/random.hpp"

namespace prefcore {

Catalog bind_embeddings(const Catalog& catalog, const ModelSet& models) {
  Catalog out = catalog;
  const auto d = static_cast<Eigen::Index>(catalog.dim());
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& entry = out.at(action_id(static_cast<std::uint32_t>(i)));
    auto row_of = [&](const Mat& m) -> Vec {
      if (static_cast<Eigen::Index>(i) < m.rows() && m.cols() == d) {
        return m.row(static_cast<Eigen::Index>(i)).transpose();
      }
      return Vec::Zero(d);
    };
    entry.q_cf = models.cf ? row_of(models.cf->Q) : Vec::Zero(d);
    entry.q_seq = models.seq && i < models.seq->num_actions()
                      ? models.seq->embed(entry.id)
                      : Vec::Zero(d);
    entry.q_ke = models.ke && i < models.ke->num_actions()
                     ? models.ke->embed(entry.id)
                     : Vec::Zero(d);
  }
  return out;
}

std::vector<ActionId> ExactRetriever::retrieve(const ContextTags& context,
                                               const UserProfile& profile,
                                               const Catalog& catalog, std::size_t k) const {
  if (k == 0) throw UsageError("retrieve: k must be at least 1");
  std::vector<ScoredAction> survivors;
  for (ActionId a : catalog.action_ids()) {
    const auto& entry = catalog.at(a);
    if (!entry.predicate.allows(context)) continue;
    survivors.push_back({a, score(profile.p_cf, entry.q_cf)});
  }
  const std::size_t take = std::min(k, survivors.size());
  std::partial_sort(survivors.begin(), survivors.begin() + static_cast<std::ptrdiff_t>(take),
                    survivors.end(), ranks_before);
  std::vector<ActionId> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(survivors[i].action);
  return out;
}

std::vector<ActionId> retrieve(const ContextTags& context, const UserProfile& profile,
                               const Catalog& catalog, std::size_t k) {
  return ExactRetriever{}.retrieve(context, profile, catalog, k);
}

void ActionStats::record(ActionId a, double feedback) {
  const auto i = raw(a);
  if (i >= count.size()) {
    count.resize(i + 1, 0);
    feedback_sum.resize(i + 1, 0.0);
  }
  feedback_sum[i] += feedback;
  ++count[i];
}

double ActionStats::smoothed_mean(ActionId a) const {
  const auto i = raw(a);
  if (i >= count.size()) return 0.5;
  return (feedback_sum[i] + 0.5) / (static_cast<double>(count[i]) + 1.0);
}

namespace {

void check_request(const RerankRequest& r) {
  if (!r.candidates || !r.profile || !r.catalog) {
    throw UsageError("rerank request is missing candidates, profile, or catalog");
  }
  if (r.candidates->empty()) throw DataError("rerank: empty candidate list");
}

template <class ScoreFn>
RankedList rank_by(const RerankRequest& r, ScoreFn fn) {
  check_request(r);
  RankedList list;
  list.user = r.profile->id;
  for (ActionId a : *r.candidates) list.entries.push_back({a, fn(a)});
  sort_ranked(list.entries);
  return list;
}

}  // namespace

RankedList MixtureReranker::rerank(const RerankRequest& r) const {
  return rank_by(r, [&](ActionId a) {
    return mixture_score(*r.profile, r.catalog->at(a), r.weights);
  });
}

RankedList PopularityReranker::rerank(const RerankRequest& r) const {
  return rank_by(r, [&](ActionId a) { return r.stats ? r.stats->smoothed_mean(a) : 0.0; });
}

RankedList RandomReranker::rerank(const RerankRequest& r) const {
  return rank_by(r, [&](ActionId a) {
    const std::uint64_t h = derive_seed(
        r.seed, {raw(r.profile->id), static_cast<std::uint64_t>(r.tick), raw(a)});
    return static_cast<double>(h >> 11) * 0x1.0p-53;
  });
}

RankedList rerank(const std::vector<ActionId>& candidates, const UserProfile& profile,
                  const ContextTags& context, const Catalog& catalog,
                  const MixtureWeights& weights) {
  RerankRequest r;
  r.candidates = &candidates;
  r.profile = &profile;
  r.context = &context;
  r.catalog = &catalog;
  r.weights = weights;
  return MixtureReranker{}.rerank(r);
}

}  // namespace prefcore
