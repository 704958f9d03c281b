#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "prefcore/catalog.hpp"
#include "prefcore/core.hpp"
#include "prefcore/profile.hpp"
#include "prefcore/ranking.hpp"

namespace prefcore {

// Copies model embeddings into the catalog entries (q_cf, q_seq, q_ke).
// Missing models leave zero vectors.
Catalog bind_embeddings(const Catalog& catalog, const ModelSet& models);

// First stage: context filtering followed by a shallow similarity search.
class Retriever {
 public:
  virtual ~Retriever() = default;
  virtual std::string name() const = 0;
  virtual std::vector<ActionId> retrieve(const ContextTags& context,
                                         const UserProfile& profile,
                                         const Catalog& catalog, std::size_t k) const = 0;
};

// Exact top-k by p_cf . q_cf over the actions whose predicates admit the
// context. Ties go to the lower action id.
class ExactRetriever : public Retriever {
 public:
  std::string name() const override { return "exact"; }
  std::vector<ActionId> retrieve(const ContextTags& context, const UserProfile& profile,
                                 const Catalog& catalog, std::size_t k) const override;
};

std::vector<ActionId> retrieve(const ContextTags& context, const UserProfile& profile,
                               const Catalog& catalog, std::size_t k);

// Global (non-personalised) feedback tallies per action.
struct ActionStats {
  std::vector<double> feedback_sum;
  std::vector<std::size_t> count;

  void record(ActionId a, double feedback);
  // Mean feedback with one pseudo-observation at 0.5.
  double smoothed_mean(ActionId a) const;
};

struct RerankRequest {
  const std::vector<ActionId>* candidates = nullptr;
  const UserProfile* profile = nullptr;
  const ContextTags* context = nullptr;
  const Catalog* catalog = nullptr;
  MixtureWeights weights;
  const ActionStats* stats = nullptr;
  Tick tick = 0;
  std::uint64_t seed = 0;
};

// Second stage: orders the shortlist.
class Reranker {
 public:
  virtual ~Reranker() = default;
  virtual std::string name() const = 0;
  virtual RankedList rerank(const RerankRequest& request) const = 0;
};

// Personalised ordering by the configured preference mixture.
class MixtureReranker : public Reranker {
 public:
  std::string name() const override { return "mixture"; }
  RankedList rerank(const RerankRequest& request) const override;
};

// Static popularity baseline: everyone gets the same order.
class PopularityReranker : public Reranker {
 public:
  std::string name() const override { return "popularity"; }
  RankedList rerank(const RerankRequest& request) const override;
};

// Uniform-random baseline, seeded per (user, tick).
class RandomReranker : public Reranker {
 public:
  std::string name() const override { return "random"; }
  RankedList rerank(const RerankRequest& request) const override;
};

RankedList rerank(const std::vector<ActionId>& candidates, const UserProfile& profile,
                  const ContextTags& context, const Catalog& catalog,
                  const MixtureWeights& weights);

}  // namespace prefcore
