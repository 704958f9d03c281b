#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prefcore/core.hpp"

namespace prefcore {

// Tags an action requires to be present in the context, and tags that rule
// it out.
struct ContextPredicate {
  ContextTags required;
  ContextTags excluded;

  bool allows(const ContextTags& context) const;
  bool operator==(const ContextPredicate&) const = default;
};

// Knowledge attributes are "facet:value" strings, e.g. "category:greeting"
// or "modality:gestural".
using AttributeSet = std::set<std::string>;

struct ActionEntry {
  ActionId id{};
  std::string name;
  AttributeSet attributes;
  Vec knowledge;  // k_a, dimension d
  ContextPredicate predicate;
  std::string group;  // label used by fairness constraints

  // Model-bound embeddings; empty until bound to trained models.
  Vec q_cf;
  Vec q_seq;
  Vec q_ke;
};

// Dense catalog indexed by action id. Entry 0 is always the no-op action.
class Catalog {
 public:
  Catalog() = default;
  explicit Catalog(std::size_t dim);

  // Appends an entry and assigns it the next id.
  ActionId add(ActionEntry entry);

  const ActionEntry& at(ActionId a) const;
  ActionEntry& at(ActionId a);
  bool contains(ActionId a) const { return raw(a) < entries_.size(); }

  std::size_t size() const { return entries_.size(); }
  std::size_t dim() const { return dim_; }

  // Real actions only (excludes the no-op entry).
  std::vector<ActionId> action_ids() const;
  const std::vector<ActionEntry>& entries() const { return entries_; }

  // Row a of the returned matrix holds k_a.
  Mat knowledge_matrix() const;

 private:
  std::size_t dim_ = 0;
  std::vector<ActionEntry> entries_;
};

// Multi-hot attribute encoding followed by a fixed seeded random projection,
// offset so that the empty attribute set maps to the all-ones vector.
class KnowledgeEncoder {
 public:
  KnowledgeEncoder(std::vector<std::string> vocabulary, std::size_t dim,
                   std::uint64_t seed, double scale = 0.5);

  Vec encode(const AttributeSet& attributes) const;

  const std::vector<std::string>& vocabulary() const { return vocabulary_; }

 private:
  std::vector<std::string> vocabulary_;
  Mat projection_;  // dim x |vocabulary|
  double scale_;
};

}  // namespace prefcore
