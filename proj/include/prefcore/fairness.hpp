#pragma once

#include <deque>
#include <map>
#include <string>
#include <vector>

#include "prefcore/catalog.hpp"
#include "prefcore/core.hpp"

namespace prefcore {

// Top-1 exposure parity over a sliding window of recent decisions.
struct FairnessConstraint {
  std::map<ActionId, std::string> group_of;
  std::map<std::string, double> targets;  // empty: equal shares over all groups
  double epsilon = 0.1;
  std::size_t window = 50;

  // Groups taken from the catalog's action labels.
  static FairnessConstraint from_catalog(const Catalog& catalog, double epsilon,
                                         std::size_t window);

  const std::string& group(ActionId a) const;
  double target(const std::string& group) const;
  std::vector<std::string> groups() const;
  void validate() const;
};

// Groups of the most recent top-1 actions, oldest first.
class ExposureHistory {
 public:
  explicit ExposureHistory(std::size_t window = 50) : window_(window) {}

  void push(const std::string& group);
  std::size_t size() const { return groups_.size(); }
  std::size_t window() const { return window_; }
  const std::deque<std::string>& groups() const { return groups_; }

  bool operator==(const ExposureHistory&) const = default;

 private:
  std::size_t window_;
  std::deque<std::string> groups_;
};

// Share of each group among the window's top-1 slots, counting `candidate`
// as the newest entry (it displaces the oldest when the window is full).
// Shares are taken over the full window length, so a partly filled window
// never reports a share above its occupancy.
std::map<std::string, double> projected_shares(const ExposureHistory& history,
                                               const std::string& candidate,
                                               const FairnessConstraint& constraint);

// Greedy post-processing: when putting the current top-1 into the window
// would lift its group past target + epsilon, the best-scored entry of the
// most under-exposed group moves to position 1. Scores are left untouched
// and nothing is added or dropped. Each promotion appends a line to `audit`.
RankedList fair_rerank(const RankedList& ranked, const FairnessConstraint& constraint,
                       const ExposureHistory& history,
                       std::vector<std::string>* audit = nullptr);

// Largest minus smallest top-1 share across the given groups.
double exposure_disparity(const std::map<std::string, std::size_t>& counts);

}  // namespace prefcore
