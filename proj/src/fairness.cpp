#include "prefcore/fairness.hpp"

#include <algorithm>
#include <cstdio>
#include <optional>
#include <set>

#include "prefcore/error.hpp"

namespace prefcore {

FairnessConstraint FairnessConstraint::from_catalog(const Catalog& catalog, double epsilon,
                                                    std::size_t window) {
  FairnessConstraint c;
  c.epsilon = epsilon;
  c.window = window;
  for (ActionId a : catalog.action_ids()) c.group_of[a] = catalog.at(a).group;
  c.validate();
  return c;
}

const std::string& FairnessConstraint::group(ActionId a) const {
  auto it = group_of.find(a);
  if (it == group_of.end()) {
    throw DataError("fairness: action " + std::to_string(raw(a)) + " has no group");
  }
  return it->second;
}

std::vector<std::string> FairnessConstraint::groups() const {
  std::set<std::string> all;
  for (const auto& [g, t] : targets) all.insert(g);
  if (targets.empty()) {
    for (const auto& [a, g] : group_of) all.insert(g);
  }
  return {all.begin(), all.end()};
}

double FairnessConstraint::target(const std::string& g) const {
  if (!targets.empty()) {
    auto it = targets.find(g);
    return it == targets.end() ? 0.0 : it->second;
  }
  const auto n = groups().size();
  return n ? 1.0 / static_cast<double>(n) : 0.0;
}

void FairnessConstraint::validate() const {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw UsageError("fairness epsilon must be in [0, 1]");
  if (window == 0) throw UsageError("fairness window must be at least 1");
  for (const auto& [a, g] : group_of) {
    if (g.empty()) {
      throw DataError("fairness: action " + std::to_string(raw(a)) + " has an empty group");
    }
  }
  double total = 0.0;
  for (const auto& [g, t] : targets) {
    if (!(t >= 0.0 && t <= 1.0)) throw UsageError("fairness target for " + g + " must be in [0, 1]");
    total += t;
  }
  if (total > 1.0 + 1e-9) throw UsageError("fairness targets sum past 1");
}

void ExposureHistory::push(const std::string& group) {
  groups_.push_back(group);
  while (groups_.size() > window_) groups_.pop_front();
}

namespace {

std::map<std::string, double> shares_of(const std::deque<std::string>& groups,
                                        std::size_t skip_oldest, const std::string* extra,
                                        const FairnessConstraint& c) {
  std::map<std::string, std::size_t> counts;
  for (const auto& g : c.groups()) counts[g] = 0;
  for (std::size_t i = skip_oldest; i < groups.size(); ++i) ++counts[groups[i]];
  if (extra) ++counts[*extra];
  std::map<std::string, double> shares;
  for (const auto& [g, n] : counts) {
    shares[g] = static_cast<double>(n) / static_cast<double>(c.window);
  }
  return shares;
}

}  // namespace

std::map<std::string, double> projected_shares(const ExposureHistory& history,
                                               const std::string& candidate,
                                               const FairnessConstraint& constraint) {
  const auto& g = history.groups();
  // The window that will exist once the candidate is shown.
  const std::size_t keep = constraint.window - 1;
  const std::size_t skip = g.size() > keep ? g.size() - keep : 0;
  return shares_of(g, skip, &candidate, constraint);
}

RankedList fair_rerank(const RankedList& ranked, const FairnessConstraint& constraint,
                       const ExposureHistory& history, std::vector<std::string>* audit) {
  RankedList out = ranked;
  if (out.entries.size() < 2) return out;

  const auto current = shares_of(history.groups(),
                                 history.groups().size() > constraint.window
                                     ? history.groups().size() - constraint.window
                                     : 0,
                                 nullptr, constraint);
  std::set<std::string> promoted;
  for (std::size_t guard = 0; guard <= constraint.groups().size(); ++guard) {
    const std::string top_group = constraint.group(out.entries.front().action);
    const auto projected = projected_shares(history, top_group, constraint);
    const bool violated = std::any_of(projected.begin(), projected.end(), [&](const auto& kv) {
      return kv.second > constraint.target(kv.first) + constraint.epsilon;
    });
    if (!violated) break;

    std::optional<std::string> starved;
    double best_deficit = 0.0;
    for (const auto& e : out.entries) {
      const auto& g = constraint.group(e.action);
      auto it = current.find(g);
      const double deficit = constraint.target(g) - (it == current.end() ? 0.0 : it->second);
      if (!starved || deficit > best_deficit || (deficit == best_deficit && g < *starved)) {
        starved = g;
        best_deficit = deficit;
      }
    }
    if (!starved || *starved == top_group || promoted.count(*starved)) break;

    auto pick = out.entries.end();
    for (auto it = out.entries.begin(); it != out.entries.end(); ++it) {
      if (constraint.group(it->action) != *starved) continue;
      if (pick == out.entries.end() || ranks_before(*it, *pick)) pick = it;
    }
    const ScoredAction moved = *pick;
    const auto from = static_cast<std::size_t>(pick - out.entries.begin()) + 1;
    out.entries.erase(pick);
    out.entries.insert(out.entries.begin(), moved);
    promoted.insert(*starved);
    if (audit) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.4f", projected.at(top_group));
      audit->push_back("fairness: promoted action " + std::to_string(raw(moved.action)) +
                       " (group " + *starved + ") from position " + std::to_string(from) +
                       "; group " + top_group + " projected share " + buf);
    }
  }
  return out;
}

double exposure_disparity(const std::map<std::string, std::size_t>& counts) {
  std::size_t total = 0;
  for (const auto& [g, n] : counts) total += n;
  if (counts.empty() || total == 0) return 0.0;
  double lo = 1.0, hi = 0.0;
  for (const auto& [g, n] : counts) {
    const double s = static_cast<double>(n) / static_cast<double>(total);
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  return hi - lo;
}

}  // namespace prefcore
