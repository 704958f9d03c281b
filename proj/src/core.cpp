#include "prefcore/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prefcore/catalog.hpp"
#include "prefcore/error.hpp"

namespace prefcore {

std::string_view channel_name(Channel c) {
  switch (c) {
    case Channel::explicit_: return "explicit";
    case Channel::implicit: return "implicit";
    case Channel::followup_reorder: return "followup-reorder";
  }
  return "explicit";
}

Channel parse_channel(std::string_view name) {
  if (name == "explicit") return Channel::explicit_;
  if (name == "implicit") return Channel::implicit;
  if (name == "followup-reorder") return Channel::followup_reorder;
  throw DataError("unknown feedback channel '" + std::string(name) + "'");
}

Feedback::Feedback(double v, Channel c) : value(v), channel(c) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw DataError("feedback value " + std::to_string(v) +
                    " outside [0, 1]");
  }
}

int feedback_level(double value) {
  return static_cast<int>(std::lround(std::clamp(value, 0.0, 1.0) * 4.0));
}

double quantize_feedback(double value) { return feedback_level(value) / 4.0; }

void TagRegistry::validate(const ContextTags& tags) const {
  for (const auto& tag : tags) {
    if (!contains(tag)) throw DataError("unregistered context tag '" + tag + "'");
  }
}

// InteractionLog

InteractionLog InteractionLog::from_records(
    std::vector<InteractionRecord> records) {
  std::map<UserId, std::set<Tick>> seen;
  InteractionLog log;
  for (const auto& rec : records) {
    if (!seen[rec.user].insert(rec.t).second) {
      throw DataError("duplicate timestamp " + std::to_string(rec.t) +
                      " for user " + std::to_string(raw(rec.user)));
    }
    auto& last = log.last_tick_[rec.user];
    last = seen[rec.user].size() == 1 ? rec.t : std::max(last, rec.t);
  }
  log.records_ = std::move(records);
  return log;
}

void InteractionLog::append(InteractionRecord rec) {
  auto it = last_tick_.find(rec.user);
  if (it != last_tick_.end() && rec.t <= it->second) {
    throw DataError("non-monotone timestamp " + std::to_string(rec.t) +
                    " for user " + std::to_string(raw(rec.user)) +
                    " (last " + std::to_string(it->second) + ")");
  }
  last_tick_[rec.user] = rec.t;
  records_.push_back(std::move(rec));
}

std::vector<InteractionRecord> InteractionLog::user_records(UserId u) const {
  std::vector<InteractionRecord> out;
  for (const auto& rec : records_) {
    if (rec.user == u) out.push_back(rec);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.t < b.t; });
  return out;
}

std::vector<SequenceStep> InteractionLog::user_sequence(UserId u) const {
  std::vector<SequenceStep> seq;
  for (const auto& rec : user_records(u)) {
    seq.push_back({rec.action, rec.feedback});
  }
  return seq;
}

std::vector<UserId> InteractionLog::users() const {
  std::vector<UserId> out;
  out.reserve(last_tick_.size());
  for (const auto& [u, t] : last_tick_) out.push_back(u);
  return out;
}

std::optional<Tick> InteractionLog::last_tick(UserId u) const {
  auto it = last_tick_.find(u);
  if (it == last_tick_.end()) return std::nullopt;
  return it->second;
}

InteractionLog append_record(InteractionLog log, InteractionRecord rec) {
  log.append(std::move(rec));
  return log;
}

std::vector<SequenceStep> user_sequence(const InteractionLog& log, UserId u) {
  return log.user_sequence(u);
}

LogSplit split_log(const InteractionLog& log, double holdout_fraction,
                   std::uint64_t /*seed*/) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw UsageError("holdout fraction must lie in (0, 1)");
  }
  // The split is purely temporal, so the seed has nothing to decide; it is
  // kept in the signature so callers can record it.
  std::map<UserId, std::vector<std::size_t>> by_user;
  const auto records = log.records();
  for (std::size_t i = 0; i < records.size(); ++i) {
    by_user[records[i].user].push_back(i);
  }
  std::vector<bool> in_test(records.size(), false);
  for (auto& [u, idx] : by_user) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return records[a].t < records[b].t;
    });
    const std::size_t n = idx.size();
    auto k = static_cast<std::size_t>(
        std::floor(static_cast<double>(n) * holdout_fraction + 1e-9));
    k = std::min(k, n - 1);
    for (std::size_t j = n - k; j < n; ++j) in_test[idx[j]] = true;
  }
  std::vector<InteractionRecord> train;
  std::vector<InteractionRecord> test;
  for (std::size_t i = 0; i < records.size(); ++i) {
    (in_test[i] ? test : train).push_back(records[i]);
  }
  return {InteractionLog::from_records(std::move(train)),
          InteractionLog::from_records(std::move(test))};
}

std::size_t user_extent(const InteractionLog& log) {
  std::size_t n = 0;
  for (const auto& rec : log.records()) n = std::max<std::size_t>(n, raw(rec.user) + 1);
  return n;
}

std::size_t action_extent(const InteractionLog& log) {
  std::size_t n = 0;
  for (const auto& rec : log.records()) n = std::max<std::size_t>(n, raw(rec.action) + 1);
  return n;
}

// Ranking primitives shared by every module.

bool ranks_before(const ScoredAction& a, const ScoredAction& b) {
  if (a.score != b.score) return a.score > b.score;
  return raw(a.action) < raw(b.action);
}

void sort_ranked(std::vector<ScoredAction>& entries) {
  std::sort(entries.begin(), entries.end(), ranks_before);
}

std::vector<ActionId> RankedList::actions() const {
  std::vector<ActionId> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.action);
  return out;
}

std::optional<std::size_t> RankedList::position_of(ActionId a) const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].action == a) return i;
  }
  return std::nullopt;
}

// Catalog

bool ContextPredicate::allows(const ContextTags& context) const {
  for (const auto& tag : required) {
    if (!context.count(tag)) return false;
  }
  for (const auto& tag : excluded) {
    if (context.count(tag)) return false;
  }
  return true;
}

Catalog::Catalog(std::size_t dim) : dim_(dim) {
  ActionEntry noop;
  noop.id = kNoOpAction;
  noop.name = "no-op";
  noop.knowledge = Vec::Ones(static_cast<Eigen::Index>(dim));
  entries_.push_back(std::move(noop));
}

ActionId Catalog::add(ActionEntry entry) {
  if (entry.knowledge.size() == 0) {
    entry.knowledge = Vec::Ones(static_cast<Eigen::Index>(dim_));
  }
  if (static_cast<std::size_t>(entry.knowledge.size()) != dim_) {
    throw DataError("knowledge vector for '" + entry.name +
                    "' has dimension " + std::to_string(entry.knowledge.size()) +
                    ", catalog expects " + std::to_string(dim_));
  }
  entry.id = action_id(static_cast<std::uint32_t>(entries_.size()));
  entries_.push_back(std::move(entry));
  return entries_.back().id;
}

const ActionEntry& Catalog::at(ActionId a) const {
  if (!contains(a)) throw DataError("unknown action " + std::to_string(raw(a)));
  return entries_[raw(a)];
}

ActionEntry& Catalog::at(ActionId a) {
  if (!contains(a)) throw DataError("unknown action " + std::to_string(raw(a)));
  return entries_[raw(a)];
}

std::vector<ActionId> Catalog::action_ids() const {
  std::vector<ActionId> out;
  for (std::size_t i = 1; i < entries_.size(); ++i) {
    out.push_back(action_id(static_cast<std::uint32_t>(i)));
  }
  return out;
}

Mat Catalog::knowledge_matrix() const {
  Mat k(static_cast<Eigen::Index>(entries_.size()), static_cast<Eigen::Index>(dim_));
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    k.row(static_cast<Eigen::Index>(i)) = entries_[i].knowledge.transpose();
  }
  return k;
}

}  // namespace prefcore
