#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace prefcore {

using Vec = Eigen::VectorXd;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Opaque identifiers. ActionId 0 is reserved for the no-op action.
enum class UserId : std::uint32_t {};
enum class ActionId : std::uint32_t {};

constexpr std::uint32_t raw(UserId u) { return static_cast<std::uint32_t>(u); }
constexpr std::uint32_t raw(ActionId a) { return static_cast<std::uint32_t>(a); }
constexpr UserId user_id(std::uint32_t v) { return static_cast<UserId>(v); }
constexpr ActionId action_id(std::uint32_t v) { return static_cast<ActionId>(v); }

inline constexpr ActionId kNoOpAction = action_id(0);

using Tick = std::int64_t;

enum class Channel { explicit_, implicit, followup_reorder };

std::string_view channel_name(Channel c);
Channel parse_channel(std::string_view name);

// Scalar feedback on the [0, 1] scale.
struct Feedback {
  double value = 0.0;
  Channel channel = Channel::explicit_;

  Feedback() = default;
  Feedback(double v, Channel c = Channel::explicit_);

  bool operator==(const Feedback&) const = default;
};

// The five-level grid the simulator emits.
double quantize_feedback(double value);
int feedback_level(double value);

using ContextTags = std::set<std::string>;

// Finite set of context tags a deployment declares.
class TagRegistry {
 public:
  TagRegistry() = default;
  explicit TagRegistry(std::set<std::string> tags) : tags_(std::move(tags)) {}

  bool contains(const std::string& tag) const { return tags_.count(tag) != 0; }
  void validate(const ContextTags& tags) const;
  const std::set<std::string>& tags() const { return tags_; }

 private:
  std::set<std::string> tags_;
};

struct InteractionRecord {
  Tick t = 0;
  UserId user{};
  ActionId action{};
  Feedback feedback;
  ContextTags context;

  bool operator==(const InteractionRecord&) const = default;
};

struct SequenceStep {
  ActionId action{};
  Feedback feedback;

  bool operator==(const SequenceStep&) const = default;
};

// Append-only interaction history. Const access is safe from many threads;
// appends need exclusive access.
class InteractionLog {
 public:
  InteractionLog() = default;

  // Accepts records in any order; (user, t) pairs must be unique.
  static InteractionLog from_records(std::vector<InteractionRecord> records);

  // Throws DataError unless rec.t exceeds the last timestamp seen for rec.user.
  void append(InteractionRecord rec);

  std::span<const InteractionRecord> records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  // Per-user projection in timestamp order.
  std::vector<InteractionRecord> user_records(UserId u) const;
  std::vector<SequenceStep> user_sequence(UserId u) const;

  std::vector<UserId> users() const;
  std::optional<Tick> last_tick(UserId u) const;

  bool operator==(const InteractionLog& other) const {
    return records_ == other.records_;
  }

 private:
  std::vector<InteractionRecord> records_;
  std::map<UserId, Tick> last_tick_;
};

InteractionLog append_record(InteractionLog log, InteractionRecord rec);

std::vector<SequenceStep> user_sequence(const InteractionLog& log, UserId u);

struct LogSplit {
  InteractionLog train;
  InteractionLog test;
};

// Temporal leave-last-k split: each user's last floor(n * fraction) records go
// to test, always keeping at least one record in train.
LogSplit split_log(const InteractionLog& log, double holdout_fraction,
                   std::uint64_t seed);

// Largest user / action id in the log plus one.
std::size_t user_extent(const InteractionLog& log);
std::size_t action_extent(const InteractionLog& log);

struct ScoredAction {
  ActionId action{};
  double score = 0.0;

  bool operator==(const ScoredAction&) const = default;
};

// Descending score, ties by ascending action id.
bool ranks_before(const ScoredAction& a, const ScoredAction& b);
void sort_ranked(std::vector<ScoredAction>& entries);

struct RankedList {
  UserId user{};
  std::vector<ScoredAction> entries;
  std::optional<std::vector<ActionId>> ideal;

  bool empty() const { return entries.empty(); }
  std::vector<ActionId> actions() const;
  std::optional<std::size_t> position_of(ActionId a) const;

  bool operator==(const RankedList&) const = default;
};

// The retained candidate list from which the top-1 action is executed.
struct DecisionRepresentation {
  std::uint64_t id = 0;
  UserId user{};
  Tick tick = 0;
  ContextTags context;
  RankedList ranking;
  ActionId chosen = kNoOpAction;
  std::string provenance;
  std::vector<std::string> audit;

  bool operator==(const DecisionRepresentation&) const = default;
};

}  // namespace prefcore
