#pragma once

#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "prefcore/cf_model.hpp"
#include "prefcore/core.hpp"
#include "prefcore/seq_model.hpp"

namespace prefcore {

// Selects a subset of one user's records. With neither a time range nor an
// action set the whole history is selected.
struct ForgetRequest {
  UserId user{};
  std::optional<Tick> from;  // inclusive
  std::optional<Tick> to;    // inclusive
  std::set<ActionId> actions;
  double beta = 1.0;

  bool selects(const InteractionRecord& rec) const;
};

// Which records make up the retain set.
enum class RetainScope {
  all,   // every record in the log outside the forget set
  user,  // the requesting user's remaining records
};

struct UnlearnConfig {
  int iterations = 50;
  double learning_rate = 0.05;
  double l2 = 1e-4;
  double max_retain_degradation = 0.10;  // relative; 0 disables the early stop
  RetainScope retain_scope = RetainScope::all;
};

struct UnlearnAudit {
  UserId user{};
  double beta = 1.0;
  std::size_t forget_records = 0;
  std::size_t retain_records = 0;
  double forget_loss_before = 0.0;
  double forget_loss_after = 0.0;
  double retain_loss_before = 0.0;
  double retain_loss_after = 0.0;
  int iterations = 0;
  bool stopped_early = false;
};

struct ForgetSplit {
  std::vector<InteractionRecord> forget;
  std::vector<InteractionRecord> retain;
};

// Throws DataError when the request selects nothing.
ForgetSplit split_forget(const InteractionLog& log, const ForgetRequest& request,
                         RetainScope scope);

template <class Model>
struct UnlearnResult {
  Model model;
  UnlearnAudit audit;
};

// Gradient of -L(forget) + beta L(retain), each term the CF loss summed over
// its records (per-record l2 included).
CfGradient unlearn_gradient(const CfModel& model, std::span<const InteractionRecord> forget,
                            std::span<const InteractionRecord> retain, double beta,
                            double l2);

// Gradient steps on the objective above. Stops early (keeping the previous
// iterate) once the retain loss rises past the configured tolerance. Losses
// in the audit are unregularised mean squared errors.
UnlearnResult<CfModel> unlearn(const CfModel& model, const InteractionLog& log,
                               const ForgetRequest& request, const UnlearnConfig& config);

// Sequential variant: the forget set is expressed as per-position weights on
// the user's sequence, so the recurrent states still see the whole history.
UnlearnResult<SeqModel> unlearn(const SeqModel& model, const InteractionLog& log,
                                const ForgetRequest& request, const UnlearnConfig& config);

void write_audit(std::ostream& out, const UnlearnAudit& audit);

}  // namespace prefcore
