#include "prefcore/unlearning.hpp"

#include <cmath>
#include <ostream>

#include "prefcore/error.hpp"
#include "prefcore/log_io.hpp"

namespace prefcore {

bool ForgetRequest::selects(const InteractionRecord& rec) const {
  if (rec.user != user) return false;
  if (from && rec.t < *from) return false;
  if (to && rec.t > *to) return false;
  if (!actions.empty() && !actions.count(rec.action)) return false;
  return true;
}

ForgetSplit split_forget(const InteractionLog& log, const ForgetRequest& request,
                         RetainScope scope) {
  if (request.beta < 0.0 || !std::isfinite(request.beta)) {
    throw UsageError("unlearn: beta must be a finite value >= 0");
  }
  ForgetSplit split;
  for (const auto& rec : log.records()) {
    if (request.selects(rec)) {
      split.forget.push_back(rec);
    } else if (scope == RetainScope::all || rec.user == request.user) {
      split.retain.push_back(rec);
    }
  }
  if (split.forget.empty()) {
    throw DataError("unlearn: forget set is empty for user " +
                    std::to_string(raw(request.user)));
  }
  return split;
}

namespace {

double mse(const CfModel& m, std::span<const InteractionRecord> recs) {
  return recs.empty() ? 0.0 : cf_loss(m, recs, {}, 0.0);
}

bool degraded(double before, double after, double tolerance) {
  return tolerance > 0.0 && after > before * (1.0 + tolerance);
}

void check_config(const UnlearnConfig& c) {
  if (c.iterations < 0) throw UsageError("unlearn: iterations must be >= 0");
  if (!(c.learning_rate > 0.0)) throw UsageError("unlearn: learning rate must be > 0");
}

}  // namespace

CfGradient unlearn_gradient(const CfModel& model, std::span<const InteractionRecord> forget,
                            std::span<const InteractionRecord> retain, double beta,
                            double l2) {
  // cf_gradient is of the per-record mean; scale back up to the sum.
  CfGradient g = cf_gradient(model, forget, {}, l2);
  const double nf = static_cast<double>(forget.size());
  g.P *= -nf;
  g.Q *= -nf;
  if (!retain.empty() && beta != 0.0) {
    const CfGradient r = cf_gradient(model, retain, {}, l2);
    const double scale = beta * static_cast<double>(retain.size());
    g.P += scale * r.P;
    g.Q += scale * r.Q;
  }
  return g;
}

UnlearnResult<CfModel> unlearn(const CfModel& model, const InteractionLog& log,
                               const ForgetRequest& request, const UnlearnConfig& config) {
  check_config(config);
  const ForgetSplit split = split_forget(log, request, config.retain_scope);

  UnlearnResult<CfModel> out{model, {}};
  auto& audit = out.audit;
  audit.user = request.user;
  audit.beta = request.beta;
  audit.forget_records = split.forget.size();
  audit.retain_records = split.retain.size();
  audit.forget_loss_before = mse(model, split.forget);
  audit.retain_loss_before = mse(model, split.retain);

  for (int it = 0; it < config.iterations; ++it) {
    const CfGradient g =
        unlearn_gradient(out.model, split.forget, split.retain, request.beta, config.l2);
    CfModel next = out.model;
    next.P -= config.learning_rate * g.P;
    next.Q -= config.learning_rate * g.Q;
    if (!next.P.allFinite() || !next.Q.allFinite()) {
      throw NumericError("unlearn diverged at iteration " + std::to_string(it + 1));
    }
    if (degraded(audit.retain_loss_before, mse(next, split.retain),
                 config.max_retain_degradation)) {
      audit.stopped_early = true;
      break;
    }
    out.model = std::move(next);
    audit.iterations = it + 1;
  }
  audit.forget_loss_after = mse(out.model, split.forget);
  audit.retain_loss_after = mse(out.model, split.retain);
  return out;
}

namespace {

// One weighted copy of each affected user's sequence per term.
struct SeqTerms {
  std::vector<WeightedSequence> forget;
  std::vector<WeightedSequence> retain;
  double forget_count = 0.0;
  double retain_count = 0.0;
};

SeqTerms seq_terms(const InteractionLog& log, const ForgetRequest& request,
                   RetainScope scope) {
  SeqTerms terms;
  for (UserId u : log.users()) {
    if (scope == RetainScope::user && u != request.user) continue;
    const auto recs = log.user_records(u);
    WeightedSequence f{u, {}, {}};
    WeightedSequence r{u, {}, {}};
    for (const auto& rec : recs) {
      const bool forget = request.selects(rec);
      f.steps.push_back({rec.action, rec.feedback});
      r.steps.push_back({rec.action, rec.feedback});
      f.weights.push_back(forget ? 1.0 : 0.0);
      r.weights.push_back(forget ? 0.0 : 1.0);
      terms.forget_count += forget ? 1.0 : 0.0;
      terms.retain_count += forget ? 0.0 : 1.0;
    }
    if (u == request.user) terms.forget.push_back(std::move(f));
    if (!recs.empty()) terms.retain.push_back(std::move(r));
  }
  return terms;
}

double seq_mse(const SeqModel& m, std::span<const WeightedSequence> seqs, double count) {
  return count > 0.0 ? seq_loss(m, seqs, 0.0) / count : 0.0;
}

}  // namespace

UnlearnResult<SeqModel> unlearn(const SeqModel& model, const InteractionLog& log,
                                const ForgetRequest& request, const UnlearnConfig& config) {
  check_config(config);
  const ForgetSplit split = split_forget(log, request, config.retain_scope);
  const SeqTerms terms = seq_terms(log, request, config.retain_scope);

  UnlearnResult<SeqModel> out{model, {}};
  auto& audit = out.audit;
  audit.user = request.user;
  audit.beta = request.beta;
  audit.forget_records = split.forget.size();
  audit.retain_records = split.retain.size();
  audit.forget_loss_before = seq_mse(model, terms.forget, terms.forget_count);
  audit.retain_loss_before = seq_mse(model, terms.retain, terms.retain_count);

  for (int it = 0; it < config.iterations; ++it) {
    SeqModel next = out.model;
    const SeqParams gf = seq_gradient(out.model, terms.forget, 0.0);
    auto nb = next.params.blocks();
    const auto fb = gf.blocks();
    for (std::size_t b = 0; b < nb.size(); ++b) {
      for (std::size_t i = 0; i < nb[b].size(); ++i) {
        nb[b][i] += config.learning_rate * fb[b][i];
      }
    }
    if (terms.retain_count > 0.0 && request.beta != 0.0) {
      const SeqParams gr = seq_gradient(out.model, terms.retain, 0.0);
      const auto rb = gr.blocks();
      const double scale = config.learning_rate * request.beta;
      for (std::size_t b = 0; b < nb.size(); ++b) {
        for (std::size_t i = 0; i < nb[b].size(); ++i) nb[b][i] -= scale * rb[b][i];
      }
    }
    for (const auto& block : next.params.blocks()) {
      for (double v : block) {
        if (!std::isfinite(v)) {
          throw NumericError("unlearn diverged at iteration " + std::to_string(it + 1));
        }
      }
    }
    if (degraded(audit.retain_loss_before, seq_mse(next, terms.retain, terms.retain_count),
                 config.max_retain_degradation)) {
      audit.stopped_early = true;
      break;
    }
    out.model = std::move(next);
    audit.iterations = it + 1;
  }
  audit.forget_loss_after = seq_mse(out.model, terms.forget, terms.forget_count);
  audit.retain_loss_after = seq_mse(out.model, terms.retain, terms.retain_count);
  return out;
}

void write_audit(std::ostream& out, const UnlearnAudit& a) {
  out << "[unlearn-audit]\n"
      << "user = " << raw(a.user) << '\n'
      << "beta = " << format_double(a.beta) << '\n'
      << "forget_records = " << a.forget_records << '\n'
      << "retain_records = " << a.retain_records << '\n'
      << "iterations = " << a.iterations << '\n'
      << "stopped_early = " << (a.stopped_early ? "true" : "false") << '\n'
      << "forget_loss_before = " << format_double(a.forget_loss_before) << '\n'
      << "forget_loss_after = " << format_double(a.forget_loss_after) << '\n'
      << "retain_loss_before = " << format_double(a.retain_loss_before) << '\n'
      << "retain_loss_after = " << format_double(a.retain_loss_after) << '\n';
}

}  // namespace prefcore
