#include "prefcore/seq_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "prefcore/error.hpp"
#include "prefcore/random.hpp"

namespace prefcore {

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vec sigmoid(const Vec& v) { return v.unaryExpr([](double x) { return sigmoid(x); }); }

Vec cell_input(const Vec& embedding, double feedback) {
  Vec x(embedding.size() + 1);
  x.head(embedding.size()) = embedding;
  x(embedding.size()) = feedback;
  return x;
}

// Intermediate values of one cell transition, kept for the backward pass.
struct Transition {
  Vec x, h, z, r, n, rh;
};

Vec transition_forward(const SeqParams& p, const Vec& h, const Vec& x,
                       Transition* cache) {
  Vec z = sigmoid(p.Wz * x + p.Uz * h + p.bz);
  Vec r = sigmoid(p.Wr * x + p.Ur * h + p.br);
  Vec rh = r.cwiseProduct(h);
  Vec n = (p.Wn * x + p.Un * rh + p.bn).array().tanh().matrix();
  Vec next = (Vec::Ones(z.size()) - z).cwiseProduct(n) + z.cwiseProduct(h);
  if (cache) *cache = {x, h, std::move(z), std::move(r), std::move(n), std::move(rh)};
  return next;
}

// Back-propagates dnext through one transition; accumulates parameter
// gradients into g and returns (dh, dx).
std::pair<Vec, Vec> transition_backward(const SeqParams& p, const Transition& c,
                                        const Vec& dnext, SeqParams& g) {
  const Vec ones = Vec::Ones(c.z.size());
  const Vec dz = dnext.cwiseProduct(c.h - c.n);
  const Vec dn = dnext.cwiseProduct(ones - c.z);
  Vec dh = dnext.cwiseProduct(c.z);

  const Vec dan = dn.cwiseProduct(ones - c.n.cwiseProduct(c.n));
  g.Wn += dan * c.x.transpose();
  g.Un += dan * c.rh.transpose();
  g.bn += dan;
  Vec dx = p.Wn.transpose() * dan;
  const Vec drh = p.Un.transpose() * dan;
  const Vec dr = drh.cwiseProduct(c.h);
  dh += drh.cwiseProduct(c.r);

  const Vec dar = dr.cwiseProduct(c.r.cwiseProduct(ones - c.r));
  g.Wr += dar * c.x.transpose();
  g.Ur += dar * c.h.transpose();
  g.br += dar;
  dx += p.Wr.transpose() * dar;
  dh += p.Ur.transpose() * dar;

  const Vec daz = dz.cwiseProduct(c.z.cwiseProduct(ones - c.z));
  g.Wz += daz * c.x.transpose();
  g.Uz += daz * c.h.transpose();
  g.bz += daz;
  dx += p.Wz.transpose() * daz;
  dh += p.Uz.transpose() * daz;
  return {std::move(dh), std::move(dx)};
}

// Maps a gradient on the bound embedding e_a back onto Q (and proj).
void add_embedding_grad(const SeqModel& m, ActionId a, const Vec& de, SeqParams& g) {
  const auto row = static_cast<Eigen::Index>(raw(a));
  if (!m.knowledge_bound()) {
    g.Q.row(row) += de.transpose();
    return;
  }
  const Vec k = m.knowledge.row(row).transpose();
  if (m.bind == BindMode::hadamard) {
    g.Q.row(row) += de.cwiseProduct(k).transpose();
    return;
  }
  const Eigen::Index d = m.params.Q.cols();
  Vec qk(2 * d);
  qk.head(d) = m.params.Q.row(row).transpose();
  qk.tail(d) = k;
  g.proj += de * qk.transpose();
  g.Q.row(row) += (m.params.proj.leftCols(d).transpose() * de).transpose();
}

void check_action(const SeqModel& m, ActionId a) {
  if (raw(a) >= m.num_actions()) {
    throw DataError("action " + std::to_string(raw(a)) + " outside sequential model");
  }
}

double weight_at(const WeightedSequence& s, std::size_t t) {
  return s.weights.empty() ? 1.0 : s.weights[t];
}

// Forward and backward over positions [begin, end) of one sequence starting
// from h_begin. Returns the state that feeds position `end`. Gradients are
// accumulated into g when it is non-null.
Vec chunk_pass(const SeqModel& m, const WeightedSequence& s, std::size_t begin,
               std::size_t end, const Vec& h_begin, double l2, SeqParams* g,
               double& loss) {
  const std::size_t len = end - begin;
  std::vector<Vec> states(len);
  std::vector<Vec> embeds(len);
  std::vector<Transition> caches(len);
  Vec h = h_begin;
  for (std::size_t j = 0; j < len; ++j) {
    const auto& step = s.steps[begin + j];
    check_action(m, step.action);
    embeds[j] = m.embed(step.action);
    states[j] = h;
    const double e = step.feedback.value - h.dot(embeds[j]);
    const auto qrow = m.params.Q.row(raw(step.action));
    loss += weight_at(s, begin + j) * e * e + l2 * qrow.squaredNorm();
    h = transition_forward(m.params, h, cell_input(embeds[j], step.feedback.value),
                           g ? &caches[j] : nullptr);
  }
  if (!g) return h;

  const Eigen::Index d = h_begin.size();
  Vec dh = Vec::Zero(d);
  for (std::size_t jj = len; jj-- > 0;) {
    const auto& step = s.steps[begin + jj];
    Vec de = Vec::Zero(d);
    if (jj + 1 < len) {
      auto [dprev, dx] = transition_backward(m.params, caches[jj], dh, *g);
      dh = std::move(dprev);
      de += dx.head(d);
    } else {
      dh.setZero();
    }
    const double e = step.feedback.value - states[jj].dot(embeds[jj]);
    const double dscore = -2.0 * weight_at(s, begin + jj) * e;
    dh += dscore * embeds[jj];
    de += dscore * states[jj];
    add_embedding_grad(m, step.action, de, *g);
    g->Q.row(raw(step.action)) += 2.0 * l2 * m.params.Q.row(raw(step.action));
  }
  if (begin == 0 && !m.user_init.count(s.user)) g->h0 += dh;
  return h;
}

double params_norm(const SeqParams& p) {
  double sq = 0.0;
  for (auto block : p.blocks()) {
    for (double v : block) sq += v * v;
  }
  return std::sqrt(sq);
}

void axpy(SeqParams& target, double alpha, const SeqParams& g) {
  auto dst = target.blocks();
  auto src = g.blocks();
  for (std::size_t b = 0; b < dst.size(); ++b) {
    for (std::size_t i = 0; i < dst[b].size(); ++i) dst[b][i] += alpha * src[b][i];
  }
}

void set_zero(SeqParams& p) {
  for (auto block : p.blocks()) std::fill(block.begin(), block.end(), 0.0);
}

}  // namespace

std::vector<std::span<double>> SeqParams::blocks() {
  auto span_of = [](auto& m) { return std::span<double>(m.data(), static_cast<std::size_t>(m.size())); };
  return {span_of(Wz), span_of(Uz), span_of(Wr), span_of(Ur), span_of(Wn),
          span_of(Un), span_of(bz), span_of(br), span_of(bn), span_of(Q),
          span_of(h0), span_of(proj)};
}

std::vector<std::span<const double>> SeqParams::blocks() const {
  auto span_of = [](const auto& m) {
    return std::span<const double>(m.data(), static_cast<std::size_t>(m.size()));
  };
  return {span_of(Wz), span_of(Uz), span_of(Wr), span_of(Ur), span_of(Wn),
          span_of(Un), span_of(bz), span_of(br), span_of(bn), span_of(Q),
          span_of(h0), span_of(proj)};
}

SeqParams SeqParams::zeros_like(const SeqParams& o) {
  SeqParams z;
  z.Wz = Mat::Zero(o.Wz.rows(), o.Wz.cols());
  z.Uz = Mat::Zero(o.Uz.rows(), o.Uz.cols());
  z.Wr = Mat::Zero(o.Wr.rows(), o.Wr.cols());
  z.Ur = Mat::Zero(o.Ur.rows(), o.Ur.cols());
  z.Wn = Mat::Zero(o.Wn.rows(), o.Wn.cols());
  z.Un = Mat::Zero(o.Un.rows(), o.Un.cols());
  z.bz = Vec::Zero(o.bz.size());
  z.br = Vec::Zero(o.br.size());
  z.bn = Vec::Zero(o.bn.size());
  z.Q = Mat::Zero(o.Q.rows(), o.Q.cols());
  z.h0 = Vec::Zero(o.h0.size());
  z.proj = Mat::Zero(o.proj.rows(), o.proj.cols());
  return z;
}

Vec SeqModel::embed(ActionId a) const {
  check_action(*this, a);
  const auto row = static_cast<Eigen::Index>(raw(a));
  Vec q = params.Q.row(row).transpose();
  if (!knowledge_bound()) return q;
  const Vec k = knowledge.row(row).transpose();
  if (bind == BindMode::hadamard) return knowledge_bind(q, k);
  const Eigen::Index d = q.size();
  Vec qk(2 * d);
  qk.head(d) = q;
  qk.tail(d) = k;
  return params.proj * qk;
}

Vec SeqModel::initial_state(UserId u) const {
  auto it = user_init.find(u);
  return it == user_init.end() ? params.h0 : it->second;
}

bool SeqModel::operator==(const SeqModel& o) const {
  auto a = params.blocks();
  auto b = o.params.blocks();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::equal(a[i].begin(), a[i].end(), b[i].begin(), b[i].end())) return false;
  }
  if (knowledge.rows() != o.knowledge.rows() || knowledge.cols() != o.knowledge.cols() ||
      knowledge != o.knowledge || bind != o.bind || init_mode != o.init_mode ||
      user_init.size() != o.user_init.size()) {
    return false;
  }
  for (const auto& [u, v] : user_init) {
    auto it = o.user_init.find(u);
    if (it == o.user_init.end() || it->second.size() != v.size() || it->second != v) {
      return false;
    }
  }
  return true;
}

Vec knowledge_bind(const Vec& q_seq, const Vec& k) {
  if (q_seq.size() != k.size()) {
    throw DataError("knowledge_bind: dimension mismatch (" + std::to_string(q_seq.size()) +
                    " vs " + std::to_string(k.size()) + ")");
  }
  return q_seq.cwiseProduct(k);
}

Vec seq_step(const SeqModel& model, const Vec& state,
             const Vec& prev_action_embedding, double prev_feedback) {
  const auto d = static_cast<Eigen::Index>(model.dim());
  if (state.size() != d || prev_action_embedding.size() != d) {
    throw DataError("seq_step: expected dimension " + std::to_string(d) + ", got state " +
                    std::to_string(state.size()) + " and embedding " +
                    std::to_string(prev_action_embedding.size()));
  }
  return transition_forward(model.params, state,
                            cell_input(prev_action_embedding, prev_feedback), nullptr);
}

std::vector<double> seq_scores(const SeqModel& model, UserId u,
                               std::span<const SequenceStep> steps) {
  std::vector<double> scores;
  scores.reserve(steps.size());
  Vec h = model.initial_state(u);
  for (const auto& step : steps) {
    const Vec e = model.embed(step.action);
    scores.push_back(h.dot(e));
    h = seq_step(model, h, e, step.feedback.value);
  }
  return scores;
}

Vec seq_state_after(const SeqModel& model, const Vec& start,
                    std::span<const SequenceStep> steps) {
  Vec h = start;
  for (const auto& step : steps) {
    h = seq_step(model, h, model.embed(step.action), step.feedback.value);
  }
  return h;
}

double seq_loss(const SeqModel& model, std::span<const WeightedSequence> sequences,
                double l2) {
  double loss = 0.0;
  for (const auto& s : sequences) {
    chunk_pass(model, s, 0, s.steps.size(), model.initial_state(s.user), l2, nullptr,
               loss);
  }
  return loss;
}

SeqParams seq_gradient(const SeqModel& model,
                       std::span<const WeightedSequence> sequences, double l2,
                       std::size_t window) {
  SeqParams g = SeqParams::zeros_like(model.params);
  double loss = 0.0;
  for (const auto& s : sequences) {
    const std::size_t n = s.steps.size();
    const std::size_t w = window == 0 ? std::max<std::size_t>(n, 1) : window;
    Vec h = model.initial_state(s.user);
    for (std::size_t begin = 0; begin < n; begin += w) {
      h = chunk_pass(model, s, begin, std::min(n, begin + w), h, l2, &g, loss);
    }
  }
  return g;
}

SeqModel init_seq_model(std::size_t num_actions, const SeqTrainConfig& config,
                        Mat knowledge) {
  const auto d = static_cast<Eigen::Index>(config.dim);
  Rng rng(derive_seed(config.seed, {0x7365715f696e6974ULL}));
  const double s = config.init_scale;
  auto fill = [&](auto& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, -s, s);
  };
  SeqModel m;
  auto& p = m.params;
  p.Wz.resize(d, d + 1); p.Uz.resize(d, d);
  p.Wr.resize(d, d + 1); p.Ur.resize(d, d);
  p.Wn.resize(d, d + 1); p.Un.resize(d, d);
  p.bz.resize(d); p.br.resize(d); p.bn.resize(d);
  p.Q.resize(static_cast<Eigen::Index>(num_actions), d);
  p.h0.resize(d);
  for (auto* block : {&p.Wz, &p.Uz, &p.Wr, &p.Ur, &p.Wn, &p.Un, &p.Q}) fill(*block);
  for (auto* block : {&p.bz, &p.br, &p.bn, &p.h0}) fill(*block);

  if (knowledge.size() != 0) {
    if (knowledge.rows() != p.Q.rows() || knowledge.cols() != d) {
      throw DataError("knowledge matrix is " + std::to_string(knowledge.rows()) + "x" +
                      std::to_string(knowledge.cols()) + ", expected " +
                      std::to_string(p.Q.rows()) + "x" + std::to_string(d));
    }
    m.knowledge = std::move(knowledge);
    m.bind = config.bind;
    if (config.bind == BindMode::concat) {
      p.proj = Mat::Zero(d, 2 * d);
      fill(p.proj);
      p.proj.leftCols(d) += Mat::Identity(d, d);
    }
  }
  return m;
}

std::vector<WeightedSequence> training_sequences(const InteractionLog& log) {
  std::vector<WeightedSequence> out;
  for (UserId u : log.users()) {
    auto steps = log.user_sequence(u);
    if (steps.size() >= 2) out.push_back({u, std::move(steps), {}});
  }
  return out;
}

void seq_fit(SeqModel& model, std::span<const WeightedSequence> sequences,
             const SeqTrainConfig& config, int first_epoch, int epochs,
             TrainTrace* trace) {
  std::size_t positions = 0;
  for (const auto& s : sequences) positions += s.steps.size();
  SeqParams g = SeqParams::zeros_like(model.params);
  std::vector<std::size_t> order(sequences.size());
  for (int epoch = first_epoch; epoch < first_epoch + epochs; ++epoch) {
    const double rate = config.learning_rate * std::pow(config.decay, epoch);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(config.seed, {0x736571ULL, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t idx : order) {
      const auto& s = sequences[idx];
      const std::size_t n = s.steps.size();
      const std::size_t w = config.bptt_window == 0 ? n : config.bptt_window;
      Vec h = model.initial_state(s.user);
      for (std::size_t begin = 0; begin < n; begin += w) {
        set_zero(g);
        double chunk_loss = 0.0;
        const Vec carried =
            chunk_pass(model, s, begin, std::min(n, begin + w), h, config.l2, &g, chunk_loss);
        double scale = rate;
        if (config.clip_norm > 0.0) {
          const double norm = params_norm(g);
          if (norm > config.clip_norm) scale *= config.clip_norm / norm;
        }
        axpy(model.params, -scale, g);
        // The carried state was produced by the pre-update parameters; it is
        // treated as a constant input to the next chunk.
        h = carried;
      }
    }
    const double loss = seq_loss(model, sequences, config.l2);
    if (!std::isfinite(loss)) {
      throw NumericError("seq_train diverged at epoch " + std::to_string(epoch + 1) +
                         " (non-finite loss)");
    }
    if (trace) trace->epoch_losses.push_back(loss / static_cast<double>(std::max<std::size_t>(positions, 1)));
  }
}

namespace {

SeqModel train_sequential(const InteractionLog& log, const SeqTrainConfig& config,
                          std::size_t num_actions, Mat knowledge, const CfModel* cf,
                          TrainTrace* trace) {
  const auto sequences = training_sequences(log);
  if (sequences.empty()) {
    throw DataError("sequential training needs at least one user with two or more records");
  }
  SeqModel model = init_seq_model(num_actions, config, std::move(knowledge));
  if (config.init_mode == InitMode::from_cf && cf != nullptr) {
    model.init_mode = InitMode::from_cf;
    if (cf->dim() != config.dim) {
      throw DataError("CF dimension " + std::to_string(cf->dim()) +
                      " does not match sequential dimension " + std::to_string(config.dim));
    }
    for (const auto& s : sequences) {
      if (cf->knows_user(s.user)) {
        model.user_init[s.user] = cf->P.row(raw(s.user)).transpose();
      }
    }
  }
  seq_fit(model, sequences, config, 0, config.epochs, trace);
  return model;
}

}  // namespace

SeqModel seq_train(const InteractionLog& log, const SeqTrainConfig& config,
                   const CfModel* cf, TrainTrace* trace) {
  const std::size_t actions = std::max(config.num_actions, action_extent(log));
  return train_sequential(log, config, actions, Mat{}, cf, trace);
}

SeqModel ke_train(const InteractionLog& log, const Catalog& catalog,
                  const SeqTrainConfig& config, const CfModel* cf, TrainTrace* trace) {
  if (catalog.dim() != config.dim) {
    throw DataError("catalog knowledge dimension " + std::to_string(catalog.dim()) +
                    " does not match model dimension " + std::to_string(config.dim));
  }
  if (action_extent(log) > catalog.size()) {
    throw DataError("log references actions outside the catalog");
  }
  return train_sequential(log, config, catalog.size(), catalog.knowledge_matrix(), cf,
                          trace);
}

}  // namespace prefcore
