#ifndef SMATTACK_TRAIN_HPP
#define SMATTACK_TRAIN_HPP

#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include "smattack/features.hpp"
#include "smattack/fragments.hpp"
#include "smattack/nn.hpp"

namespace smattack {

struct TrainConfig {
  enum class Optimizer { adam, sgd };

  double learning_rate = 0.001;
  double lr_decay = 0.6;
  int decay_every = 20;  // epochs per decay step
  int epochs = 100;
  std::uint64_t seed = 1;
  Optimizer optimizer = Optimizer::adam;
  bool keep_best = true;  // keep the params with the best validation CCR
};

inline double scheduled_lr(const TrainConfig& c, int epoch) {
  return c.learning_rate * std::pow(c.lr_decay, epoch / c.decay_every);
}

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double val_ccr = -1.0;  // -1 when no validation set
  double lr = 0.0;
};

/// Expands one candidate group's features into network input planes.
template <class Real>
GroupInput<Real> to_group_input(const GroupFeatures& g, int m) {
  GroupInput<Real> in;
  in.n = static_cast<int>(g.candidates.size());
  for (const VectorFeatures& v : g.vectors)
    for (double x : v.values) in.vec.push_back(static_cast<Real>(x));
  stack_to_planes(g.sink_stack, m, in.sink_planes);
  std::vector<Real> planes;
  for (const ImageStack& s : g.source_stacks) {
    stack_to_planes(s, m, planes);
    in.source_planes.insert(in.source_planes.end(), planes.begin(), planes.end());
  }
  return in;
}

/// Scalar ranking score per candidate: the raw output, or s+ - s- for the
/// two-class head.
template <class Real>
std::vector<Real> candidate_scores(const Network<Real>& net, const GroupInput<Real>& in) {
  const std::vector<Real> raw = net.score(in);
  if (!net.config().two_class) return raw;
  std::vector<Real> s(in.n);
  for (int j = 0; j < in.n; ++j) s[j] = raw[2 * j + 1] - raw[2 * j];
  return s;
}

/// Predicted source fragment and its score for one sink group; nullopt when
/// the group is empty (unpredictable sink). Score ties go to the lowest
/// source fragment id.
template <class Real>
std::optional<std::pair<int, Real>> predict_source_scored(const Network<Real>& net,
                                                          const GroupFeatures& g) {
  if (g.candidates.empty()) return std::nullopt;
  const GroupInput<Real> in = to_group_input<Real>(g, net.config().m);
  const std::vector<Real> s = candidate_scores(net, in);
  int best = 0;
  for (int j = 1; j < in.n; ++j) {
    if (s[j] > s[best] ||
        (s[j] == s[best] &&
         g.candidates[j].source_fragment < g.candidates[best].source_fragment))
      best = j;
  }
  return std::pair<int, Real>{g.candidates[best].source_fragment, s[best]};
}

template <class Real>
std::optional<int> predict_source(const Network<Real>& net, const GroupFeatures& g) {
  if (auto p = predict_source_scored(net, g)) return p->first;
  return std::nullopt;
}

template <class Real>
std::map<int, int> predict_all(const Network<Real>& net,
                               const std::vector<GroupFeatures>& groups) {
  std::map<int, int> selected;
  for (const GroupFeatures& g : groups)
    if (auto src = predict_source(net, g)) selected[g.sink_fragment] = *src;
  return selected;
}

template <class Real>
double evaluate_ccr(const Network<Real>& net, const std::vector<GroupFeatures>& groups,
                    const GroundTruth& truth) {
  return compute_ccr(predict_all(net, groups), truth);
}

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

template <class Real>
class AdamOptimizer {
 public:
  AdamOptimizer(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ModelParams<Real>& params, ModelParams<Real>& grads, double lr) {
    std::vector<std::vector<Real>*> p, g;
    params.visit([&](const std::string&, std::vector<Real>& t) { p.push_back(&t); });
    grads.visit([&](const std::string&, std::vector<Real>& t) { g.push_back(&t); });
    if (m_.empty()) {
      for (auto* t : p) {
        m_.emplace_back(t->size(), Real(0));
        v_.emplace_back(t->size(), Real(0));
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < p.size(); ++i) {
      std::vector<Real>& pt = *p[i];
      const std::vector<Real>& gt = *g[i];
      for (std::size_t k = 0; k < pt.size(); ++k) {
        m_[i][k] = Real(beta1_) * m_[i][k] + Real(1.0 - beta1_) * gt[k];
        v_[i][k] = Real(beta2_) * v_[i][k] + Real(1.0 - beta2_) * gt[k] * gt[k];
        const double mh = m_[i][k] / bc1;
        const double vh = v_[i][k] / bc2;
        pt[k] -= static_cast<Real>(lr * mh / (std::sqrt(vh) + eps_));
      }
    }
  }

 private:
  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<std::vector<Real>> m_, v_;
};

template <class Real>
void sgd_step(ModelParams<Real>& params, ModelParams<Real>& grads, double lr) {
  std::vector<std::vector<Real>*> p, g;
  params.visit([&](const std::string&, std::vector<Real>& t) { p.push_back(&t); });
  grads.visit([&](const std::string&, std::vector<Real>& t) { g.push_back(&t); });
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t k = 0; k < p[i]->size(); ++k)
      (*p[i])[k] -= static_cast<Real>(lr) * (*g[i])[k];
}

template <class Real>
void zero_params(ModelParams<Real>& p) {
  p.visit([&](const std::string&, std::vector<Real>& t) {
    std::fill(t.begin(), t.end(), Real(0));
  });
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

template <class Real>
struct TrainResult {
  std::vector<EpochStats> history;
  double best_val_ccr = -1.0;
  int best_epoch = -1;
};

/// Loss and score gradient of one group. The positive candidate's index must
/// be valid.
template <class Real>
std::pair<Real, std::vector<Real>> group_loss(const NetworkConfig& cfg,
                                              const std::vector<Real>& raw_scores,
                                              int positive_index) {
  if (!cfg.two_class) return softmax_regression_loss(raw_scores, positive_index);
  const int n = static_cast<int>(raw_scores.size()) / 2;
  std::vector<std::array<Real, 2>> pairs(n);
  for (int j = 0; j < n; ++j) pairs[j] = {raw_scores[2 * j], raw_scores[2 * j + 1]};
  auto [loss, g] = two_class_loss(pairs, positive_index);
  std::vector<Real> flat(raw_scores.size());
  for (int j = 0; j < n; ++j) {
    flat[2 * j] = g[j][0];
    flat[2 * j + 1] = g[j][1];
  }
  return {loss, std::move(flat)};
}

/// Trains in place: one candidate group per optimizer step, seeded shuffle
/// each epoch. Groups without a positive candidate are skipped for training
/// (their sinks still count as wrong in CCR). When a validation set is given
/// and keep_best is on, the network ends with the best-CCR parameters.
template <class Real>
TrainResult<Real> train_network(Network<Real>& net,
                                const std::vector<GroupFeatures>& train_groups,
                                const std::vector<GroupFeatures>& val_groups,
                                const GroundTruth* val_truth, const TrainConfig& cfg) {
  const int m = net.config().m;
  std::vector<int> usable;
  std::vector<int> positive_index;
  for (std::size_t i = 0; i < train_groups.size(); ++i) {
    const GroupFeatures& g = train_groups[i];
    if (!g.contains_positive || g.candidates.empty()) continue;
    int t = -1;
    for (std::size_t j = 0; j < g.candidates.size(); ++j)
      if (g.candidates[j].label == Label::positive) t = static_cast<int>(j);
    if (t < 0) continue;
    usable.push_back(static_cast<int>(i));
    positive_index.push_back(t);
  }
  if (usable.empty())
    throw InputError("train_network: no trainable groups (no positive candidates)");

  std::mt19937_64 rng(cfg.seed);
  AdamOptimizer<Real> adam;
  ModelParams<Real> grads;
  grads.resize(net.config());

  TrainResult<Real> result;
  ModelParams<Real> best_params = net.params();
  std::vector<int> order(usable.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = scheduled_lr(cfg, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (int oi : order) {
      const GroupFeatures& g = train_groups[usable[oi]];
      const GroupInput<Real> in = to_group_input<Real>(g, m);
      GroupCache<Real> cache;
      net.forward(in, cache);
      auto [loss, dscores] = group_loss(net.config(), cache.scores, positive_index[oi]);
      loss_sum += static_cast<double>(loss);
      zero_params(grads);
      net.backward(in, cache, dscores, grads);
      if (cfg.optimizer == TrainConfig::Optimizer::adam)
        adam.step(net.params(), grads, lr);
      else
        sgd_step(net.params(), grads, lr);
    }

    EpochStats st;
    st.epoch = epoch;
    st.mean_loss = loss_sum / static_cast<double>(order.size());
    st.lr = lr;
    if (val_truth && !val_groups.empty()) {
      st.val_ccr = evaluate_ccr(net, val_groups, *val_truth);
      if (st.val_ccr > result.best_val_ccr) {
        result.best_val_ccr = st.val_ccr;
        result.best_epoch = epoch;
        if (cfg.keep_best) best_params = net.params();
      }
    }
    result.history.push_back(st);
  }
  if (cfg.keep_best && val_truth && !val_groups.empty() && result.best_epoch >= 0)
    net.params() = best_params;
  return result;
}

}  // namespace smattack

#endif
