#include "catch_amalgamated.hpp"
#include "oracles.hpp"
#include "smattack/synth.hpp"
#include "smattack/train.hpp"

using namespace smattack;
using Catch::Approx;

namespace {

/// Tiny network fitting the real m = 3 feature pipeline.
NetworkConfig tiny_config() {
  NetworkConfig c = NetworkConfig::reduced();
  c.m = 3;
  c.feature_len = feature_count(3);
  c.num_scales = 1;
  c.image_px = 9;
  return c;
}

struct Dataset {
  std::vector<GroupFeatures> groups;
  GroundTruth truth;
};

Dataset make_dataset(std::uint64_t seed, int nets, const NormalizationStats* norm) {
  SynthSpec spec;
  spec.num_nets = nets;
  spec.seed = seed;
  spec.bias = 0.8;
  const SynthResult sr = generate_layout(spec);
  const SplitResult r = split_layout(sr.layout, 3);
  RasterConfig cfg;
  cfg.image_px = 9;
  cfg.scales_um = {0.4};
  Dataset d;
  d.truth = r.truth;
  for (const CandidateGroup& g :
       select_all_candidates(r.fragments, r.layout, 8, &r.truth))
    d.groups.push_back(assemble_features(g, r.fragments, r.layout, sr.lib, cfg));
  if (norm)
    for (GroupFeatures& g : d.groups) apply_normalization(g, *norm);
  return d;
}

}  // namespace

TEST_CASE("learning rate decays by 0.6 every 20 epochs") {
  TrainConfig c;
  CHECK(scheduled_lr(c, 0) == Approx(0.001));
  CHECK(scheduled_lr(c, 19) == Approx(0.001));
  CHECK(scheduled_lr(c, 20) == Approx(0.0006));
  CHECK(scheduled_lr(c, 39) == Approx(0.0006));
  CHECK(scheduled_lr(c, 40) == Approx(0.00036));
}

TEST_CASE("group input expansion shapes") {
  const Dataset d = make_dataset(6, 8, nullptr);
  const NetworkConfig cfg = tiny_config();
  bool checked = false;
  for (const GroupFeatures& g : d.groups) {
    if (g.candidates.empty()) continue;
    const GroupInput<float> in = to_group_input<float>(g, cfg.m);
    const int n = static_cast<int>(g.candidates.size());
    CHECK(in.n == n);
    CHECK(in.vec.size() == static_cast<std::size_t>(n) * cfg.feature_len);
    const std::size_t img =
        static_cast<std::size_t>(cfg.in_channels()) * cfg.image_px * cfg.image_px;
    CHECK(in.sink_planes.size() == img);
    CHECK(in.source_planes.size() == static_cast<std::size_t>(n) * img);
    for (float v : in.sink_planes) CHECK((v == 0.0f || v == 1.0f));
    checked = true;
  }
  CHECK(checked);
}

TEST_CASE("an untrained network breaks score ties toward the lowest fragment") {
  const Dataset d = make_dataset(7, 8, nullptr);
  Network<float> net(tiny_config());  // params all zero: every score is 0

  for (const GroupFeatures& g : d.groups) {
    const auto p = predict_source_scored(net, g);
    if (g.candidates.empty()) {
      CHECK_FALSE(p.has_value());
      continue;
    }
    int lowest = g.candidates[0].source_fragment;
    for (const CandidateVpp& c : g.candidates)
      lowest = std::min(lowest, c.source_fragment);
    REQUIRE(p.has_value());
    CHECK(p->first == lowest);
    CHECK(p->second == 0.0f);
  }

  const double ccr = evaluate_ccr(net, d.groups, d.truth);
  CHECK(ccr >= 0.0);
  CHECK(ccr <= 1.0);
  CHECK(oracles::ccr_naive(predict_all(net, d.groups), d.truth) == Approx(ccr));
}

TEST_CASE("two-class ranking uses the score difference") {
  NetworkConfig cfg = tiny_config();
  cfg.two_class = true;
  Network<float> net(cfg);
  net.params().fc7.b = {0.25f, 0.75f};  // raw pair (s-, s+) from the bias alone

  const Dataset d = make_dataset(7, 6, nullptr);
  for (const GroupFeatures& g : d.groups) {
    if (g.candidates.empty()) continue;
    const GroupInput<float> in = to_group_input<float>(g, cfg.m);
    const std::vector<float> raw = net.score(in);
    REQUIRE(raw.size() == static_cast<std::size_t>(2 * in.n));
    const std::vector<float> s = candidate_scores(net, in);
    REQUIRE(s.size() == static_cast<std::size_t>(in.n));
    for (int j = 0; j < in.n; ++j) CHECK(s[j] == Approx(0.5f));
    break;
  }
}

TEST_CASE("optimizer steps are exact on a single gradient entry") {
  const NetworkConfig cfg = tiny_config();
  Network<float> net(cfg);
  net.init_params(2);
  const float before0 = net.params().fc1.w[0];
  const float before1 = net.params().fc1.w[1];

  ModelParams<float> grads;
  grads.resize(cfg);
  grads.fc1.w[0] = 0.5f;

  SECTION("sgd") {
    sgd_step(net.params(), grads, 0.1);
    CHECK(net.params().fc1.w[0] == Approx(before0 - 0.05f));
    CHECK(net.params().fc1.w[1] == before1);
  }
  SECTION("adam first step moves by about the learning rate") {
    AdamOptimizer<float> adam;
    adam.step(net.params(), grads, 0.001);
    CHECK(net.params().fc1.w[0] == Approx(before0 - 0.001f).epsilon(1e-3));
    CHECK(net.params().fc1.w[1] == before1);
    CHECK(net.params().fc1.b[0] == 0.0f);  // zero grad, zero moment
  }
}

TEST_CASE("training lowers the loss and keeps the best validation params") {
  std::vector<GroupFeatures> raw_train = make_dataset(11, 30, nullptr).groups;
  const NormalizationStats norm = fit_normalization(raw_train);
  for (GroupFeatures& g : raw_train) apply_normalization(g, norm);
  const Dataset val = make_dataset(12, 10, &norm);

  TrainConfig tc;
  tc.epochs = 6;
  tc.seed = 3;

  Network<float> net(tiny_config());
  net.init_params(tc.seed);
  const TrainResult<float> res =
      train_network(net, raw_train, val.groups, &val.truth, tc);

  REQUIRE(res.history.size() == 6);
  CHECK(res.history.front().epoch == 0);
  CHECK(res.history.front().lr == Approx(0.001));
  CHECK(res.history.back().mean_loss < res.history.front().mean_loss);

  double best = -1.0;
  for (const EpochStats& e : res.history) {
    CHECK(e.val_ccr >= 0.0);
    best = std::max(best, e.val_ccr);
  }
  CHECK(res.best_val_ccr == Approx(best));
  CHECK(res.history[res.best_epoch].val_ccr == Approx(best));
  // keep_best restored the best-epoch parameters
  CHECK(evaluate_ccr(net, val.groups, val.truth) == Approx(res.best_val_ccr));

  // same seeds reproduce the run exactly
  Network<float> net2(tiny_config());
  net2.init_params(tc.seed);
  const TrainResult<float> res2 =
      train_network(net2, raw_train, val.groups, &val.truth, tc);
  for (std::size_t i = 0; i < res.history.size(); ++i) {
    CHECK(res2.history[i].mean_loss == res.history[i].mean_loss);
    CHECK(res2.history[i].val_ccr == res.history[i].val_ccr);
  }
}

TEST_CASE("training without positive candidates is rejected") {
  std::vector<GroupFeatures> groups = make_dataset(5, 6, nullptr).groups;
  for (GroupFeatures& g : groups) {
    g.contains_positive = false;
    for (CandidateVpp& c : g.candidates) c.label = Label::negative;
  }
  Network<float> net(tiny_config());
  TrainConfig tc;
  tc.epochs = 1;
  CHECK_THROWS_AS(train_network(net, groups, {}, nullptr, tc), InputError);
}
