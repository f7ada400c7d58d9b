#include "catch_amalgamated.hpp"
#include "oracles.hpp"
#include "smattack/candidates.hpp"
#include "smattack/synth.hpp"

using namespace smattack;

namespace {

/// Worked four-pin example: two sources (ScA, ScB), two sinks (SkA, SkB) on
/// the split layer, coordinates in dbu (1000 per micron).
SplitLayout four_pin_layout() {
  SplitLayout l;
  l.tech = TechConfig::make_default(5);
  l.tech.num_feol_layers = 3;
  l.split_layer = 3;
  l.die = Rect{-5000, -5000, 20000, 10000};
  l.virtual_pins.push_back({0, {0, 0}, 0});          // ScA
  l.virtual_pins.push_back({1, {10000, 0}, 1});      // SkA
  l.virtual_pins.push_back({2, {9000, 5000}, 2});    // SkB
  l.virtual_pins.push_back({3, {9000, 2000}, 3});    // ScB
  l.wires.push_back({3, Segment({0, 0}, {4000, 0}), -1});
  l.wires.push_back({3, Segment({10000, 0}, {14000, 0}), -1});
  l.wires.push_back({3, Segment({5000, 5000}, {9000, 5000}), -1});
  l.wires.push_back({3, Segment({9000, 2000}, {12000, 2000}), -1});
  l.wires.push_back({3, Segment({6000, 2000}, {9000, 2000}), -1});
  return l;
}

FragmentSet four_pin_fragments() {
  FragmentSet fs;
  auto add = [&](int id, FragmentKind kind, int vpin) {
    Fragment f;
    f.id = id;
    f.kind = kind;
    f.vpins = {vpin};
    fs.fragments.push_back(f);
  };
  add(0, FragmentKind::source, 0);  // ScA
  add(1, FragmentKind::sink, 1);    // SkA
  add(2, FragmentKind::sink, 2);    // SkB
  add(3, FragmentKind::source, 3);  // ScB
  fs.vpin_owner = {0, 1, 2, 3};
  return fs;
}

}  // namespace

TEST_CASE("directional preference on the four-pin example") {
  const SplitLayout l = four_pin_layout();
  const PreferenceIndex idx(l);
  const auto& vp = l.virtual_pins;
  const VirtualPin &sca = vp[0], &ska = vp[1], &skb = vp[2], &scb = vp[3];

  struct Row {
    const VirtualPin *sink, *source;
    bool sink_prefers, source_prefers, kept;
  };
  const Row rows[] = {
      {&ska, &sca, true, false, true},
      {&ska, &scb, true, true, true},
      {&skb, &sca, false, false, false},
      {&skb, &scb, true, true, true},  // axis-aligned counts
  };
  for (const Row& r : rows) {
    CAPTURE(r.sink->id, r.source->id);
    CHECK(prefers(*r.sink, *r.source, l) == r.sink_prefers);
    CHECK(prefers(*r.source, *r.sink, l) == r.source_prefers);
    CHECK(idx.prefers(*r.sink, *r.source) == r.sink_prefers);
    CHECK(idx.prefers(*r.source, *r.sink) == r.source_prefers);
    CHECK(direction_filter(r.sink_prefers, r.source_prefers) == r.kept);
  }
}

TEST_CASE("a pin without incident split-layer wiring prefers everything") {
  SplitLayout l = four_pin_layout();
  l.virtual_pins.push_back({4, {7000, -3000}, -1});
  const PreferenceIndex idx(l);
  for (int q = 0; q < 4; ++q) {
    CHECK(prefers(l.virtual_pins[4], l.virtual_pins[q], l));
    CHECK(idx.prefers(l.virtual_pins[4], l.virtual_pins[q]));
  }
}

TEST_CASE("candidate groups on the four-pin example") {
  const SplitLayout l = four_pin_layout();
  const FragmentSet fs = four_pin_fragments();
  GroundTruth truth;
  truth.pairs = {{1, 0}, {2, 3}};
  truth.sink_counts = {{1, 1}, {2, 1}};
  truth.total_sink_pins = 2;

  const std::vector<CandidateGroup> groups =
      select_all_candidates(fs, l, 31, &truth);
  REQUIRE(groups.size() == 2);

  const CandidateGroup& ga = groups[0];  // SkA
  CHECK(ga.sink_fragment == 1);
  REQUIRE(ga.candidates.size() == 2);
  CHECK(ga.candidates[0].source_fragment == 0);  // aligned, nonpref 0
  CHECK(ga.candidates[0].nonpref_dbu == 0);
  CHECK(ga.candidates[0].pref_dbu == 10000);
  CHECK(ga.candidates[0].distance_pref == 10.0);
  CHECK(ga.candidates[0].label == Label::positive);
  CHECK(ga.candidates[1].source_fragment == 3);
  CHECK(ga.candidates[1].nonpref_dbu == 2000);
  CHECK(ga.candidates[1].pref_dbu == 1000);
  CHECK(ga.candidates[1].label == Label::negative);
  CHECK(ga.contains_positive);

  const CandidateGroup& gb = groups[1];  // SkB: ScA filtered out
  REQUIRE(gb.candidates.size() == 1);
  CHECK(gb.candidates[0].source_fragment == 3);
  CHECK(gb.candidates[0].label == Label::positive);
  CHECK(gb.contains_positive);

  // without truth every label stays unknown
  const CandidateGroup raw = select_candidates(fs.at(1), fs, l, 31);
  for (const CandidateVpp& c : raw.candidates) CHECK(c.label == Label::unknown);
  CHECK_FALSE(raw.contains_positive);
}

TEST_CASE("one candidate per fragment pair, minimal rank wins") {
  SplitLayout l;
  l.tech = TechConfig::make_default(5);
  l.tech.num_feol_layers = 3;
  l.split_layer = 3;
  l.die = Rect{0, 0, 20000, 10000};
  // no split-layer wires: every pin prefers every other pin
  l.virtual_pins.push_back({0, {0, 0}, 0});
  l.virtual_pins.push_back({1, {0, 3000}, 0});
  l.virtual_pins.push_back({2, {10000, 100}, 1});
  l.virtual_pins.push_back({3, {10000, 2000}, 1});

  FragmentSet fs;
  Fragment src;
  src.id = 0;
  src.kind = FragmentKind::source;
  src.vpins = {0, 1};
  Fragment sink;
  sink.id = 1;
  sink.kind = FragmentKind::sink;
  sink.vpins = {2, 3};
  fs.fragments = {src, sink};
  fs.vpin_owner = {0, 0, 1, 1};

  const CandidateGroup g = select_candidates(sink, fs, l, 31);
  REQUIRE(g.candidates.size() == 1);
  CHECK(g.candidates[0].sink_vpin == 2);
  CHECK(g.candidates[0].source_vpin == 0);
  CHECK(g.candidates[0].nonpref_dbu == 100);

  // exact rank tie resolved by ascending source pin id
  l.virtual_pins[1].loc = {0, 4000};
  l.virtual_pins[2].loc = {10000, 2000};
  const CandidateGroup tie = select_candidates(sink, fs, l, 31);
  REQUIRE(tie.candidates.size() == 1);
  CHECK(tie.candidates[0].source_vpin == 0);
  CHECK(tie.candidates[0].nonpref_dbu == 2000);
  CHECK(tie.candidates[0].pref_dbu == 10000);

  CHECK_THROWS_AS(select_candidates(sink, fs, l, 0), InputError);
}

TEST_CASE("selection matches the exhaustive reference on synthetic designs") {
  for (std::uint64_t seed : {2, 7, 21}) {
    SynthSpec spec;
    spec.num_nets = 14;
    spec.fanout_max = 2;
    spec.seed = seed;
    spec.bias = 0.2;
    spec.noise = 0.3;
    const SplitResult r = split_layout(generate_layout(spec).layout, 3);
    for (int n : {3, 31}) {
      const std::vector<CandidateGroup> groups =
          select_all_candidates(r.fragments, r.layout, n, &r.truth);
      for (const CandidateGroup& g : groups) {
        const auto expect =
            oracles::select_naive(r.fragments.at(g.sink_fragment), r.fragments,
                                  r.layout, n);
        REQUIRE(g.candidates.size() == expect.size());
        CHECK(static_cast<int>(g.candidates.size()) <= n);
        for (std::size_t i = 0; i < expect.size(); ++i) {
          CHECK(g.candidates[i].sink_vpin == expect[i].first);
          CHECK(g.candidates[i].source_vpin == expect[i].second);
        }
      }
    }
    // every ground-truth pairing survives selection at full capacity
    const std::vector<CandidateGroup> groups =
        select_all_candidates(r.fragments, r.layout, 31, &r.truth);
    for (const CandidateGroup& g : groups)
      if (r.truth.pairs.count(g.sink_fragment)) CHECK(g.contains_positive);
  }
}
