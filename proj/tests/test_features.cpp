#include "catch_amalgamated.hpp"
#include "oracles.hpp"
#include "smattack/features.hpp"
#include "smattack/synth.hpp"

using namespace smattack;
using Catch::Approx;

namespace {

/// Same single-net fixture as the fragment tests: driver fragment on the
/// left, sink fragment on the right, two virtual pins at the M3 cut.
FullLayout two_fragment_net() {
  FullLayout l;
  l.tech = TechConfig::make_default(5);
  l.die = Rect{-5000, -5000, 60000, 60000};
  l.cells.push_back({"d", "DRV_S", {0, 0}, "N"});
  l.cells.push_back({"s", "SINK_S", {20000, 0}, "N"});
  l.pins.push_back({0, "Z", {0, 0}, PinDirection::output, 0});
  l.pins.push_back({1, "A", {20000, 0}, PinDirection::input, 0});
  l.wires.push_back({1, Segment({0, 0}, {1000, 0}), 0});
  l.vias.push_back({1, {1000, 0}, 0});
  l.wires.push_back({2, Segment({1000, 0}, {1000, 1000}), 0});
  l.vias.push_back({2, {1000, 1000}, 0});
  l.wires.push_back({3, Segment({1000, 1000}, {3000, 1000}), 0});
  l.vias.push_back({3, {3000, 1000}, 0});
  l.wires.push_back({4, Segment({3000, 1000}, {3000, 2000}), 0});
  l.vias.push_back({4, {3000, 2000}, 0});
  l.wires.push_back({5, Segment({3000, 2000}, {15000, 2000}), 0});
  l.vias.push_back({4, {15000, 2000}, 0});
  l.wires.push_back({4, Segment({15000, 2000}, {15000, 1000}), 0});
  l.vias.push_back({3, {15000, 1000}, 0});
  l.wires.push_back({3, Segment({15000, 1000}, {17000, 1000}), 0});
  l.vias.push_back({2, {17000, 1000}, 0});
  l.wires.push_back({2, Segment({17000, 1000}, {17000, 0}), 0});
  l.vias.push_back({1, {17000, 0}, 0});
  l.wires.push_back({1, Segment({17000, 0}, {20000, 0}), 0});
  l.nets.push_back({"n0", 0, {1}});
  return l;
}

}  // namespace

TEST_CASE("distance features, signed source minus sink") {
  const TechConfig tech = TechConfig::make_default(5);
  const Rect die{0, 0, 20000, 10000};
  // M3 prefers horizontal; delta is (+3, -4) um
  const auto d = vpp_distances({2000, 5000}, {5000, 1000}, die, tech, 3);
  CHECK(d[0] == Approx(3.0));
  CHECK(d[1] == Approx(-4.0));
  CHECK(d[2] == Approx(-1.0));
  CHECK(d[3] == Approx(3.0));
  CHECK(d[4] == Approx(4.0));
  CHECK(d[5] == Approx(7.0));
  CHECK(d[6] == Approx(3.0 / 20.0));
  CHECK(d[7] == Approx(-4.0 / 10.0));
  CHECK(d[8] == Approx(-1.0 / 30.0));
  CHECK(d[9] == Approx(3.0 / 20.0));
  CHECK(d[10] == Approx(4.0 / 10.0));
  CHECK(d[11] == Approx(7.0 / 30.0));

  // M2 prefers vertical: pref/nonpref swap
  const auto e = vpp_distances({2000, 5000}, {5000, 1000}, die, tech, 2);
  CHECK(e[0] == Approx(-4.0));
  CHECK(e[1] == Approx(3.0));
  CHECK(e[6] == Approx(-4.0 / 10.0));

  CHECK_THROWS_AS(vpp_distances({0, 0}, {1, 1}, Rect{0, 0, 0, 5}, tech, 3),
                  InputError);
}

TEST_CASE("capacitance bounds, layer usage, and delay on the hand fixture") {
  const CellLibrary lib = make_synth_library();
  const SplitResult r = split_layout(two_fragment_net(), 3);
  const Fragment& source = r.fragments.at(0);
  const Fragment& sink = r.fragments.at(1);

  const CapBounds caps = load_cap_bounds(sink, source, r.layout, lib);
  CHECK(caps.upper_f == Approx(2e-15));
  CHECK(caps.sink_count == 1);
  // pin 5e-16; sink wires 6 um and source wires 4 um at 0.2 fF/um; 4 vias
  CHECK(caps.lower_f == Approx(5e-16 + 1.2e-15 + 8e-16 + 4e-16));

  const LayerUsage su = layer_wirelengths_vias(sink, r.layout);
  CHECK(su.wirelength_um == std::vector<double>{3.0, 1.0, 2.0});
  CHECK(su.via_count == std::vector<int>{1, 1});
  const LayerUsage du = layer_wirelengths_vias(source, r.layout);
  CHECK(du.wirelength_um == std::vector<double>{1.0, 1.0, 2.0});
  CHECK(du.via_count == std::vector<int>{1, 1});

  CHECK(driver_delay_lb(source, caps.lower_f, r.layout, lib) ==
        Approx(15e-12 + 4000.0 * caps.lower_f));
  CHECK_THROWS_AS(load_cap_bounds(sink, sink, r.layout, lib), InputError);
}

TEST_CASE("feature vector follows the ledger") {
  CHECK(feature_count(3) == 27);
  CHECK(feature_count(1) == 19);
  const std::vector<std::string> ledger = feature_ledger(3);
  REQUIRE(static_cast<int>(ledger.size()) == feature_count(3));
  CHECK(std::set<std::string>(ledger.begin(), ledger.end()).size() == ledger.size());
  CHECK(ledger[12] == "cap_upper_f");
  CHECK(ledger[26] == "total_wirelength_um");

  const CellLibrary lib = make_synth_library();
  const SplitResult r = split_layout(two_fragment_net(), 3);
  const std::vector<CandidateGroup> groups =
      select_all_candidates(r.fragments, r.layout, 31, &r.truth);
  REQUIRE(groups.size() == 1);
  REQUIRE(groups[0].candidates.size() == 1);

  const VectorFeatures f =
      extract_vector_features(groups[0].candidates[0], r.fragments, r.layout, lib);
  REQUIRE(static_cast<int>(f.values.size()) == feature_count(3));
  // sink pin (15000, 1000), source pin (3000, 1000): delta (-12, 0) um
  CHECK(f.values[0] == Approx(-12.0));
  CHECK(f.values[1] == Approx(0.0));
  CHECK(f.values[5] == Approx(12.0));
  CHECK(f.values[12] == Approx(2e-15));
  CHECK(f.values[14] == 1.0);                // sink_count
  CHECK(f.values[15] == Approx(3.0));        // wl_sink_m1
  CHECK(f.values[20] == Approx(2.0));        // wl_source_m3
  CHECK(f.values[21] == 1.0);                // vias_sink_c1
  CHECK(f.values[26] == Approx(10.0));       // total wirelength
}

TEST_CASE("group assembly shares one sink image and keeps candidate order") {
  SynthSpec spec;
  spec.num_nets = 6;
  spec.seed = 4;
  const SynthResult sr = generate_layout(spec);
  const SplitResult r = split_layout(sr.layout, 3);
  RasterConfig cfg;
  cfg.image_px = 15;
  cfg.scales_um = {0.2, 0.4};

  const std::vector<CandidateGroup> groups =
      select_all_candidates(r.fragments, r.layout, 31, &r.truth);
  for (const CandidateGroup& g : groups) {
    const GroupFeatures gf = assemble_features(g, r.fragments, r.layout, sr.lib, cfg);
    CHECK(gf.sink_fragment == g.sink_fragment);
    REQUIRE(gf.vectors.size() == g.candidates.size());
    REQUIRE(gf.source_stacks.size() == g.candidates.size());
    if (g.candidates.empty()) continue;

    const Fragment& sink = r.fragments.at(g.sink_fragment);
    const int lowest = *std::min_element(sink.vpins.begin(), sink.vpins.end());
    REQUIRE(gf.sink_stack.images.size() == 2);
    CHECK(gf.sink_stack.images[0].center == r.layout.virtual_pins[lowest].loc);
    for (std::size_t i = 0; i < g.candidates.size(); ++i) {
      CHECK(gf.source_stacks[i].images[0].center ==
            r.layout.virtual_pins[g.candidates[i].source_vpin].loc);
      CHECK(gf.vectors[i].values[3] ==
            Approx(g.candidates[i].distance_pref));
    }
  }

  CandidateGroup empty;
  empty.sink_fragment = 0;
  const GroupFeatures gf = assemble_features(empty, r.fragments, r.layout, sr.lib, cfg);
  CHECK(gf.vectors.empty());
  CHECK(gf.sink_stack.images.empty());
}

TEST_CASE("normalization matches direct statistics and floors the deviation") {
  auto make_group = [](std::initializer_list<std::vector<double>> rows) {
    GroupFeatures g;
    for (const auto& r : rows) g.vectors.push_back({r});
    return g;
  };
  std::vector<GroupFeatures> groups = {
      make_group({{1.0, 5.0}, {3.0, 5.0}}),
      make_group({{5.0, 5.0}}),
  };
  const NormalizationStats s = fit_normalization(groups);
  CHECK(s.mean == std::vector<double>{3.0, 5.0});
  CHECK(s.std_dev[0] == Approx(std::sqrt(8.0 / 3.0)));
  CHECK(s.std_dev[1] == NormalizationStats::kStdFloor);  // constant feature

  apply_normalization(groups[0], s);
  CHECK(groups[0].vectors[0].values[0] == Approx(-2.0 / std::sqrt(8.0 / 3.0)));
  CHECK(groups[0].vectors[0].values[1] == 0.0);
  CHECK(std::isfinite(groups[0].vectors[0].values[1]));

  GroupFeatures bad = make_group({{1.0, 2.0, 3.0}});
  CHECK_THROWS_AS(apply_normalization(bad, s), InputError);
  std::vector<GroupFeatures> tiny = {make_group({{1.0, 2.0}})};
  CHECK_THROWS_AS(fit_normalization(tiny), InputError);
}
