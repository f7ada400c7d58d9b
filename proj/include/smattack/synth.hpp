#ifndef SMATTACK_SYNTH_HPP
#define SMATTACK_SYNTH_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "smattack/layout.hpp"
#include "smattack/library.hpp"

namespace smattack {

/// Synthetic benchmark generator. Drivers sit on a jittered grid; every net
/// routes its driver through M1/M2 to an M3 stub ending in a cut-3 via (the
/// source virtual pin after splitting at M3), and each sink hangs its own
/// M3/M2/M1 stub east of the source. BEOL (M4/M5) closes the net.
///
/// `bias` in [0,1] controls how close the true source is: at 1.0 sinks sit
/// right next to their source, so a nearest-vpin guess is always correct;
/// lower values spread sinks across several grid columns. `noise` is the
/// fraction of sinks whose row alignment with the true source is destroyed.
struct SynthSpec {
  int num_nets = 100;
  int fanout_min = 1;
  int fanout_max = 3;
  double grid_um = 25.0;
  double bias = 0.3;
  double cap_signal = 1.0;  // fraction of nets with a consistent load class
  double noise = 0.0;
  std::uint64_t seed = 1;
};

struct SynthResult {
  FullLayout layout;
  CellLibrary lib;
};

namespace synth_detail {

// Engine-direct draws: the standard distributions are not pinned across
// library implementations, these are.
inline double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1p-53;
}
inline int uint_below(std::mt19937_64& rng, int n) {
  return static_cast<int>(rng() % static_cast<std::uint64_t>(n));
}

struct Box {
  std::int64_t x0, y0, x1, y1;
  bool intersects(const Box& o, std::int64_t margin) const {
    return x0 - margin <= o.x1 && o.x0 <= x1 + margin && y0 - margin <= o.y1 &&
           o.y0 <= y1 + margin;
  }
};

}  // namespace synth_detail

inline CellLibrary make_synth_library() {
  CellLibrary lib;
  LibraryMaster drv_s;
  drv_s.pins["Z"] = {PinDirection::output, 0.0, {0, 0}};
  drv_s.max_cap_f = 2e-15;
  drv_s.drive_res_ohm = 4000.0;
  drv_s.intrinsic_delay_s = 15e-12;
  LibraryMaster drv_l = drv_s;
  drv_l.max_cap_f = 2e-14;
  drv_l.drive_res_ohm = 800.0;
  drv_l.intrinsic_delay_s = 25e-12;
  LibraryMaster sink_s;
  sink_s.pins["A"] = {PinDirection::input, 5e-16, {0, 0}};
  LibraryMaster sink_l;
  sink_l.pins["A"] = {PinDirection::input, 6e-15, {0, 0}};
  lib.masters["DRV_S"] = drv_s;
  lib.masters["DRV_L"] = drv_l;
  lib.masters["SINK_S"] = sink_s;
  lib.masters["SINK_L"] = sink_l;
  return lib;
}

inline SynthResult generate_layout(const SynthSpec& spec) {
  if (spec.num_nets < 1) throw InputError("generate_layout: num_nets must be >= 1");
  if (spec.fanout_min < 1 || spec.fanout_max < spec.fanout_min)
    throw InputError("generate_layout: bad fanout range");
  if (spec.grid_um < 10.0) throw InputError("generate_layout: grid_um must be >= 10");

  SynthResult r;
  r.lib = make_synth_library();
  FullLayout& L = r.layout;
  L.tech = TechConfig::make_default(5);
  L.tech.num_feol_layers = 3;
  const std::int64_t K = L.tech.dbu_per_micron;  // dbu per micron
  const std::int64_t G = static_cast<std::int64_t>(std::llround(spec.grid_um * K));

  std::mt19937_64 rng(spec.seed);
  auto u = [&] { return synth_detail::u01(rng); };

  const int cols = static_cast<int>(std::ceil(std::sqrt(spec.num_nets)));
  std::vector<synth_detail::Box> occupied;
  occupied.reserve(spec.num_nets * 4);

  auto add_wire = [&](int layer, Point a, Point b, int net) {
    if (a == b) return;
    L.wires.push_back({layer, Segment(a, b), net});
  };
  auto add_via = [&](int cut, Point at, int net) { L.vias.push_back({cut, at, net}); };

  for (int ni = 0; ni < spec.num_nets; ++ni) {
    const int col = ni % cols, row = ni / cols;
    const bool heavy = u() < 0.5;
    const bool consistent = u() < spec.cap_signal;
    const std::string drv_master = heavy ? "DRV_L" : "DRV_S";

    // driver and its FEOL stubs up to the source virtual pin
    const std::int64_t jx = static_cast<std::int64_t>(std::llround((u() * 4 - 2) * K));
    const std::int64_t jy = static_cast<std::int64_t>(std::llround((u() * 4 - 2) * K));
    const Point d{10 * K + col * G + jx, 10 * K + row * G + jy};
    const Point p1{d.x + K, d.y};
    const Point p2{p1.x, p1.y + K};
    const Point vs{p2.x + 3 * K / 2, p2.y};

    const int net = static_cast<int>(L.nets.size());
    const int drv_cell = static_cast<int>(L.cells.size());
    L.cells.push_back({"drv" + std::to_string(ni), drv_master, d, "N"});
    const int drv_pin = static_cast<int>(L.pins.size());
    L.pins.push_back({drv_cell, "Z", d, PinDirection::output, net});
    add_wire(1, d, p1, net);
    add_wire(2, p1, p2, net);
    add_wire(3, p2, vs, net);
    add_via(1, p1, net);
    add_via(2, p2, net);
    add_via(3, vs, net);  // becomes the source virtual pin
    occupied.push_back({d.x, d.y, vs.x, p2.y});

    Net n;
    n.name = "net" + std::to_string(ni);
    n.driver_pin = drv_pin;

    const int fanout =
        spec.fanout_min + synth_detail::uint_below(rng, spec.fanout_max - spec.fanout_min + 1);
    for (int k = 0; k < fanout; ++k) {
      const bool sink_heavy = consistent ? heavy : (u() < 0.5);
      const std::string sink_master = sink_heavy ? "SINK_L" : "SINK_S";

      Point sv;
      synth_detail::Box box{};
      bool placed = false;
      for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
        const double bias = std::min(std::max(spec.bias, 0.0), 1.0);
        // sibling sinks get disjoint dx bands so high bias stays placeable
        const double dx_um = 2.0 + 3.5 * k + u() * (3.0 + (1.0 - bias) * 55.0);
        double dy_um = u() * 0.8 - 0.4;
        if (u() < spec.noise) dy_um = (u() < 0.5 ? -1 : 1) * (3.0 + u() * 7.0);
        sv = {vs.x + static_cast<std::int64_t>(std::llround(dx_um * K)),
              vs.y + static_cast<std::int64_t>(std::llround(dy_um * K))};
        box = {sv.x, sv.y - K, sv.x + 5 * K / 2, sv.y};
        placed = true;
        for (const auto& b : occupied)
          if (box.intersects(b, K / 2)) {
            placed = false;
            break;
          }
      }
      if (!placed)
        throw InternalError("generate_layout: could not place sink for " + n.name);
      occupied.push_back(box);

      const Point q2{sv.x + 3 * K / 2, sv.y};
      const Point q1{q2.x, q2.y - K};
      const Point s{q1.x + K, q1.y};
      const int sink_cell = static_cast<int>(L.cells.size());
      L.cells.push_back(
          {"snk" + std::to_string(ni) + "_" + std::to_string(k), sink_master, s, "N"});
      const int sink_pin = static_cast<int>(L.pins.size());
      L.pins.push_back({sink_cell, "A", s, PinDirection::input, net});
      n.sink_pins.push_back(sink_pin);

      add_via(3, sv, net);  // becomes a sink virtual pin
      add_wire(3, sv, q2, net);
      add_via(2, q2, net);
      add_wire(2, q2, q1, net);
      add_via(1, q1, net);
      add_wire(1, q1, s, net);

      // BEOL: M4 on the source's x track, M5 crossover when x differs
      if (vs.x == sv.x) {
        add_wire(4, vs, sv, net);
      } else {
        const Point t{vs.x, sv.y};
        add_wire(4, vs, t, net);
        add_via(4, t, net);
        add_wire(5, t, sv, net);
        add_via(4, sv, net);
      }
    }
    L.nets.push_back(std::move(n));
  }

  // die: bounding box of everything, 5 um apron
  std::int64_t x0 = L.wires[0].seg.a.x, y0 = L.wires[0].seg.a.y;
  std::int64_t x1 = x0, y1 = y0;
  auto grow = [&](Point p) {
    x0 = std::min(x0, p.x);
    y0 = std::min(y0, p.y);
    x1 = std::max(x1, p.x);
    y1 = std::max(y1, p.y);
  };
  for (const Wire& w : L.wires) {
    grow(w.seg.a);
    grow(w.seg.b);
  }
  for (const ViaInst& v : L.vias) grow(v.at);
  for (const PlacedCell& c : L.cells) grow(c.origin);
  L.die = Rect{x0 - 5 * K, y0 - 5 * K, x1 + 5 * K, y1 + 5 * K};
  L.validate();
  return r;
}

}  // namespace smattack

#endif
