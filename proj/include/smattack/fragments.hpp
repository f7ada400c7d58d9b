#ifndef SMATTACK_FRAGMENTS_HPP
#define SMATTACK_FRAGMENTS_HPP

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "smattack/layout.hpp"

namespace smattack {

enum class FragmentKind { source, sink };

/// A connected component of FEOL wiring holding at least one virtual pin.
/// Geometry is referenced by index into the owning SplitLayout.
struct Fragment {
  int id = -1;
  FragmentKind kind = FragmentKind::sink;
  std::vector<int> wires;
  std::vector<int> vias;
  std::vector<int> pins;         // all attached cell pins
  std::vector<int> vpins;        // VirtualPin ids
  int driver_pin = -1;           // pin index, source fragments only
  std::vector<int> sink_pins;    // pin indices with direction == input
  int sink_count = 0;            // c_i
  int net = -1;                  // original net id; -1 when unknown
};

struct FragmentSet {
  std::vector<Fragment> fragments;
  std::vector<int> wire_owner;   // fragment id per wire, -1 if unowned
  std::vector<int> via_owner;
  std::vector<int> pin_owner;
  std::vector<int> vpin_owner;   // fragment id per virtual pin id

  const Fragment& at(int id) const { return fragments.at(id); }
};

namespace detail {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<int> parent_;
  std::vector<int> rank_;
};

/// Coarse spatial hash per layer for wire-wire adjacency. Buckets are 8 um
/// wide; a wire is registered in every bucket its span crosses.
class WireGrid {
 public:
  WireGrid(const std::vector<Wire>& wires, std::int64_t dbu) {
    cell_ = std::max<std::int64_t>(1, 8 * dbu);
    for (std::size_t i = 0; i < wires.size(); ++i) insert(static_cast<int>(i), wires[i]);
  }

  template <class Fn>
  void for_candidates(const Wire& w, Fn&& fn) const {
    visit_buckets(w, [&](std::int64_t key) {
      auto it = buckets_.find(key);
      if (it == buckets_.end()) return;
      for (int j : it->second) fn(j);
    });
  }

 private:
  void insert(int idx, const Wire& w) {
    visit_buckets(w, [&](std::int64_t key) { buckets_[key].push_back(idx); });
  }
  template <class Fn>
  void visit_buckets(const Wire& w, Fn&& fn) const {
    std::int64_t bx0 = floordiv(w.seg.a.x), bx1 = floordiv(w.seg.b.x);
    std::int64_t by0 = floordiv(w.seg.a.y), by1 = floordiv(w.seg.b.y);
    for (std::int64_t bx = bx0; bx <= bx1; ++bx)
      for (std::int64_t by = by0; by <= by1; ++by)
        fn((static_cast<std::int64_t>(w.layer) << 52) ^ (bx << 26) ^ (by & ((1 << 26) - 1)));
  }
  std::int64_t floordiv(std::int64_t v) const {
    return v >= 0 ? v / cell_ : -((-v + cell_ - 1) / cell_);
  }

  std::int64_t cell_;
  std::unordered_map<std::int64_t, std::vector<int>> buckets_;
};

}  // namespace detail

/// Connected components of split-layout geometry under wire/via adjacency,
/// including components without virtual pins (needed for malformed-input
/// detection during splitting). Component ids are assigned afterwards.
inline std::vector<Fragment> build_components(const SplitLayout& layout) {
  const int W = static_cast<int>(layout.wires.size());
  const int V = static_cast<int>(layout.vias.size());
  const int P = static_cast<int>(layout.pins.size());
  const int Q = static_cast<int>(layout.virtual_pins.size());
  detail::UnionFind uf(static_cast<std::size_t>(W + V + P + Q));

  detail::WireGrid grid(layout.wires, layout.tech.dbu_per_micron);
  for (int i = 0; i < W; ++i) {
    const Wire& w = layout.wires[i];
    grid.for_candidates(w, [&](int j) {
      if (j >= i) return;
      const Wire& u = layout.wires[j];
      if (u.layer == w.layer && segments_touch(u.seg, w.seg)) uf.unite(i, j);
    });
  }

  // Point-located items (vias, pins, virtual pins) connect through exact
  // coordinates; index wires' containment by walking per-layer lists.
  std::unordered_map<std::int64_t, std::vector<int>> vias_at;
  auto key_of = [](Point p) {
    return (p.x << 28) ^ (p.y & ((std::int64_t{1} << 28) - 1));
  };
  for (int i = 0; i < V; ++i) vias_at[key_of(layout.vias[i].at)].push_back(i);

  auto connect_point = [&](int item, Point at, int lo_layer, int hi_layer) {
    for (int i = 0; i < W; ++i) {
      const Wire& w = layout.wires[i];
      if (w.layer >= lo_layer && w.layer <= hi_layer && w.seg.contains(at))
        uf.unite(item, i);
    }
  };

  for (int i = 0; i < V; ++i) {
    const ViaInst& v = layout.vias[i];
    connect_point(W + i, v.at, v.cut, v.cut + 1);
    for (int j : vias_at[key_of(v.at)])
      if (j < i && std::abs(layout.vias[j].cut - v.cut) <= 1) uf.unite(W + i, W + j);
  }
  for (int i = 0; i < P; ++i) {
    const CellPin& p = layout.pins[i];
    connect_point(W + V + i, p.loc, 1, 1);
    for (int j : vias_at[key_of(p.loc)])
      if (layout.vias[j].cut == 1) uf.unite(W + V + i, W + j);
  }
  for (int i = 0; i < Q; ++i) {
    const VirtualPin& q = layout.virtual_pins[i];
    const int m = layout.split_layer;
    connect_point(W + V + P + i, q.loc, m, m);
    for (int j : vias_at[key_of(q.loc)])
      if (layout.vias[j].cut == m - 1) uf.unite(W + V + P + i, W + j);
  }

  std::map<int, Fragment> comps;
  for (int i = 0; i < W; ++i) comps[uf.find(i)].wires.push_back(i);
  for (int i = 0; i < V; ++i) comps[uf.find(W + i)].vias.push_back(i);
  for (int i = 0; i < P; ++i) comps[uf.find(W + V + i)].pins.push_back(i);
  for (int i = 0; i < Q; ++i) comps[uf.find(W + V + P + i)].vpins.push_back(i);

  std::vector<Fragment> out;
  out.reserve(comps.size());
  for (auto& [root, frag] : comps) {
    for (int pi : frag.pins) {
      const CellPin& p = layout.pins[pi];
      if (p.direction == PinDirection::output) {
        if (frag.driver_pin >= 0)
          throw InputError("fragment contains two driver pins (pins " +
                           std::to_string(frag.driver_pin) + " and " +
                           std::to_string(pi) + ")");
        frag.driver_pin = pi;
      } else {
        frag.sink_pins.push_back(pi);
      }
    }
    frag.kind = frag.driver_pin >= 0 ? FragmentKind::source : FragmentKind::sink;
    frag.sink_count = static_cast<int>(frag.sink_pins.size());
    out.push_back(std::move(frag));
  }
  return out;
}

/// Fragments proper: components holding at least one virtual pin, with ids
/// assigned by ascending smallest virtual-pin id (deterministic).
inline FragmentSet build_fragments(const SplitLayout& layout) {
  std::vector<Fragment> comps = build_components(layout);
  std::erase_if(comps, [](const Fragment& f) { return f.vpins.empty(); });
  std::sort(comps.begin(), comps.end(), [](const Fragment& a, const Fragment& b) {
    return a.vpins.front() < b.vpins.front();
  });

  FragmentSet set;
  set.wire_owner.assign(layout.wires.size(), -1);
  set.via_owner.assign(layout.vias.size(), -1);
  set.pin_owner.assign(layout.pins.size(), -1);
  set.vpin_owner.assign(layout.virtual_pins.size(), -1);
  for (std::size_t i = 0; i < comps.size(); ++i) {
    Fragment& f = comps[i];
    f.id = static_cast<int>(i);
    for (int w : f.wires) set.wire_owner[w] = f.id;
    for (int v : f.vias) set.via_owner[v] = f.id;
    for (int p : f.pins) set.pin_owner[p] = f.id;
    for (int q : f.vpins) set.vpin_owner[q] = f.id;
  }
  set.fragments = std::move(comps);
  return set;
}

struct GroundTruth {
  std::map<int, int> pairs;        // sink fragment id -> source fragment id
  std::map<int, int> sink_counts;  // sink fragment id -> c_i
  long total_sink_pins = 0;
};

struct SplitResult {
  SplitLayout layout;
  GroundTruth truth;
  FragmentSet fragments;           // fragments of the split view, net-annotated
};

/// Removes everything above `split_layer` and turns cut vias at the split
/// layer into virtual pins. Ground truth records, per sink fragment, the
/// source fragment of the same net.
inline SplitResult split_layout(const FullLayout& full, int split_layer) {
  full.validate();
  const int top = full.top_routed_layer();
  if (split_layer < 1 || split_layer >= top)
    throw InputError("split layer " + std::to_string(split_layer) +
                     " out of range [1, " + std::to_string(top - 1) + "]");

  SplitResult r;
  SplitLayout& s = r.layout;
  s.tech = full.tech;
  s.tech.num_feol_layers = split_layer;
  s.die = full.die;
  s.split_layer = split_layer;
  s.cells = full.cells;
  s.pins = full.pins;

  std::vector<int> wire_net, via_net, vpin_net, pin_net;
  for (auto& p : s.pins) {
    pin_net.push_back(p.net);
    p.net = -1;
  }
  for (const Wire& w : full.wires) {
    if (w.layer > split_layer) continue;
    Wire copy = w;
    wire_net.push_back(copy.net);
    copy.net = -1;
    s.wires.push_back(copy);
  }
  std::vector<std::pair<Point, int>> vpin_points;  // loc, net
  for (const ViaInst& v : full.vias) {
    if (v.cut < split_layer) {
      ViaInst copy = v;
      via_net.push_back(copy.net);
      copy.net = -1;
      s.vias.push_back(copy);
    } else if (v.cut == split_layer) {
      vpin_points.emplace_back(v.at, v.net);
    }
  }
  std::sort(vpin_points.begin(), vpin_points.end());
  vpin_points.erase(std::unique(vpin_points.begin(), vpin_points.end()),
                    vpin_points.end());
  for (std::size_t i = 0; i < vpin_points.size(); ++i) {
    s.virtual_pins.push_back({static_cast<int>(i), vpin_points[i].first, -1});
    vpin_net.push_back(vpin_points[i].second);
  }

  // Fragment the split view and recover per-fragment net ids from the
  // original geometry.
  r.fragments = build_fragments(s);
  for (Fragment& f : r.fragments.fragments) {
    int net = -1;
    auto absorb = [&](int candidate, const char* what) {
      if (candidate < 0) return;
      if (net < 0) net = candidate;
      else if (net != candidate)
        throw InputError(std::string("FEOL geometry of nets ") +
                         full.nets[net].name + " and " + full.nets[candidate].name +
                         " overlaps (" + what + ")");
    };
    for (int w : f.wires) absorb(wire_net[w], "wire");
    for (int v : f.vias) absorb(via_net[v], "via");
    for (int q : f.vpins) absorb(vpin_net[q], "virtual pin");
    for (int p : f.pins) absorb(pin_net[p], "pin");
    f.net = net;
    for (int q : f.vpins) r.layout.virtual_pins[q].owning_fragment = f.id;
  }

  // Which nets cross the cut?
  std::vector<char> crosses(full.nets.size(), 0);
  for (const Wire& w : full.wires)
    if (w.layer > split_layer && w.net >= 0) crosses[w.net] = 1;
  for (const ViaInst& v : full.vias)
    if (v.cut >= split_layer && v.net >= 0) crosses[v.net] = 1;

  std::map<int, std::vector<const Fragment*>> frags_by_net;
  for (const Fragment& f : r.fragments.fragments)
    if (f.net >= 0) frags_by_net[f.net].push_back(&f);

  for (std::size_t n = 0; n < full.nets.size(); ++n) {
    if (!crosses[n]) continue;  // fully-FEOL net: excluded from ground truth
    auto it = frags_by_net.find(static_cast<int>(n));
    if (it == frags_by_net.end())
      throw InputError("net " + full.nets[n].name +
                       " crosses the cut without virtual pins (incomplete FEOL routing)");
    const Fragment* source = nullptr;
    for (const Fragment* f : it->second) {
      if (f->kind != FragmentKind::source) continue;
      if (source)
        throw InputError("net " + full.nets[n].name + " has two source fragments");
      source = f;
    }
    if (!source)
      throw InputError("net " + full.nets[n].name +
                       " crosses the cut without a source fragment");
    for (const Fragment* f : it->second) {
      if (f->kind != FragmentKind::sink) continue;
      r.truth.pairs[f->id] = source->id;
      r.truth.sink_counts[f->id] = f->sink_count;
      r.truth.total_sink_pins += f->sink_count;
    }
  }
  return r;
}

/// Eq.-1-style correct connection rate: sink-pin-weighted fraction of sink
/// fragments whose selected source fragment matches the ground truth.
/// Missing selections count as wrong.
inline double compute_ccr(const std::map<int, int>& selected,
                          const GroundTruth& truth) {
  if (truth.pairs.empty()) throw InputError("compute_ccr: empty ground truth");
  long num = 0, den = 0;
  for (const auto& [sink, source] : truth.pairs) {
    const int c = truth.sink_counts.at(sink);
    den += c;
    auto it = selected.find(sink);
    if (it != selected.end() && it->second == source) num += c;
  }
  if (den == 0) throw InputError("compute_ccr: zero total sink pins");
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace smattack

#endif
