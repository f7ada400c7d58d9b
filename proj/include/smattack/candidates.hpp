#ifndef SMATTACK_CANDIDATES_HPP
#define SMATTACK_CANDIDATES_HPP

#include <algorithm>
#include <map>
#include <optional>
#include <tuple>
#include <vector>

#include "smattack/fragments.hpp"
#include "smattack/layout.hpp"

namespace smattack {

enum class Label { positive, negative, unknown };

struct CandidateVpp {
  int sink_vpin = -1;
  int source_vpin = -1;
  int sink_fragment = -1;
  int source_fragment = -1;
  std::int64_t nonpref_dbu = 0;   // unsigned distance, non-preferred direction
  std::int64_t pref_dbu = 0;      // unsigned distance, preferred direction
  double distance_nonpref = 0.0;  // same, microns
  double distance_pref = 0.0;
  Label label = Label::unknown;

  std::tuple<std::int64_t, std::int64_t, int, int> rank() const {
    return {nonpref_dbu, pref_dbu, source_vpin, sink_vpin};
  }
};

struct CandidateGroup {
  int sink_fragment = -1;
  int capacity = 31;              // n
  std::vector<CandidateVpp> candidates;
  bool contains_positive = false;
};

/// Split-layer directional preference: p prefers q iff some split-layer
/// segment incident to p has a far endpoint e such that q lies on the
/// opposite side of p from e along the segment's axis (axis-aligned equality
/// counts). A pin with no incident segment constrains nothing.
inline bool prefers(const VirtualPin& p, const VirtualPin& q,
                    const SplitLayout& layout) {
  bool any_incident = false;
  for (const Wire& w : layout.wires) {
    if (w.layer != layout.split_layer || !w.seg.contains(p.loc)) continue;
    const Axis ax = w.seg.axis();
    for (Point e : {w.seg.a, w.seg.b}) {
      const std::int64_t de = along(e, ax) - along(p.loc, ax);
      if (de == 0) continue;
      any_incident = true;
      const std::int64_t dq = along(q.loc, ax) - along(p.loc, ax);
      if (dq == 0 || (dq > 0) != (de > 0)) return true;
    }
  }
  return !any_incident;
}

/// Precomputed per-vpin incidence constraints so group enumeration does not
/// rescan the wire list for every pair. Matches prefers() exactly.
class PreferenceIndex {
 public:
  explicit PreferenceIndex(const SplitLayout& layout)
      : constraints_(layout.virtual_pins.size()) {
    for (const Wire& w : layout.wires) {
      if (w.layer != layout.split_layer) continue;
      for (const VirtualPin& p : layout.virtual_pins) {
        if (!w.seg.contains(p.loc)) continue;
        const Axis ax = w.seg.axis();
        for (Point e : {w.seg.a, w.seg.b}) {
          const std::int64_t de = along(e, ax) - along(p.loc, ax);
          if (de != 0) constraints_[p.id].push_back({ax, de > 0});
        }
      }
    }
  }

  bool prefers(const VirtualPin& p, const VirtualPin& q) const {
    const auto& cs = constraints_[p.id];
    if (cs.empty()) return true;
    for (const auto& [ax, far_positive] : cs) {
      const std::int64_t dq = along(q.loc, ax) - along(p.loc, ax);
      if (dq == 0 || (dq > 0) != far_positive) return true;
    }
    return false;
  }

 private:
  std::vector<std::vector<std::pair<Axis, bool>>> constraints_;
};

/// A VPP survives unless neither pin prefers the other.
inline bool direction_filter(bool sink_prefers_source, bool source_prefers_sink) {
  return sink_prefers_source || source_prefers_sink;
}

/// Non-duplication: one VPP per (sink fragment, source fragment) pair,
/// minimizing non-preferred-direction distance; ties broken by preferred
/// distance, then by (source vpin, sink vpin) ascending.
inline std::vector<CandidateVpp> dedupe_pairs(std::vector<CandidateVpp> vpps) {
  std::map<int, CandidateVpp> best;  // keyed by source fragment
  for (const CandidateVpp& v : vpps) {
    auto [it, inserted] = best.emplace(v.source_fragment, v);
    if (!inserted && v.rank() < it->second.rank()) it->second = v;
  }
  std::vector<CandidateVpp> out;
  out.reserve(best.size());
  for (auto& [src, v] : best) out.push_back(v);
  return out;
}

namespace detail {

inline CandidateVpp make_vpp(const VirtualPin& p, const VirtualPin& q, int sink_frag,
                             int source_frag, const SplitLayout& layout) {
  CandidateVpp v;
  v.sink_vpin = p.id;
  v.source_vpin = q.id;
  v.sink_fragment = sink_frag;
  v.source_fragment = source_frag;
  const Axis pref = layout.tech.dir(layout.split_layer);
  v.pref_dbu = std::llabs(along(q.loc, pref) - along(p.loc, pref));
  v.nonpref_dbu =
      std::llabs(along(q.loc, other_axis(pref)) - along(p.loc, other_axis(pref)));
  v.distance_pref = layout.tech.to_microns(v.pref_dbu);
  v.distance_nonpref = layout.tech.to_microns(v.nonpref_dbu);
  return v;
}

}  // namespace detail

/// Applies the three selection criteria (direction, non-duplication,
/// distance) and keeps the n best VPPs for one sink fragment. When ground
/// truth is available, candidates are labeled. An empty group means the
/// sink is unpredictable.
inline CandidateGroup select_candidates(const Fragment& sink,
                                        const FragmentSet& fragments,
                                        const SplitLayout& layout, int n,
                                        const GroundTruth* truth,
                                        const PreferenceIndex& pref_index) {
  if (n < 1) throw InputError("select_candidates: n must be >= 1");
  CandidateGroup group;
  group.sink_fragment = sink.id;
  group.capacity = n;

  std::vector<CandidateVpp> pool;
  for (const Fragment& src : fragments.fragments) {
    if (src.kind != FragmentKind::source) continue;
    for (int pi : sink.vpins) {
      const VirtualPin& p = layout.virtual_pins[pi];
      for (int qi : src.vpins) {
        const VirtualPin& q = layout.virtual_pins[qi];
        if (!direction_filter(pref_index.prefers(p, q), pref_index.prefers(q, p)))
          continue;
        pool.push_back(detail::make_vpp(p, q, sink.id, src.id, layout));
      }
    }
  }
  pool = dedupe_pairs(std::move(pool));
  std::sort(pool.begin(), pool.end(),
            [](const CandidateVpp& a, const CandidateVpp& b) { return a.rank() < b.rank(); });
  if (static_cast<int>(pool.size()) > n) pool.resize(n);

  if (truth) {
    auto it = truth->pairs.find(sink.id);
    for (CandidateVpp& v : pool) {
      v.label = (it != truth->pairs.end() && it->second == v.source_fragment)
                    ? Label::positive
                    : Label::negative;
      if (v.label == Label::positive) group.contains_positive = true;
    }
  }
  group.candidates = std::move(pool);
  return group;
}

inline CandidateGroup select_candidates(const Fragment& sink,
                                        const FragmentSet& fragments,
                                        const SplitLayout& layout, int n,
                                        const GroundTruth* truth = nullptr) {
  return select_candidates(sink, fragments, layout, n, truth,
                           PreferenceIndex(layout));
}

/// One group per sink fragment, ordered by sink fragment id.
inline std::vector<CandidateGroup> select_all_candidates(
    const FragmentSet& fragments, const SplitLayout& layout, int n,
    const GroundTruth* truth = nullptr) {
  PreferenceIndex pref_index(layout);
  std::vector<CandidateGroup> groups;
  for (const Fragment& f : fragments.fragments)
    if (f.kind == FragmentKind::sink)
      groups.push_back(select_candidates(f, fragments, layout, n, truth, pref_index));
  return groups;
}

}  // namespace smattack

#endif
