#ifndef SMATTACK_FEATURES_HPP
#define SMATTACK_FEATURES_HPP

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "smattack/candidates.hpp"
#include "smattack/fragments.hpp"
#include "smattack/library.hpp"
#include "smattack/raster.hpp"

namespace smattack {

/// Number of vector features for m FEOL layers: 12 distances, 2 capacitance
/// bounds, 1 sink count, 2m wirelengths, 2(m-1) via counts, 1 driver delay,
/// 1 combined wirelength. m = 3 gives the default 27.
inline int feature_count(int m) { return 4 * m + 15; }

inline std::vector<std::string> feature_ledger(int m) {
  std::vector<std::string> names = {
      "dist_signed_pref",     "dist_signed_nonpref",     "dist_signed_sum",
      "dist_unsigned_pref",   "dist_unsigned_nonpref",   "dist_unsigned_sum",
      "dist_signed_pref_r",   "dist_signed_nonpref_r",   "dist_signed_sum_r",
      "dist_unsigned_pref_r", "dist_unsigned_nonpref_r", "dist_unsigned_sum_r",
      "cap_upper_f",          "cap_lower_f",             "sink_count"};
  for (int l = 1; l <= m; ++l) names.push_back("wl_sink_m" + std::to_string(l));
  for (int l = 1; l <= m; ++l) names.push_back("wl_source_m" + std::to_string(l));
  for (int c = 1; c < m; ++c) names.push_back("vias_sink_c" + std::to_string(c));
  for (int c = 1; c < m; ++c) names.push_back("vias_source_c" + std::to_string(c));
  names.push_back("driver_delay_lb_s");
  names.push_back("total_wirelength_um");
  return names;
}

/// Manhattan distance components between the pins of a VPP, signed and
/// unsigned, along the split layer's preferred/non-preferred direction,
/// each duplicated as a ratio of the matching die extent (half-perimeter
/// for the sums). The signed delta is source minus sink.
inline std::array<double, 12> vpp_distances(Point sink, Point source, Rect die,
                                            const TechConfig& tech, int split_layer) {
  if (die.width() <= 0 || die.height() <= 0)
    throw InputError("vpp_distances: zero-area die");
  const Axis pref = tech.dir(split_layer);
  const double sp = tech.to_microns(along(source, pref) - along(sink, pref));
  const double sn = tech.to_microns(along(source, other_axis(pref)) -
                                    along(sink, other_axis(pref)));
  const double up = std::abs(sp), un = std::abs(sn);
  const double ext_pref =
      tech.to_microns(pref == Axis::horizontal ? die.width() : die.height());
  const double ext_nonpref =
      tech.to_microns(pref == Axis::horizontal ? die.height() : die.width());
  const double half_perim = tech.to_microns(die.width() + die.height());
  return {sp,
          sn,
          sp + sn,
          up,
          un,
          up + un,
          sp / ext_pref,
          sn / ext_nonpref,
          (sp + sn) / half_perim,
          up / ext_pref,
          un / ext_nonpref,
          (up + un) / half_perim};
}

struct CapBounds {
  double upper_f = 0.0;  // driver max load, from the library
  double lower_f = 0.0;  // in-fragment sink pins + wire/via caps of both fragments
  int sink_count = 0;
};

namespace detail {

inline double fragment_wire_cap(const Fragment& f, const SplitLayout& layout) {
  double cap = 0.0;
  for (int wi : f.wires) {
    const Wire& w = layout.wires[wi];
    cap += layout.tech.to_microns(w.seg.length()) * layout.tech.wire_cap(w.layer);
  }
  for (int vi : f.vias) cap += layout.tech.cut_cap(layout.vias[vi].cut);
  return cap;
}

}  // namespace detail

inline CapBounds load_cap_bounds(const Fragment& sink, const Fragment& source,
                                 const SplitLayout& layout, const CellLibrary& lib) {
  if (source.driver_pin < 0)
    throw InputError("load_cap_bounds: source fragment has no driver");
  const CellPin& drv = layout.pins[source.driver_pin];
  const std::string& master = layout.cells[drv.cell].master;
  CapBounds b;
  b.upper_f = lib.master(master).max_cap_f;
  b.sink_count = sink.sink_count;
  for (int pi : sink.sink_pins) {
    const CellPin& p = layout.pins[pi];
    b.lower_f += lib.pin(layout.cells[p.cell].master, p.pin).cap_f;
  }
  b.lower_f += detail::fragment_wire_cap(sink, layout);
  b.lower_f += detail::fragment_wire_cap(source, layout);
  return b;
}

struct LayerUsage {
  std::vector<double> wirelength_um;  // per metal layer 1..m
  std::vector<int> via_count;         // per cut layer 1..m-1
};

inline LayerUsage layer_wirelengths_vias(const Fragment& f, const SplitLayout& layout) {
  const int m = layout.split_layer;
  LayerUsage u;
  u.wirelength_um.assign(m, 0.0);
  u.via_count.assign(m - 1, 0);
  for (int wi : f.wires) {
    const Wire& w = layout.wires[wi];
    u.wirelength_um[w.layer - 1] += layout.tech.to_microns(w.seg.length());
  }
  for (int vi : f.vias) ++u.via_count[layout.vias[vi].cut - 1];
  return u;
}

/// Linear lower-bound delay model: intrinsic plus drive resistance times the
/// lower-bound load.
inline double driver_delay_lb(const Fragment& source, double lower_cap_f,
                              const SplitLayout& layout, const CellLibrary& lib) {
  const CellPin& drv = layout.pins[source.driver_pin];
  const LibraryMaster& master = lib.master(layout.cells[drv.cell].master);
  return master.intrinsic_delay_s + master.drive_res_ohm * lower_cap_f;
}

struct VectorFeatures {
  std::vector<double> values;  // feature_count(m) entries, ledger order
};

inline VectorFeatures extract_vector_features(const CandidateVpp& vpp,
                                              const FragmentSet& frags,
                                              const SplitLayout& layout,
                                              const CellLibrary& lib) {
  const Fragment& sink = frags.at(vpp.sink_fragment);
  const Fragment& source = frags.at(vpp.source_fragment);
  const Point p = layout.virtual_pins[vpp.sink_vpin].loc;
  const Point q = layout.virtual_pins[vpp.source_vpin].loc;

  VectorFeatures f;
  for (double d : vpp_distances(p, q, layout.die, layout.tech, layout.split_layer))
    f.values.push_back(d);
  const CapBounds caps = load_cap_bounds(sink, source, layout, lib);
  f.values.push_back(caps.upper_f);
  f.values.push_back(caps.lower_f);
  f.values.push_back(static_cast<double>(caps.sink_count));
  const LayerUsage su = layer_wirelengths_vias(sink, layout);
  const LayerUsage du = layer_wirelengths_vias(source, layout);
  for (double w : su.wirelength_um) f.values.push_back(w);
  for (double w : du.wirelength_um) f.values.push_back(w);
  for (int v : su.via_count) f.values.push_back(static_cast<double>(v));
  for (int v : du.via_count) f.values.push_back(static_cast<double>(v));
  f.values.push_back(driver_delay_lb(source, caps.lower_f, layout, lib));
  double total = 0.0;
  for (double w : su.wirelength_um) total += w;
  for (double w : du.wirelength_um) total += w;
  f.values.push_back(total);

  for (std::size_t i = 0; i < f.values.size(); ++i)
    if (!std::isfinite(f.values[i]))
      throw InternalError("non-finite feature " + feature_ledger(layout.split_layer)[i]);
  return f;
}

/// All features of one candidate group. The sink image stack is shared by
/// the whole group and centered on the sink fragment's lowest-id virtual pin.
struct GroupFeatures {
  int sink_fragment = -1;
  int capacity = 31;
  bool contains_positive = false;
  std::vector<CandidateVpp> candidates;
  std::vector<VectorFeatures> vectors;       // one per candidate
  std::vector<ImageStack> source_stacks;     // one per candidate
  ImageStack sink_stack;
};

inline GroupFeatures assemble_features(const CandidateGroup& group,
                                       const FragmentSet& frags,
                                       const SplitLayout& layout,
                                       const CellLibrary& lib,
                                       const RasterConfig& raster_cfg) {
  GroupFeatures g;
  g.sink_fragment = group.sink_fragment;
  g.capacity = group.capacity;
  g.contains_positive = group.contains_positive;
  g.candidates = group.candidates;
  if (group.candidates.empty()) return g;  // unpredictable sink

  const Fragment& sink = frags.at(group.sink_fragment);
  const VirtualPin& sink_vpin =
      layout.virtual_pins[*std::min_element(sink.vpins.begin(), sink.vpins.end())];
  g.sink_stack = rasterize_stack(sink_vpin, layout, frags, raster_cfg);
  for (const CandidateVpp& vpp : group.candidates) {
    g.vectors.push_back(extract_vector_features(vpp, frags, layout, lib));
    g.source_stacks.push_back(
        rasterize_stack(layout.virtual_pins[vpp.source_vpin], layout, frags, raster_cfg));
  }
  return g;
}

// ---------------------------------------------------------------------------
// Dataset normalization
// ---------------------------------------------------------------------------

struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> std_dev;  // floored at 1e-12

  static constexpr double kStdFloor = 1e-12;
};

inline NormalizationStats fit_normalization(const std::vector<GroupFeatures>& groups) {
  std::size_t count = 0;
  std::size_t width = 0;
  for (const auto& g : groups)
    for (const auto& v : g.vectors) {
      ++count;
      width = v.values.size();
    }
  if (count < 2) throw InputError("fit_normalization: need at least 2 samples");

  NormalizationStats s;
  s.mean.assign(width, 0.0);
  s.std_dev.assign(width, 0.0);
  for (const auto& g : groups)
    for (const auto& v : g.vectors)
      for (std::size_t i = 0; i < width; ++i) s.mean[i] += v.values[i];
  for (double& m : s.mean) m /= static_cast<double>(count);
  for (const auto& g : groups)
    for (const auto& v : g.vectors)
      for (std::size_t i = 0; i < width; ++i) {
        const double d = v.values[i] - s.mean[i];
        s.std_dev[i] += d * d;
      }
  for (double& d : s.std_dev)
    d = std::max(std::sqrt(d / static_cast<double>(count)), NormalizationStats::kStdFloor);
  return s;
}

/// Z-scores the vector features in place; image planes stay binary.
inline void apply_normalization(GroupFeatures& g, const NormalizationStats& s) {
  for (auto& v : g.vectors) {
    if (v.values.size() != s.mean.size())
      throw InputError("apply_normalization: feature width mismatch");
    for (std::size_t i = 0; i < v.values.size(); ++i)
      v.values[i] = (v.values[i] - s.mean[i]) / s.std_dev[i];
  }
}

}  // namespace smattack

#endif
