#ifndef SMATTACK_NATIVE_IO_HPP
#define SMATTACK_NATIVE_IO_HPP

#include <fstream>
#include <sstream>
#include <string>
#include <variant>

#include "json.hpp"
#include "smattack/fragments.hpp"
#include "smattack/layout.hpp"
#include "smattack/library.hpp"

namespace smattack {

using json = nlohmann::json;

namespace detail {

inline const json& field(const json& j, const std::string& key,
                         const std::string& path) {
  auto it = j.find(key);
  if (it == j.end())
    throw InputError("schema violation: missing field " + path + "/" + key);
  return *it;
}

inline Point point_of(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2)
    throw InputError("schema violation: " + path + " must be [x, y]");
  return Point{j[0].get<std::int64_t>(), j[1].get<std::int64_t>()};
}

inline json point_json(Point p) { return json::array({p.x, p.y}); }

inline PinDirection dir_of(const json& j, const std::string& path) {
  const std::string s = j.get<std::string>();
  if (s == "input") return PinDirection::input;
  if (s == "output") return PinDirection::output;
  throw InputError("schema violation: " + path + " must be input|output");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Technology
// ---------------------------------------------------------------------------

inline json tech_to_json(const TechConfig& t) {
  std::string dirs;
  for (Axis a : t.preferred_dir) dirs += (a == Axis::horizontal ? 'H' : 'V');
  return json{{"dbu_per_micron", t.dbu_per_micron},
              {"num_feol_layers", t.num_feol_layers},
              {"preferred_dir", dirs},
              {"unit_wire_cap_f_per_um", t.unit_wire_cap},
              {"via_cap_f", t.via_cap}};
}

inline TechConfig tech_from_json(const json& j) {
  TechConfig t;
  t.dbu_per_micron = detail::field(j, "dbu_per_micron", "tech").get<std::int64_t>();
  t.num_feol_layers = detail::field(j, "num_feol_layers", "tech").get<int>();
  for (char c : detail::field(j, "preferred_dir", "tech").get<std::string>()) {
    if (c != 'H' && c != 'V')
      throw InputError("schema violation: tech/preferred_dir must be H|V chars");
    t.preferred_dir.push_back(c == 'H' ? Axis::horizontal : Axis::vertical);
  }
  t.unit_wire_cap =
      detail::field(j, "unit_wire_cap_f_per_um", "tech").get<std::vector<double>>();
  t.via_cap = detail::field(j, "via_cap_f", "tech").get<std::vector<double>>();
  t.validate();
  return t;
}

// ---------------------------------------------------------------------------
// Cell library
// ---------------------------------------------------------------------------

inline json library_to_json(const CellLibrary& lib) {
  json masters = json::object();
  for (const auto& [name, m] : lib.masters) {
    json pins = json::object();
    for (const auto& [pn, p] : m.pins)
      pins[pn] = json{{"dir", p.direction == PinDirection::output ? "output" : "input"},
                      {"cap_f", p.cap_f},
                      {"offset", detail::point_json(p.offset)}};
    masters[name] = json{{"pins", pins},
                         {"max_cap_f", m.max_cap_f},
                         {"drive_res_ohm", m.drive_res_ohm},
                         {"intrinsic_delay_s", m.intrinsic_delay_s}};
  }
  return json{{"masters", masters}};
}

inline CellLibrary library_from_json(const json& j) {
  CellLibrary lib;
  for (const auto& [name, mj] : detail::field(j, "masters", "").items()) {
    LibraryMaster m;
    for (const auto& [pn, pj] : detail::field(mj, "pins", "masters/" + name).items()) {
      LibraryPin p;
      const std::string path = "masters/" + name + "/pins/" + pn;
      p.direction = detail::dir_of(detail::field(pj, "dir", path), path + "/dir");
      if (pj.contains("cap_f")) p.cap_f = pj["cap_f"].get<double>();
      if (pj.contains("offset")) p.offset = detail::point_of(pj["offset"], path + "/offset");
      m.pins[pn] = p;
    }
    if (mj.contains("max_cap_f")) m.max_cap_f = mj["max_cap_f"].get<double>();
    if (mj.contains("drive_res_ohm")) m.drive_res_ohm = mj["drive_res_ohm"].get<double>();
    if (mj.contains("intrinsic_delay_s"))
      m.intrinsic_delay_s = mj["intrinsic_delay_s"].get<double>();
    lib.masters[name] = std::move(m);
  }
  lib.validate();
  return lib;
}

// ---------------------------------------------------------------------------
// Layouts
// ---------------------------------------------------------------------------

namespace detail {

template <class L>
json layout_common_json(const L& l, bool with_nets) {
  json cells = json::array();
  for (const auto& c : l.cells)
    cells.push_back(json{{"master", c.master},
                         {"name", c.name},
                         {"orient", c.orient},
                         {"origin", point_json(c.origin)}});
  json pins = json::array();
  for (const auto& p : l.pins) {
    json pj{{"cell", p.cell},
            {"dir", p.direction == PinDirection::output ? "output" : "input"},
            {"loc", point_json(p.loc)},
            {"pin", p.pin}};
    if (with_nets) pj["net"] = p.net;
    pins.push_back(pj);
  }
  json wires = json::array();
  for (const auto& w : l.wires) {
    json wj{{"from", point_json(w.seg.a)},
            {"layer", w.layer},
            {"to", point_json(w.seg.b)}};
    if (with_nets) wj["net"] = w.net;
    wires.push_back(wj);
  }
  json vias = json::array();
  for (const auto& v : l.vias) {
    json vj{{"at", point_json(v.at)}, {"cut", v.cut}};
    if (with_nets) vj["net"] = v.net;
    vias.push_back(vj);
  }
  return json{{"cells", cells},
              {"die_area", json::array({l.die.x_min, l.die.y_min, l.die.x_max, l.die.y_max})},
              {"pins", pins},
              {"tech", tech_to_json(l.tech)},
              {"vias", vias},
              {"wires", wires}};
}

template <class L>
void layout_common_from_json(const json& j, L& l, bool with_nets) {
  l.tech = tech_from_json(field(j, "tech", ""));
  const json& da = field(j, "die_area", "");
  if (!da.is_array() || da.size() != 4)
    throw InputError("schema violation: die_area must be [x0, y0, x1, y1]");
  l.die = Rect{da[0].get<std::int64_t>(), da[1].get<std::int64_t>(),
               da[2].get<std::int64_t>(), da[3].get<std::int64_t>()};
  int idx = 0;
  for (const auto& cj : field(j, "cells", "")) {
    const std::string path = "cells[" + std::to_string(idx++) + "]";
    l.cells.push_back({field(cj, "name", path).get<std::string>(),
                       field(cj, "master", path).get<std::string>(),
                       point_of(field(cj, "origin", path), path + "/origin"),
                       cj.contains("orient") ? cj["orient"].get<std::string>() : "N"});
  }
  idx = 0;
  for (const auto& pj : field(j, "pins", "")) {
    const std::string path = "pins[" + std::to_string(idx++) + "]";
    CellPin p;
    p.cell = field(pj, "cell", path).get<int>();
    p.pin = field(pj, "pin", path).get<std::string>();
    p.loc = point_of(field(pj, "loc", path), path + "/loc");
    p.direction = dir_of(field(pj, "dir", path), path + "/dir");
    if (with_nets) p.net = field(pj, "net", path).get<int>();
    l.pins.push_back(p);
  }
  idx = 0;
  for (const auto& wj : field(j, "wires", "")) {
    const std::string path = "wires[" + std::to_string(idx++) + "]";
    Wire w;
    w.layer = field(wj, "layer", path).get<int>();
    w.seg = Segment(point_of(field(wj, "from", path), path + "/from"),
                    point_of(field(wj, "to", path), path + "/to"));
    if (with_nets) w.net = field(wj, "net", path).get<int>();
    l.wires.push_back(w);
  }
  idx = 0;
  for (const auto& vj : field(j, "vias", "")) {
    const std::string path = "vias[" + std::to_string(idx++) + "]";
    ViaInst v;
    v.cut = field(vj, "cut", path).get<int>();
    v.at = point_of(field(vj, "at", path), path + "/at");
    if (with_nets) v.net = field(vj, "net", path).get<int>();
    l.vias.push_back(v);
  }
}

}  // namespace detail

inline json full_layout_to_json(const FullLayout& l) {
  json root = detail::layout_common_json(l, /*with_nets=*/true);
  json nets = json::array();
  for (const auto& n : l.nets)
    nets.push_back(json{{"driver", n.driver_pin},
                        {"name", n.name},
                        {"sinks", n.sink_pins}});
  root["nets"] = nets;
  return root;
}

inline FullLayout full_layout_from_json(const json& j) {
  FullLayout l;
  detail::layout_common_from_json(j, l, /*with_nets=*/true);
  int idx = 0;
  for (const auto& nj : detail::field(j, "nets", "")) {
    const std::string path = "nets[" + std::to_string(idx++) + "]";
    Net n;
    n.name = detail::field(nj, "name", path).get<std::string>();
    n.driver_pin = detail::field(nj, "driver", path).get<int>();
    n.sink_pins = detail::field(nj, "sinks", path).get<std::vector<int>>();
    l.nets.push_back(n);
  }
  l.validate();
  return l;
}

inline json split_layout_to_json(const SplitLayout& l) {
  json root = detail::layout_common_json(l, /*with_nets=*/false);
  root["split_layer"] = l.split_layer;
  json vpins = json::array();
  for (const auto& q : l.virtual_pins)
    vpins.push_back(json{{"id", q.id}, {"loc", detail::point_json(q.loc)}});
  root["virtual_pins"] = vpins;
  return root;
}

inline SplitLayout split_layout_from_json(const json& j) {
  SplitLayout l;
  detail::layout_common_from_json(j, l, /*with_nets=*/false);
  l.split_layer = detail::field(j, "split_layer", "").get<int>();
  int idx = 0;
  for (const auto& qj : detail::field(j, "virtual_pins", "")) {
    const std::string path = "virtual_pins[" + std::to_string(idx++) + "]";
    l.virtual_pins.push_back(
        {detail::field(qj, "id", path).get<int>(),
         detail::point_of(detail::field(qj, "loc", path), path + "/loc"), -1});
  }
  return l;
}

inline json truth_to_json(const GroundTruth& t) {
  json pairs = json::array();
  for (const auto& [sink, source] : t.pairs)
    pairs.push_back(json{{"sink", sink},
                         {"sink_pins", t.sink_counts.at(sink)},
                         {"source", source}});
  return json{{"pairs", pairs}, {"total_sink_pins", t.total_sink_pins}};
}

inline GroundTruth truth_from_json(const json& j) {
  GroundTruth t;
  for (const auto& pj : detail::field(j, "pairs", "")) {
    const int sink = detail::field(pj, "sink", "pairs").get<int>();
    t.pairs[sink] = detail::field(pj, "source", "pairs").get<int>();
    t.sink_counts[sink] = detail::field(pj, "sink_pins", "pairs").get<int>();
  }
  t.total_sink_pins = detail::field(j, "total_sink_pins", "").get<long>();
  return t;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::string serialize(const json& j) { return j.dump(2) + "\n"; }

inline json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  return j;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << text;
}

inline bool json_is_split_layout(const json& j) { return j.contains("split_layer"); }

}  // namespace smattack

#endif
