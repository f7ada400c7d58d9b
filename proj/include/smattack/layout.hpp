#ifndef SMATTACK_LAYOUT_HPP
#define SMATTACK_LAYOUT_HPP

#include <optional>
#include <string>
#include <vector>

#include "smattack/geometry.hpp"
#include "smattack/library.hpp"
#include "smattack/tech.hpp"

namespace smattack {

struct PlacedCell {
  std::string name;
  std::string master;
  Point origin;
  std::string orient = "N";
};

/// A cell pin instantiated at its placed location (layer 1 geometry).
struct CellPin {
  int cell = -1;                 // index into cells
  std::string pin;               // library pin name
  Point loc;
  PinDirection direction = PinDirection::input;
  int net = -1;                  // -1 when connectivity is unknown (split view)
};

struct Wire {
  int layer = 1;
  Segment seg;
  int net = -1;
};

struct ViaInst {
  int cut = 1;                   // joins metal layers cut and cut+1
  Point at;
  int net = -1;
};

struct Net {
  std::string name;
  int driver_pin = -1;           // index into pins
  std::vector<int> sink_pins;    // indices into pins
};

struct FullLayout {
  TechConfig tech;
  Rect die;
  std::vector<PlacedCell> cells;
  std::vector<CellPin> pins;
  std::vector<Wire> wires;
  std::vector<ViaInst> vias;
  std::vector<Net> nets;

  int top_routed_layer() const {
    int top = 0;
    for (const auto& w : wires) top = std::max(top, w.layer);
    for (const auto& v : vias) top = std::max(top, v.cut + 1);
    return top;
  }

  void validate() const {
    tech.validate();
    if (die.width() <= 0 || die.height() <= 0)
      throw InputError("layout: empty die area");
    for (std::size_t i = 0; i < nets.size(); ++i) {
      const Net& n = nets[i];
      if (n.driver_pin < 0 || n.driver_pin >= static_cast<int>(pins.size()))
        throw InputError("net " + n.name + " has no driver pin");
      if (pins[n.driver_pin].direction != PinDirection::output)
        throw InputError("net " + n.name + " driver is not an output pin");
      if (n.sink_pins.empty())
        throw InputError("net " + n.name + " has no sink pins");
    }
    for (const auto& w : wires)
      if (!die.contains(w.seg.a) || !die.contains(w.seg.b))
        throw InputError("wire outside die area");
    for (const auto& v : vias)
      if (!die.contains(v.at)) throw InputError("via outside die area");
  }
};

struct VirtualPin {
  int id = -1;
  Point loc;
  int owning_fragment = -1;      // filled by fragment construction
};

/// FEOL-only view: geometry restricted to layers 1..split_layer, with cut
/// vias at the split layer replaced by virtual pins. Net ids are absent.
struct SplitLayout {
  TechConfig tech;
  Rect die;
  int split_layer = 3;
  std::vector<PlacedCell> cells;
  std::vector<CellPin> pins;     // net = -1
  std::vector<Wire> wires;       // net = -1
  std::vector<ViaInst> vias;     // cuts 1..split_layer-1
  std::vector<VirtualPin> virtual_pins;
};

}  // namespace smattack

#endif
