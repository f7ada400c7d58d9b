#ifndef SMATTACK_LIBRARY_HPP
#define SMATTACK_LIBRARY_HPP

#include <map>
#include <string>

#include "smattack/geometry.hpp"
#include "smattack/tech.hpp"

namespace smattack {

enum class PinDirection { input, output };

struct LibraryPin {
  PinDirection direction = PinDirection::input;
  double cap_f = 0.0;           // input pin capacitance
  Point offset{0, 0};           // placement-relative location, dbu
};

struct LibraryMaster {
  std::map<std::string, LibraryPin> pins;
  double max_cap_f = 0.0;       // driver max output load
  double drive_res_ohm = 1000.0;
  double intrinsic_delay_s = 10e-12;
};

struct CellLibrary {
  std::map<std::string, LibraryMaster> masters;

  const LibraryMaster& master(const std::string& name) const {
    auto it = masters.find(name);
    if (it == masters.end()) throw InputError("unknown cell master: " + name);
    return it->second;
  }

  const LibraryPin& pin(const std::string& master_name,
                        const std::string& pin_name) const {
    const auto& m = master(master_name);
    auto it = m.pins.find(pin_name);
    if (it == m.pins.end())
      throw InputError("unknown pin " + master_name + "/" + pin_name);
    return it->second;
  }

  void validate() const {
    for (const auto& [name, m] : masters) {
      bool has_output = false;
      for (const auto& [pn, p] : m.pins) {
        if (p.direction == PinDirection::output) has_output = true;
        if (p.direction == PinDirection::input && p.cap_f < 0)
          throw InputError("library: negative pin cap on " + name + "/" + pn);
      }
      if (has_output && m.max_cap_f <= 0)
        throw InputError("library: master " + name +
                         " has an output pin but max_cap_f <= 0");
    }
  }
};

}  // namespace smattack

#endif
