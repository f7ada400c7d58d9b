#ifndef SMATTACK_TECH_HPP
#define SMATTACK_TECH_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "smattack/geometry.hpp"

namespace smattack {

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InternalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Per-layer technology data. Routing layers are indexed from 1; cut layer
/// `c` joins metal layers `c` and `c+1`.
struct TechConfig {
  int num_feol_layers = 3;               // m: split layer index
  std::int64_t dbu_per_micron = 1000;
  std::vector<Axis> preferred_dir;       // size = number of routing layers
  std::vector<double> unit_wire_cap;     // F/um, per routing layer
  std::vector<double> via_cap;           // F, per cut layer

  int num_layers() const { return static_cast<int>(preferred_dir.size()); }
  int num_cut_layers() const { return static_cast<int>(via_cap.size()); }

  Axis dir(int layer) const { return preferred_dir.at(layer - 1); }
  double wire_cap(int layer) const { return unit_wire_cap.at(layer - 1); }
  double cut_cap(int cut) const { return via_cap.at(cut - 1); }

  double to_microns(std::int64_t dbu) const {
    return static_cast<double>(dbu) / static_cast<double>(dbu_per_micron);
  }

  void validate() const {
    if (num_feol_layers < 1) throw InputError("tech: num_feol_layers must be >= 1");
    if (dbu_per_micron <= 0) throw InputError("tech: dbu_per_micron must be positive");
    if (preferred_dir.empty()) throw InputError("tech: no routing layers");
    if (unit_wire_cap.size() != preferred_dir.size())
      throw InputError("tech: unit_wire_cap size mismatch");
    if (via_cap.size() + 1 != preferred_dir.size())
      throw InputError("tech: via_cap must have one entry per cut layer");
    for (std::size_t i = 1; i < preferred_dir.size(); ++i)
      if (preferred_dir[i] == preferred_dir[i - 1])
        throw InputError("tech: preferred directions must alternate at layer " +
                         std::to_string(i + 1));
    for (double c : unit_wire_cap)
      if (c < 0) throw InputError("tech: negative unit wire capacitance");
    for (double c : via_cap)
      if (c < 0) throw InputError("tech: negative via capacitance");
  }

  /// Alternating H/V stack starting with horizontal M1.
  static TechConfig make_default(int layers = 5) {
    TechConfig t;
    for (int l = 1; l <= layers; ++l) {
      t.preferred_dir.push_back(l % 2 == 1 ? Axis::horizontal : Axis::vertical);
      t.unit_wire_cap.push_back(2e-16);  // 0.2 fF/um
      if (l < layers) t.via_cap.push_back(1e-16);
    }
    return t;
  }
};

}  // namespace smattack

#endif
