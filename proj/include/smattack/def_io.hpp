#ifndef SMATTACK_DEF_IO_HPP
#define SMATTACK_DEF_IO_HPP

#include <cctype>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "smattack/layout.hpp"
#include "smattack/library.hpp"

namespace smattack {

namespace def_detail {

struct Token {
  std::string text;
  int line = 0;
};

inline std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> out;
  int line = 1;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back({cur, line});
      cur.clear();
    }
  };
  for (char c : text) {
    if (c == '\n') {
      flush();
      ++line;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (c == '(' || c == ')' || c == ';' || c == '+' || c == '-') {
      // '-' and '+' are statement markers in DEF, never part of numbers here
      flush();
      out.push_back({std::string(1, c), line});
    } else {
      cur += c;
    }
  }
  flush();
  return out;
}

class Cursor {
 public:
  explicit Cursor(std::vector<Token> toks) : toks_(std::move(toks)) {}

  bool done() const { return pos_ >= toks_.size(); }
  const Token& peek() const {
    if (done()) throw InputError("DEF: unexpected end of file");
    return toks_[pos_];
  }
  Token next() {
    Token t = peek();
    ++pos_;
    return t;
  }
  bool accept(const std::string& s) {
    if (!done() && toks_[pos_].text == s) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(const std::string& s, const std::string& ctx) {
    Token t = next();
    if (t.text != s)
      throw InputError("DEF line " + std::to_string(t.line) + ": expected '" + s +
                       "' in " + ctx + ", got '" + t.text + "'");
  }
  std::int64_t integer(const std::string& ctx) {
    Token t = next();
    if (t.text == "-") {
      // '-' is split off by the tokenizer; re-attach for negative coordinates
      Token num = next();
      t.text += num.text;
    }
    try {
      std::size_t used = 0;
      std::int64_t v = std::stoll(t.text, &used);
      if (used != t.text.size()) throw std::invalid_argument(t.text);
      return v;
    } catch (...) {
      throw InputError("DEF line " + std::to_string(t.line) + ": expected integer in " +
                       ctx + ", got '" + t.text + "'");
    }
  }
  [[noreturn]] void fail(const Token& t, const std::string& msg) const {
    throw InputError("DEF line " + std::to_string(t.line) + ": " + msg + " ('" +
                     t.text + "')");
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

inline std::optional<int> metal_layer(const std::string& name) {
  std::string s;
  for (char c : name) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::string digits;
  if (s.rfind("metal", 0) == 0) digits = s.substr(5);
  else if (s.rfind("m", 0) == 0) digits = s.substr(1);
  else return std::nullopt;
  if (digits.empty()) return std::nullopt;
  for (char c : digits)
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
  return std::stoi(digits);
}

/// Via masters "via1", "via12", "V1": the leading digit names the cut layer.
inline std::optional<int> via_cut(const std::string& name) {
  std::string s;
  for (char c : name) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::string digits;
  if (s.rfind("via", 0) == 0) digits = s.substr(3);
  else if (s.rfind("v", 0) == 0) digits = s.substr(1);
  else return std::nullopt;
  if (digits.empty()) return std::nullopt;
  for (char c : digits)
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
  return digits[0] - '0';
}

}  // namespace def_detail

/// Parses the supported DEF subset (DESIGN, UNITS, DIEAREA, placed
/// COMPONENTS, PINS, NETS with regular routed wiring) into a FullLayout.
/// Anything outside the subset raises a located error.
inline FullLayout parse_def_subset(const std::string& text, const CellLibrary& lib,
                                   const TechConfig& tech = TechConfig::make_default()) {
  using namespace def_detail;
  Cursor cur(tokenize(text));
  FullLayout l;
  l.tech = tech;

  std::map<std::string, int> cell_index;           // component name -> cells idx
  std::map<std::string, int> port_pin;             // external pin name -> pins idx
  std::map<std::pair<std::string, std::string>, int> cell_pin;  // (comp, pin) -> pins idx

  while (!cur.done()) {
    Token t = cur.next();
    const std::string& kw = t.text;
    if (kw == "VERSION" || kw == "DIVIDERCHAR" || kw == "BUSBITCHARS") {
      while (!cur.accept(";")) cur.next();
    } else if (kw == "DESIGN") {
      cur.next();  // design name, unused
      cur.expect(";", "DESIGN");
    } else if (kw == "UNITS") {
      cur.expect("DISTANCE", "UNITS");
      cur.expect("MICRONS", "UNITS");
      l.tech.dbu_per_micron = cur.integer("UNITS");
      cur.expect(";", "UNITS");
    } else if (kw == "DIEAREA") {
      cur.expect("(", "DIEAREA");
      l.die.x_min = cur.integer("DIEAREA");
      l.die.y_min = cur.integer("DIEAREA");
      cur.expect(")", "DIEAREA");
      cur.expect("(", "DIEAREA");
      l.die.x_max = cur.integer("DIEAREA");
      l.die.y_max = cur.integer("DIEAREA");
      cur.expect(")", "DIEAREA");
      cur.expect(";", "DIEAREA");
    } else if (kw == "COMPONENTS") {
      cur.integer("COMPONENTS");
      cur.expect(";", "COMPONENTS");
      while (!cur.accept("END")) {
        cur.expect("-", "COMPONENTS");
        PlacedCell c;
        c.name = cur.next().text;
        c.master = cur.next().text;
        cur.expect("+", "COMPONENTS");
        Token place = cur.next();
        if (place.text != "PLACED" && place.text != "FIXED")
          cur.fail(place, "unsupported component status, expected PLACED");
        cur.expect("(", "COMPONENTS");
        c.origin.x = cur.integer("COMPONENTS");
        c.origin.y = cur.integer("COMPONENTS");
        cur.expect(")", "COMPONENTS");
        c.orient = cur.next().text;
        if (c.orient != "N")
          cur.fail(place, "unsupported component orientation " + c.orient);
        cur.expect(";", "COMPONENTS");
        const auto& master = lib.master(c.master);  // throws on unknown master
        cell_index[c.name] = static_cast<int>(l.cells.size());
        l.cells.push_back(c);
        for (const auto& [pn, lp] : master.pins) {
          CellPin p;
          p.cell = cell_index[c.name];
          p.pin = pn;
          p.loc = Point{c.origin.x + lp.offset.x, c.origin.y + lp.offset.y};
          p.direction = lp.direction;
          cell_pin[{c.name, pn}] = static_cast<int>(l.pins.size());
          l.pins.push_back(p);
        }
      }
      cur.expect("COMPONENTS", "END COMPONENTS");
    } else if (kw == "PINS") {
      cur.integer("PINS");
      cur.expect(";", "PINS");
      while (!cur.accept("END")) {
        cur.expect("-", "PINS");
        std::string name = cur.next().text;
        CellPin p;
        p.pin = "PAD";
        bool placed = false;
        while (cur.accept("+")) {
          Token attr = cur.next();
          if (attr.text == "NET") {
            cur.next();  // resolved later via NETS ( PIN ... )
          } else if (attr.text == "DIRECTION") {
            Token d = cur.next();
            // a chip input drives the net; a chip output sinks it
            if (d.text == "INPUT") p.direction = PinDirection::output;
            else if (d.text == "OUTPUT") p.direction = PinDirection::input;
            else cur.fail(d, "unsupported pin direction");
          } else if (attr.text == "PLACED" || attr.text == "FIXED") {
            cur.expect("(", "PINS");
            p.loc.x = cur.integer("PINS");
            p.loc.y = cur.integer("PINS");
            cur.expect(")", "PINS");
            if (!cur.done() && cur.peek().text != ";" && cur.peek().text != "+")
              cur.next();  // orientation
            placed = true;
          } else if (attr.text == "USE" || attr.text == "LAYER") {
            while (!cur.done() && cur.peek().text != "+" && cur.peek().text != ";")
              cur.next();
          } else {
            cur.fail(attr, "unsupported PINS attribute");
          }
        }
        cur.expect(";", "PINS");
        if (!placed)
          throw InputError("DEF: pin " + name + " has no placement");
        PlacedCell c{name, "PORT", p.loc, "N"};
        p.cell = static_cast<int>(l.cells.size());
        l.cells.push_back(c);
        port_pin[name] = static_cast<int>(l.pins.size());
        l.pins.push_back(p);
      }
      cur.expect("PINS", "END PINS");
    } else if (kw == "NETS") {
      cur.integer("NETS");
      cur.expect(";", "NETS");
      while (!cur.accept("END")) {
        cur.expect("-", "NETS");
        Net net;
        net.name = cur.next().text;
        const int net_id = static_cast<int>(l.nets.size());
        std::vector<int> members;
        while (cur.accept("(")) {
          Token a = cur.next();
          if (a.text == "PIN") {
            Token pn = cur.next();
            auto it = port_pin.find(pn.text);
            if (it == port_pin.end()) cur.fail(pn, "unknown external pin");
            members.push_back(it->second);
          } else {
            Token pn = cur.next();
            auto it = cell_pin.find({a.text, pn.text});
            if (it == cell_pin.end())
              cur.fail(pn, "unknown component pin " + a.text + "/" + pn.text);
            members.push_back(it->second);
          }
          cur.expect(")", "NETS");
        }
        while (cur.accept("+")) {
          Token attr = cur.next();
          if (attr.text != "ROUTED")
            cur.fail(attr, "unsupported NETS attribute");
          bool first = true;
          while (true) {
            Token layer_tok = first ? attr : cur.next();
            std::string layer_name = first ? cur.next().text : layer_tok.text;
            auto layer = metal_layer(layer_name);
            if (!layer) cur.fail(layer_tok, "unknown routing layer " + layer_name);
            first = false;
            cur.expect("(", "NETS wiring");
            Point prev;
            prev.x = cur.integer("NETS wiring");
            prev.y = cur.integer("NETS wiring");
            cur.expect(")", "NETS wiring");
            // optional continuation points and via
            while (!cur.done()) {
              if (cur.peek().text == "(") {
                cur.next();
                Point p = prev;
                Token xt = cur.peek();
                if (cur.accept("*")) {
                  // keep x
                } else {
                  p.x = cur.integer("NETS wiring");
                }
                if (cur.accept("*")) {
                  // keep y
                } else {
                  p.y = cur.integer("NETS wiring");
                }
                cur.expect(")", "NETS wiring");
                if (p.x != prev.x || p.y != prev.y) {
                  if (p.x != prev.x && p.y != prev.y)
                    cur.fail(xt, "non-axis-aligned routed point");
                  l.wires.push_back({*layer, Segment(prev, p), net_id});
                }
                prev = p;
              } else if (auto cut = via_cut(cur.peek().text)) {
                cur.next();
                l.vias.push_back({*cut, prev, net_id});
              } else {
                break;
              }
            }
            if (cur.accept("NEW")) continue;
            break;
          }
        }
        cur.expect(";", "NETS");
        for (int pi : members) {
          l.pins[pi].net = net_id;
          if (l.pins[pi].direction == PinDirection::output) {
            if (net.driver_pin >= 0)
              throw InputError("DEF: net " + net.name + " has multiple drivers");
            net.driver_pin = pi;
          } else {
            net.sink_pins.push_back(pi);
          }
        }
        if (net.driver_pin < 0)
          throw InputError("DEF: net " + net.name + " has no driver");
        l.nets.push_back(net);
      }
      cur.expect("NETS", "END NETS");
    } else if (kw == "END") {
      Token w = cur.next();
      if (w.text != "DESIGN") cur.fail(w, "unsupported END clause");
    } else {
      cur.fail(t, "unsupported DEF construct");
    }
  }
  l.validate();
  return l;
}

/// Canonical DEF emission: one routed element per segment/via, nets in
/// stored order. parse(emit(parse(f))) == parse(emit(...)) bit-for-bit.
inline std::string emit_def(const FullLayout& l, const std::string& design = "design") {
  std::ostringstream os;
  os << "VERSION 5.8 ;\n";
  os << "DESIGN " << design << " ;\n";
  os << "UNITS DISTANCE MICRONS " << l.tech.dbu_per_micron << " ;\n";
  os << "DIEAREA ( " << l.die.x_min << " " << l.die.y_min << " ) ( " << l.die.x_max
     << " " << l.die.y_max << " ) ;\n";

  std::vector<const PlacedCell*> comps;
  for (const auto& c : l.cells)
    if (c.master != "PORT") comps.push_back(&c);
  os << "COMPONENTS " << comps.size() << " ;\n";
  for (const auto* c : comps)
    os << "- " << c->name << " " << c->master << " + PLACED ( " << c->origin.x << " "
       << c->origin.y << " ) " << c->orient << " ;\n";
  os << "END COMPONENTS\n";

  std::vector<std::pair<const PlacedCell*, const CellPin*>> ports;
  for (const auto& p : l.pins)
    if (l.cells[p.cell].master == "PORT") ports.push_back({&l.cells[p.cell], &p});
  os << "PINS " << ports.size() << " ;\n";
  for (const auto& [c, p] : ports) {
    const char* dir = p->direction == PinDirection::output ? "INPUT" : "OUTPUT";
    os << "- " << c->name << " + DIRECTION " << dir << " + PLACED ( " << p->loc.x
       << " " << p->loc.y << " ) ;\n";
  }
  os << "END PINS\n";

  os << "NETS " << l.nets.size() << " ;\n";
  for (std::size_t n = 0; n < l.nets.size(); ++n) {
    const Net& net = l.nets[n];
    os << "- " << net.name;
    auto emit_conn = [&](int pi) {
      const CellPin& p = l.pins[pi];
      const PlacedCell& c = l.cells[p.cell];
      if (c.master == "PORT") os << " ( PIN " << c.name << " )";
      else os << " ( " << c.name << " " << p.pin << " )";
    };
    emit_conn(net.driver_pin);
    for (int pi : net.sink_pins) emit_conn(pi);
    bool first = true;
    auto elem = [&](const std::string& body) {
      os << (first ? "\n  + ROUTED " : "\n    NEW ") << body;
      first = false;
    };
    for (const auto& w : l.wires) {
      if (w.net != static_cast<int>(n)) continue;
      std::ostringstream b;
      b << "metal" << w.layer << " ( " << w.seg.a.x << " " << w.seg.a.y << " ) ( "
        << w.seg.b.x << " " << w.seg.b.y << " )";
      elem(b.str());
    }
    for (const auto& v : l.vias) {
      if (v.net != static_cast<int>(n)) continue;
      std::ostringstream b;
      b << "metal" << v.cut << " ( " << v.at.x << " " << v.at.y << " ) via" << v.cut;
      elem(b.str());
    }
    os << " ;\n";
  }
  os << "END NETS\n";
  os << "END DESIGN\n";
  return os.str();
}

}  // namespace smattack

#endif
