#include <sstream>

#include "jjphoton/error.hpp"
#include "jjphoton/network_io.hpp"

namespace jjphoton::network {

using io::json;

namespace {

double number(const json& el, const char* key) {
  if (!el.contains(key) || !el.at(key).is_number())
    throw ConfigError(std::string("netlist element needs numeric '") + key + "'");
  return el.at(key).get<double>();
}

}  // namespace

CircuitModel netlist_from_json(const json& j) {
  io::reject_unknown_keys(j, {"nodes", "ground", "elements", "ports"}, "netlist");
  if (!j.contains("nodes") || !j.contains("ground") || !j.contains("elements"))
    throw ConfigError("netlist needs nodes, ground and elements");
  CircuitModel m(j.at("nodes").get<std::vector<std::string>>(), j.at("ground").get<std::string>());
  for (const auto& el : j.at("elements")) {
    const auto type = el.value("type", std::string{});
    auto nodes = el.at("nodes").get<std::vector<std::string>>();
    const auto name = el.value("name", std::string{});
    if (type == "resistor") {
      io::reject_unknown_keys(el, {"type", "nodes", "name", "r"}, "resistor");
      m.add(Resistor{number(el, "r")}, nodes, name);
    } else if (type == "capacitor") {
      io::reject_unknown_keys(el, {"type", "nodes", "name", "c"}, "capacitor");
      m.add(Capacitor{number(el, "c")}, nodes, name);
    } else if (type == "inductor") {
      io::reject_unknown_keys(el, {"type", "nodes", "name", "l"}, "inductor");
      m.add(Inductor{number(el, "l")}, nodes, name);
    } else if (type == "tline") {
      io::reject_unknown_keys(el, {"type", "nodes", "name", "z0", "delay_s"}, "tline");
      m.add(TransmissionLine{number(el, "z0"), number(el, "delay_s")}, nodes, name);
    } else if (type == "coupled_line") {
      io::reject_unknown_keys(
          el, {"type", "nodes", "name", "cap_coupling", "cap_total", "length", "velocity"},
          "coupled_line");
      m.add(CoupledLine{number(el, "cap_coupling"), number(el, "cap_total"), number(el, "length"),
                        number(el, "velocity")},
            nodes, name);
    } else if (type == "squid") {
      io::reject_unknown_keys(el, {"type", "nodes", "name", "ic", "flux"}, "squid");
      m.add(SquidInductor{number(el, "ic"), number(el, "flux")}, nodes, name);
    } else {
      throw ConfigError("unknown netlist element type '" + type + "'");
    }
  }
  if (j.contains("ports")) {
    for (const auto& p : j.at("ports")) {
      io::reject_unknown_keys(p, {"node", "z"}, "port");
      m.add_port(p.at("node").get<std::string>(), number(p, "z"));
    }
  }
  try {
    m.validate();
  } catch (const InvalidModel& e) {
    throw ConfigError(std::string("netlist: ") + e.what());
  }
  return m;
}

json netlist_to_json(const CircuitModel& m) {
  json j;
  j["nodes"] = m.nodes();
  j["ground"] = m.ground();
  json els = json::array();
  for (const auto& el : m.elements()) {
    json e;
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Resistor>) e = {{"type", "resistor"}, {"r", v.r}};
          if constexpr (std::is_same_v<T, Capacitor>) e = {{"type", "capacitor"}, {"c", v.c}};
          if constexpr (std::is_same_v<T, Inductor>) e = {{"type", "inductor"}, {"l", v.l}};
          if constexpr (std::is_same_v<T, TransmissionLine>)
            e = {{"type", "tline"}, {"z0", v.z0}, {"delay_s", v.delay}};
          if constexpr (std::is_same_v<T, CoupledLine>)
            e = {{"type", "coupled_line"}, {"cap_coupling", v.cap_coupling},
                 {"cap_total", v.cap_total}, {"length", v.length}, {"velocity", v.velocity}};
          if constexpr (std::is_same_v<T, SquidInductor>)
            e = {{"type", "squid"}, {"ic", v.ic}, {"flux", v.flux}};
        },
        el.kind);
    e["nodes"] = el.nodes;
    if (!el.name.empty()) e["name"] = el.name;
    els.push_back(std::move(e));
  }
  j["elements"] = std::move(els);
  json ports = json::array();
  for (const auto& p : m.ports()) ports.push_back({{"node", p.node}, {"z", p.z_ref}});
  j["ports"] = std::move(ports);
  return j;
}

std::string touchstone(const SParameterSet& s) {
  std::ostringstream out;
  const auto np = s.s.empty() ? 0 : s.s.front().rows();
  out << "# Hz S RI R 50 ports " << np << "\n";
  for (std::size_t k = 0; k < s.frequencies.size(); ++k) {
    out << io::fmt(s.frequencies[k]);
    const auto& m = s.s[k];
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        out << ' ' << io::fmt(m(i, j).real()) << ' ' << io::fmt(m(i, j).imag());
    out << '\n';
  }
  return out.str();
}

std::string impedance_csv(const ImpedanceTable& z) {
  std::ostringstream out;
  out << "f_hz,re_z_ohm,im_z_ohm\n";
  for (std::size_t k = 0; k < z.frequencies.size(); ++k)
    out << io::fmt(z.frequencies[k]) << ',' << io::fmt(z.z[k].real()) << ','
        << io::fmt(z.z[k].imag()) << '\n';
  return out.str();
}

}  // namespace jjphoton::network
