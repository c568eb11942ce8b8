#pragma once

#include <string>

#include "jjphoton/io.hpp"
#include "jjphoton/network.hpp"

namespace jjphoton::network {

// Netlist schema:
// {"nodes": [...], "ground": "g",
//  "elements": [{"type": "tline", "z0": 110.0, "delay_s": 4.17e-11, "nodes": ["a", "b"]}, ...],
//  "ports": [{"node": "p1", "z": 50.0}]}
// Element types: resistor{r}, capacitor{c}, inductor{l}, tline{z0, delay_s},
// coupled_line{cap_coupling, cap_total, length, velocity} (4 nodes), squid{ic, flux}.
CircuitModel netlist_from_json(const io::json& j);
io::json netlist_to_json(const CircuitModel& m);

// Whitespace-separated text: freq_Hz then Re/Im of each entry, row-major.
std::string touchstone(const SParameterSet& s);

// CSV with columns f_hz, re_z_ohm, im_z_ohm.
std::string impedance_csv(const ImpedanceTable& z);

}  // namespace jjphoton::network
