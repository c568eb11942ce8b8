#pragma once

#include <string>

#include "jjphoton/io.hpp"
#include "jjphoton/pe_theory.hpp"

namespace jjphoton::pe {

// nu_hz,p_per_hz
std::string pe_to_csv(const PEFunction& pe);
PEFunction pe_from_csv(const std::string& text, double beta);
io::json pe_metadata(const PEFunction& pe);

// f_hz,re_z_ohm
std::string impedance_to_csv(const EnvironmentImpedance& z);
EnvironmentImpedance impedance_from_csv(const std::string& text);

// Header: vj_hz followed by the f values; then one row per vj.
std::string map_to_csv(const EmissionMap& map);
EmissionMap map_from_csv(const std::string& text);

}  // namespace jjphoton::pe
