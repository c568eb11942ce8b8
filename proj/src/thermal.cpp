#include "jjphoton/thermal.hpp"

#include <cmath>

#include "jjphoton/constants.hpp"
#include "jjphoton/error.hpp"

namespace jjphoton::thermal {

using namespace phys;

Material chromium() {
  return Material{.mass_density = 7.19e3,
                  .molar_mass = 52e-3,
                  .fermi_temperature = 5e4,
                  .sound_speed = 5.9e3,
                  .debye_temperature = 460.0};
}

double ResistorGeometry::wire_volume() const {
  double v = 0.0;
  for (const auto& s : wires) v += s.volume();
  return v;
}

void ResistorGeometry::validate() const {
  for (const auto& s : wires) {
    if (!(s.length > 0 && s.width > 0 && s.thickness > 0 && s.count > 0))
      throw InvalidModel("wire segment dimensions must be positive");
  }
  if (pad_volume < 0) throw InvalidModel("pad volume must be non-negative");
  if (!(total_volume() > 0)) throw InvalidModel("resistor volume must be positive");
  if (!(sigma > 0)) throw InvalidModel("electron-phonon constant must be positive");
}

ResistorGeometry device_resistor() {
  ResistorGeometry g;
  g.wires.push_back({.length = 20e-6, .width = 0.3e-6, .thickness = 15e-9, .count = 12});
  g.pad_volume = 2000e-18 - g.wire_volume();
  g.stack_thickness = 620e-9;
  return g;
}

JouleHeating joule_power(double resistance, double rc_time) {
  if (!(resistance >= 0) || !(rc_time > 0))
    throw InvalidModel("joule_power needs R >= 0 and RC > 0");
  const double i = 2.0 * e / rc_time;
  return {i, i * i * resistance};
}

double electron_density(const Material& m) {
  return m.electrons_per_atom * m.mass_density * N_A / m.molar_mass;
}

HeatCapacity heat_capacity(const Material& m, double volume, double temperature) {
  if (!(temperature > 0) || !(volume > 0))
    throw InvalidModel("heat_capacity needs T > 0 and V > 0");
  const double n = electron_density(m);
  return {pi * pi / 2.0 * k_B * n * volume * temperature / m.fermi_temperature};
}

HeatCapacity heat_capacity(const ResistorGeometry& g, double temperature) {
  return heat_capacity(g.material, g.total_volume(), temperature);
}

double steady_temperature(double power, double sigma, double volume, double t_phonon) {
  if (!(power >= 0) || !(sigma > 0) || !(volume > 0) || !(t_phonon > 0))
    throw InvalidModel("steady_temperature needs P >= 0 and positive sigma, V, T_ph");
  return std::pow(std::pow(t_phonon, 5) + power / (sigma * volume), 0.2);
}

double wire_profile(double resistance, double current, double t_phonon, double x) {
  if (x < 0.0 || x > 1.0) throw InvalidModel("wire_profile needs x in [0, 1]");
  const double v = e * resistance * current / k_B;
  return std::sqrt(t_phonon * t_phonon + 3.0 / (pi * pi) * x * (1.0 - x) * v * v);
}

double min_phonon_temperature(double thickness, double sound_speed) {
  if (!(thickness > 0) || sound_speed < 0)
    throw InvalidModel("min_phonon_temperature needs d > 0 and v_c >= 0");
  return h * sound_speed / (4.0 * thickness * k_B);
}

}  // namespace jjphoton::thermal
