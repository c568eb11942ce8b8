#pragma once

#include <vector>

namespace jjphoton::thermal {

struct Material {
  double mass_density;     // kg/m^3
  double molar_mass;       // kg/mol
  double fermi_temperature;
  double sound_speed;      // m/s
  double debye_temperature;
  double electrons_per_atom = 1.0;
};

Material chromium();

struct Segment {
  double length;
  double width;
  double thickness;
  int count = 1;
  double volume() const { return length * width * thickness * count; }
};

struct ResistorGeometry {
  std::vector<Segment> wires;
  double pad_volume = 0.0;
  Material material = chromium();
  double sigma = 0.2e9;        // electron-phonon constant, W/(m^3 K^5)
  double stack_thickness = 0;  // film stack above the well-thermalized substrate

  double wire_volume() const;
  double total_volume() const { return wire_volume() + pad_volume; }
  void validate() const;
};

// Resistor used on the measured device: 12 lines 20 um x 0.3 um x 15 nm,
// cooling pads bringing the total to 2000 um^3, 620 nm film stack.
ResistorGeometry device_resistor();

struct JouleHeating {
  double current;
  double power;
};

// Average current 2e/RC and the dissipated power I^2 R.
JouleHeating joule_power(double resistance, double rc_time);

double electron_density(const Material& m);

struct HeatCapacity {
  double c_e;  // J/K
  double rise_time(double delta_t, double power) const { return c_e * delta_t / power; }
};

HeatCapacity heat_capacity(const Material& m, double volume, double temperature);
HeatCapacity heat_capacity(const ResistorGeometry& g, double temperature);

double steady_temperature(double power, double sigma, double volume, double t_phonon);

// Hot-electron profile along a wire in normalized coordinate x.
double wire_profile(double resistance, double current, double t_phonon, double x);

double min_phonon_temperature(double thickness, double sound_speed);

}  // namespace jjphoton::thermal
