#pragma once

#include <Eigen/Dense>
#include <complex>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace jjphoton::network {

using cplx = std::complex<double>;

struct Resistor {
  double r;
};
struct Capacitor {
  double c;
};
struct Inductor {
  double l;
};
// Lossless line referenced to ground; electrical length given as delay.
struct TransmissionLine {
  double z0;
  double delay;
};
// Symmetric coupled pair over ground. Nodes: near1, far1, near2, far2.
struct CoupledLine {
  double cap_coupling;  // C'_C, F/m
  double cap_total;     // C'_T, F/m
  double length;        // m
  double velocity;      // m/s

  double z_even() const;
  double z_odd() const;
  double delay() const { return length / velocity; }
};
struct SquidInductor {
  double ic;
  double flux;
};

using ElementKind =
    std::variant<Resistor, Capacitor, Inductor, TransmissionLine, CoupledLine, SquidInductor>;

struct Element {
  ElementKind kind;
  std::vector<std::string> nodes;
  std::string name;
};

struct Port {
  std::string node;
  double z_ref = 50.0;
};

class CircuitModel {
 public:
  CircuitModel() = default;
  CircuitModel(std::vector<std::string> nodes, std::string ground);

  void add_node(const std::string& name);
  void add(ElementKind kind, std::vector<std::string> nodes, std::string name = {});
  void add_port(const std::string& node, double z_ref);

  // Throws InvalidModel when an invariant is violated.
  void validate() const;

  // Index among non-ground nodes; -1 for ground; throws for unknown nodes.
  int index(const std::string& node) const;
  std::size_t size() const { return nodes_.size(); }

  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::string& ground() const { return ground_; }
  const std::vector<Element>& elements() const { return elements_; }
  std::vector<Element>& elements() { return elements_; }
  const std::vector<Port>& ports() const { return ports_; }

 private:
  std::vector<std::string> nodes_;  // excludes ground
  std::string ground_ = "g";
  std::vector<Element> elements_;
  std::vector<Port> ports_;
};

struct AdmittanceMatrix {
  double frequency;
  Eigen::MatrixXcd y;
};

// Nodal admittance of all elements (ports are not stamped).
AdmittanceMatrix assemble_admittance(const CircuitModel& model, double f);

struct SParameterSet {
  std::vector<double> frequencies;
  std::vector<Eigen::MatrixXcd> s;
  std::vector<std::string> warnings;
};

SParameterSet s_parameters(const CircuitModel& model, std::span<const double> frequencies,
                           int threads = 1);

struct ImpedanceTable {
  std::vector<double> frequencies;
  std::vector<cplx> z;  // NaN at line poles
  std::vector<std::string> warnings;
};

// Impedance between node_plus and node_minus (ground by default) with every
// port terminated in its reference impedance.
ImpedanceTable input_impedance(const CircuitModel& model, const std::string& node_plus,
                               std::span<const double> frequencies,
                               const std::string& node_minus = {}, int threads = 1);

inline constexpr double infinite_inductance = std::numeric_limits<double>::infinity();

// Phi0 / (2 pi Ic |cos(pi Phi / Phi0)|); infinite_inductance at the frustration point.
double squid_inductance(double ic, double flux);

// Series-resonance zero of the lumped stub model, in Hz.
double anti_resonance_frequency(double l_eff, double c_eff, double l_squid);

struct ResonatorMode {
  int n;
  double frequency;
  double impedance;
  double quality;
};

std::vector<ResonatorMode> resonator_summary(double z_r, double delay, double z_load, int n_max);

// Junction environment: R || (C + Lp) in series with a two-section stepped
// quarter-wave line terminated by a port of impedance z_load.
struct EnvironmentParams {
  double r = 32.1e3;
  double c = 56.7e-15;
  double l_p = 53e-12;
  double z0 = 110.0;
  double z1 = 22.0;
  double f0 = 6e9;
  double z_load = 50.0;
};

CircuitModel junction_environment(const EnvironmentParams& p);
// Terminal names of the junction in junction_environment.
inline constexpr const char* junction_plus = "res";
inline constexpr const char* junction_minus = "rc";

// Bias tee and beamsplitter network with the quarter-wave resonator.
// Ports in order: dc, rf1, rf2. The SQUID end of the resonator is node "sq".
struct BeamsplitterParams {
  double f0 = 6e9;
  double z_r = 146.0;          // resonator line
  double z_dc = 50.0;          // bias-tee lines
  double z_stub = 50.0;
  double cap_coupling = 160e-12;
  double cap_total = 230e-12;
  double velocity = 1.2e8;
  double z_port = 50.0;
  std::optional<SquidInductor> squid;  // SQUID from "sq" to ground
};

CircuitModel beamsplitter_network(const BeamsplitterParams& p);

}  // namespace jjphoton::network
