#include "jjphoton/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "jjphoton/constants.hpp"
#include "jjphoton/error.hpp"
#include "parallel.hpp"

namespace jjphoton::network {

using namespace std::complex_literals;

double CoupledLine::z_even() const { return 1.0 / (velocity * (cap_total - cap_coupling)); }
double CoupledLine::z_odd() const { return 1.0 / (velocity * (cap_total + cap_coupling)); }

CircuitModel::CircuitModel(std::vector<std::string> nodes, std::string ground)
    : ground_(std::move(ground)) {
  for (auto& n : nodes) {
    if (n != ground_) add_node(n);
  }
}

void CircuitModel::add_node(const std::string& name) {
  if (name == ground_) return;
  if (std::find(nodes_.begin(), nodes_.end(), name) != nodes_.end())
    throw InvalidModel("duplicate node '" + name + "'");
  nodes_.push_back(name);
}

void CircuitModel::add(ElementKind kind, std::vector<std::string> nodes, std::string name) {
  elements_.push_back({std::move(kind), std::move(nodes), std::move(name)});
}

void CircuitModel::add_port(const std::string& node, double z_ref) {
  ports_.push_back({node, z_ref});
}

int CircuitModel::index(const std::string& node) const {
  if (node == ground_) return -1;
  auto it = std::find(nodes_.begin(), nodes_.end(), node);
  if (it == nodes_.end()) throw InvalidModel("unknown node '" + node + "'");
  return static_cast<int>(it - nodes_.begin());
}

namespace {

std::size_t arity(const ElementKind& k) { return std::holds_alternative<CoupledLine>(k) ? 4 : 2; }

std::string label(const Element& el, std::size_t i) {
  return el.name.empty() ? "element " + std::to_string(i) : "element '" + el.name + "'";
}

}  // namespace

void CircuitModel::validate() const {
  if (ground_.empty()) throw InvalidModel("ground node missing");
  for (std::size_t i = 0; i < elements_.size(); ++i) {
    const auto& el = elements_[i];
    if (el.nodes.size() != arity(el.kind))
      throw InvalidModel(label(el, i) + " has wrong number of nodes");
    for (const auto& n : el.nodes) index(n);
    const bool ok = std::visit(
        [](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Resistor>) return v.r > 0;
          if constexpr (std::is_same_v<T, Capacitor>) return v.c > 0;
          if constexpr (std::is_same_v<T, Inductor>) return v.l > 0;
          if constexpr (std::is_same_v<T, TransmissionLine>) return v.z0 > 0 && v.delay > 0;
          if constexpr (std::is_same_v<T, CoupledLine>)
            return v.cap_coupling > 0 && v.cap_total > v.cap_coupling && v.length > 0 &&
                   v.velocity > 0;
          if constexpr (std::is_same_v<T, SquidInductor>) return v.ic > 0 && std::isfinite(v.flux);
          return false;
        },
        el.kind);
    if (!ok) throw InvalidModel(label(el, i) + " has a non-positive or singular value");
  }
  std::set<std::string> seen;
  for (const auto& p : ports_) {
    if (index(p.node) < 0) throw InvalidModel("port on ground node");
    if (!(p.z_ref > 0)) throw InvalidModel("port reference impedance must be positive");
    if (!seen.insert(p.node).second) throw InvalidModel("two ports on node '" + p.node + "'");
  }
}

namespace {

// Adds a two-node admittance y between node indices a and b (-1 = ground).
void stamp(Eigen::MatrixXcd& y, int a, int b, cplx v) {
  if (a >= 0) y(a, a) += v;
  if (b >= 0) y(b, b) += v;
  if (a >= 0 && b >= 0) {
    y(a, b) -= v;
    y(b, a) -= v;
  }
}

// Ground-referenced two-port block [[y11, y12], [y12, y11]].
void stamp_two_port(Eigen::MatrixXcd& y, int a, int b, cplx y11, cplx y12) {
  if (a >= 0) y(a, a) += y11;
  if (b >= 0) y(b, b) += y11;
  if (a >= 0 && b >= 0) {
    y(a, b) += y12;
    y(b, a) += y12;
  }
}

struct LineY {
  cplx self;
  cplx mutual;
};

LineY line_admittance(double z0, double theta) {
  const double s = std::sin(theta);
  if (std::abs(s) < 1e-12) throw NumericalError("transmission line at a pole (sin theta = 0)");
  return {-1i / (z0 * std::tan(theta)), 1i / (z0 * s)};
}

}  // namespace

AdmittanceMatrix assemble_admittance(const CircuitModel& model, double f) {
  if (!(f > 0)) throw InvalidModel("assemble_admittance needs f > 0");
  model.validate();
  const double w = 2.0 * phys::pi * f;
  const auto n = static_cast<Eigen::Index>(model.size());
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);

  for (const auto& el : model.elements()) {
    std::vector<int> idx;
    for (const auto& nd : el.nodes) idx.push_back(model.index(nd));
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Resistor>) {
            stamp(y, idx[0], idx[1], 1.0 / v.r);
          } else if constexpr (std::is_same_v<T, Capacitor>) {
            stamp(y, idx[0], idx[1], 1i * w * v.c);
          } else if constexpr (std::is_same_v<T, Inductor>) {
            stamp(y, idx[0], idx[1], 1.0 / (1i * w * v.l));
          } else if constexpr (std::is_same_v<T, SquidInductor>) {
            const double l = squid_inductance(v.ic, v.flux);
            if (std::isfinite(l)) stamp(y, idx[0], idx[1], 1.0 / (1i * w * l));
          } else if constexpr (std::is_same_v<T, TransmissionLine>) {
            const auto ly = line_admittance(v.z0, w * v.delay);
            stamp_two_port(y, idx[0], idx[1], ly.self, ly.mutual);
          } else if constexpr (std::is_same_v<T, CoupledLine>) {
            // Even/odd decomposition of the symmetric pair.
            const double theta = w * v.delay();
            const auto e = line_admittance(v.z_even(), theta);
            const auto o = line_admittance(v.z_odd(), theta);
            const cplx s_self = 0.5 * (e.self + o.self), s_mut = 0.5 * (e.mutual + o.mutual);
            const cplx c_self = 0.5 * (e.self - o.self), c_mut = 0.5 * (e.mutual - o.mutual);
            // Local ordering: near1, far1, near2, far2.
            const cplx blk[4][4] = {{s_self, s_mut, c_self, c_mut},
                                    {s_mut, s_self, c_mut, c_self},
                                    {c_self, c_mut, s_self, s_mut},
                                    {c_mut, c_self, s_mut, s_self}};
            for (int i = 0; i < 4; ++i)
              for (int j = 0; j < 4; ++j)
                if (idx[i] >= 0 && idx[j] >= 0) y(idx[i], idx[j]) += blk[i][j];
          }
        },
        el.kind);
  }
  return {f, std::move(y)};
}

namespace {

constexpr double singular_rcond = 1e-13;

// Port-reduced admittance by Schur complement of the interior block.
Eigen::MatrixXcd reduce_to_ports(const Eigen::MatrixXcd& y, const std::vector<int>& ports) {
  const auto n = y.rows();
  std::vector<int> interior;
  for (int i = 0; i < n; ++i)
    if (std::find(ports.begin(), ports.end(), i) == ports.end()) interior.push_back(i);
  const auto np = static_cast<Eigen::Index>(ports.size());
  const auto ni = static_cast<Eigen::Index>(interior.size());
  Eigen::MatrixXcd ypp(np, np), ypi(np, ni), yip(ni, np), yii(ni, ni);
  for (Eigen::Index a = 0; a < np; ++a) {
    for (Eigen::Index b = 0; b < np; ++b) ypp(a, b) = y(ports[a], ports[b]);
    for (Eigen::Index b = 0; b < ni; ++b) ypi(a, b) = y(ports[a], interior[b]);
  }
  for (Eigen::Index a = 0; a < ni; ++a) {
    for (Eigen::Index b = 0; b < np; ++b) yip(a, b) = y(interior[a], ports[b]);
    for (Eigen::Index b = 0; b < ni; ++b) yii(a, b) = y(interior[a], interior[b]);
  }
  if (ni == 0) return ypp;
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(yii);
  // Full pivoting sorts pivots by magnitude; compare the extremes.
  const auto piv = lu.matrixLU().diagonal().cwiseAbs();
  if (!(piv.minCoeff() > singular_rcond * piv.maxCoeff()))
    throw NumericalError("singular interior admittance block");
  return ypp - ypi * lu.solve(yip);
}

}  // namespace

SParameterSet s_parameters(const CircuitModel& model, std::span<const double> frequencies,
                           int threads) {
  model.validate();
  if (model.ports().empty()) throw InvalidModel("s_parameters needs at least one port");
  std::vector<int> pidx;
  Eigen::VectorXd sqz(static_cast<Eigen::Index>(model.ports().size()));
  for (std::size_t k = 0; k < model.ports().size(); ++k) {
    pidx.push_back(model.index(model.ports()[k].node));
    sqz(static_cast<Eigen::Index>(k)) = std::sqrt(model.ports()[k].z_ref);
  }
  const auto np = static_cast<Eigen::Index>(pidx.size());

  SParameterSet out;
  out.frequencies.assign(frequencies.begin(), frequencies.end());
  out.s.resize(frequencies.size());
  std::vector<std::string> warn(frequencies.size());

  detail::parallel_for(frequencies.size(), threads, [&](std::size_t k) {
    const double f = frequencies[k];
    try {
      const auto yred = reduce_to_ports(assemble_admittance(model, f).y, pidx);
      const Eigen::MatrixXcd yn = sqz.asDiagonal() * yred * sqz.asDiagonal();
      const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(np, np);
      out.s[k] = (id + yn).partialPivLu().solve(id - yn);
    } catch (const NumericalError& err) {
      out.s[k] = Eigen::MatrixXcd::Constant(np, np, cplx(std::nan(""), std::nan("")));
      std::ostringstream msg;
      msg << "f=" << f << " Hz: " << err.what();
      warn[k] = msg.str();
    }
  });
  for (auto& w : warn)
    if (!w.empty()) out.warnings.push_back(std::move(w));
  return out;
}

ImpedanceTable input_impedance(const CircuitModel& model, const std::string& node_plus,
                               std::span<const double> frequencies,
                               const std::string& node_minus, int threads) {
  model.validate();
  const int a = model.index(node_plus);
  const int b = node_minus.empty() ? -1 : model.index(node_minus);
  if (a == b) throw InvalidModel("input_impedance needs two distinct nodes");

  ImpedanceTable out;
  out.frequencies.assign(frequencies.begin(), frequencies.end());
  out.z.resize(frequencies.size());
  std::vector<char> pole(frequencies.size(), 0);
  detail::parallel_for(frequencies.size(), threads, [&](std::size_t k) {
    try {
      auto y = assemble_admittance(model, frequencies[k]).y;
      for (const auto& p : model.ports()) {
        const int i = model.index(p.node);
        y(i, i) += 1.0 / p.z_ref;
      }
      Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(y.rows());
      if (a >= 0) rhs(a) = 1.0;
      if (b >= 0) rhs(b) = -1.0;
      const Eigen::VectorXcd v = y.partialPivLu().solve(rhs);
      out.z[k] = (a >= 0 ? v(a) : 0.0) - (b >= 0 ? v(b) : 0.0);
    } catch (const NumericalError&) {
      out.z[k] = cplx(std::nan(""), std::nan(""));
      pole[k] = 1;
    }
  });
  for (std::size_t k = 0; k < pole.size(); ++k)
    if (pole[k]) out.warnings.push_back("f=" + std::to_string(frequencies[k]) + " Hz: line pole");
  return out;
}

double squid_inductance(double ic, double flux) {
  if (!(ic > 0)) throw InvalidModel("squid_inductance needs Ic > 0");
  const double c = std::abs(std::cos(phys::pi * flux / phys::flux_quantum));
  if (c < 1e-15) return infinite_inductance;
  return phys::flux_quantum / (2.0 * phys::pi * ic * c);
}

double anti_resonance_frequency(double l_eff, double c_eff, double l_squid) {
  if (!(l_eff > 0) || !(c_eff > 0) || !(l_squid > 0))
    throw InvalidModel("anti_resonance_frequency needs positive inputs");
  double w2 = 1.0 / (l_eff * c_eff);
  if (std::isfinite(l_squid)) w2 += 1.0 / (l_squid * c_eff);
  return std::sqrt(w2) / (2.0 * phys::pi);
}

std::vector<ResonatorMode> resonator_summary(double z_r, double delay, double z_load, int n_max) {
  if (!(z_r > 0) || !(delay > 0) || !(z_load > 0) || n_max < 0)
    throw InvalidModel("resonator_summary needs positive inputs");
  std::vector<ResonatorMode> out;
  for (int n = 0; n <= n_max; ++n) {
    const double k = 2.0 * n + 1.0;
    out.push_back({n, k / (4.0 * delay), 4.0 * z_r / (phys::pi * k),
                   phys::pi / 4.0 * (z_r / z_load) / k});
  }
  return out;
}

CircuitModel junction_environment(const EnvironmentParams& p) {
  const double tau = 1.0 / (4.0 * p.f0);
  CircuitModel m({junction_minus, "cp", junction_plus, "mid", "out"}, "g");
  m.add(Resistor{p.r}, {junction_minus, "g"}, "R");
  if (p.l_p > 0) {
    m.add(Capacitor{p.c}, {junction_minus, "cp"}, "C");
    m.add(Inductor{p.l_p}, {"cp", "g"}, "Lp");
  } else {
    m.add(Capacitor{p.c}, {junction_minus, "g"}, "C");
    m.add(Resistor{1.0}, {"cp", "g"}, "cp_tie");  // keeps the unused node regular
  }
  m.add(TransmissionLine{p.z0, tau}, {junction_plus, "mid"}, "Z0");
  m.add(TransmissionLine{p.z1, tau}, {"mid", "out"}, "Z1");
  m.add_port("out", p.z_load);
  return m;
}

CircuitModel beamsplitter_network(const BeamsplitterParams& p) {
  const double tau = 1.0 / (4.0 * p.f0);
  CircuitModel m({"dc", "b", "a", "c", "sq", "ca1", "ca2", "rf1", "rf2"}, "g");
  m.add(TransmissionLine{p.z_dc, tau}, {"dc", "b"}, "dc_line");
  m.add(TransmissionLine{p.z_stub, tau}, {"b", "a"}, "stub");
  m.add(TransmissionLine{p.z_dc, tau}, {"b", "c"}, "tee_line");
  m.add(TransmissionLine{p.z_r, tau}, {"c", "sq"}, "resonator");
  const CoupledLine cl{p.cap_coupling, p.cap_total, p.velocity * tau, p.velocity};
  // Line on the resonator side: near end at C, far end open.
  // Line on the port side: near end at the RF port, far end grounded.
  m.add(cl, {"c", "ca1", "rf1", "g"}, "coupler1");
  m.add(cl, {"c", "ca2", "rf2", "g"}, "coupler2");
  if (p.squid) m.add(*p.squid, {"sq", "g"}, "squid");
  m.add_port("dc", p.z_port);
  m.add_port("rf1", p.z_port);
  m.add_port("rf2", p.z_port);
  return m;
}

}  // namespace jjphoton::network
