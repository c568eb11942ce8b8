#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "jjphoton/circuit_fit.hpp"
#include "jjphoton/constants.hpp"
#include "jjphoton/correlator.hpp"
#include "jjphoton/dynamics.hpp"
#include "jjphoton/error.hpp"
#include "jjphoton/extraction.hpp"
#include "jjphoton/io.hpp"
#include "jjphoton/network.hpp"
#include "jjphoton/network_io.hpp"
#include "jjphoton/pe_io.hpp"
#include "jjphoton/pe_theory.hpp"
#include "jjphoton/thermal.hpp"

namespace jjphoton::cli {

using io::json;
namespace fs = std::filesystem;

namespace {

// Typed read access to one config object. Unknown keys are rejected on
// construction; a missing key falls back to the given default.
class Section {
 public:
  Section(const json& j, std::string path, const std::set<std::string>& allowed)
      : j_(j.is_null() ? empty() : j), path_(std::move(path)) {
    io::reject_unknown_keys(j_, allowed, path_);
  }

  bool has(const std::string& k) const { return j_.contains(k); }

  double num(const std::string& k, double def) const { return has(k) ? num(k) : def; }
  double num(const std::string& k) const {
    const auto& v = at(k);
    if (!v.is_number()) fail(k, "expected a number");
    return v.get<double>();
  }
  std::uint64_t count(const std::string& k, std::uint64_t def) const {
    if (!has(k)) return def;
    const auto& v = at(k);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      fail(k, "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }
  std::uint64_t seed() const {
    if (!has("seed")) fail("seed", "an explicit seed is required");
    return count("seed", 0);
  }
  bool flag(const std::string& k, bool def) const {
    if (!has(k)) return def;
    if (!at(k).is_boolean()) fail(k, "expected true or false");
    return at(k).get<bool>();
  }
  std::string str(const std::string& k, const std::string& def) const {
    if (!has(k)) return def;
    if (!at(k).is_string()) fail(k, "expected a string");
    return at(k).get<std::string>();
  }
  std::vector<double> list(const std::string& k, std::vector<double> def) const {
    if (!has(k)) return def;
    const auto& v = at(k);
    if (!v.is_array()) fail(k, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) fail(k, "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  std::array<double, 2> pair(const std::string& k, std::array<double, 2> def) const {
    if (!has(k)) return def;
    if (at(k).is_number()) return {num(k), num(k)};
    const auto v = list(k, {});
    if (v.size() != 2) fail(k, "expected a number or a pair");
    return {v[0], v[1]};
  }
  Section sub(const std::string& k, const std::set<std::string>& allowed) const {
    if (has(k) && !at(k).is_object()) fail(k, "expected an object");
    return Section(has(k) ? at(k) : empty(), path_ + "." + k, allowed);
  }

 private:
  static const json& empty() {
    static const json e = json::object();
    return e;
  }
  const json& at(const std::string& k) const { return j_.at(k); }
  [[noreturn]] void fail(const std::string& k, const std::string& what) const {
    throw ConfigError(path_ + "." + k + ": " + what);
  }

  const json& j_;
  std::string path_;
};

pe::FrequencyGrid grid_of(const Section& s, double start, double step, std::uint64_t n) {
  auto g = pe::FrequencyGrid::uniform(s.num("start", start), s.num("step", step), s.count("count", n));
  g.validate();
  return g;
}

const std::set<std::string> grid_keys{"start", "step", "count"};

json grid_json(const pe::FrequencyGrid& g) {
  return {{"start", g.f_min}, {"step", g.df}, {"count", g.n}};
}

void write(const RunOptions& opt, const std::string& name, const std::string& content) {
  io::write_atomic(opt.out / name, content);
}

void write_json(const RunOptions& opt, const std::string& name, const json& j) {
  write(opt, name, j.dump(2) + "\n");
}

// Prints the plan for --dry-run; returns true when the caller should stop.
bool plan_only(const RunOptions& opt, const std::string& command, const json& params,
               const std::vector<std::string>& outputs) {
  if (!opt.dry_run) return false;
  json plan{{"command", command},
            {"schema_version", schema_version},
            {"out", opt.out.string()},
            {"threads", opt.threads},
            {"parameters", params},
            {"outputs", outputs}};
  std::cout << plan.dump(2) << "\n";
  return true;
}

fs::path resolve(const RunOptions& opt, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : opt.base / path;
}

// ---- shared parameter blocks ----

const std::set<std::string> env_keys{"r", "c", "l_p", "z0", "z1", "f0", "z_load"};

network::EnvironmentParams environment_params(const Section& s) {
  network::EnvironmentParams p;
  p.r = s.num("r", p.r);
  p.c = s.num("c", p.c);
  p.l_p = s.num("l_p", p.l_p);
  p.z0 = s.num("z0", p.z0);
  p.z1 = s.num("z1", p.z1);
  p.f0 = s.num("f0", p.f0);
  p.z_load = s.num("z_load", p.z_load);
  return p;
}

json environment_json(const network::EnvironmentParams& p) {
  return {{"r", p.r}, {"c", p.c}, {"l_p", p.l_p}, {"z0", p.z0}, {"z1", p.z1}, {"f0", p.f0}, {"z_load", p.z_load}};
}

const std::set<std::string> splitter_keys{"f0", "z_r", "z_dc", "z_stub", "cap_coupling", "cap_total",
                                          "velocity", "z_port"};

network::BeamsplitterParams splitter_params(const Section& s) {
  network::BeamsplitterParams p;
  p.f0 = s.num("f0", p.f0);
  p.z_r = s.num("z_r", p.z_r);
  p.z_dc = s.num("z_dc", p.z_dc);
  p.z_stub = s.num("z_stub", p.z_stub);
  p.cap_coupling = s.num("cap_coupling", p.cap_coupling);
  p.cap_total = s.num("cap_total", p.cap_total);
  p.velocity = s.num("velocity", p.velocity);
  p.z_port = s.num("z_port", p.z_port);
  return p;
}

json splitter_json(const network::BeamsplitterParams& p) {
  return {{"f0", p.f0},         {"z_r", p.z_r},           {"z_dc", p.z_dc},         {"z_stub", p.z_stub},
          {"cap_coupling", p.cap_coupling}, {"cap_total", p.cap_total}, {"velocity", p.velocity},
          {"z_port", p.z_port}};
}

// P(E) setup shared by the pe and map commands.
struct PeSetup {
  network::EnvironmentParams circuit;
  double temperature = 21e-3;
  double half_span = 40e9, df = 10e6;
  double z_f_max = 40e9, z_df = 1.25e6;
  pe::SolverOptions solver;

  json to_json() const {
    return {{"circuit", environment_json(circuit)},
            {"temperature", temperature},
            {"grid", {{"half_span", half_span}, {"df", df}}},
            {"impedance", {{"f_max", z_f_max}, {"df", z_df}}},
            {"solver", {{"tol", solver.tol}, {"max_iter", solver.max_iter}, {"restart", solver.restart},
                        {"band", solver.band}}}};
  }
};

const std::set<std::string> pe_keys{"circuit", "temperature", "grid", "impedance", "solver"};

PeSetup pe_setup(const Section& s) {
  PeSetup p;
  p.circuit = environment_params(s.sub("circuit", env_keys));
  p.temperature = s.num("temperature", p.temperature);
  const auto g = s.sub("grid", {"half_span", "df"});
  p.half_span = g.num("half_span", p.half_span);
  p.df = g.num("df", p.df);
  const auto z = s.sub("impedance", {"f_max", "df"});
  p.z_f_max = z.num("f_max", p.z_f_max);
  p.z_df = z.num("df", p.z_df);
  const auto so = s.sub("solver", {"tol", "max_iter", "restart", "band"});
  p.solver.tol = so.num("tol", p.solver.tol);
  p.solver.max_iter = static_cast<int>(so.count("max_iter", static_cast<std::uint64_t>(p.solver.max_iter)));
  p.solver.restart = static_cast<int>(so.count("restart", static_cast<std::uint64_t>(p.solver.restart)));
  p.solver.band = static_cast<int>(so.count("band", static_cast<std::uint64_t>(p.solver.band)));
  if (!(p.temperature > 0)) throw ConfigError("temperature must be positive");
  if (!(p.df > 0) || !(p.half_span > p.df)) throw ConfigError("P grid needs 0 < df < half_span");
  if (!(p.z_df > 0) || !(p.z_f_max > p.z_df)) throw ConfigError("impedance grid needs 0 < df < f_max");
  return p;
}

struct PeSolved {
  pe::EnvironmentImpedance z;
  pe::PEFunction p;
};

PeSolved solve(const PeSetup& s, int threads) {
  PeSolved out;
  out.z = pe::environment_from_circuit(network::junction_environment(s.circuit), network::junction_plus,
                                       network::junction_minus, s.z_f_max, s.z_df, threads);
  out.p = pe::solve_minnhagen(out.z, s.temperature, pe::FrequencyGrid::symmetric(s.half_span, s.df), s.solver);
  if (!out.p.info.converged) throw NumericalError("P(E) solver did not converge");
  return out;
}

const std::set<std::string> source_keys{"base_rate", "base_rate_rc", "rc_time", "capacitance",
                                        "charging_energy_hz", "detuning", "kappa", "t_eff", "latch",
                                        "drive"};

dynamics::SourceParams source_params(const Section& s) {
  dynamics::SourceParams p;
  p.rc_time = s.num("rc_time", p.rc_time);
  if (s.has("base_rate") && s.has("base_rate_rc")) throw ConfigError("give base_rate or base_rate_rc, not both");
  p.base_rate = s.has("base_rate") ? s.num("base_rate") : s.num("base_rate_rc", 0.3) / p.rc_time;
  if (s.has("capacitance") && s.has("charging_energy_hz"))
    throw ConfigError("give capacitance or charging_energy_hz, not both");
  const double ec_hz = s.has("charging_energy_hz") ? s.num("charging_energy_hz")
                                                   : phys::charging_frequency(s.num("capacitance", 56.7e-15));
  p.charging_energy = ec_hz * phys::h;
  p.detuning = s.num("detuning", p.detuning);
  p.kappa = s.num("kappa", p.kappa);
  p.t_eff = s.num("t_eff", p.t_eff);
  const auto l = s.sub("latch", {"enabled", "enter_threshold", "exit_on_frustration"});
  p.latch.enabled = l.flag("enabled", p.latch.enabled);
  p.latch.enter_threshold = l.num("enter_threshold", p.latch.enter_threshold);
  p.latch.exit_on_frustration = l.flag("exit_on_frustration", p.latch.exit_on_frustration);
  const auto d = s.sub("drive", {"pulsed", "period", "fwhm", "t_first", "flux_dc", "flux_pulse"});
  p.drive.pulsed = d.flag("pulsed", p.drive.pulsed);
  p.drive.period = d.num("period", p.drive.period);
  p.drive.fwhm = d.num("fwhm", p.drive.fwhm);
  p.drive.t_first = d.num("t_first", p.drive.t_first);
  p.drive.flux_dc = d.num("flux_dc", p.drive.flux_dc);
  p.drive.flux_pulse = d.num("flux_pulse", p.drive.flux_pulse);
  p.validate();
  return p;
}

json source_json(const dynamics::SourceParams& p) {
  return {{"base_rate", p.base_rate},
          {"rc_time", p.rc_time},
          {"charging_energy_hz", p.charging_energy / phys::h},
          {"detuning", p.detuning},
          {"kappa", p.kappa},
          {"t_eff", p.t_eff},
          {"latch",
           {{"enabled", p.latch.enabled},
            {"enter_threshold", p.latch.enter_threshold},
            {"exit_on_frustration", p.latch.exit_on_frustration}}},
          {"drive",
           {{"pulsed", p.drive.pulsed},
            {"period", p.drive.period},
            {"fwhm", p.drive.fwhm},
            {"t_first", p.drive.t_first},
            {"flux_dc", p.drive.flux_dc},
            {"flux_pulse", p.drive.flux_pulse}}}};
}

std::vector<double> sweep(double from, double to, std::uint64_t n) {
  if (n < 1) throw ConfigError("a sweep needs at least one point");
  std::vector<double> v(n);
  if (n == 1) return {from};
  const double step = (to - from) / static_cast<double>(n - 1);
  for (std::uint64_t i = 0; i < n; ++i) {
    v[i] = i + 1 == n ? to : from + step * static_cast<double>(i);
    if (std::abs(v[i]) < 1e-12 * std::abs(to - from)) v[i] = 0;  // symmetric sweeps hit zero exactly
  }
  return v;
}

json strings(const std::vector<std::string>& v) { return json(v); }

}  // namespace

// ---- network ----

void cmd_network(const json& cfg, const RunOptions& opt) {
  const Section s(cfg, "network", {"model", "netlist", "circuit", "frequencies", "impedance", "flux_sweep"});
  const auto model_name = s.str("model", "beamsplitter");
  if (model_name != "beamsplitter" && model_name != "junction" && model_name != "netlist")
    throw ConfigError("network.model: expected beamsplitter, junction or netlist");

  network::CircuitModel model;
  json params{{"model", model_name}};
  std::optional<network::BeamsplitterParams> splitter;
  if (model_name == "netlist") {
    if (!s.has("netlist")) throw ConfigError("network.netlist: required for model netlist");
    if (s.has("circuit")) throw ConfigError("network.circuit: not used with model netlist");
    const auto path = resolve(opt, s.str("netlist", ""));
    model = network::netlist_from_json(io::read_json(path));
    params["netlist"] = path.string();
  } else if (model_name == "junction") {
    const auto p = environment_params(s.sub("circuit", env_keys));
    model = network::junction_environment(p);
    params["circuit"] = environment_json(p);
  } else {
    splitter = splitter_params(s.sub("circuit", splitter_keys));
    model = network::beamsplitter_network(*splitter);
    params["circuit"] = splitter_json(*splitter);
  }
  model.validate();

  const auto fg = grid_of(s.sub("frequencies", grid_keys), 4e9, 10e6, 401);
  params["frequencies"] = grid_json(fg);

  std::optional<std::pair<std::string, std::string>> zport;
  if (s.has("impedance") || model_name == "junction") {
    const auto z = s.sub("impedance", {"node_plus", "node_minus"});
    zport = {z.str("node_plus", model_name == "junction" ? network::junction_plus : ""),
             z.str("node_minus", model_name == "junction" ? network::junction_minus : "")};
    if (zport->first.empty()) throw ConfigError("network.impedance.node_plus: required");
    model.index(zport->first);
    if (!zport->second.empty()) model.index(zport->second);
    params["impedance"] = {{"node_plus", zport->first}, {"node_minus", zport->second}};
  }

  struct FluxSweep {
    double ic;
    std::vector<double> flux;
  };
  std::optional<FluxSweep> fx;
  if (s.has("flux_sweep")) {
    if (!splitter) throw ConfigError("network.flux_sweep: only for the beamsplitter model");
    const auto f = s.sub("flux_sweep", {"ic", "from", "to", "count"});
    fx = FluxSweep{f.num("ic", 0.85e-9), sweep(f.num("from", -0.45), f.num("to", 0.45), f.count("count", 19))};
    if (!(fx->ic > 0)) throw ConfigError("network.flux_sweep.ic must be positive");
    params["flux_sweep"] = {{"ic", fx->ic}, {"flux", fx->flux}};
  }

  std::vector<std::string> outputs{"netlist.json", "network_report.json"};
  if (!model.ports().empty()) outputs.push_back("s_parameters.txt");
  if (zport) outputs.push_back("impedance.csv");
  if (fx) outputs.push_back("antiresonance.csv");
  if (plan_only(opt, "network", params, outputs)) return;

  const auto freqs = fg.points();
  json report{{"parameters", params}};
  std::vector<std::string> warnings;
  write_json(opt, "netlist.json", network::netlist_to_json(model));
  if (!model.ports().empty()) {
    const auto sp = network::s_parameters(model, freqs, opt.threads);
    write(opt, "s_parameters.txt", network::touchstone(sp));
    warnings.insert(warnings.end(), sp.warnings.begin(), sp.warnings.end());
  }
  if (zport) {
    const auto z = network::input_impedance(model, zport->first, freqs, zport->second, opt.threads);
    write(opt, "impedance.csv", network::impedance_csv(z));
    warnings.insert(warnings.end(), z.warnings.begin(), z.warnings.end());
    // Re Z peak and half-maximum width on the grid.
    std::size_t ip = 0;
    for (std::size_t i = 0; i < z.z.size(); ++i)
      if (z.z[i].real() > z.z[ip].real()) ip = i;
    const double half = 0.5 * z.z[ip].real();
    std::size_t lo = ip, hi = ip;
    while (lo > 0 && z.z[lo - 1].real() >= half) --lo;
    while (hi + 1 < z.z.size() && z.z[hi + 1].real() >= half) ++hi;
    report["re_z_peak"] = {{"f_hz", freqs[ip]}, {"ohm", z.z[ip].real()}, {"fwhm_hz", freqs[hi] - freqs[lo]}};
  }
  if (fx) {
    // Frequency of the RF-to-RF transmission dip against flux.
    std::ostringstream csv;
    csv << "flux_quanta,abs_cos,l_squid_h,dip_hz\n";
    for (double phi : fx->flux) {
      auto p = *splitter;
      p.squid = network::SquidInductor{fx->ic, phi * phys::flux_quantum};
      const auto sp = network::s_parameters(network::beamsplitter_network(p), freqs, opt.threads);
      std::size_t best = 0;
      double lowest = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < freqs.size(); ++i) {
        const double v = std::abs(sp.s[i](1, 2));
        if (v < lowest) {
          lowest = v;
          best = i;
        }
      }
      // Parabolic refinement through the minimum and its neighbours.
      double dip = freqs[best];
      if (best > 0 && best + 1 < freqs.size()) {
        const double a = std::abs(sp.s[best - 1](1, 2)), c = std::abs(sp.s[best + 1](1, 2));
        const double den = a - 2 * lowest + c;
        if (den > 0) dip += 0.5 * fg.df * (a - c) / den;
      }
      csv << io::fmt(phi) << ',' << io::fmt(std::abs(std::cos(phys::pi * phi))) << ','
          << io::fmt(network::squid_inductance(fx->ic, phi * phys::flux_quantum)) << ',' << io::fmt(dip) << '\n';
    }
    write(opt, "antiresonance.csv", csv.str());
  }
  report["warnings"] = strings(warnings);
  write_json(opt, "network_report.json", report);
}

// ---- pe ----

void cmd_pe(const json& cfg, const RunOptions& opt) {
  const auto setup = pe_setup(Section(cfg, "pe", pe_keys));
  if (plan_only(opt, "pe", setup.to_json(), {"pe.csv", "impedance.csv", "pe_report.json"})) return;
  const auto r = solve(setup, opt.threads);
  const auto chk = pe::check_pe(r.p);
  write(opt, "pe.csv", pe::pe_to_csv(r.p));
  write(opt, "impedance.csv", pe::impedance_to_csv(r.z));
  write_json(opt, "pe_report.json",
             {{"parameters", setup.to_json()},
              {"solution", pe::pe_metadata(r.p)},
              {"norm_residual", chk.norm_residual},
              {"balance_residual", chk.balance_residual},
              {"charging_energy_hz", phys::charging_frequency(setup.circuit.c)}});
}

// ---- map ----

void cmd_map(const json& cfg, const RunOptions& opt) {
  auto keys = pe_keys;
  keys.insert({"ic", "f_grid", "vj_grid", "band", "flux"});
  const Section s(cfg, "map", keys);
  const auto setup = pe_setup(s);
  const double ic = s.num("ic", 0.85e-9);
  if (!(ic > 0)) throw ConfigError("map.ic must be positive");
  const auto fg = grid_of(s.sub("f_grid", grid_keys), 4e9, 10e6, 401);
  const auto vg = grid_of(s.sub("vj_grid", grid_keys), 5e6, 10e6, 3000);
  const auto band = s.sub("band", {"f_lo", "f_hi"});
  const double f_lo = band.num("f_lo", fg.f_min), f_hi = band.num("f_hi", fg.f_max());
  const auto fl = s.sub("flux", {"from", "to", "count"});
  const auto flux = sweep(fl.num("from", 0.0), fl.num("to", 0.5), fl.count("count", 11));

  auto params = setup.to_json();
  params["ic"] = ic;
  params["f_grid"] = grid_json(fg);
  params["vj_grid"] = grid_json(vg);
  params["band"] = {{"f_lo", f_lo}, {"f_hi", f_hi}};
  params["flux"] = flux;
  if (plan_only(opt, "map", params, {"map.csv", "band_rate.csv", "map_report.json"})) return;

  const auto r = solve(setup, opt.threads);
  const auto map = pe::emission_rate_density(r.p, r.z, {ic}, fg, vg);
  write(opt, "map.csv", pe::map_to_csv(map));

  // The map scales as Ic^2, and Ic(flux) = Ic0 |cos(pi flux)|.
  const auto profile = pe::band_profile(map, f_lo, f_hi);
  std::ostringstream csv;
  csv << "vj_hz,flux_quanta,rate_per_s\n";
  for (std::size_t i = 0; i < vg.n; ++i)
    for (double phi : flux) {
      const double c = std::cos(phys::pi * phi);
      csv << io::fmt(vg.at(i)) << ',' << io::fmt(phi) << ',' << io::fmt(profile[i] * c * c) << '\n';
    }
  write(opt, "band_rate.csv", csv.str());

  const auto it = std::max_element(map.gamma.begin(), map.gamma.end());
  const auto k = static_cast<std::size_t>(it - map.gamma.begin());
  const double f_pk = fg.at(k % fg.n), vj_pk = vg.at(k / fg.n);
  write_json(opt, "map_report.json",
             {{"parameters", params},
              {"argmax", {{"f_hz", f_pk}, {"vj_hz", vj_pk}, {"offset_hz", vj_pk - f_pk}}},
              {"charging_energy_hz", phys::charging_frequency(setup.circuit.c)},
              {"pe_balance_residual", pe::check_pe(r.p).balance_residual}});
}

// ---- extract ----

void cmd_extract(const json& cfg, const RunOptions& opt) {
  const Section s(cfg, "extract", {"map", "weights", "fit"});
  if (!s.has("map")) throw ConfigError("extract.map: path to a map CSV is required");
  const auto path = resolve(opt, s.str("map", ""));
  const auto w = s.sub("weights", {"flat_sigma_p", "dog_sigma_v"});
  extraction::ExtractionOptions eo;
  eo.flat_sigma_p = w.flag("flat_sigma_p", false);
  eo.dog_sigma_v = w.flag("dog_sigma_v", false);
  json params{{"map", path.string()},
              {"weights", {{"flat_sigma_p", eo.flat_sigma_p}, {"dog_sigma_v", eo.dog_sigma_v}}}};

  std::optional<std::pair<double, extraction::CircuitParams>> fit;
  extraction::FitOptions fo;
  fo.threads = opt.threads;
  if (s.has("fit")) {
    const auto f = s.sub("fit", {"r", "init", "max_iter"});
    const auto in = f.sub("init", {"c", "l_p", "z0", "z1", "t", "ic"});
    extraction::CircuitParams p;
    p.c = in.num("c", p.c);
    p.l_p = in.num("l_p", p.l_p);
    p.z0 = in.num("z0", p.z0);
    p.z1 = in.num("z1", p.z1);
    p.t = in.num("t", p.t);
    p.ic = in.num("ic", p.ic);
    fo.max_iter = static_cast<int>(f.count("max_iter", static_cast<std::uint64_t>(fo.max_iter)));
    fit = {f.num("r", 32.1e3), p};
    fo.model.r = fit->first;
    params["fit"] = {{"r", fit->first},
                     {"init", {{"c", p.c}, {"l_p", p.l_p}, {"z0", p.z0}, {"z1", p.z1}, {"t", p.t}, {"ic", p.ic}}},
                     {"max_iter", fo.max_iter}};
  }
  if (plan_only(opt, "extract", params, {"extracted_pe.csv", "extracted_impedance.csv", "extraction_report.json"}))
    return;

  const auto map = pe::map_from_csv(io::read_text(path));
  const auto r = extraction::extract_all(map, eo);
  write(opt, "extracted_pe.csv", pe::pe_to_csv(r.pe));
  write(opt, "extracted_impedance.csv", pe::impedance_to_csv(r.z_extracted));
  json report{{"parameters", params},
              {"t_eff", r.t_eff},
              {"beta", r.beta},
              {"ic", r.ic},
              {"containment", r.containment},
              {"norm_residual", r.check.norm_residual},
              {"balance_residual", r.check.balance_residual},
              {"warnings", strings(r.warnings)}};
  if (fit) {
    const auto f = extraction::fit_circuit(map, fit->first, fit->second, fo);
    report["fit"] = {{"c", f.params.c},
                     {"l_p", f.params.l_p},
                     {"z0", f.params.z0},
                     {"z1", f.params.z1},
                     {"t", f.params.t},
                     {"ic", f.params.ic},
                     {"ec_hz", f.ec_hz},
                     {"residual_norm", f.residual_norm},
                     {"iterations", f.iterations},
                     {"converged", f.converged},
                     {"message", f.message}};
  }
  write_json(opt, "extraction_report.json", report);
}

// ---- simulate ----

void cmd_simulate(const json& cfg, const RunOptions& opt) {
  const Section s(cfg, "simulate", {"seed", "duration", "source", "g2", "waveform"});
  const auto seed = s.seed();
  const double duration = s.num("duration", 1e-4);
  if (!(duration > 0)) throw ConfigError("simulate.duration must be positive");
  const auto sp = source_params(s.sub("source", source_keys));
  const auto g = s.sub("g2", {"bin", "max_tau"});
  const double bin = g.num("bin", 0.25e-9), max_tau = g.num("max_tau", 20e-9);
  if (!(bin > 0) || !(max_tau >= bin) || !(max_tau < duration))
    throw ConfigError("simulate.g2 needs 0 < bin <= max_tau < duration");
  std::optional<std::pair<double, double>> wave;
  if (s.has("waveform")) {
    const auto w = s.sub("waveform", {"dt", "amplitude"});
    wave = {w.num("dt", 0.01e-9), w.num("amplitude", 1.0)};
  }
  // The renewal oracle describes the free-running source only.
  const bool oracle = !sp.drive.pulsed && !sp.latch.enabled;

  json params{{"seed", seed}, {"duration", duration}, {"source", source_json(sp)},
              {"g2", {{"bin", bin}, {"max_tau", max_tau}}}};
  std::vector<std::string> outputs{"events.csv", "g2_events.csv", "simulate_report.json"};
  if (wave) {
    params["waveform"] = {{"dt", wave->first}, {"amplitude", wave->second}};
    outputs.push_back("waveform.csv");
  }
  if (plan_only(opt, "simulate", params, outputs)) return;

  const auto rec = dynamics::simulate_source(sp, duration, seed);
  write(opt, "events.csv", dynamics::events_to_csv(rec));
  const auto h = dynamics::g2_from_events(rec, bin, max_tau);
  std::optional<dynamics::RenewalOracle> ro;
  if (oracle) ro = dynamics::renewal_g2_oracle(dynamics::after_event_hazard(sp), 200e-9, 0.01e-9, sp.rc_time);
  std::ostringstream csv;
  csv << "tau_s,g2,sigma" << (ro ? ",oracle" : "") << '\n';
  for (std::size_t i = 0; i < h.tau.size(); ++i) {
    csv << io::fmt(h.tau[i]) << ',' << io::fmt(h.g2[i]) << ',' << io::fmt(h.sigma[i]);
    if (ro) csv << ',' << io::fmt((*ro)(h.tau[i]));
    csv << '\n';
  }
  write(opt, "g2_events.csv", csv.str());
  if (wave) {
    const auto env = dynamics::events_to_envelope(rec, sp.kappa, wave->first, wave->second, seed ^ 0x5eedULL);
    std::ostringstream w;
    w << "t_s,re,im\n";
    for (std::size_t m = 0; m < env.size(); ++m)
      w << io::fmt(rec.t_start + wave->first * static_cast<double>(m)) << ',' << io::fmt(env[m].real()) << ','
        << io::fmt(env[m].imag()) << '\n';
    write(opt, "waveform.csv", w.str());
  }
  json report{{"parameters", params}, {"events", rec.times.size()}, {"rate_per_s", rec.rate()}};
  if (ro) report["oracle_rate_per_s"] = ro->steady_rate;
  write_json(opt, "simulate_report.json", report);
}

// ---- correlate ----

void cmd_correlate(const json& cfg, const RunOptions& opt) {
  const Section s(cfg, "correlate", {"seed", "chain", "plan", "input", "calibration"});
  const auto seed = s.seed();

  const auto c = s.sub("chain", {"gain", "noise", "vacuum", "cross_noise", "crosstalk", "crosstalk_filter",
                                 "block_size", "split", "quantize", "adc_bits", "adc_full_scale"});
  correlator::ChainModel chain;
  chain.gain = c.pair("gain", chain.gain);
  chain.noise = c.pair("noise", chain.noise);
  chain.vacuum = c.flag("vacuum", chain.vacuum);
  chain.cross_noise = c.num("cross_noise", chain.cross_noise);
  chain.crosstalk = c.num("crosstalk", chain.crosstalk);
  chain.crosstalk_filter = c.list("crosstalk_filter", {});
  chain.block_size = c.count("block_size", chain.block_size);
  chain.split = c.num("split", chain.split);
  chain.quantize = c.flag("quantize", chain.quantize);
  chain.adc_bits = static_cast<int>(c.count("adc_bits", static_cast<std::uint64_t>(chain.adc_bits)));
  chain.adc_full_scale = c.num("adc_full_scale", chain.adc_full_scale);
  chain.validate();

  const auto pl = s.sub("plan", {"n_groups", "pairs_per_group", "max_lag"});
  correlator::ExperimentPlan plan;
  plan.chain = chain;
  plan.n_groups = pl.count("n_groups", plan.n_groups);
  plan.pairs_per_group = pl.count("pairs_per_group", plan.pairs_per_group);
  plan.max_lag = pl.count("max_lag", plan.max_lag);
  plan.seed = seed;
  plan.threads = opt.threads;
  if (plan.n_groups < 2 || plan.pairs_per_group < 1) throw ConfigError("correlate.plan needs n_groups >= 2");

  const auto in = s.sub("input", {"type", "source", "occupation", "rho", "amplitude"});
  const auto type = in.str("type", "photons");
  json input{{"type", type}};
  correlator::SourceFactory factory;
  if (type == "photons") {
    const auto sp = source_params(in.sub("source", source_keys));
    input["source"] = source_json(sp);
    factory = [sp](std::uint64_t sd, std::size_t n, double dt) {
      const double warm = 30 * sp.rc_time;
      const auto rec = dynamics::simulate_source(sp, warm + static_cast<double>(n) * dt, sd, -warm);
      correlator::PhotonInput p;
      p.kappa = sp.kappa;
      for (double t : rec.times)
        if (t > -20.0 / sp.kappa) p.times.push_back(t);
      return correlator::ChainInput{p};
    };
  } else if (type == "thermal") {
    const double occ = in.num("occupation", 1.0), rho = in.num("rho", 0.7);
    if (!(occ > 0) || !(rho >= 0 && rho < 1)) throw ConfigError("correlate.input: need occupation > 0, 0 <= rho < 1");
    input["occupation"] = occ;
    input["rho"] = rho;
    factory = [occ, rho](std::uint64_t sd, std::size_t n, double) {
      // Complex AR(1) field, stationary from the first sample.
      std::mt19937_64 rng(sd);
      std::normal_distribution<double> nd;
      const double s0 = std::sqrt(occ / 2), s1 = std::sqrt(occ * (1 - rho * rho) / 2);
      correlator::cplx a{s0 * nd(rng), s0 * nd(rng)};
      std::vector<correlator::cplx> x(n);
      for (auto& v : x) {
        v = a;
        a = rho * a + correlator::cplx{s1 * nd(rng), s1 * nd(rng)};
      }
      return correlator::ChainInput{correlator::ClassicalInput{std::move(x)}};
    };
  } else if (type == "coherent") {
    const auto a = in.pair("amplitude", {1.0, 0.0});
    input["amplitude"] = {a[0], a[1]};
    factory = [a](std::uint64_t, std::size_t n, double) {
      return correlator::ChainInput{correlator::ClassicalInput{std::vector<correlator::cplx>(n, {a[0], a[1]})}};
    };
  } else if (type == "none") {
    factory = [](std::uint64_t, std::size_t, double) { return correlator::ChainInput{}; };
  } else {
    throw ConfigError("correlate.input.type: expected photons, thermal, coherent or none");
  }
  if (type == "photons" && !chain.vacuum) throw ConfigError("photon input needs chain.vacuum = true");

  std::optional<std::tuple<double, double, std::uint64_t, std::uint64_t>> cal;
  if (s.has("calibration")) {
    const auto k = s.sub("calibration", {"t_hot", "t_cold", "bins", "samples_per_bin"});
    cal = {k.num("t_hot", 0.9), k.num("t_cold", 0.015), k.count("bins", 8), k.count("samples_per_bin", 100000)};
  }

  json params{{"seed", seed},
              {"chain",
               {{"gain", chain.gain},
                {"noise", chain.noise},
                {"vacuum", chain.vacuum},
                {"cross_noise", chain.cross_noise},
                {"crosstalk", chain.crosstalk},
                {"crosstalk_filter", chain.crosstalk_filter},
                {"block_size", chain.block_size},
                {"split", chain.split},
                {"quantize", chain.quantize},
                {"adc_bits", chain.adc_bits},
                {"adc_full_scale", chain.adc_full_scale}}},
              {"plan", {{"n_groups", plan.n_groups}, {"pairs_per_group", plan.pairs_per_group}, {"max_lag", plan.max_lag}}},
              {"input", input}};
  std::vector<std::string> outputs{"correlation.csv", "correlate_report.json"};
  if (cal) {
    params["calibration"] = {{"t_hot", std::get<0>(*cal)},
                             {"t_cold", std::get<1>(*cal)},
                             {"bins", std::get<2>(*cal)},
                             {"samples_per_bin", std::get<3>(*cal)}};
    outputs.push_back("calibration.csv");
  }
  if (plan_only(opt, "correlate", params, outputs)) return;

  json report{{"parameters", params}};
  if (cal) {
    const auto rec = correlator::calibrate(chain, std::get<0>(*cal), std::get<1>(*cal), std::get<2>(*cal),
                                           std::get<3>(*cal), seed ^ 0xca1ULL);
    std::ostringstream csv;
    csv << "f_hz,gain0,noise0,gain1,noise1\n";
    for (std::size_t i = 0; i < rec.frequency.size(); ++i)
      csv << io::fmt(rec.frequency[i]) << ',' << io::fmt(rec.gain[0][i]) << ',' << io::fmt(rec.noise[0][i]) << ','
          << io::fmt(rec.gain[1][i]) << ',' << io::fmt(rec.noise[1][i]) << '\n';
    write(opt, "calibration.csv", csv.str());
    report["calibration_warnings"] = strings(rec.warnings);
  }

  const auto ex = correlator::run_experiment(factory, plan);
  write(opt, "correlation.csv", correlator::correlation_to_csv(ex.result));
  const std::size_t c0 = ex.result.tau.size() / 2;
  report["g2_0"] = ex.result.g2[c0];
  report["sigma_g2_0"] = ex.result.sigma_g2.empty() ? 0.0 : ex.result.sigma_g2[c0];
  report["g1_0"] = ex.result.g1[c0].real();
  report["n_b"] = ex.result.n_b;
  report["warnings"] = strings(ex.result.warnings);
  write_json(opt, "correlate_report.json", report);
}

// ---- thermal ----

void cmd_thermal(const json& cfg, const RunOptions& opt) {
  const Section s(cfg, "thermal", {"geometry", "geometry_file", "resistance", "rc_time", "t_phonon", "delta_t",
                                   "profile_points"});
  if (s.has("geometry") && s.has("geometry_file")) throw ConfigError("give geometry or geometry_file, not both");

  thermal::ResistorGeometry g = thermal::device_resistor();
  json geom_src = s.has("geometry_file") ? io::read_json(resolve(opt, s.str("geometry_file", ""))) : json();
  if (s.has("geometry")) geom_src = cfg.at("geometry");
  if (!geom_src.is_null()) {
    const Section gs(geom_src, "geometry", {"wires", "pad_volume", "stack_thickness", "sigma", "material"});
    if (gs.has("wires")) {
      g.wires.clear();
      if (!geom_src.at("wires").is_array()) throw ConfigError("geometry.wires: expected an array");
      for (const auto& wj : geom_src.at("wires")) {
        const Section ws(wj, "geometry.wires[]", {"length", "width", "thickness", "count"});
        g.wires.push_back({ws.num("length"), ws.num("width"), ws.num("thickness"),
                           static_cast<int>(ws.count("count", 1))});
      }
    }
    g.pad_volume = gs.num("pad_volume", g.pad_volume);
    g.stack_thickness = gs.num("stack_thickness", g.stack_thickness);
    g.sigma = gs.num("sigma", g.sigma);
    const auto m = gs.sub("material", {"mass_density", "molar_mass", "fermi_temperature", "sound_speed",
                                       "debye_temperature", "electrons_per_atom"});
    g.material.mass_density = m.num("mass_density", g.material.mass_density);
    g.material.molar_mass = m.num("molar_mass", g.material.molar_mass);
    g.material.fermi_temperature = m.num("fermi_temperature", g.material.fermi_temperature);
    g.material.sound_speed = m.num("sound_speed", g.material.sound_speed);
    g.material.debye_temperature = m.num("debye_temperature", g.material.debye_temperature);
    g.material.electrons_per_atom = m.num("electrons_per_atom", g.material.electrons_per_atom);
  }
  g.validate();
  const double r = s.num("resistance", 32.1e3), rc = s.num("rc_time", 1.64e-9);
  const double t_ph = s.num("t_phonon", 15e-3), dt = s.num("delta_t", 1e-3);
  const auto points = s.count("profile_points", 11);
  if (points < 2) throw ConfigError("thermal.profile_points must be at least 2");

  json wires = json::array();
  int lines = 0;
  for (const auto& w : g.wires) {
    wires.push_back({{"length", w.length}, {"width", w.width}, {"thickness", w.thickness}, {"count", w.count}});
    lines += w.count;
  }
  const json params{{"geometry",
                     {{"wires", wires},
                      {"pad_volume", g.pad_volume},
                      {"stack_thickness", g.stack_thickness},
                      {"sigma", g.sigma}}},
                    {"resistance", r},
                    {"rc_time", rc},
                    {"t_phonon", t_ph},
                    {"delta_t", dt},
                    {"profile_points", points}};
  if (plan_only(opt, "thermal", params, {"thermal_report.json"})) return;

  const auto j = thermal::joule_power(r, rc);
  const double t_wire = thermal::steady_temperature(j.power, g.sigma, g.wire_volume(), t_ph);
  const double t_full = thermal::steady_temperature(j.power, g.sigma, g.total_volume(), t_ph);
  const auto cap = thermal::heat_capacity(g, t_full);
  // Each line carries the full current and a share of the resistance.
  const double r_line = lines > 0 ? r / lines : r;
  json profile = json::array();
  double top = t_full;
  for (std::uint64_t i = 0; i < points; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(points - 1);
    const double t = thermal::wire_profile(r_line, j.current, t_full, x);
    top = std::max(top, t);
    profile.push_back({{"x", x}, {"t_e", t}});
  }
  json report{{"parameters", params},
              {"current_a", j.current},
              {"power_w", j.power},
              {"t_e_wire_only_k", t_wire},
              {"t_e_full_volume_k", t_full},
              {"heat_capacity_j_per_k", cap.c_e},
              {"energy_ev", cap.c_e * dt / phys::e},
              {"rise_time_s", cap.rise_time(dt, j.power)},
              {"profile", profile},
              {"profile_flatness", (top - t_full) / t_full}};
  if (g.stack_thickness > 0)
    report["min_phonon_temperature_k"] = thermal::min_phonon_temperature(g.stack_thickness, g.material.sound_speed);
  write_json(opt, "thermal_report.json", report);
}

}  // namespace jjphoton::cli
