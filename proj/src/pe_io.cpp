#include "jjphoton/pe_io.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "jjphoton/error.hpp"

namespace jjphoton::pe {

namespace {

std::vector<std::vector<double>> parse_csv(const std::string& text, bool skip_header,
                                           std::vector<double>* header_values = nullptr) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    bool header_cell = true;
    while (pos <= line.size()) {
      const auto end = std::min(line.find(',', pos), line.size());
      const std::string cell = line.substr(pos, end - pos);
      if (first && skip_header) {
        if (!header_cell && header_values) header_values->push_back(std::stod(cell));
      } else {
        double v = 0;
        const auto r = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (r.ec != std::errc()) throw IoError("bad number '" + cell + "' in CSV");
        row.push_back(v);
      }
      header_cell = false;
      pos = end + 1;
    }
    if (!(first && skip_header)) rows.push_back(std::move(row));
    first = false;
  }
  return rows;
}

// Recovers a uniform grid from sampled coordinates.
FrequencyGrid grid_from(const std::vector<double>& x) {
  if (x.size() < 2) throw IoError("need at least two grid points");
  const double df = (x.back() - x.front()) / static_cast<double>(x.size() - 1);
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::abs(x[i] - (x.front() + df * static_cast<double>(i))) > 1e-6 * df)
      throw IoError("grid is not uniform");
  return FrequencyGrid::uniform(x.front(), df, x.size());
}

}  // namespace

std::string pe_to_csv(const PEFunction& pe) {
  std::ostringstream out;
  out << "nu_hz,p_per_hz\n";
  for (std::size_t i = 0; i < pe.grid.n; ++i)
    out << io::fmt(pe.grid.at(i)) << ',' << io::fmt(pe.values[i]) << '\n';
  return out.str();
}

PEFunction pe_from_csv(const std::string& text, double beta) {
  const auto rows = parse_csv(text, true);
  std::vector<double> nu;
  PEFunction pe;
  for (const auto& r : rows) {
    if (r.size() != 2) throw IoError("P CSV rows need two columns");
    nu.push_back(r[0]);
    pe.values.push_back(r[1]);
  }
  pe.grid = grid_from(nu);
  pe.beta = beta;
  return pe;
}

io::json pe_metadata(const PEFunction& pe) {
  return {{"nu_min_hz", pe.grid.f_min},
          {"df_hz", pe.grid.df},
          {"n_points", pe.grid.n},
          {"beta_per_j", pe.beta},
          {"temperature_k", pe.temperature()},
          {"iterations", pe.info.iterations},
          {"residual", pe.info.residual},
          {"converged", pe.info.converged},
          {"mass_clipped", pe.info.mass_clipped}};
}

std::string impedance_to_csv(const EnvironmentImpedance& z) {
  std::ostringstream out;
  out << "f_hz,re_z_ohm\n";
  for (std::size_t i = 0; i < z.grid.n; ++i)
    out << io::fmt(z.grid.at(i)) << ',' << io::fmt(z.re_z[i]) << '\n';
  return out.str();
}

EnvironmentImpedance impedance_from_csv(const std::string& text) {
  const auto rows = parse_csv(text, true);
  std::vector<double> f;
  EnvironmentImpedance z;
  for (const auto& r : rows) {
    if (r.size() < 2) throw IoError("impedance CSV rows need f_hz and re_z_ohm");
    f.push_back(r[0]);
    z.re_z.push_back(r[1]);
  }
  z.grid = grid_from(f);
  z.provenance = "table";
  z.validate();
  return z;
}

std::string map_to_csv(const EmissionMap& map) {
  std::ostringstream out;
  out << "vj_hz";
  for (std::size_t j = 0; j < map.f_grid.n; ++j) out << ',' << io::fmt(map.f_grid.at(j));
  out << '\n';
  for (std::size_t i = 0; i < map.vj_grid.n; ++i) {
    out << io::fmt(map.vj_grid.at(i));
    for (std::size_t j = 0; j < map.f_grid.n; ++j) out << ',' << io::fmt(map.at(i, j));
    out << '\n';
  }
  return out.str();
}

EmissionMap map_from_csv(const std::string& text) {
  std::vector<double> f;
  const auto rows = parse_csv(text, true, &f);
  EmissionMap map;
  map.f_grid = grid_from(f);
  std::vector<double> vj;
  for (const auto& r : rows) {
    if (r.size() != f.size() + 1) throw IoError("map CSV row width mismatch");
    vj.push_back(r[0]);
    map.gamma.insert(map.gamma.end(), r.begin() + 1, r.end());
  }
  map.vj_grid = grid_from(vj);
  return map;
}

}  // namespace jjphoton::pe
