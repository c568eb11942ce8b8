#include <CLI11.hpp>

#include <filesystem>
#include <functional>
#include <iostream>
#include <map>

#include "commands.hpp"
#include "jjphoton/error.hpp"
#include "jjphoton/io.hpp"

namespace {

using jjphoton::io::json;
namespace fs = std::filesystem;
namespace cli = jjphoton::cli;

enum Exit { ok = 0, config_error = 2, numerical_error = 3, io_error = 4 };

struct Invocation {
  std::string config;
  std::string out;
  int threads = 0;
  bool dry_run = false;
};

const std::map<std::string, std::function<void(const json&, const cli::RunOptions&)>> commands{
    {"network", cli::cmd_network}, {"pe", cli::cmd_pe},           {"map", cli::cmd_map},
    {"extract", cli::cmd_extract}, {"simulate", cli::cmd_simulate}, {"correlate", cli::cmd_correlate},
    {"thermal", cli::cmd_thermal}};

const std::map<std::string, std::string> descriptions{
    {"network", "S-parameters, impedance sweeps and anti-resonance against flux"},
    {"pe", "solve P(E) for the junction environment"},
    {"map", "forward emission map and band rate against bias and flux"},
    {"extract", "invert an emission map for P(E), T, Ic and Re Z, optionally fit the circuit"},
    {"simulate", "emission events, event-level g2 and photon waveforms"},
    {"correlate", "amplification chain, demodulation and noise-subtracted g2"},
    {"thermal", "electron temperature report for the on-chip resistor"}};

int run(const std::string& name, const Invocation& inv, fs::path& out_dir) {
  const json cfg = jjphoton::io::read_json(inv.config);
  std::set<std::string> allowed{"schema_version", "out", "threads"};
  for (const auto& [k, _] : commands) allowed.insert(k);
  jjphoton::io::reject_unknown_keys(cfg, allowed, "config");
  if (!cfg.contains("schema_version") || cfg["schema_version"] != cli::schema_version)
    throw jjphoton::ConfigError("config: schema_version must be " + std::to_string(cli::schema_version));
  if (!cfg.contains(name)) throw jjphoton::ConfigError("config: no '" + name + "' block");

  cli::RunOptions opt;
  opt.base = fs::absolute(inv.config).parent_path();
  if (!inv.out.empty()) {
    opt.out = inv.out;
  } else if (cfg.contains("out")) {
    if (!cfg["out"].is_string()) throw jjphoton::ConfigError("config.out: expected a string");
    opt.out = opt.base / cfg["out"].get<std::string>();
  } else {
    throw jjphoton::ConfigError("no output directory: pass --out or set 'out' in the config");
  }
  opt.threads = inv.threads;
  if (opt.threads == 0) {
    if (cfg.contains("threads") && !cfg["threads"].is_number_unsigned())
      throw jjphoton::ConfigError("config.threads: expected a positive integer");
    opt.threads = cfg.value("threads", 1);
  }
  if (opt.threads < 1) throw jjphoton::ConfigError("threads must be at least 1");
  opt.dry_run = inv.dry_run;
  out_dir = opt.out;
  commands.at(name)(cfg.at(name), opt);
  return ok;
}

int report_error(const fs::path& out_dir, const char* type, const std::string& message, int code) {
  const json err{{"error", {{"type", type}, {"message", message}, {"exit_code", code}}}};
  std::cerr << err.dump() << "\n";
  if (!out_dir.empty()) {
    try {
      jjphoton::io::write_atomic(out_dir / "error.json", err.dump(2) + "\n");
    } catch (const std::exception&) {
      // The error is already on stderr.
    }
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Josephson photon source modeling: circuit, P(E), emission maps, dynamics and correlations"};
  app.require_subcommand(1);
  Invocation inv;
  for (const auto& [name, _] : commands) {
    auto* sub = app.add_subcommand(name, descriptions.at(name));
    sub->add_option("--config", inv.config, "JSON run configuration")->required();
    sub->add_option("--out", inv.out, "output directory (overrides the config)");
    sub->add_option("--threads", inv.threads, "worker threads; results do not depend on it")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--dry-run", inv.dry_run, "validate the config and print the plan");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  fs::path out_dir;
  try {
    return run(name, inv, out_dir);
  } catch (const jjphoton::ConfigError& e) {
    return report_error(out_dir, "config", e.what(), config_error);
  } catch (const jjphoton::InvalidModel& e) {
    return report_error(out_dir, "invalid_model", e.what(), config_error);
  } catch (const json::exception& e) {
    return report_error(out_dir, "config", e.what(), config_error);
  } catch (const jjphoton::NumericalError& e) {
    return report_error(out_dir, "numerical", e.what(), numerical_error);
  } catch (const jjphoton::IoError& e) {
    return report_error(out_dir, "io", e.what(), io_error);
  } catch (const fs::filesystem_error& e) {
    return report_error(out_dir, "io", e.what(), io_error);
  } catch (const std::exception& e) {
    return report_error(out_dir, "numerical", e.what(), numerical_error);
  }
}
