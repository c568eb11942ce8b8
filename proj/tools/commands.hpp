#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace jjphoton::cli {

inline constexpr int schema_version = 1;

struct RunOptions {
  std::filesystem::path out;
  std::filesystem::path base;  // relative input paths resolve against this
  int threads = 1;
  bool dry_run = false;
};

// Each command validates its whole config block before computing. With
// dry_run it prints the plan as JSON on stdout and writes nothing.
void cmd_network(const nlohmann::json& cfg, const RunOptions& opt);
void cmd_pe(const nlohmann::json& cfg, const RunOptions& opt);
void cmd_map(const nlohmann::json& cfg, const RunOptions& opt);
void cmd_extract(const nlohmann::json& cfg, const RunOptions& opt);
void cmd_simulate(const nlohmann::json& cfg, const RunOptions& opt);
void cmd_correlate(const nlohmann::json& cfg, const RunOptions& opt);
void cmd_thermal(const nlohmann::json& cfg, const RunOptions& opt);

}  // namespace jjphoton::cli
