#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>

#include <json.hpp>

namespace jjphoton::io {

using json = nlohmann::json;

// Writes via a sibling temp file and rename so readers never see partial output.
void write_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_text(const std::filesystem::path& path);
json read_json(const std::filesystem::path& path);

// Throws ConfigError naming the first key of `obj` not in `allowed`.
void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         std::string_view context);

// Shortest round-trip decimal for doubles; keeps text outputs byte-stable.
std::string fmt(double v);

}  // namespace jjphoton::io
