#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace nfgnn {

using json = nlohmann::json;

/// 17 significant digits, enough to round-trip every 64-bit double.
std::string format_real(double v);

/// Compact JSON text with reals at 17 significant digits.
std::string dump_json(const json& j);

json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace nfgnn
