#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "nfgnn/json_io.hpp"

namespace nfgnn {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Applies one "--set a.b.c=value" override. The value is parsed as JSON and
/// kept as a plain string when that fails. Throws ConfigError.
void apply_override(json& config, const std::string& assignment);

/// Entry point behind the nfgnn binary. args excludes the program name.
/// Machine-readable results go to out, diagnostics to the logger and err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nfgnn
