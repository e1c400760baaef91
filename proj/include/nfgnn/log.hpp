#pragma once

#include <memory>

#include <spdlog/spdlog.h>

namespace nfgnn {

/// Shared stderr logger: "[2026-01-01 12:00:00.000] [info] message".
spdlog::logger& logger();

}  // namespace nfgnn
