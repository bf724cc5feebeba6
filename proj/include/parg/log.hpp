#pragma once

#include <memory>
#include <string_view>

#include <spdlog/logger.h>

namespace parg {

/// Process-wide logger; writes to stderr only.
spdlog::logger& logger();

/// Accepts trace|debug|info|warn|error|off.
void set_log_level(std::string_view level);

}  // namespace parg
