#pragma once

#include <spdlog/spdlog.h>

namespace modewise {

/// Reads MODEWISE_LOG (trace|debug|info|warn|error|off) and configures the
/// default spdlog logger to write to stderr. Safe to call more than once.
void init_logging();

}  // namespace modewise
