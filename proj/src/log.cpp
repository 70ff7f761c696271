#include "modewise/log.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace modewise {

void init_logging() {
  static const bool configured = [] {
    auto logger = spdlog::stderr_color_mt("modewise");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("MODEWISE_LOG")) {
      spdlog::set_level(spdlog::level::from_str(env));
    }
    return true;
  }();
  (void)configured;
}

}  // namespace modewise
