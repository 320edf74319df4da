#pragma once

#include <cstdlib>
#include <cstring>
#include <iostream>

namespace qmat {

// Verbosity from the QMAT_LOG environment variable: quiet | info | debug.
enum class LogLevel { quiet = 0, info = 1, debug = 2 };

inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("QMAT_LOG");
    if (!env) return LogLevel::info;
    if (std::strcmp(env, "quiet") == 0) return LogLevel::quiet;
    if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
    return LogLevel::info;
  }();
  return level;
}

}  // namespace qmat

#define QMAT_LOG_INFO(expr)                                              \
  do {                                                                   \
    if (::qmat::log_level() >= ::qmat::LogLevel::info)                   \
      std::cerr << "[qmat] " << expr << std::endl;                       \
  } while (0)

#define QMAT_LOG_DEBUG(expr)                                             \
  do {                                                                   \
    if (::qmat::log_level() >= ::qmat::LogLevel::debug)                  \
      std::cerr << "[qmat:debug] " << expr << std::endl;                 \
  } while (0)
