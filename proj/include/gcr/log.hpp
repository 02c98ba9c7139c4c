#pragma once

#include <cstdlib>
#include <iostream>
#include <string>
#include <string_view>

namespace gcr::log {

enum class Level { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

/// Threshold from GCR_LOG_LEVEL (error, warn, info, debug); info when unset or unknown.
inline Level threshold() {
  static const Level level = [] {
    const char* env = std::getenv("GCR_LOG_LEVEL");
    const std::string_view v = env ? env : "";
    if (v == "error") return Level::kError;
    if (v == "warn") return Level::kWarn;
    if (v == "debug") return Level::kDebug;
    return Level::kInfo;
  }();
  return level;
}

inline bool enabled(Level l) { return static_cast<int>(l) <= static_cast<int>(threshold()); }

inline void write(Level l, std::string_view msg) {
  static constexpr const char* kTags[] = {"error", "warn", "info", "debug"};
  if (enabled(l)) std::cerr << "[" << kTags[static_cast<int>(l)] << "] " << msg << '\n';
}

inline void error(std::string_view m) { write(Level::kError, m); }
inline void warn(std::string_view m) { write(Level::kWarn, m); }
inline void info(std::string_view m) { write(Level::kInfo, m); }
inline void debug(std::string_view m) { write(Level::kDebug, m); }

}  // namespace gcr::log
