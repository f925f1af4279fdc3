#ifndef DUALFORGE_LOG_HPP
#define DUALFORGE_LOG_HPP

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace dualforge {

enum class LogLevel : int { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

// Level comes from DUALFORGE_LOG in {error,warn,info,debug}; default warn.
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("DUALFORGE_LOG");
    if (env == nullptr) return LogLevel::kWarn;
    if (std::strcmp(env, "error") == 0) return LogLevel::kError;
    if (std::strcmp(env, "info") == 0) return LogLevel::kInfo;
    if (std::strcmp(env, "debug") == 0) return LogLevel::kDebug;
    return LogLevel::kWarn;
  }();
  return level;
}

template <typename... Args>
void logf(LogLevel level, const char* fmt, Args... args) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::fprintf(stderr, "[dualforge:%s] ", names[static_cast<int>(level)]);
  std::fprintf(stderr, fmt, args...);
  std::fprintf(stderr, "\n");
}

inline void logf(LogLevel level, const char* msg) { logf(level, "%s", msg); }

}  // namespace dualforge

#endif  // DUALFORGE_LOG_HPP
