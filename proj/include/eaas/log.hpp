#pragma once

#include <functional>
#include <mutex>
#include <string>
#include <string_view>

namespace eaas {

enum class LogLevel { Debug, Info, Warn, Error };

// Minimal line logger. The default sink writes to stderr; tests install a
// capturing sink. Callers must never pass key material or entropy bytes.
class Logger {
 public:
  using Sink = std::function<void(LogLevel, std::string_view)>;

  Logger();
  explicit Logger(Sink sink, LogLevel min_level = LogLevel::Info);

  void log(LogLevel level, std::string_view message);
  void debug(std::string_view m) { log(LogLevel::Debug, m); }
  void info(std::string_view m) { log(LogLevel::Info, m); }
  void warn(std::string_view m) { log(LogLevel::Warn, m); }
  void error(std::string_view m) { log(LogLevel::Error, m); }

  void set_level(LogLevel level) { min_level_ = level; }

 private:
  std::mutex mutex_;
  Sink sink_;
  LogLevel min_level_;
};

std::string_view to_string(LogLevel level);

}  // namespace eaas
