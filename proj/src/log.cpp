#include "eaas/log.hpp"

#include <iostream>

namespace eaas {

std::string_view to_string(LogLevel level) {
  switch (level) {
    case LogLevel::Debug: return "debug";
    case LogLevel::Info: return "info";
    case LogLevel::Warn: return "warn";
    case LogLevel::Error: return "error";
  }
  return "?";
}

Logger::Logger()
    : Logger([](LogLevel level, std::string_view m) {
        std::clog << "[" << to_string(level) << "] " << m << '\n';
      }) {}

Logger::Logger(Sink sink, LogLevel min_level) : sink_(std::move(sink)), min_level_(min_level) {}

void Logger::log(LogLevel level, std::string_view message) {
  if (level < min_level_ || !sink_) return;
  std::lock_guard lock(mutex_);
  sink_(level, message);
}

}  // namespace eaas
