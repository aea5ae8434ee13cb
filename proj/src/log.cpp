#include "edu4fd/log.hpp"

#include <iostream>

namespace edu4fd::log {
namespace {

bool g_quiet = false;
Sink g_sink;

void emit(Level level, const std::string& msg) {
  if (g_sink) {
    g_sink(level, msg);
    return;
  }
  if (g_quiet && level == Level::kInfo) return;
  switch (level) {
    case Level::kInfo: std::cerr << msg << '\n'; break;
    case Level::kWarn: std::cerr << "warning: " << msg << '\n'; break;
    case Level::kError: std::cerr << "error: " << msg << '\n'; break;
  }
}

}  // namespace

void set_quiet(bool quiet) { g_quiet = quiet; }
bool quiet() { return g_quiet; }
void set_sink(Sink sink) { g_sink = std::move(sink); }

void info(const std::string& msg) { emit(Level::kInfo, msg); }
void warn(const std::string& msg) { emit(Level::kWarn, msg); }
void error(const std::string& msg) { emit(Level::kError, msg); }

}  // namespace edu4fd::log
