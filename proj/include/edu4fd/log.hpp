#pragma once

#include <functional>
#include <string>

// Diagnostics go to stderr; data goes to files or stdout.
namespace edu4fd::log {

enum class Level { kInfo, kWarn, kError };

using Sink = std::function<void(Level, const std::string&)>;

void set_quiet(bool quiet);
bool quiet();

/// Replace the output sink (tests capture warnings this way). Passing an
/// empty function restores the stderr sink.
void set_sink(Sink sink);

void info(const std::string& msg);
void warn(const std::string& msg);
void error(const std::string& msg);

}  // namespace edu4fd::log
