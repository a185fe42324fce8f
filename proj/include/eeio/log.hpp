#pragma once

#include <string>

namespace eeio::log {

enum class Level { Debug = 0, Info, Warn, Error, Off };

// Level comes from the EEIO_LOG environment variable
// (debug|info|warn|error|off); default is warn.
Level level();
void set_level(Level lvl);

void debug(const std::string& msg);
void info(const std::string& msg);
void warn(const std::string& msg);
void error(const std::string& msg);

}  // namespace eeio::log
