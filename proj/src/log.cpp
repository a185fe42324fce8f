#include "eeio/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace eeio::log {

namespace {

Level level_from_env()
{
    const char* env = std::getenv("EEIO_LOG");
    if (!env) {
        return Level::Warn;
    }
    std::string v(env);
    if (v == "debug") return Level::Debug;
    if (v == "info") return Level::Info;
    if (v == "warn") return Level::Warn;
    if (v == "error") return Level::Error;
    if (v == "off") return Level::Off;
    return Level::Warn;
}

Level g_level = level_from_env();
std::mutex g_mutex;

void emit(Level lvl, const char* tag, const std::string& msg)
{
    if (lvl < g_level) {
        return;
    }
    std::lock_guard<std::mutex> lock(g_mutex);
    std::cerr << "[eeio " << tag << "] " << msg << '\n';
}

}  // namespace

Level level() { return g_level; }
void set_level(Level lvl) { g_level = lvl; }

void debug(const std::string& msg) { emit(Level::Debug, "debug", msg); }
void info(const std::string& msg) { emit(Level::Info, "info", msg); }
void warn(const std::string& msg) { emit(Level::Warn, "warn", msg); }
void error(const std::string& msg) { emit(Level::Error, "error", msg); }

}  // namespace eeio::log
