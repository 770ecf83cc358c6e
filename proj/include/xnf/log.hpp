#pragma once

#include <sstream>
#include <string>

// Leveled stderr logging. The level comes from XNF_LOG (error, info, debug);
// unset or unknown values mean info.
namespace xnf::log {

enum class Level { Error = 0, Info = 1, Debug = 2 };

Level level();
void set_level(Level level);
// Re-reads XNF_LOG.
void init_from_env();
void write(Level level, const std::string& message);

template <typename... Args>
void error(const Args&... args) {
  if (level() < Level::Error) return;
  std::ostringstream os;
  (os << ... << args);
  write(Level::Error, os.str());
}

template <typename... Args>
void info(const Args&... args) {
  if (level() < Level::Info) return;
  std::ostringstream os;
  (os << ... << args);
  write(Level::Info, os.str());
}

template <typename... Args>
void debug(const Args&... args) {
  if (level() < Level::Debug) return;
  std::ostringstream os;
  (os << ... << args);
  write(Level::Debug, os.str());
}

}  // namespace xnf::log
