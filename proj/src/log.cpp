#include "xnf/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string_view>

namespace xnf::log {
namespace {

Level parse_env() {
  const char* v = std::getenv("XNF_LOG");
  if (v == nullptr) return Level::Info;
  const std::string_view s(v);
  if (s == "error") return Level::Error;
  if (s == "debug") return Level::Debug;
  return Level::Info;
}

std::atomic<int>& current() {
  static std::atomic<int> lvl{static_cast<int>(parse_env())};
  return lvl;
}

std::mutex& out_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

Level level() { return static_cast<Level>(current().load()); }
void set_level(Level l) { current().store(static_cast<int>(l)); }
void init_from_env() { set_level(parse_env()); }

void write(Level l, const std::string& message) {
  static constexpr const char* names[] = {"error", "info", "debug"};
  std::lock_guard lock(out_mutex());
  std::cerr << "[xnf " << names[static_cast<int>(l)] << "] " << message << '\n';
}

}  // namespace xnf::log
