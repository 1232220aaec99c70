#include "disinfo/log.hpp"

#include <spdlog/sinks/stdout_sinks.h>

namespace disinfo::log {

namespace {
std::shared_ptr<spdlog::logger> make() {
  auto l = std::make_shared<spdlog::logger>("disinfo", std::make_shared<spdlog::sinks::stderr_sink_mt>());
  l->set_pattern("[%l] %v");
  l->set_level(spdlog::level::info);
  return l;
}

std::shared_ptr<spdlog::logger>& instance() {
  static std::shared_ptr<spdlog::logger> l = make();
  return l;
}
}  // namespace

spdlog::logger& get() { return *instance(); }

void set_sink(std::shared_ptr<spdlog::sinks::sink> sink) {
  sink->set_pattern("[%l] %v");
  auto& sinks = instance()->sinks();
  sinks.clear();
  sinks.push_back(std::move(sink));
}

void reset_to_stderr() { set_sink(std::make_shared<spdlog::sinks::stderr_sink_mt>()); }

}  // namespace disinfo::log
