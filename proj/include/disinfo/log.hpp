#pragma once

#include <memory>

#include <spdlog/logger.h>
#include <spdlog/sinks/sink.h>

namespace disinfo::log {

// Shared library logger; writes to stderr unless sinks are replaced.
spdlog::logger& get();

// Replaces every sink of the library logger (tests capture output this way).
void set_sink(std::shared_ptr<spdlog::sinks::sink> sink);
void reset_to_stderr();

}  // namespace disinfo::log
