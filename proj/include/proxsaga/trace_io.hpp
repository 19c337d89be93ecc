#pragma once

// Trace CSV, JSON sidecar and speedup table output.

#include <charconv>
#include <fstream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "proxsaga/async.hpp"
#include "proxsaga/error.hpp"
#include "proxsaga/saga.hpp"

namespace proxsaga {

namespace detail {

inline std::string shortest(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// `iterations,epochs,objective,wall_seconds`, plus `threads,counter_iterations` when
/// `async_columns` is set.
inline void write_trace_csv(std::ostream& out, const Trace& trace, bool async_columns) {
  out << "iterations,epochs,objective,wall_seconds";
  if (async_columns) out << ",threads,counter_iterations";
  out << '\n';
  for (const Checkpoint& c : trace.checkpoints) {
    out << c.iterations << ',' << detail::shortest(c.epochs) << ','
        << detail::shortest(c.objective) << ',' << detail::shortest(c.wall_seconds);
    if (async_columns) out << ',' << trace.threads << ',' << c.counter_iterations;
    out << '\n';
  }
}

/// `cores,wall_speedup,theoretical_speedup,reached`
inline void write_speedup_csv(std::ostream& out, const SpeedupReport& report) {
  out << "cores,wall_speedup,theoretical_speedup,reached\n";
  for (const SpeedupRow& row : report.rows) {
    out << row.cores << ',' << detail::shortest(row.wall_speedup) << ','
        << detail::shortest(row.theoretical_speedup) << ',' << (row.reached ? "true" : "false")
        << '\n';
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("write failed for " + path);
}

}  // namespace proxsaga
