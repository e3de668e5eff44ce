#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace finder {

/// One persisted epoch record. Counters are cumulative over the run.
struct TraceRow {
  long epoch = 0;
  double best_loss = 0.0;
  double alpha = 0.0;  // 0 for the first-order baselines
  std::int64_t forward_evals = 0;
  std::int64_t grad_evals = 0;
  std::int64_t wall_ms = 0;
};

inline constexpr const char* kTraceHeader = "epoch,best_loss,alpha,forward_evals,grad_evals,wall_ms";

inline std::string format_trace_row(const TraceRow& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%lld,%lld,%lld", r.epoch, r.best_loss, r.alpha,
                static_cast<long long>(r.forward_evals), static_cast<long long>(r.grad_evals),
                static_cast<long long>(r.wall_ms));
  return buf;
}

/// Single-pass CSV write with the fixed header; overwrites the target.
inline void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open trace file " + path);
  out << kTraceHeader << "\n";
  for (const auto& r : rows) out << format_trace_row(r) << "\n";
}

}  // namespace finder
