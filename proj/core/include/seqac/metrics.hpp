#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace seqac {

/// One metrics event.
struct MetricRecord {
  std::uint64_t step = 0;
  std::string phase;
  std::string split;
  std::string metric;
  double value = 0.0;
  std::int64_t wall_ms = 0;

  bool operator==(const MetricRecord&) const = default;
};

/// Serializes a record as one JSON line (doubles printed round-trip exact).
std::string to_json_line(const MetricRecord& record);
MetricRecord parse_metric_line(const std::string& line);

/// Append-only JSON-lines log. With wall_clock off every wall_ms is 0, so two
/// runs with the same seed write byte-identical files.
class MetricsLog {
 public:
  MetricsLog() = default;  // discards records but still keeps them in memory
  MetricsLog(const std::filesystem::path& path, bool wall_clock, bool append = false);

  void log(std::uint64_t step, const std::string& phase, const std::string& split,
           const std::string& metric, double value);
  const std::vector<MetricRecord>& records() const noexcept { return records_; }
  void flush();

 private:
  std::ofstream out_;
  bool wall_clock_ = false;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
  std::vector<MetricRecord> records_;
};

std::vector<MetricRecord> read_metrics(const std::filesystem::path& path);

}  // namespace seqac
