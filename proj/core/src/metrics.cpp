#include "seqac/metrics.hpp"

#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace seqac {

std::string to_json_line(const MetricRecord& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["phase"] = r.phase;
  j["split"] = r.split;
  j["metric"] = r.metric;
  j["value"] = r.value;
  j["wall_ms"] = r.wall_ms;
  return j.dump();
}

MetricRecord parse_metric_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  MetricRecord r;
  r.step = j.at("step").get<std::uint64_t>();
  r.phase = j.at("phase").get<std::string>();
  r.split = j.at("split").get<std::string>();
  r.metric = j.at("metric").get<std::string>();
  // Non-finite values are written as null.
  r.value = j.at("value").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                    : j.at("value").get<double>();
  r.wall_ms = j.at("wall_ms").get<std::int64_t>();
  return r;
}

MetricsLog::MetricsLog(const std::filesystem::path& path, bool wall_clock, bool append)
    : wall_clock_(wall_clock) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, append ? std::ios::app : std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot open metrics log " + path.string());
}

void MetricsLog::log(std::uint64_t step, const std::string& phase, const std::string& split,
                     const std::string& metric, double value) {
  MetricRecord r{step, phase, split, metric, value, 0};
  if (wall_clock_) {
    r.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - start_)
                    .count();
  }
  if (out_.is_open()) out_ << to_json_line(r) << '\n';
  records_.push_back(std::move(r));
}

void MetricsLog::flush() {
  if (out_.is_open()) out_.flush();
}

std::vector<MetricRecord> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read metrics log " + path.string());
  std::vector<MetricRecord> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      out.push_back(parse_metric_line(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace seqac
