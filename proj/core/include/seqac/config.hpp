#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqac/data.hpp"
#include "seqac/eval.hpp"
#include "seqac/trainers.hpp"

namespace seqac {

/// Invalid configuration; what() lists every problem, one per line.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Everything a CLI run reads: training hyperparameters, data settings,
/// decoding, and paths.
struct RunConfig {
  TrainConfig train;
  std::string task = "spelling";  // spelling | toy

  // Data.
  std::string corpus;             // raw text, used when data_dir holds no generated data
  std::string data_dir = "data/generated";
  CorruptionSpec corruption;
  std::size_t valid_size = 2000;
  std::size_t test_size = 2000;
  std::size_t toy_symbols = 3;    // task=toy: alphabet size
  std::size_t toy_lines = 2000;   // task=toy: distinct random training lines

  // Outputs.
  std::string out_dir = "runs/default";
  std::string metrics;            // empty: <out_dir>/metrics.jsonl
  bool metrics_wall_clock = false;

  DecodeMode decode;

  bool operator==(const RunConfig&) const = default;

  std::filesystem::path metrics_path() const;
  /// Throws ConfigError listing every violated constraint.
  void validate() const;
};

/// Applies one key=value assignment; throws ConfigError for unknown keys or
/// unparsable values.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& config, const std::string& key);
/// Every key in dump order, with a one-line description.
std::vector<std::pair<std::string, std::string>> config_keys();

/// Flat key=value text; '#' starts a comment. Collects every bad line before
/// throwing. Unset keys keep their defaults; the result is validated.
RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {});
RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
/// Every key, one per line; parse_config(dump_config(c)) == c.
std::string dump_config(const RunConfig& config);

}  // namespace seqac
