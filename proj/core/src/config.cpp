#include "seqac/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace seqac {

namespace {

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out = "invalid configuration:";
  for (const auto& l : lines) out += "\n  " + l;
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

struct BadValue : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

double to_double(const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) throw BadValue("expected a number");
  return out;
}

std::size_t to_size(const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw BadValue("expected a non-negative integer");
  }
  return static_cast<std::size_t>(out);
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw BadValue("expected true or false");
}

std::string of_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}
std::string of_size(std::size_t v) { return std::to_string(v); }
std::string of_bool(bool v) { return v ? "true" : "false"; }

struct Field {
  std::string key;
  std::string doc;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define SEQAC_DOUBLE(KEY, MEMBER, DOC)                                              \
  Field{KEY, DOC, [](const RunConfig& c) { return of_double(c.MEMBER); },           \
        [](RunConfig& c, const std::string& v) { c.MEMBER = to_double(v); }}
#define SEQAC_SIZE(KEY, MEMBER, DOC)                                                \
  Field{KEY, DOC, [](const RunConfig& c) { return of_size(c.MEMBER); },             \
        [](RunConfig& c, const std::string& v) { c.MEMBER = to_size(v); }}
#define SEQAC_BOOL(KEY, MEMBER, DOC)                                                \
  Field{KEY, DOC, [](const RunConfig& c) { return of_bool(c.MEMBER); },             \
        [](RunConfig& c, const std::string& v) { c.MEMBER = to_bool(v); }}
#define SEQAC_STRING(KEY, MEMBER, DOC)                                              \
  Field{KEY, DOC, [](const RunConfig& c) { return c.MEMBER; },                      \
        [](RunConfig& c, const std::string& v) { c.MEMBER = v; }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      SEQAC_STRING("task", task, "spelling or toy"),
      Field{"mode", "ll, ac, reinforce or reinforce-critic",
            [](const RunConfig& c) { return to_string(c.train.mode); },
            [](RunConfig& c, const std::string& v) {
              try {
                c.train.mode = parse_train_mode(v);
              } catch (const std::invalid_argument&) {
                throw BadValue("expected ll, ac, reinforce or reinforce-critic");
              }
            }},
      Field{"seed", "root of every random stream", [](const RunConfig& c) { return std::to_string(c.train.seed); },
            [](RunConfig& c, const std::string& v) { c.train.seed = to_size(v); }},
      Field{"score", "neg-cer or bleu", [](const RunConfig& c) { return to_string(c.train.score); },
            [](RunConfig& c, const std::string& v) {
              try {
                c.train.score = parse_score_kind(v);
              } catch (const std::invalid_argument&) {
                throw BadValue("expected neg-cer or bleu");
              }
            }},
      SEQAC_STRING("corpus", corpus, "raw text corpus, one sentence per line"),
      SEQAC_STRING("data_dir", data_dir, "generated dataset directory"),
      SEQAC_DOUBLE("eta", corruption.eta, "per-character replacement probability"),
      SEQAC_SIZE("clip", corruption.clip, "characters kept per sentence"),
      SEQAC_BOOL("include_original", corruption.include_original, "replacement may redraw the original character"),
      SEQAC_SIZE("valid_size", valid_size, "held-out validation pairs"),
      SEQAC_SIZE("test_size", test_size, "held-out test pairs"),
      SEQAC_SIZE("toy_symbols", toy_symbols, "task=toy alphabet size"),
      SEQAC_SIZE("toy_lines", toy_lines, "task=toy training lines"),
      SEQAC_SIZE("embed", train.embed, "embedding width"),
      SEQAC_SIZE("hidden", train.hidden, "GRU units"),
      SEQAC_DOUBLE("init_width", train.init_width, "width of the uniform initialization"),
      SEQAC_SIZE("batch_size", train.batch_size, "log-likelihood batch size"),
      SEQAC_DOUBLE("ll_alpha", train.ll_alpha, "log-likelihood Adam step size"),
      SEQAC_DOUBLE("ll_alpha_annealed", train.ll_alpha_annealed, "step size after the first non-improving evaluation"),
      SEQAC_SIZE("ll_max_steps", train.ll_max_steps, "log-likelihood step cap"),
      SEQAC_SIZE("ll_eval_every", train.ll_eval_every, "steps between log-likelihood validations"),
      SEQAC_SIZE("ll_patience", train.ll_patience, "non-improving validations before stopping"),
      SEQAC_DOUBLE("gamma_theta", train.gamma_theta, "delayed actor rate"),
      SEQAC_DOUBLE("gamma_phi", train.gamma_phi, "target critic rate"),
      SEQAC_DOUBLE("lambda", train.lambda, "critic variance penalty"),
      SEQAC_DOUBLE("lambda_ll", train.lambda_ll, "log-likelihood weight in the actor objective"),
      SEQAC_SIZE("samples", train.samples, "sampled sequences per example"),
      SEQAC_SIZE("rl_batch_size", train.rl_batch_size, "examples per reinforcement step"),
      SEQAC_BOOL("shaping", train.shaping, "per-step prefix-score rewards"),
      SEQAC_BOOL("td", train.td, "temporal-difference critic targets (false: Monte-Carlo)"),
      SEQAC_BOOL("critic_actor_states", train.critic_actor_states, "critic reads actor decoder states"),
      Field{"rf_baseline", "state-value or taken-action (reinforce-critic baseline)",
            [](const RunConfig& c) {
              return std::string(c.train.rf_baseline == CriticBaseline::kStateValue ? "state-value" : "taken-action");
            },
            [](RunConfig& c, const std::string& v) {
              if (v == "state-value") {
                c.train.rf_baseline = CriticBaseline::kStateValue;
              } else if (v == "taken-action") {
                c.train.rf_baseline = CriticBaseline::kTakenAction;
              } else {
                throw BadValue("expected state-value or taken-action");
              }
            }},
      SEQAC_DOUBLE("critic_alpha", train.critic_alpha, "critic pretraining step size"),
      SEQAC_DOUBLE("joint_alpha", train.joint_alpha, "joint phase step size"),
      SEQAC_SIZE("critic_max_steps", train.critic_max_steps, "critic pretraining step cap"),
      SEQAC_SIZE("critic_window", train.critic_window, "TD error smoothing window"),
      SEQAC_SIZE("critic_patience", train.critic_patience, "steps without a new smoothed TD maximum"),
      SEQAC_SIZE("critic_extra_steps", train.critic_extra_steps, "steps after the stop rule fires"),
      SEQAC_SIZE("joint_steps", train.joint_steps, "joint phase steps"),
      SEQAC_SIZE("sample_max_len", train.sample_max_len, "sampled length cap (0: 2|X|+10)"),
      SEQAC_DOUBLE("clip_norm", train.clip_norm, "global gradient norm cap (<= 0 disables)"),
      SEQAC_DOUBLE("divergence_factor", train.divergence_factor, "abort when |Q| exceeds this times the largest return"),
      SEQAC_SIZE("eval_every", train.eval_every, "joint steps between validations"),
      SEQAC_SIZE("eval_size", train.eval_size, "validation pairs scored during training (0: all)"),
      SEQAC_SIZE("log_every", train.log_every, "steps per logged training mean"),
      SEQAC_SIZE("checkpoint_every", train.checkpoint_every, "steps between checkpoints (0: phase ends only)"),
      Field{"decode", "greedy or beam", [](const RunConfig& c) { return std::string(c.decode.beam ? "beam" : "greedy"); },
            [](RunConfig& c, const std::string& v) {
              if (v != "greedy" && v != "beam") throw BadValue("expected greedy or beam");
              c.decode.beam = v == "beam";
            }},
      SEQAC_SIZE("beam_width", decode.width, "beam width"),
      SEQAC_DOUBLE("rho", decode.rho, "length bonus per output token"),
      SEQAC_SIZE("max_len", decode.max_len, "decoding length cap (0: 2|X|+10)"),
      SEQAC_STRING("out_dir", out_dir, "checkpoint and log directory"),
      SEQAC_STRING("metrics", metrics, "metrics log path (empty: <out_dir>/metrics.jsonl)"),
      SEQAC_BOOL("metrics_wall_clock", metrics_wall_clock, "record elapsed milliseconds (breaks byte-identical logs)"),
  };
  return table;
}

#undef SEQAC_DOUBLE
#undef SEQAC_SIZE
#undef SEQAC_BOOL
#undef SEQAC_STRING

const Field* find_field(const std::string& key) {
  for (const Field& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

void apply(RunConfig& c, const std::string& key, const std::string& value,
           const std::string& where, std::vector<std::string>& problems) {
  const Field* f = find_field(key);
  if (!f) {
    problems.push_back(where + "unknown key '" + key + "'");
    return;
  }
  try {
    f->set(c, value);
  } catch (const BadValue& e) {
    problems.push_back(where + key + "='" + value + "': " + e.what());
  }
}

bool split_assignment(const std::string& line, std::string& key, std::string& value) {
  const auto eq = line.find('=');
  if (eq == std::string::npos) return false;
  key = trim(std::string_view(line).substr(0, eq));
  value = trim(std::string_view(line).substr(eq + 1));
  return !key.empty();
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join_lines(problems)), problems_(std::move(problems)) {}

std::filesystem::path RunConfig::metrics_path() const {
  return metrics.empty() ? std::filesystem::path(out_dir) / "metrics.jsonl" : std::filesystem::path(metrics);
}

void RunConfig::validate() const {
  std::vector<std::string> problems = train.problems();
  if (task != "spelling" && task != "toy") problems.push_back("task must be spelling or toy");
  try {
    corruption.validate();
  } catch (const std::exception& e) {
    problems.push_back(e.what());
  }
  if (decode.width < 1) problems.push_back("beam_width must be >= 1");
  if (!(decode.rho >= 0.0)) problems.push_back("rho must be >= 0");
  if (task == "toy" && (toy_symbols < 1 || toy_lines < 4)) {
    problems.push_back("task=toy needs toy_symbols >= 1 and toy_lines >= 4");
  }
  if (out_dir.empty()) problems.push_back("out_dir must not be empty");
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  std::vector<std::string> problems;
  apply(config, key, value, "", problems);
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

std::string get_config_value(const RunConfig& config, const std::string& key) {
  const Field* f = find_field(key);
  if (!f) throw ConfigError({"unknown key '" + key + "'"});
  return f->get(config);
}

std::vector<std::pair<std::string, std::string>> config_keys() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Field& f : fields()) out.emplace_back(f.key, f.doc);
  return out;
}

RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  RunConfig c;
  std::vector<std::string> problems;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    std::string key, value;
    const std::string where = "line " + std::to_string(number) + ": ";
    if (!split_assignment(line, key, value)) {
      problems.push_back(where + "expected key=value");
      continue;
    }
    apply(c, key, value, where, problems);
  }
  for (const std::string& o : overrides) {
    std::string key, value;
    if (!split_assignment(o, key, value)) {
      problems.push_back("--set '" + o + "': expected key=value");
      continue;
    }
    apply(c, key, value, "--set: ", problems);
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read config file " + path.string()});
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), overrides);
}

std::string dump_config(const RunConfig& config) {
  std::string out;
  for (const Field& f : fields()) out += f.key + "=" + f.get(config) + "\n";
  return out;
}

}  // namespace seqac
