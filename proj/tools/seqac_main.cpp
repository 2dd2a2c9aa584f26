// seqac: data generation, training, evaluation and diagnostics.
//
// Exit codes: 0 success, 1 runtime error, 2 configuration error,
// 3 divergence abort, 4 oracle failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "seqac/checkpoint.hpp"
#include "seqac/config.hpp"
#include "seqac/data.hpp"
#include "seqac/decoding.hpp"
#include "seqac/eval.hpp"
#include "seqac/oracle.hpp"
#include "seqac/trainers.hpp"

namespace fs = std::filesystem;
using namespace seqac;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitOracle = 4;

// Random strings over the first `symbols` lowercase letters.
std::vector<std::string> toy_lines(const RunConfig& c) {
  Rng rng = Rng::derive(c.train.seed, 40);
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < c.toy_lines; ++i) {
    const std::size_t len = 1 + rng.index(c.corruption.clip);
    std::string s;
    for (std::size_t k = 0; k < len; ++k) s += static_cast<char>('a' + rng.index(c.toy_symbols));
    lines.push_back(std::move(s));
  }
  return lines;
}

GenerateOptions generate_options(const RunConfig& c) {
  GenerateOptions o;
  o.spec = c.corruption;
  o.seed = c.train.seed;
  o.valid_size = c.valid_size;
  o.test_size = c.test_size;
  return o;
}

SpellingData load_data(const RunConfig& c) {
  if (c.task == "toy") {
    GenerateOptions o = generate_options(c);
    o.valid_size = std::min(o.valid_size, c.toy_lines / 4);
    o.test_size = std::min(o.test_size, c.toy_lines / 4);
    return generate_spelling_data(toy_lines(c), o);
  }
  if (fs::exists(fs::path(c.data_dir) / "manifest.txt")) return load_spelling_data(c.data_dir);
  if (!c.corpus.empty()) return generate_spelling_data(read_lines(c.corpus), generate_options(c));
  throw ConfigError({"no dataset: data_dir '" + c.data_dir +
                     "' has no manifest.txt and no corpus is configured"});
}

struct LoadedModel {
  RunConfig config;
  Vocab vocab;
  ModelState state;
};

LoadedModel load_model(const fs::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  LoadedModel m;
  m.config = parse_config(ckpt.config);
  m.vocab = ckpt.vocab;
  m.state = ModelState::from_tensors(m.config.train, m.vocab.size(), ckpt.tensors);
  return m;
}

void save_state(const RunConfig& c, const Vocab& vocab, const ModelState& state, const fs::path& path) {
  Checkpoint ckpt;
  ckpt.config = dump_config(c);
  ckpt.vocab = vocab;
  ckpt.tensors = state.to_tensors();
  save_checkpoint(ckpt, path);
}

std::vector<SequencePair> split_of(const SpellingData& data, const std::string& split) {
  if (split == "valid") return data.valid;
  if (split == "test") return data.test;
  throw ConfigError({"unknown split '" + split + "' (expected valid or test)"});
}

void write_predictions(const std::vector<Tokens>& preds, const Vocab& vocab, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const Tokens& p : preds) out << vocab.decode(p) << '\n';
}

// --- subcommands ----------------------------------------------------------

struct GenerateArgs {
  std::string corpus, out;
  double eta = 0.3;
  std::size_t clip = 10, valid_size = 2000, test_size = 2000;
  std::uint64_t seed = 1;
  bool include_original = false;
};

int cmd_generate(const GenerateArgs& a) {
  GenerateOptions o;
  o.spec.eta = a.eta;
  o.spec.clip = a.clip;
  o.spec.include_original = a.include_original;
  o.seed = a.seed;
  o.valid_size = a.valid_size;
  o.test_size = a.test_size;
  try {
    o.spec.validate();
  } catch (const std::exception& e) {
    throw ConfigError({e.what()});
  }
  const auto lines = read_lines(a.corpus);
  if (lines.empty()) throw std::runtime_error("corpus " + a.corpus + " holds no sentences");
  const SpellingData data = generate_spelling_data(lines, o);
  write_spelling_data(data, o, fs::path(a.corpus).filename().string(), a.out);
  std::cout << "wrote " << data.train.size() << " training lines, " << data.valid.size()
            << " validation and " << data.test.size() << " test pairs to " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string mode, config, resume;
  std::vector<std::string> sets;
  bool full_pipeline = false;
  bool dump_config = false;
};

int cmd_train(const TrainArgs& a) {
  std::vector<std::string> overrides = a.sets;
  if (!a.mode.empty()) overrides.insert(overrides.begin(), "mode=" + a.mode);
  RunConfig c = a.config.empty() ? parse_config("", overrides) : load_config(a.config, overrides);
  if (a.dump_config) {
    std::cout << dump_config(c);
    return 0;
  }
  if (c.train.mode != TrainMode::kLogLikelihood && a.resume.empty() && !a.full_pipeline) {
    throw ConfigError({"mode " + to_string(c.train.mode) +
                       " needs a pretrained actor: pass --resume CKPT or --full-pipeline"});
  }
  const SpellingData data = load_data(c);
  ModelState state;
  if (a.resume.empty()) {
    state = ModelState::create(c.train, data.vocab.size());
  } else {
    Checkpoint ckpt = load_checkpoint(a.resume);
    if (!(ckpt.vocab == data.vocab)) {
      throw ConfigError({"checkpoint vocabulary does not match the dataset in " + c.data_dir});
    }
    state = ModelState::from_tensors(c.train, data.vocab.size(), ckpt.tensors);
  }
  fs::create_directories(c.out_dir);
  {
    std::ofstream out(fs::path(c.out_dir) / "config.txt");
    out << dump_config(c);
  }
  MetricsLog log(c.metrics_path(), c.metrics_wall_clock);
  Trainer trainer(c.train, data, state, log);
  trainer.on_checkpoint = [&](const std::string& tag) {
    save_state(c, data.vocab, state, fs::path(c.out_dir) / (tag + ".seqc"));
  };
  for (const PhaseResult& r : trainer.run()) {
    std::cout << r.phase << ": " << r.steps << " steps, validation CER " << r.valid_cer << "\n";
  }
  save_state(c, data.vocab, state, fs::path(c.out_dir) / "final.seqc");
  return 0;
}

struct EvalArgs {
  std::string checkpoint, split = "test", decode = "greedy", predictions, data_dir;
  std::size_t beam = 10, max_len = 0;
  double rho = 0.0;
};

DecodeMode decode_mode(const std::string& name, std::size_t width, double rho, std::size_t max_len) {
  if (name != "greedy" && name != "beam") throw ConfigError({"--decode must be greedy or beam"});
  if (width < 1) throw ConfigError({"--beam must be >= 1"});
  if (rho < 0.0) throw ConfigError({"--rho must be >= 0"});
  DecodeMode d;
  d.beam = name == "beam";
  d.width = width;
  d.rho = rho;
  d.max_len = max_len;
  return d;
}

int cmd_evaluate(const EvalArgs& a) {
  LoadedModel m = load_model(a.checkpoint);
  if (!a.data_dir.empty()) m.config.data_dir = a.data_dir;
  const SpellingData data = load_data(m.config);
  const auto pairs = split_of(data, a.split);
  std::vector<Tokens> preds;
  EvalReport r = evaluate(m.state.actor, m.state.actor_params, pairs, m.vocab.eos(),
                          decode_mode(a.decode, a.beam, a.rho, a.max_len), m.config.train.score, &preds);
  r.split = a.split;
  r.checkpoint = fs::path(a.checkpoint).filename().string();
  if (!a.predictions.empty()) write_predictions(preds, m.vocab, a.predictions);
  std::cout << r.to_json();
  return 0;
}

struct DecodeArgs {
  std::string checkpoint, input, output;
  std::size_t beam = 0, max_len = 0;
  double rho = 0.0;
};

int cmd_decode(const DecodeArgs& a) {
  LoadedModel m = load_model(a.checkpoint);
  std::vector<Tokens> sources;
  for (const std::string& line : read_lines(a.input)) {
    sources.push_back(m.vocab.encode(clip_text(line, m.config.corruption.clip)));
  }
  const DecodeMode mode = decode_mode(a.beam > 0 ? "beam" : "greedy", std::max<std::size_t>(a.beam, 1),
                                      a.rho, a.max_len);
  const auto preds = decode_all(m.state.actor, m.state.actor_params, sources, m.vocab.eos(), mode);
  if (a.output.empty()) {
    for (const Tokens& p : preds) std::cout << m.vocab.decode(p) << '\n';
  } else {
    write_predictions(preds, m.vocab, a.output);
  }
  return 0;
}

struct InspectArgs {
  std::string checkpoint, source, target;
  std::size_t top_k = 3;
};

int cmd_inspect(const InspectArgs& a) {
  LoadedModel m = load_model(a.checkpoint);
  if (m.state.phases_done < 2) {
    std::cerr << "warning: checkpoint holds no pretrained critic\n";
  }
  SequencePair pair{m.vocab.encode(a.source), m.vocab.encode(a.target)};
  if (pair.target.empty()) throw ConfigError({"--target must be non-empty"});
  const auto steps = inspect_critic(m.state.actor, m.state.actor_params, m.state.critic,
                                    m.state.critic_params, pair, m.vocab.eos(), a.top_k);
  auto show = [&](int id) {
    return id == m.vocab.eos() ? std::string("<eos>") : "'" + m.vocab.token(id) + "'";
  };
  for (std::size_t t = 0; t < steps.size(); ++t) {
    std::cout << "step " << t << " chose " << show(steps[t].chosen) << ":";
    for (const auto& [id, q] : steps[t].top) std::cout << "  " << show(id) << "(" << q << ")";
    std::cout << "\n";
  }
  return 0;
}

struct OracleArgs {
  std::string suite = "all", out;
  std::uint64_t seed = 1;
  std::size_t samples = 100000;
};

int cmd_oracle(const OracleArgs& a) {
  std::vector<OracleCheck> checks;
  try {
    checks = run_oracle_suite(a.suite, a.seed, a.samples);
  } catch (const std::invalid_argument& e) {
    throw ConfigError({e.what()});
  }
  const std::string report = oracle_report_json(checks);
  if (a.out.empty()) {
    std::cout << report;
  } else {
    std::ofstream(a.out) << report;
  }
  bool ok = true;
  for (const auto& c : checks) {
    std::cerr << (c.passed ? "PASS " : "FAIL ") << c.name << " measured=" << c.measured
              << " threshold=" << c.threshold << "\n";
    ok = ok && c.passed;
  }
  return ok ? 0 : kExitOracle;
}

struct CurvesArgs {
  std::string metrics, metric, out;
  std::vector<std::string> splits;
};

int cmd_curves(const CurvesArgs& a) {
  std::vector<CurveSeries> series;
  try {
    series = curves(read_metrics(a.metrics), a.metric, a.splits);
  } catch (const std::invalid_argument& e) {
    throw ConfigError({e.what()});
  }
  const std::string csv = curves_csv(series);
  if (a.out.empty()) {
    std::cout << csv;
  } else {
    std::ofstream(a.out) << csv;
  }
  return 0;
}

int cmd_ckpt_info(const std::string& path, bool show_config) {
  const Checkpoint ckpt = load_checkpoint(path);
  std::cout << describe_checkpoint(ckpt);
  if (show_config) std::cout << "config:\n" << ckpt.config;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seqac: actor-critic training for sequence prediction"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate-data", "Build a spelling-correction dataset from a text corpus");
  g->add_option("--corpus", gen.corpus, "Text file, one sentence per line")->required()->check(CLI::ExistingFile);
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--eta", gen.eta, "Per-character replacement probability");
  g->add_option("--clip", gen.clip, "Characters kept per sentence");
  g->add_option("--seed", gen.seed, "Random seed");
  g->add_option("--valid-size", gen.valid_size, "Validation pairs");
  g->add_option("--test-size", gen.test_size, "Test pairs");
  g->add_flag("--include-original", gen.include_original, "Replacement may redraw the original character");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Run training phases");
  t->add_option("--mode", tr.mode, "ll, ac, reinforce or reinforce-critic");
  t->add_option("--config", tr.config, "key=value config file");
  t->add_option("--set", tr.sets, "key=value override (repeatable)");
  t->add_option("--resume", tr.resume, "Checkpoint to continue from");
  t->add_flag("--full-pipeline", tr.full_pipeline, "Run every phase the mode needs from scratch");
  t->add_flag("--dump-config", tr.dump_config, "Print the resolved configuration and exit");

  EvalArgs ev;
  auto* e = app.add_subcommand("evaluate", "Score a checkpoint on a held-out split");
  e->add_option("--checkpoint", ev.checkpoint)->required();
  e->add_option("--split", ev.split, "valid or test");
  e->add_option("--decode", ev.decode, "greedy or beam");
  e->add_option("--beam", ev.beam, "Beam width");
  e->add_option("--rho", ev.rho, "Length bonus per token");
  e->add_option("--max-len", ev.max_len, "Output length cap (0: 2|X|+10)");
  e->add_option("--predictions", ev.predictions, "Write predictions here, one per line");
  e->add_option("--data", ev.data_dir, "Dataset directory (default: from the checkpoint config)");

  DecodeArgs de;
  auto* d = app.add_subcommand("decode", "Decode sentences from a file");
  d->add_option("--checkpoint", de.checkpoint)->required();
  d->add_option("--input", de.input)->required()->check(CLI::ExistingFile);
  d->add_option("--output", de.output);
  d->add_option("--beam", de.beam, "Beam width (0: greedy)");
  d->add_option("--rho", de.rho, "Length bonus per token");
  d->add_option("--max-len", de.max_len, "Output length cap (0: 2|X|+10)");

  InspectArgs in;
  auto* ic = app.add_subcommand("inspect-critic", "Show the critic's top actions per decoding step");
  ic->add_option("--checkpoint", in.checkpoint)->required();
  ic->add_option("--source", in.source, "Input text")->required();
  ic->add_option("--target", in.target, "Reference text")->required();
  ic->add_option("--top-k", in.top_k);

  OracleArgs orc;
  auto* o = app.add_subcommand("oracle-check", "Run exact-enumeration correctness checks");
  o->add_option("--suite", orc.suite, "identity, bellman, shaping, estimators, beam or all");
  o->add_option("--seed", orc.seed);
  o->add_option("--samples", orc.samples, "Samples per estimator");
  o->add_option("--out", orc.out, "Write the JSON report here");

  CurvesArgs cu;
  auto* c = app.add_subcommand("curves", "Extract learning curves from a metrics log");
  c->add_option("--metrics", cu.metrics)->required()->check(CLI::ExistingFile);
  c->add_option("--metric", cu.metric)->required();
  c->add_option("--split", cu.splits, "Keep only these splits (repeatable)");
  c->add_option("--out", cu.out, "CSV output path");

  std::string info_path;
  bool info_config = false;
  auto* k = app.add_subcommand("ckpt-info", "Describe a checkpoint");
  k->add_option("checkpoint", info_path)->required();
  k->add_flag("--config", info_config, "Also print the stored configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_evaluate(ev);
    if (*d) return cmd_decode(de);
    if (*ic) return cmd_inspect(in);
    if (*o) return cmd_oracle(orc);
    if (*c) return cmd_curves(cu);
    if (*k) return cmd_ckpt_info(info_path, info_config);
  } catch (const ConfigError& err) {
    std::cerr << err.what() << "\n";
    return kExitConfig;
  } catch (const DivergenceError& err) {
    std::cerr << "divergence abort: " << err.what() << "\n";
    return kExitDivergence;
  } catch (const CheckpointError& err) {
    std::cerr << "checkpoint error: " << err.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
