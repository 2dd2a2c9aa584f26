#include "seqac/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include "json.hpp"
#include <sstream>
#include <stdexcept>

namespace seqac {

namespace fs = std::filesystem;

void CorruptionSpec::validate() const {
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw std::invalid_argument("eta must lie in [0, 1], got " + std::to_string(eta));
  }
  if (clip < 1) throw std::invalid_argument("clip must be >= 1");
}

std::string clip_text(std::string_view line, std::size_t clip) {
  std::string out;
  std::size_t count = 0;
  for (const std::string& cp : utf8_split(line)) {
    if (count++ == clip) break;
    out += cp;
  }
  return out;
}

SequencePair corrupt(const Tokens& clean, const CorruptionSpec& spec, std::size_t alphabet_size,
                     Rng& rng) {
  spec.validate();
  if (clean.empty()) throw std::invalid_argument("corrupt: empty sentence");
  const bool exclude = !spec.include_original;
  if (alphabet_size < (exclude ? 2u : 1u)) {
    throw std::invalid_argument("corrupt: alphabet too small for replacement");
  }
  SequencePair pair{clean, clean};
  for (int& x : pair.source) {
    if (rng.uniform() >= spec.eta) continue;
    const bool in_alphabet = x >= 0 && static_cast<std::size_t>(x) < alphabet_size;
    if (exclude && in_alphabet) {
      // Uniform over the alphabet minus the original symbol.
      auto draw = static_cast<int>(rng.index(alphabet_size - 1));
      x = draw >= x ? draw + 1 : draw;
    } else {
      x = static_cast<int>(rng.index(alphabet_size));
    }
  }
  return pair;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    std::erase(line, '\r');
    std::replace(line.begin(), line.end(), '\t', ' ');
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

BatchStream::BatchStream(std::vector<Tokens> clean_lines, CorruptionSpec spec,
                         std::size_t alphabet_size, std::size_t batch_size, std::uint64_t seed)
    : lines_(std::move(clean_lines)),
      spec_(spec),
      alphabet_(alphabet_size),
      batch_size_(batch_size),
      order_rng_(Rng::derive(seed, 0x6f72646572ULL)),
      noise_rng_(Rng::derive(seed, 0x6e6f697365ULL)) {
  spec_.validate();
  if (lines_.empty()) throw std::invalid_argument("BatchStream: no training lines");
  if (batch_size_ < 1) throw std::invalid_argument("BatchStream: batch size must be >= 1");
  order_.resize(lines_.size());
  reshuffle();
}

void BatchStream::reshuffle() {
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  for (std::size_t i = order_.size(); i > 1; --i) {
    std::swap(order_[i - 1], order_[order_rng_.index(i)]);
  }
  cursor_ = 0;
}

SequencePair BatchStream::next_example() {
  if (cursor_ == order_.size()) {
    ++passes_;
    reshuffle();
  }
  ++drawn_;
  return corrupt(lines_[order_[cursor_++]], spec_, alphabet_, noise_rng_);
}

std::vector<SequencePair> BatchStream::next() {
  std::vector<SequencePair> batch;
  batch.reserve(batch_size_);
  for (std::size_t i = 0; i < batch_size_; ++i) batch.push_back(next_example());
  return batch;
}

SpellingData generate_spelling_data(const std::vector<std::string>& lines,
                                    const GenerateOptions& options) {
  options.spec.validate();
  std::vector<std::string> clipped;
  clipped.reserve(lines.size());
  std::string all_text;
  for (const std::string& line : lines) {
    std::string c = clip_text(line, options.spec.clip);
    if (c.empty()) continue;
    all_text += c;
    clipped.push_back(std::move(c));
  }
  if (clipped.empty()) throw std::invalid_argument("generate_spelling_data: empty corpus");
  const std::size_t held_out = options.valid_size + options.test_size;
  if (held_out >= clipped.size()) {
    throw std::invalid_argument("generate_spelling_data: corpus has " +
                                std::to_string(clipped.size()) +
                                " lines, not enough for the held-out splits");
  }

  SpellingData data;
  data.spec = options.spec;
  data.vocab = Vocab::from_text(all_text, options.unknown_token);

  Rng split_rng = Rng::derive(options.seed, 0x73706c6974ULL);
  std::vector<std::size_t> order(clipped.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[split_rng.index(i)]);

  Rng noise = Rng::derive(options.seed, 0x686f6c646f7574ULL);
  const std::size_t alphabet = data.vocab.symbol_count();
  for (std::size_t k = 0; k < order.size(); ++k) {
    Tokens ids = data.vocab.encode(clipped[order[k]]);
    if (k < options.valid_size) {
      data.valid.push_back(corrupt(ids, options.spec, alphabet, noise));
    } else if (k < held_out) {
      data.test.push_back(corrupt(ids, options.spec, alphabet, noise));
    } else {
      data.train.push_back(std::move(ids));
    }
  }
  return data;
}

std::string vocab_to_json(const Vocab& vocab) {
  nlohmann::ordered_json j;
  j["tokens"] = vocab.tokens();
  j["eos"] = vocab.eos();
  j["unk"] = vocab.unk() ? nlohmann::ordered_json(*vocab.unk()) : nlohmann::ordered_json(nullptr);
  return j.dump(1) + "\n";
}

Vocab vocab_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  Vocab vocab(j.at("tokens").get<std::vector<std::string>>());
  if (j.at("eos").get<int>() != vocab.eos()) throw std::invalid_argument("vocab.json: eos id mismatch");
  return vocab;
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string pairs_tsv(const Vocab& vocab, const std::vector<SequencePair>& pairs) {
  std::string out;
  for (const SequencePair& p : pairs) {
    out += vocab.decode(p.source);
    out += '\t';
    out += vocab.decode(p.target);
    out += '\n';
  }
  return out;
}

std::vector<SequencePair> read_pairs(const Vocab& vocab, const fs::path& path) {
  std::vector<SequencePair> pairs;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error("'" + path.string() + "': line without tab separator");
    }
    pairs.push_back({vocab.encode(line.substr(0, tab)), vocab.encode(line.substr(tab + 1))});
  }
  return pairs;
}

// Shortest text that parses back to the same double.
std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

}  // namespace

void write_spelling_data(const SpellingData& data, const GenerateOptions& options,
                         const std::string& corpus_name, const fs::path& dir) {
  fs::create_directories(dir);
  std::string train;
  for (const Tokens& t : data.train) {
    train += data.vocab.decode(t);
    train += '\n';
  }
  write_file(dir / "train.txt", train);
  write_file(dir / "valid.tsv", pairs_tsv(data.vocab, data.valid));
  write_file(dir / "test.tsv", pairs_tsv(data.vocab, data.test));
  write_file(dir / "vocab.json", vocab_to_json(data.vocab));

  std::ostringstream manifest;
  manifest << "corpus=" << corpus_name << "\n"
           << "eta=" << format_double(data.spec.eta) << "\n"
           << "clip=" << data.spec.clip << "\n"
           << "include_original=" << (data.spec.include_original ? "true" : "false") << "\n"
           << "seed=" << options.seed << "\n"
           << "train_size=" << data.train.size() << "\n"
           << "valid_size=" << data.valid.size() << "\n"
           << "test_size=" << data.test.size() << "\n"
           << "vocab_size=" << data.vocab.size() << "\n"
           << "train=train.txt\nvalid=valid.tsv\ntest=test.tsv\nvocab=vocab.json\n";
  write_file(dir / "manifest.txt", manifest.str());
}

std::map<std::string, std::string> read_key_values(const fs::path& path) {
  std::map<std::string, std::string> kv;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("'" + path.string() + "': expected key=value, got '" + line + "'");
    }
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

SpellingData load_spelling_data(const fs::path& dir) {
  const auto manifest = read_key_values(dir / "manifest.txt");
  SpellingData data;
  data.vocab = vocab_from_json(read_file(dir / manifest.at("vocab")));
  data.spec.eta = std::stod(manifest.at("eta"));
  data.spec.clip = std::stoul(manifest.at("clip"));
  data.spec.include_original = manifest.at("include_original") == "true";
  for (const std::string& line : read_lines(dir / manifest.at("train"))) {
    data.train.push_back(data.vocab.encode(line));
  }
  data.valid = read_pairs(data.vocab, dir / manifest.at("valid"));
  data.test = read_pairs(data.vocab, dir / manifest.at("test"));
  return data;
}

ToyTask random_toy_task(Rng& rng, std::size_t max_symbols, std::size_t max_len, ScoreKind kind) {
  if (max_symbols < 1 || max_len < 1) throw std::invalid_argument("random_toy_task: empty task");
  ToyTask task;
  task.num_symbols = 1 + rng.index(max_symbols);
  task.max_len = 1 + rng.index(max_len);
  const std::size_t ref_len = 1 + rng.index(task.max_len);
  for (std::size_t i = 0; i < ref_len; ++i) {
    task.reference.push_back(static_cast<int>(rng.index(task.num_symbols)));
  }
  task.score.kind = kind;
  return task;
}

}  // namespace seqac
