#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "seqac/rewards.hpp"
#include "seqac/rng.hpp"
#include "seqac/vocab.hpp"

namespace seqac {

/// Input X and ground truth Y as token ids (no <eos>).
struct SequencePair {
  Tokens source;
  Tokens target;
  bool operator==(const SequencePair&) const = default;
};

struct CorruptionSpec {
  double eta = 0.3;        // per-symbol replacement probability
  std::size_t clip = 10;   // keep the first `clip` code points
  bool include_original = false;  // replacement may redraw the original symbol

  void validate() const;
  bool operator==(const CorruptionSpec&) const = default;
};

/// First `clip` code points of `line`.
std::string clip_text(std::string_view line, std::size_t clip);

/// X: each position of `clean` is replaced with probability eta by a symbol
/// drawn uniformly from ids [0, alphabet_size), excluding the original unless
/// `include_original`. Y: `clean` itself. Lengths always match.
SequencePair corrupt(const Tokens& clean, const CorruptionSpec& spec, std::size_t alphabet_size,
                     Rng& rng);

/// Reads one sentence per line; drops empty lines, strips '\r', turns tabs into spaces.
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Infinite, seed-determined stream of freshly corrupted training pairs.
/// Lines are visited in a new shuffled order on every pass.
class BatchStream {
 public:
  BatchStream(std::vector<Tokens> clean_lines, CorruptionSpec spec, std::size_t alphabet_size,
              std::size_t batch_size, std::uint64_t seed);

  std::vector<SequencePair> next();
  SequencePair next_example();
  std::uint64_t examples_drawn() const noexcept { return drawn_; }
  std::size_t passes() const noexcept { return passes_; }

 private:
  void reshuffle();

  std::vector<Tokens> lines_;
  CorruptionSpec spec_;
  std::size_t alphabet_;
  std::size_t batch_size_;
  Rng order_rng_;
  Rng noise_rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t passes_ = 0;
  std::uint64_t drawn_ = 0;
};

/// A generated spelling dataset held in memory.
struct SpellingData {
  Vocab vocab;
  CorruptionSpec spec;
  std::vector<Tokens> train;          // clean, clipped lines
  std::vector<SequencePair> valid;
  std::vector<SequencePair> test;
};

struct GenerateOptions {
  CorruptionSpec spec;
  std::uint64_t seed = 1;
  std::size_t valid_size = 2000;
  std::size_t test_size = 2000;
  bool unknown_token = true;
};

/// Clips every line, builds the vocabulary from the clipped text, and
/// holds out corrupted validation/test pairs drawn from a seeded shuffle.
SpellingData generate_spelling_data(const std::vector<std::string>& lines,
                                    const GenerateOptions& options);

/// Writes train.txt, valid.tsv, test.tsv (corrupted<TAB>clean), vocab.json
/// and manifest.txt into `dir`. Output is byte-identical for identical input.
void write_spelling_data(const SpellingData& data, const GenerateOptions& options,
                         const std::string& corpus_name, const std::filesystem::path& dir);
SpellingData load_spelling_data(const std::filesystem::path& dir);

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

std::string vocab_to_json(const Vocab& vocab);
Vocab vocab_from_json(const std::string& text);

/// Tiny task whose whole output space can be enumerated. Actions are
/// symbols [0, num_symbols) plus <eos> = num_symbols; <eos> is forced once
/// a prefix reaches max_len.
struct ToyTask {
  std::size_t num_symbols = 2;
  std::size_t max_len = 2;
  Tokens reference;
  ScoreFunction score;

  std::size_t num_actions() const noexcept { return num_symbols + 1; }
  int eos() const noexcept { return static_cast<int>(num_symbols); }
  double score_of(std::span<const int> prediction) const { return score(prediction, reference); }
};

/// Random toy task: 1..max_symbols symbols, max_len in [1, max_len], a
/// random non-empty reference, and the given score kind.
ToyTask random_toy_task(Rng& rng, std::size_t max_symbols, std::size_t max_len, ScoreKind kind);

}  // namespace seqac
