#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace seqac {

/// Splits UTF-8 text into code points, each kept as its own byte string.
/// Throws std::invalid_argument on malformed input.
std::vector<std::string> utf8_split(std::string_view text);

/// Token <-> id map. Layout: symbols in code-point order, then the
/// end-of-sequence token, then (optionally) the unknown-symbol token.
class Vocab {
 public:
  static constexpr std::string_view kEos = "<eos>";
  static constexpr std::string_view kUnk = "<unk>";

  Vocab() = default;
  /// Restores a vocabulary from its full token list (as stored on disk).
  explicit Vocab(std::vector<std::string> tokens);

  /// Every distinct code point of `text`; throws if there is none.
  static Vocab from_text(std::string_view text, bool with_unknown = true);
  static Vocab from_symbols(std::vector<std::string> symbols, bool with_unknown = true);

  std::size_t size() const noexcept { return tokens_.size(); }
  /// Number of ordinary symbols (ids [0, symbol_count())).
  std::size_t symbol_count() const noexcept { return symbols_; }
  int eos() const noexcept { return eos_; }
  std::optional<int> unk() const noexcept { return unk_; }

  const std::string& token(int id) const;
  std::optional<int> find(std::string_view token) const;
  int id(std::string_view token) const;
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  /// One id per code point. Unknown code points map to <unk>, or throw
  /// std::out_of_range when the vocabulary has none.
  std::vector<int> encode(std::string_view text) const;
  /// Concatenates tokens up to (not including) the first <eos>.
  std::string decode(std::span<const int> ids) const;

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  std::size_t symbols_ = 0;
  int eos_ = -1;
  std::optional<int> unk_;
};

}  // namespace seqac
