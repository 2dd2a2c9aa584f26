#include "seqac/vocab.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace seqac {

std::vector<std::string> utf8_split(std::string_view text) {
  std::vector<std::string> out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 0;
    if (lead < 0x80) {
      len = 1;
    } else if ((lead & 0xE0) == 0xC0) {
      len = 2;
    } else if ((lead & 0xF0) == 0xE0) {
      len = 3;
    } else if ((lead & 0xF8) == 0xF0) {
      len = 4;
    } else {
      throw std::invalid_argument("utf8_split: invalid lead byte at offset " + std::to_string(i));
    }
    if (i + len > text.size()) {
      throw std::invalid_argument("utf8_split: truncated sequence at offset " + std::to_string(i));
    }
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) {
        throw std::invalid_argument("utf8_split: invalid continuation byte at offset " +
                                    std::to_string(i + k));
      }
    }
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw std::invalid_argument("Vocab: duplicate token '" + tokens_[i] + "'");
    }
  }
  auto eos = index_.find(std::string(kEos));
  if (eos == index_.end()) throw std::invalid_argument("Vocab: missing end-of-sequence token");
  eos_ = eos->second;
  symbols_ = static_cast<std::size_t>(eos_);
  if (auto unk = index_.find(std::string(kUnk)); unk != index_.end()) unk_ = unk->second;
  const std::size_t specials = unk_ ? 2 : 1;
  if (symbols_ + specials != tokens_.size() || (unk_ && *unk_ != eos_ + 1)) {
    throw std::invalid_argument("Vocab: special tokens must follow all symbols");
  }
}

Vocab Vocab::from_symbols(std::vector<std::string> symbols, bool with_unknown) {
  // Byte order of UTF-8 strings equals code-point order.
  std::sort(symbols.begin(), symbols.end());
  symbols.erase(std::unique(symbols.begin(), symbols.end()), symbols.end());
  if (symbols.empty()) throw std::invalid_argument("Vocab: empty symbol set");
  symbols.emplace_back(kEos);
  if (with_unknown) symbols.emplace_back(kUnk);
  return Vocab(std::move(symbols));
}

Vocab Vocab::from_text(std::string_view text, bool with_unknown) {
  std::set<std::string> distinct;
  for (std::string& cp : utf8_split(text)) {
    if (cp != "\n" && cp != "\r") distinct.insert(std::move(cp));
  }
  return from_symbols({distinct.begin(), distinct.end()}, with_unknown);
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("Vocab: id " + std::to_string(id) + " outside [0, " +
                            std::to_string(tokens_.size()) + ")");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::optional<int> Vocab::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Vocab::id(std::string_view token) const {
  if (auto found = find(token)) return *found;
  throw std::out_of_range("Vocab: unknown token '" + std::string(token) + "'");
}

std::vector<int> Vocab::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const std::string& cp : utf8_split(text)) {
    auto it = index_.find(cp);
    if (it != index_.end() && it->second < eos_) {
      ids.push_back(it->second);
    } else if (unk_) {
      ids.push_back(*unk_);
    } else {
      throw std::out_of_range("Vocab: symbol '" + cp + "' not in vocabulary");
    }
  }
  return ids;
}

std::string Vocab::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id == eos_) break;
    out += token(id);
  }
  return out;
}

}  // namespace seqac
