#include "seqac/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace seqac {

std::size_t levenshtein(std::span<const int> a, std::span<const int> b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({up + 1, row[j - 1] + 1, sub});
      diag = up;
    }
  }
  return row[b.size()];
}

double corpus_cer(const std::vector<Tokens>& predictions, const std::vector<Tokens>& references) {
  if (predictions.size() != references.size()) {
    throw std::invalid_argument("corpus_cer: " + std::to_string(predictions.size()) +
                                " predictions for " + std::to_string(references.size()) +
                                " references");
  }
  std::size_t distance = 0;
  std::size_t length = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    distance += levenshtein(predictions[i], references[i]);
    length += references[i].size();
  }
  if (length == 0) throw std::invalid_argument("corpus_cer: total reference length is zero");
  return static_cast<double>(distance) / static_cast<double>(length);
}

ScoreKind parse_score_kind(const std::string& name) {
  if (name == "neg-cer") return ScoreKind::kNegCer;
  if (name == "bleu") return ScoreKind::kSmoothedBleu;
  throw std::invalid_argument("unknown score kind '" + name + "' (expected neg-cer or bleu)");
}

std::string to_string(ScoreKind kind) {
  return kind == ScoreKind::kNegCer ? "neg-cer" : "bleu";
}

double neg_cer(std::span<const int> prediction, std::span<const int> reference) {
  if (reference.empty()) throw std::invalid_argument("neg_cer: empty reference");
  return -static_cast<double>(levenshtein(prediction, reference)) /
         static_cast<double>(reference.size());
}

namespace {

using NgramCounts = std::map<std::vector<int>, std::size_t>;

NgramCounts count_ngrams(std::span<const int> seq, std::size_t n) {
  NgramCounts counts;
  if (seq.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    ++counts[std::vector<int>(seq.begin() + static_cast<std::ptrdiff_t>(i),
                              seq.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

double smoothed_bleu(std::span<const int> prediction, std::span<const int> reference,
                     int max_order, bool brevity_penalty) {
  if (max_order < 1) throw std::invalid_argument("smoothed_bleu: max_order must be >= 1");
  if (prediction.empty()) return 0.0;
  double log_precision = 0.0;
  for (int n = 1; n <= max_order; ++n) {
    const auto order = static_cast<std::size_t>(n);
    const NgramCounts cand = count_ngrams(prediction, order);
    const NgramCounts ref = count_ngrams(reference, order);
    std::size_t matches = 0;
    for (const auto& [gram, count] : cand) {
      auto it = ref.find(gram);
      if (it != ref.end()) matches += std::min(count, it->second);
    }
    const std::size_t total = prediction.size() >= order ? prediction.size() - order + 1 : 0;
    log_precision += std::log((static_cast<double>(matches) + 1.0) / (static_cast<double>(total) + 1.0));
  }
  double score = std::exp(log_precision / max_order);
  if (brevity_penalty) {
    const double ratio = static_cast<double>(reference.size()) / static_cast<double>(prediction.size());
    score *= std::min(1.0, std::exp(1.0 - ratio));
  }
  return static_cast<double>(reference.size()) * score;
}

double ScoreFunction::operator()(std::span<const int> prediction,
                                 std::span<const int> reference) const {
  if (kind == ScoreKind::kNegCer) return neg_cer(prediction, reference);
  if (reference.empty()) throw std::invalid_argument("smoothed_bleu: empty reference");
  return smoothed_bleu(prediction, reference, max_order, brevity_penalty);
}

double ScoreFunction::max_abs_return(std::size_t reference_len, std::size_t max_len) const {
  const double ref = static_cast<double>(std::max<std::size_t>(reference_len, 1));
  if (kind == ScoreKind::kNegCer) {
    return static_cast<double>(std::max(reference_len, max_len)) / ref;
  }
  return ref;
}

std::span<const int> prediction_of(std::span<const int> actions, int eos) {
  auto it = std::find(actions.begin(), actions.end(), eos);
  return actions.first(static_cast<std::size_t>(it - actions.begin()));
}

std::vector<double> shape_rewards(const ScoreFunction& score, std::span<const int> actions,
                                  std::span<const int> reference, int eos, bool shaping) {
  std::vector<double> rewards(actions.size(), 0.0);
  if (actions.empty()) return rewards;
  const std::span<const int> prediction = prediction_of(actions, eos);
  if (!shaping) {
    rewards.back() = score(prediction, reference);
    return rewards;
  }
  double previous = 0.0;  // potential of the empty prefix
  for (std::size_t t = 0; t < actions.size(); ++t) {
    if (actions[t] == eos || t >= prediction.size()) {
      // Completing the sequence turns the potential into the true return.
      const double final_score = score(prediction, reference);
      rewards[t] = final_score - previous;
      previous = final_score;
      continue;
    }
    const double current = score(prediction.first(t + 1), reference);
    rewards[t] = current - previous;
    previous = current;
  }
  return rewards;
}

}  // namespace seqac
