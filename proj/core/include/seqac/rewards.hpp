#pragma once

#include <span>
#include <string>
#include <vector>

namespace seqac {

using Tokens = std::vector<int>;

/// Unit-cost edit distance (insert, delete, substitute).
std::size_t levenshtein(std::span<const int> a, std::span<const int> b);

/// Total edit distance over total reference length. Throws if the lists
/// differ in size or the references are all empty.
double corpus_cer(const std::vector<Tokens>& predictions, const std::vector<Tokens>& references);

enum class ScoreKind { kNegCer, kSmoothedBleu };

ScoreKind parse_score_kind(const std::string& name);
std::string to_string(ScoreKind kind);

/// Sentence-level return R(prediction, reference).
struct ScoreFunction {
  ScoreKind kind = ScoreKind::kNegCer;
  int max_order = 4;
  bool brevity_penalty = true;

  double operator()(std::span<const int> prediction, std::span<const int> reference) const;
  /// Largest |R| attainable for a prediction of at most `max_len` tokens.
  double max_abs_return(std::size_t reference_len, std::size_t max_len) const;
};

/// -levenshtein / |reference|; throws on an empty reference.
double neg_cer(std::span<const int> prediction, std::span<const int> reference);

/// |reference| * BP * prod_n ((m_n + 1) / (c_n + 1))^(1/N), where m_n are
/// clipped n-gram matches and c_n candidate n-gram counts. BP is
/// min(1, exp(1 - |ref|/|pred|)). An empty prediction scores 0.
double smoothed_bleu(std::span<const int> prediction, std::span<const int> reference,
                     int max_order = 4, bool brevity_penalty = true);

/// Per-action rewards for an action sequence (which may end in `eos`).
/// With shaping, each symbol earns R(prefix after) - R(prefix before), where
/// the empty prefix scores 0, and the final <eos> earns whatever is left so
/// the total equals R(prediction). Without shaping, every reward is 0 except
/// the last, which is R(prediction).
std::vector<double> shape_rewards(const ScoreFunction& score, std::span<const int> actions,
                                  std::span<const int> reference, int eos, bool shaping = true);

/// Strips a trailing <eos> (and anything after the first one).
std::span<const int> prediction_of(std::span<const int> actions, int eos);

}  // namespace seqac
