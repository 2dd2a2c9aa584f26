#pragma once

#include <memory>
#include <vector>

#include "seqac/models.hpp"

namespace seqac {

/// Source of next-token log-probabilities for a growing set of hypotheses.
class StepScorer {
 public:
  virtual ~StepScorer() = default;
  virtual std::size_t num_actions() const = 0;
  virtual int eos() const = 0;
  /// Log-probabilities [1, A] for the empty prefix.
  virtual Tensor start() = 0;
  /// Row i continues row parents[i] of the previous call with tokens[i].
  virtual Tensor extend(const std::vector<std::size_t>& parents, const std::vector<int>& tokens) = 0;
};

class ActorScorer final : public StepScorer {
 public:
  ActorScorer(const EncoderDecoder& actor, const ParamSet& params, const Tokens& source, int eos)
      : session_(actor, params, source), eos_(eos) {}
  std::size_t num_actions() const override { return session_.num_actions(); }
  int eos() const override { return eos_; }
  Tensor start() override { return session_.start(); }
  Tensor extend(const std::vector<std::size_t>& parents, const std::vector<int>& tokens) override {
    return session_.extend(parents, tokens);
  }

 private:
  ActorSession session_;
  int eos_;
};

/// Default output bound for a source of `source_len` symbols.
inline std::size_t default_max_len(std::size_t source_len) { return 2 * source_len + 10; }

/// -log p - rho * length; lower is better. `length` excludes <eos>.
inline double penalized_cost(double log_prob, std::size_t length, double rho) {
  return -log_prob - rho * static_cast<double>(length);
}

struct Hypothesis {
  Tokens tokens;  // without <eos>
  double log_prob = 0.0;
  bool finished = false;
};

struct BeamResult {
  Hypothesis best;
  double best_cost = 0.0;
  std::vector<Hypothesis> finished;  // every hypothesis that left the beam finished
  std::size_t steps = 0;
};

/// Emits argmax tokens (ties to the lowest id) until <eos> or max_len symbols.
Tokens greedy_decode(StepScorer& scorer, std::size_t max_len);

/// Beam search over log-probabilities. Finished hypotheses wait in a pool;
/// the length bonus applies only when ranking that pool. Search stops once
/// no live hypothesis can beat the best finished one, or at max_len.
BeamResult beam_search(StepScorer& scorer, std::size_t width, std::size_t max_len, double rho);

Tokens greedy_decode(const EncoderDecoder& actor, const ParamSet& params, const Tokens& source,
                     int eos, std::size_t max_len);
Tokens beam_decode(const EncoderDecoder& actor, const ParamSet& params, const Tokens& source,
                   int eos, std::size_t width, std::size_t max_len, double rho);

/// Greedy decoding of many sources in padded batches of `batch_size`;
/// max_len per source is default_max_len(|source|) unless `max_len` > 0.
std::vector<Tokens> greedy_decode_all(const EncoderDecoder& actor, const ParamSet& params,
                                      const std::vector<Tokens>& sources, int eos,
                                      std::size_t batch_size = 64, std::size_t max_len = 0);

}  // namespace seqac
