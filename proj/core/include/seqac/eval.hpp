#pragma once

#include <string>
#include <vector>

#include "seqac/data.hpp"
#include "seqac/metrics.hpp"
#include "seqac/models.hpp"

namespace seqac {

inline constexpr int kEvalSchemaVersion = 1;

struct DecodeMode {
  bool beam = false;
  std::size_t width = 10;
  double rho = 0.0;
  std::size_t max_len = 0;  // 0: default_max_len(|X|)

  std::string describe() const;  // "greedy" or "beam(width=10,rho=0.8)"
  bool operator==(const DecodeMode&) const = default;
};

struct EvalReport {
  std::string split;
  DecodeMode decode;
  std::string checkpoint;
  std::size_t examples = 0;
  double cer = 0.0;          // corpus character error rate
  double mean_score = 0.0;   // mean sentence return under `score`
  ScoreKind score = ScoreKind::kNegCer;

  std::string to_json() const;
};

/// Decodes every source and scores the predictions. Deterministic.
EvalReport evaluate(const EncoderDecoder& actor, const ParamSet& params,
                    const std::vector<SequencePair>& pairs, int eos, const DecodeMode& decode,
                    ScoreKind score, std::vector<Tokens>* predictions = nullptr);

/// Predictions for every source under the decode mode.
std::vector<Tokens> decode_all(const EncoderDecoder& actor, const ParamSet& params,
                               const std::vector<Tokens>& sources, int eos, const DecodeMode& decode);

struct CriticStepView {
  int chosen = 0;  // token the actor emitted at this step
  std::vector<std::pair<int, double>> top;  // highest critic values, best first
};

/// Greedy-decodes the example with the actor and lists, per step, the top_k
/// actions by critic value given the reference and the decoded prefix.
std::vector<CriticStepView> inspect_critic(const EncoderDecoder& actor, const ParamSet& actor_params,
                                           const EncoderDecoder& critic, const ParamSet& critic_params,
                                           const SequencePair& example, int eos, std::size_t top_k,
                                           std::size_t max_len = 0);

struct CurvePoint {
  std::uint64_t step = 0;
  double value = 0.0;
};
struct CurveSeries {
  std::string phase;
  std::string split;
  std::vector<CurvePoint> points;  // ascending step
};

/// Series of `metric` per (phase, split) in order of first appearance. An
/// empty split filter keeps every split. Throws std::invalid_argument naming
/// the available metrics when `metric` never occurs.
std::vector<CurveSeries> curves(const std::vector<MetricRecord>& records, const std::string& metric,
                                const std::vector<std::string>& splits = {});
/// CSV with columns phase,split,step,value.
std::string curves_csv(const std::vector<CurveSeries>& series);

}  // namespace seqac
