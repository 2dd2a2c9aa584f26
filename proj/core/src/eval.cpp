#include "seqac/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "seqac/decoding.hpp"

namespace seqac {

std::string DecodeMode::describe() const {
  if (!beam) return "greedy";
  std::ostringstream os;
  os << "beam(width=" << width << ",rho=" << rho << ")";
  return os.str();
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["schema_version"] = kEvalSchemaVersion;
  j["split"] = split;
  j["checkpoint"] = checkpoint;
  nlohmann::ordered_json d;
  d["mode"] = decode.beam ? "beam" : "greedy";
  if (decode.beam) {
    d["width"] = decode.width;
    d["rho"] = decode.rho;
  }
  d["max_len"] = decode.max_len;
  j["decode"] = d;
  j["examples"] = examples;
  j["score_kind"] = to_string(score);
  j["cer"] = cer;
  j["mean_score"] = mean_score;
  return j.dump(2) + "\n";
}

std::vector<Tokens> decode_all(const EncoderDecoder& actor, const ParamSet& params,
                               const std::vector<Tokens>& sources, int eos, const DecodeMode& decode) {
  if (!decode.beam) return greedy_decode_all(actor, params, sources, eos, 64, decode.max_len);
  std::vector<Tokens> out;
  out.reserve(sources.size());
  for (const Tokens& src : sources) {
    const std::size_t max_len = decode.max_len > 0 ? decode.max_len : default_max_len(src.size());
    out.push_back(beam_decode(actor, params, src, eos, decode.width, max_len, decode.rho));
  }
  return out;
}

EvalReport evaluate(const EncoderDecoder& actor, const ParamSet& params,
                    const std::vector<SequencePair>& pairs, int eos, const DecodeMode& decode,
                    ScoreKind score, std::vector<Tokens>* predictions) {
  if (pairs.empty()) throw std::invalid_argument("evaluate: empty dataset");
  std::vector<Tokens> sources, targets;
  for (const auto& p : pairs) {
    sources.push_back(p.source);
    targets.push_back(p.target);
  }
  std::vector<Tokens> preds = decode_all(actor, params, sources, eos, decode);
  EvalReport r;
  r.decode = decode;
  r.examples = pairs.size();
  r.score = score;
  r.cer = corpus_cer(preds, targets);
  ScoreFunction fn;
  fn.kind = score;
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) total += fn(preds[i], targets[i]);
  r.mean_score = total / static_cast<double>(preds.size());
  if (!std::isfinite(r.cer) || !std::isfinite(r.mean_score)) {
    throw std::runtime_error("evaluate: non-finite metric");
  }
  if (predictions) *predictions = std::move(preds);
  return r;
}

std::vector<CriticStepView> inspect_critic(const EncoderDecoder& actor, const ParamSet& actor_params,
                                           const EncoderDecoder& critic, const ParamSet& critic_params,
                                           const SequencePair& example, int eos, std::size_t top_k,
                                           std::size_t max_len) {
  if (max_len == 0) max_len = default_max_len(example.source.size());
  Tokens actions = greedy_decode(actor, actor_params, example.source, eos, max_len);
  if (actions.size() < max_len) actions.push_back(eos);

  std::vector<std::vector<double>> states;
  if (critic.dims().extra_input > 0) {
    // The critic reads the actor's decoder states along the decoded prefix.
    ActorSession session(actor, actor_params, example.source);
    session.start();
    for (std::size_t t = 0; t < actions.size(); ++t) {
      const Tensor& s = session.states();
      states.emplace_back(s.values().begin(), s.values().end());
      if (t + 1 < actions.size()) session.extend({0}, {actions[t]});
    }
  }
  const auto values = critic_values(critic, critic_params, example.target, actions,
                                    states.empty() ? nullptr : &states);
  std::vector<CriticStepView> out;
  for (std::size_t t = 0; t < actions.size(); ++t) {
    CriticStepView view;
    view.chosen = actions[t];
    std::vector<int> order(values[t].size());
    for (std::size_t a = 0; a < order.size(); ++a) order[a] = static_cast<int>(a);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return values[t][static_cast<std::size_t>(a)] > values[t][static_cast<std::size_t>(b)];
    });
    for (std::size_t k = 0; k < std::min(top_k, order.size()); ++k) {
      view.top.emplace_back(order[k], values[t][static_cast<std::size_t>(order[k])]);
    }
    out.push_back(std::move(view));
  }
  return out;
}

std::vector<CurveSeries> curves(const std::vector<MetricRecord>& records, const std::string& metric,
                                const std::vector<std::string>& splits) {
  std::vector<CurveSeries> out;
  std::set<std::string> available;
  for (const MetricRecord& r : records) {
    available.insert(r.metric);
    if (r.metric != metric) continue;
    if (!splits.empty() && std::find(splits.begin(), splits.end(), r.split) == splits.end()) continue;
    auto it = std::find_if(out.begin(), out.end(), [&](const CurveSeries& s) {
      return s.phase == r.phase && s.split == r.split;
    });
    if (it == out.end()) {
      out.push_back({r.phase, r.split, {}});
      it = out.end() - 1;
    }
    it->points.push_back({r.step, r.value});
  }
  if (!available.count(metric)) {
    std::string list;
    for (const auto& m : available) list += (list.empty() ? "" : ", ") + m;
    throw std::invalid_argument("unknown metric '" + metric + "'; available: " +
                                (list.empty() ? "(none)" : list));
  }
  for (CurveSeries& s : out) {
    std::stable_sort(s.points.begin(), s.points.end(),
                     [](const CurvePoint& a, const CurvePoint& b) { return a.step < b.step; });
  }
  return out;
}

std::string curves_csv(const std::vector<CurveSeries>& series) {
  std::ostringstream os;
  os.precision(17);
  os << "phase,split,step,value\n";
  for (const CurveSeries& s : series) {
    for (const CurvePoint& p : s.points) os << s.phase << ',' << s.split << ',' << p.step << ',' << p.value << '\n';
  }
  return os.str();
}

}  // namespace seqac
