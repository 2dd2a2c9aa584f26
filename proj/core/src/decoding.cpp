#include "seqac/decoding.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace seqac {

namespace {

int argmax_row(const Tensor& logp, std::size_t row) {
  const std::size_t width = logp.cols();
  std::size_t best = 0;
  for (std::size_t a = 1; a < width; ++a) {
    if (logp.at(row, a) > logp.at(row, best)) best = a;
  }
  return static_cast<int>(best);
}

}  // namespace

Tokens greedy_decode(StepScorer& scorer, std::size_t max_len) {
  if (max_len < 1) throw std::invalid_argument("greedy_decode: max_len must be >= 1");
  Tokens out;
  Tensor logp = scorer.start();
  for (std::size_t t = 0; t < max_len; ++t) {
    const int a = argmax_row(logp, 0);
    if (a == scorer.eos()) break;
    out.push_back(a);
    if (t + 1 < max_len) logp = scorer.extend({0}, {a});
  }
  return out;
}

BeamResult beam_search(StepScorer& scorer, std::size_t width, std::size_t max_len, double rho) {
  if (width < 1) throw std::invalid_argument("beam_search: width must be >= 1");
  if (max_len < 1) throw std::invalid_argument("beam_search: max_len must be >= 1");
  if (rho < 0.0) throw std::invalid_argument("beam_search: rho must be >= 0");

  BeamResult result;
  result.best_cost = std::numeric_limits<double>::infinity();
  auto finish = [&](Hypothesis h) {
    h.finished = true;
    const double cost = penalized_cost(h.log_prob, h.tokens.size(), rho);
    if (cost < result.best_cost) {
      result.best_cost = cost;
      result.best = h;
    }
    result.finished.push_back(std::move(h));
  };

  struct Candidate {
    double log_prob;
    std::size_t parent;
    int token;
  };

  std::vector<Hypothesis> live{Hypothesis{}};
  Tensor logp = scorer.start();
  const int eos = scorer.eos();
  for (std::size_t t = 0; t < max_len && !live.empty(); ++t) {
    ++result.steps;
    std::vector<Candidate> candidates;
    candidates.reserve(live.size() * logp.cols());
    for (std::size_t i = 0; i < live.size(); ++i) {
      for (std::size_t a = 0; a < logp.cols(); ++a) {
        candidates.push_back({live[i].log_prob + logp.at(i, a), i, static_cast<int>(a)});
      }
    }
    const std::size_t keep = std::min(width, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), [](const Candidate& x, const Candidate& y) {
                        if (x.log_prob != y.log_prob) return x.log_prob > y.log_prob;
                        if (x.parent != y.parent) return x.parent < y.parent;
                        return x.token < y.token;
                      });

    struct Extension {
      Hypothesis hyp;
      std::size_t parent;
      int token;
    };
    std::vector<Extension> extensions;
    for (std::size_t k = 0; k < keep; ++k) {
      const Candidate& c = candidates[k];
      Hypothesis h{live[c.parent].tokens, c.log_prob, false};
      if (c.token == eos) {
        finish(std::move(h));
        continue;
      }
      h.tokens.push_back(c.token);
      if (h.tokens.size() == max_len) {
        finish(std::move(h));
        continue;
      }
      extensions.push_back({std::move(h), c.parent, c.token});
    }
    // Log-probabilities only fall and length is capped, so a live
    // hypothesis can at best reach -log p - rho * max_len.
    std::erase_if(extensions, [&](const Extension& e) {
      return penalized_cost(e.hyp.log_prob, max_len, rho) >= result.best_cost;
    });

    live.clear();
    std::vector<std::size_t> parents;
    std::vector<int> tokens;
    for (Extension& e : extensions) {
      parents.push_back(e.parent);
      tokens.push_back(e.token);
      live.push_back(std::move(e.hyp));
    }
    if (live.empty()) break;
    logp = scorer.extend(parents, tokens);
  }
  return result;
}

Tokens greedy_decode(const EncoderDecoder& actor, const ParamSet& params, const Tokens& source,
                     int eos, std::size_t max_len) {
  ActorScorer scorer(actor, params, source, eos);
  return greedy_decode(scorer, max_len);
}

Tokens beam_decode(const EncoderDecoder& actor, const ParamSet& params, const Tokens& source,
                   int eos, std::size_t width, std::size_t max_len, double rho) {
  ActorScorer scorer(actor, params, source, eos);
  return beam_search(scorer, width, max_len, rho).best.tokens;
}

std::vector<Tokens> greedy_decode_all(const EncoderDecoder& actor, const ParamSet& params,
                                      const std::vector<Tokens>& sources, int eos,
                                      std::size_t batch_size, std::size_t max_len) {
  if (batch_size < 1) throw std::invalid_argument("greedy_decode_all: batch size must be >= 1");
  std::vector<Tokens> outputs(sources.size());
  for (std::size_t begin = 0; begin < sources.size(); begin += batch_size) {
    const std::size_t end = std::min(sources.size(), begin + batch_size);
    const std::vector<Tokens> chunk(sources.begin() + static_cast<std::ptrdiff_t>(begin),
                                    sources.begin() + static_cast<std::ptrdiff_t>(end));
    const std::size_t n = chunk.size();
    std::vector<std::size_t> limit(n);
    std::size_t longest = 0;
    for (std::size_t r = 0; r < n; ++r) {
      limit[r] = max_len > 0 ? max_len : default_max_len(chunk[r].size());
      longest = std::max(longest, limit[r]);
    }

    Graph g;
    auto p = actor.bind_frozen(g, params);
    auto enc = actor.encode(g, p, PaddedBatch::from(chunk));
    auto state = EncoderDecoder::initial(enc);
    std::vector<int> prev(n, actor.bos());
    std::vector<bool> done(n, false);
    std::size_t remaining = n;
    for (std::size_t t = 0; t < longest && remaining > 0; ++t) {
      auto st = actor.step(g, p, enc, state, prev);
      state = st.next;
      const Tensor& logp = g.value(g.log_softmax(st.readout));
      for (std::size_t r = 0; r < n; ++r) {
        const int a = argmax_row(logp, r);
        prev[r] = a == eos ? 0 : a;
        if (done[r]) continue;
        if (a == eos) {
          done[r] = true;
          --remaining;
          continue;
        }
        outputs[begin + r].push_back(a);
        if (outputs[begin + r].size() == limit[r]) {
          done[r] = true;
          --remaining;
        }
      }
    }
  }
  return outputs;
}

}  // namespace seqac
