#pragma once

#include <string>
#include <vector>

#include "seqac/graph.hpp"
#include "seqac/params.hpp"
#include "seqac/rewards.hpp"
#include "seqac/rng.hpp"

namespace seqac {

struct NetDims {
  std::size_t vocab = 0;        // |A|, including <eos>
  std::size_t embed = 32;
  std::size_t hidden = 64;      // encoder/decoder GRU units and attention width
  std::size_t outputs = 0;      // readout width
  std::size_t extra_input = 0;  // width of an optional external readout input

  bool operator==(const NetDims&) const = default;
};

/// Sequences padded to a common length. mask[b, j] = 1 on real positions.
struct PaddedBatch {
  std::size_t batch = 0;
  std::size_t len = 0;
  std::vector<int> ids;  // row-major [batch, len]
  Tensor mask;
  std::vector<std::size_t> lengths;

  static PaddedBatch from(const std::vector<Tokens>& sequences, int pad = 0);
  std::vector<int> column(std::size_t j) const;
  Tensor mask_column(std::size_t j) const;  // [batch, 1]
  bool column_full(std::size_t j) const;
};

/// Attention encoder-decoder: embeddings, bidirectional GRU encoder, GRU
/// decoder fed [e(previous token); previous context], additive attention
/// over the encoder annotations, and a linear readout of [state; context].
/// Used both for the actor (readout = logits) and the critic (readout =
/// one value per action, optionally also reading an external vector).
///
/// Parameter names, all under `prefix`:
///   src_embed [V,E]; enc_fwd.*, enc_bwd.* (GRU, input E, units H);
///   init.w [H,H], init.b [H]   decoder start state from the backward encoder state at position 0;
///   tgt_embed [V+1,E]          row V is the beginning-of-sequence input;
///   dec.* (GRU, input E+2H);   att.wk [2H,H], att.wq [H,H], att.v [H];
///   out.w [3H+extra, outputs], out.b [outputs].
/// A GRU block holds wx [in,3H], bx [3H], uzr [H,2H], un [H,H] with gate
/// order (update, reset, candidate).
class EncoderDecoder {
 public:
  EncoderDecoder() = default;
  EncoderDecoder(std::string prefix, NetDims dims);

  const std::string& prefix() const noexcept { return prefix_; }
  const NetDims& dims() const noexcept { return dims_; }
  int bos() const noexcept { return static_cast<int>(dims_.vocab); }

  /// Adds zero-filled tensors for every parameter.
  void declare(ParamSet& params) const;
  std::vector<std::string> param_names() const;

  struct Gru {
    Var wx, bx, uzr, un;
  };
  struct Bound {
    Var src_embed, init_w, init_b, tgt_embed, att_wk, att_wq, att_v, out_w, out_b;
    Gru enc_fwd, enc_bwd, dec;
  };
  Bound bind(Graph& g, ParamSet& params) const;
  Bound bind_frozen(Graph& g, const ParamSet& params) const;

  struct Encoded {
    Var annotations;  // [B,L,2H]
    Var keys;         // [B,L,H] projected annotations
    Tensor mask;      // [B,L]
    Var init_state;   // [B,H]
    Var init_context; // [B,2H]
  };
  Encoded encode(Graph& g, const Bound& p, const PaddedBatch& source) const;
  /// Rows of an encoding (e.g. one source replicated across hypotheses).
  static Encoded select(Graph& g, const Encoded& e, const std::vector<std::size_t>& rows);

  struct State {
    Var hidden;
    Var context;
  };
  static State initial(const Encoded& e) { return {e.init_state, e.init_context}; }
  static State select(Graph& g, const State& s, const std::vector<std::size_t>& rows);

  struct Attention {
    Var weights;  // [B,L]
    Var context;  // [B,2H]
  };
  Attention attend(Graph& g, const Bound& p, const Encoded& e, Var query) const;

  struct Step {
    State next;
    Var readout;    // [B, outputs]
    Var attention;  // [B, L]
  };
  /// Consumes `prev_tokens` (one per row; bos() at the start) and emits the
  /// readout for the next position. `extra` is [B, extra_input] when used.
  Step step(Graph& g, const Bound& p, const Encoded& e, const State& prev,
            const std::vector<int>& prev_tokens, Var extra = {}) const;

  struct Unrolled {
    std::vector<Var> readout;  // per step [B, outputs]
    std::vector<Var> states;   // per step [B, H]
    std::vector<Var> attention;
  };
  /// Teacher-forced run: step t consumes column t-1 of `outputs` (bos() at
  /// t = 0) and predicts column t. Produces outputs.len steps. `extra`, when
  /// given, holds one [B, extra_input] tensor per step.
  Unrolled unroll(Graph& g, const Bound& p, const Encoded& e, const PaddedBatch& outputs,
                  const std::vector<Tensor>* extra = nullptr) const;

 private:
  Bound bind_impl(Graph& g, const ParamSet& params, bool trainable) const;

  std::string prefix_;
  NetDims dims_;
};

EncoderDecoder make_actor(std::size_t vocab, std::size_t embed, std::size_t hidden);
/// actor_state_width > 0 makes the critic read actor decoder states.
EncoderDecoder make_critic(std::size_t vocab, std::size_t embed, std::size_t hidden,
                           std::size_t actor_state_width = 0);

/// b(s) = s . w + b, read from actor decoder states.
class LinearBaseline {
 public:
  LinearBaseline() = default;
  explicit LinearBaseline(std::size_t input_width, std::string prefix = "baseline.");
  void declare(ParamSet& params) const;
  std::size_t input_width() const noexcept { return input_; }
  /// [B, input] -> [B, 1]
  Var predict(Graph& g, ParamSet& params, Var states) const;
  double predict(const ParamSet& params, std::span<const double> state) const;

 private:
  std::string prefix_;
  std::size_t input_ = 0;
};

/// Appends <eos> to every sequence.
std::vector<Tokens> with_eos(const std::vector<Tokens>& sequences, int eos);

/// Masked teacher-forced log-likelihood of `targets` (each followed by
/// <eos>) given `sources`, summed over the batch. Also returns per-sequence
/// sums when `per_sequence` is given.
Var log_likelihood(Graph& g, const EncoderDecoder& actor, const EncoderDecoder::Bound& p,
                   const std::vector<Tokens>& sources, const std::vector<Tokens>& targets,
                   int eos, std::vector<double>* per_sequence = nullptr);

/// Incremental actor evaluation over one source sentence, used for sampling
/// and decoding. Hypotheses are rows; extend() derives a new set of rows from
/// parents of the previous set.
class ActorSession {
 public:
  ActorSession(const EncoderDecoder& actor, const ParamSet& params, const Tokens& source);

  std::size_t num_actions() const noexcept { return actor_->dims().outputs; }
  /// Log-probabilities [1, A] of the first token.
  Tensor start();
  /// Row i continues hypothesis parents[i] with tokens[i]; returns [n, A].
  Tensor extend(const std::vector<std::size_t>& parents, const std::vector<int>& tokens);
  /// Decoder states [n, H] that produced the latest distributions.
  const Tensor& states() const { return graph_.value(state_.hidden); }

 private:
  const EncoderDecoder* actor_;
  Graph graph_;
  EncoderDecoder::Bound bound_;
  EncoderDecoder::Encoded encoded_;
  EncoderDecoder::Encoded rows_;
  EncoderDecoder::State state_;
  std::size_t count_ = 0;
};

/// A sequence drawn from an actor.
struct SampledSequence {
  Tokens actions;                            // may end with <eos>
  bool finished = false;                     // false when max_len cut it off
  std::vector<std::vector<double>> policy;   // distribution at each step
  std::vector<std::vector<double>> states;   // actor decoder state at each step
  double log_prob = 0.0;
};

/// Samples up to max_len symbols, stopping after <eos>.
SampledSequence sample_sequence(const EncoderDecoder& actor, const ParamSet& params,
                                const Tokens& source, int eos, std::size_t max_len, Rng& rng);

/// Critic values Q(a; prefix) for every step of `actions` (T rows of |A|).
/// Step t sees the reference and actions[0..t-1] only.
std::vector<std::vector<double>> critic_values(const EncoderDecoder& critic,
                                               const ParamSet& params, const Tokens& reference,
                                               const Tokens& actions,
                                               const std::vector<std::vector<double>>* actor_states = nullptr);

}  // namespace seqac
