#include "seqac/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace seqac {

PaddedBatch PaddedBatch::from(const std::vector<Tokens>& sequences, int pad) {
  PaddedBatch b;
  b.batch = sequences.size();
  for (const Tokens& s : sequences) b.len = std::max(b.len, s.size());
  b.ids.assign(b.batch * b.len, pad);
  b.mask = Tensor({b.batch, b.len});
  for (std::size_t r = 0; r < b.batch; ++r) {
    b.lengths.push_back(sequences[r].size());
    for (std::size_t j = 0; j < sequences[r].size(); ++j) {
      b.ids[r * b.len + j] = sequences[r][j];
      b.mask.at(r, j) = 1.0;
    }
  }
  return b;
}

std::vector<int> PaddedBatch::column(std::size_t j) const {
  std::vector<int> col(batch);
  for (std::size_t r = 0; r < batch; ++r) col[r] = ids[r * len + j];
  return col;
}

Tensor PaddedBatch::mask_column(std::size_t j) const {
  Tensor col({batch, 1});
  for (std::size_t r = 0; r < batch; ++r) col[r] = mask.at(r, j);
  return col;
}

bool PaddedBatch::column_full(std::size_t j) const {
  for (std::size_t r = 0; r < batch; ++r) {
    if (lengths[r] <= j) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

EncoderDecoder::EncoderDecoder(std::string prefix, NetDims dims)
    : prefix_(std::move(prefix)), dims_(dims) {
  if (dims_.vocab == 0 || dims_.embed == 0 || dims_.hidden == 0 || dims_.outputs == 0) {
    throw std::invalid_argument("EncoderDecoder: all dimensions must be positive");
  }
}

namespace {

void declare_gru(ParamSet& params, const std::string& name, std::size_t in, std::size_t units) {
  params.add(name + ".wx", {in, 3 * units});
  params.add(name + ".bx", {3 * units});
  params.add(name + ".uzr", {units, 2 * units});
  params.add(name + ".un", {units, units});
}

}  // namespace

void EncoderDecoder::declare(ParamSet& params) const {
  const std::size_t V = dims_.vocab, E = dims_.embed, H = dims_.hidden;
  params.add(prefix_ + "src_embed", {V, E});
  declare_gru(params, prefix_ + "enc_fwd", E, H);
  declare_gru(params, prefix_ + "enc_bwd", E, H);
  params.add(prefix_ + "init.w", {H, H});
  params.add(prefix_ + "init.b", {H});
  params.add(prefix_ + "tgt_embed", {V + 1, E});
  declare_gru(params, prefix_ + "dec", E + 2 * H, H);
  params.add(prefix_ + "att.wk", {2 * H, H});
  params.add(prefix_ + "att.wq", {H, H});
  params.add(prefix_ + "att.v", {H});
  params.add(prefix_ + "out.w", {3 * H + dims_.extra_input, dims_.outputs});
  params.add(prefix_ + "out.b", {dims_.outputs});
}

std::vector<std::string> EncoderDecoder::param_names() const {
  ParamSet scratch;
  declare(scratch);
  std::vector<std::string> names;
  for (const auto& [name, t] : scratch) names.push_back(name);
  return names;
}

EncoderDecoder::Bound EncoderDecoder::bind_impl(Graph& g, const ParamSet& params,
                                                bool trainable) const {
  auto leaf = [&](const std::string& name) {
    const std::string full = prefix_ + name;
    return trainable ? g.param(const_cast<ParamSet&>(params), full) : g.frozen(params, full);
  };
  auto gru = [&](const std::string& name) {
    return Gru{leaf(name + ".wx"), leaf(name + ".bx"), leaf(name + ".uzr"), leaf(name + ".un")};
  };
  Bound b;
  b.src_embed = leaf("src_embed");
  b.enc_fwd = gru("enc_fwd");
  b.enc_bwd = gru("enc_bwd");
  b.init_w = leaf("init.w");
  b.init_b = leaf("init.b");
  b.tgt_embed = leaf("tgt_embed");
  b.dec = gru("dec");
  b.att_wk = leaf("att.wk");
  b.att_wq = leaf("att.wq");
  b.att_v = leaf("att.v");
  b.out_w = leaf("out.w");
  b.out_b = leaf("out.b");
  return b;
}

EncoderDecoder::Bound EncoderDecoder::bind(Graph& g, ParamSet& params) const {
  return bind_impl(g, params, true);
}

EncoderDecoder::Bound EncoderDecoder::bind_frozen(Graph& g, const ParamSet& params) const {
  return bind_impl(g, params, false);
}

namespace {

// h' = n + z * (h - n), with z = sigmoid(x Wz + h Uz + bz),
// r = sigmoid(x Wr + h Ur + br), n = tanh(x Wn + bn + (r * h) Un).
Var gru_cell(Graph& g, const EncoderDecoder::Gru& w, Var x, Var h, std::size_t units) {
  Var xw = g.affine(x, w.wx, w.bx);
  Var zr = g.sigmoid(g.add(g.slice(xw, 0, 2 * units), g.matmul(h, w.uzr)));
  Var z = g.slice(zr, 0, units);
  Var r = g.slice(zr, units, 2 * units);
  Var n = g.tanh(g.add(g.slice(xw, 2 * units, 3 * units), g.matmul(g.mul(r, h), w.un)));
  return g.add(n, g.mul(z, g.sub(h, n)));
}

std::vector<double> keep_weights(const PaddedBatch& b, std::size_t j) {
  std::vector<double> keep(b.batch);
  for (std::size_t r = 0; r < b.batch; ++r) keep[r] = b.lengths[r] > j ? 1.0 : 0.0;
  return keep;
}

}  // namespace

EncoderDecoder::Encoded EncoderDecoder::encode(Graph& g, const Bound& p,
                                               const PaddedBatch& source) const {
  if (source.batch == 0 || source.len == 0) throw ShapeError("encode: empty source batch");
  for (std::size_t len : source.lengths) {
    if (len == 0) throw ShapeError("encode: empty source sequence");
  }
  const std::size_t B = source.batch, L = source.len, H = dims_.hidden;
  std::vector<Var> inputs(L);
  for (std::size_t j = 0; j < L; ++j) inputs[j] = g.embed(p.src_embed, source.column(j));

  const Var zero = g.constant(Tensor({B, H}));
  std::vector<Var> fwd(L), bwd(L);
  Var h = zero;
  for (std::size_t j = 0; j < L; ++j) {
    Var next = gru_cell(g, p.enc_fwd, inputs[j], h, H);
    h = source.column_full(j) ? next : g.blend_rows(next, h, keep_weights(source, j));
    fwd[j] = h;
  }
  h = zero;
  for (std::size_t j = L; j-- > 0;) {
    Var next = gru_cell(g, p.enc_bwd, inputs[j], h, H);
    h = source.column_full(j) ? next : g.blend_rows(next, h, keep_weights(source, j));
    bwd[j] = h;
  }
  std::vector<Var> annotations(L);
  for (std::size_t j = 0; j < L; ++j) annotations[j] = g.concat({fwd[j], bwd[j]});

  Encoded e;
  e.annotations = g.stack(annotations);
  e.keys = g.reshape(g.matmul(g.reshape(e.annotations, {B * L, 2 * H}), p.att_wk), {B, L, H});
  e.mask = source.mask;
  e.init_state = g.tanh(g.affine(bwd[0], p.init_w, p.init_b));
  e.init_context = attend(g, p, e, e.init_state).context;
  return e;
}

EncoderDecoder::Encoded EncoderDecoder::select(Graph& g, const Encoded& e,
                                               const std::vector<std::size_t>& rows) {
  Encoded out;
  out.annotations = g.select_rows(e.annotations, rows);
  out.keys = g.select_rows(e.keys, rows);
  const std::size_t L = e.mask.dim(1);
  out.mask = Tensor({rows.size(), L});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t j = 0; j < L; ++j) out.mask.at(r, j) = e.mask.at(rows[r], j);
  }
  out.init_state = g.select_rows(e.init_state, rows);
  out.init_context = g.select_rows(e.init_context, rows);
  return out;
}

EncoderDecoder::State EncoderDecoder::select(Graph& g, const State& s,
                                             const std::vector<std::size_t>& rows) {
  return {g.select_rows(s.hidden, rows), g.select_rows(s.context, rows)};
}

EncoderDecoder::Attention EncoderDecoder::attend(Graph& g, const Bound& p, const Encoded& e,
                                                 Var query) const {
  Var scores = g.additive_scores(e.keys, g.matmul(query, p.att_wq), p.att_v);
  Var weights = g.masked_softmax(scores, e.mask);
  return {weights, g.weighted_sum(weights, e.annotations)};
}

EncoderDecoder::Step EncoderDecoder::step(Graph& g, const Bound& p, const Encoded& e,
                                          const State& prev, const std::vector<int>& prev_tokens,
                                          Var extra) const {
  Var x = g.concat({g.embed(p.tgt_embed, prev_tokens), prev.context});
  Var s = gru_cell(g, p.dec, x, prev.hidden, dims_.hidden);
  Attention att = attend(g, p, e, s);
  if (dims_.extra_input > 0 && !extra.valid()) {
    throw std::invalid_argument("EncoderDecoder::step: readout expects an extra input");
  }
  Var features = dims_.extra_input > 0 ? g.concat({s, att.context, extra}) : g.concat({s, att.context});
  return {{s, att.context}, g.affine(features, p.out_w, p.out_b), att.weights};
}

EncoderDecoder::Unrolled EncoderDecoder::unroll(Graph& g, const Bound& p, const Encoded& e,
                                                const PaddedBatch& outputs,
                                                const std::vector<Tensor>* extra) const {
  if (dims_.extra_input > 0 && (!extra || extra->size() < outputs.len)) {
    throw std::invalid_argument("EncoderDecoder::unroll: missing extra inputs");
  }
  Unrolled u;
  State state = initial(e);
  std::vector<int> prev(outputs.batch, bos());
  for (std::size_t t = 0; t < outputs.len; ++t) {
    Var ex = dims_.extra_input > 0 ? g.constant((*extra)[t]) : Var{};
    Step st = step(g, p, e, state, prev, ex);
    u.readout.push_back(st.readout);
    u.states.push_back(st.next.hidden);
    u.attention.push_back(st.attention);
    state = st.next;
    prev = outputs.column(t);
  }
  return u;
}

EncoderDecoder make_actor(std::size_t vocab, std::size_t embed, std::size_t hidden) {
  return EncoderDecoder("actor.", NetDims{vocab, embed, hidden, vocab, 0});
}

EncoderDecoder make_critic(std::size_t vocab, std::size_t embed, std::size_t hidden,
                           std::size_t actor_state_width) {
  return EncoderDecoder("critic.", NetDims{vocab, embed, hidden, vocab, actor_state_width});
}

// ---------------------------------------------------------------------------

LinearBaseline::LinearBaseline(std::size_t input_width, std::string prefix)
    : prefix_(std::move(prefix)), input_(input_width) {}

void LinearBaseline::declare(ParamSet& params) const {
  params.add(prefix_ + "w", {input_, 1});
  params.add(prefix_ + "b", {1});
}

Var LinearBaseline::predict(Graph& g, ParamSet& params, Var states) const {
  return g.affine(states, g.param(params, prefix_ + "w"), g.param(params, prefix_ + "b"));
}

double LinearBaseline::predict(const ParamSet& params, std::span<const double> state) const {
  const Tensor& w = params.at(prefix_ + "w");
  if (state.size() != w.dim(0)) throw ShapeError("LinearBaseline: state width mismatch");
  double s = params.at(prefix_ + "b")[0];
  for (std::size_t i = 0; i < state.size(); ++i) s += state[i] * w[i];
  return s;
}

// ---------------------------------------------------------------------------

std::vector<Tokens> with_eos(const std::vector<Tokens>& sequences, int eos) {
  std::vector<Tokens> out = sequences;
  for (Tokens& s : out) s.push_back(eos);
  return out;
}

Var log_likelihood(Graph& g, const EncoderDecoder& actor, const EncoderDecoder::Bound& p,
                   const std::vector<Tokens>& sources, const std::vector<Tokens>& targets,
                   int eos, std::vector<double>* per_sequence) {
  if (sources.size() != targets.size() || sources.empty()) {
    throw std::invalid_argument("log_likelihood: source/target batch mismatch");
  }
  const PaddedBatch src = PaddedBatch::from(sources);
  const PaddedBatch tgt = PaddedBatch::from(with_eos(targets, eos));
  const auto enc = actor.encode(g, p, src);
  const auto run = actor.unroll(g, p, enc, tgt);
  if (per_sequence) per_sequence->assign(tgt.batch, 0.0);
  Var total;
  for (std::size_t t = 0; t < tgt.len; ++t) {
    Var picked = g.pick(g.log_softmax(run.readout[t]), tgt.column(t));
    if (!tgt.column_full(t)) picked = g.mul(picked, g.constant(tgt.mask_column(t)));
    if (per_sequence) {
      const Tensor& v = g.value(picked);
      for (std::size_t r = 0; r < tgt.batch; ++r) (*per_sequence)[r] += v[r];
    }
    Var step_total = g.sum(picked);
    total = total.valid() ? g.add(total, step_total) : step_total;
  }
  return total;
}

// ---------------------------------------------------------------------------

ActorSession::ActorSession(const EncoderDecoder& actor, const ParamSet& params,
                           const Tokens& source)
    : actor_(&actor) {
  bound_ = actor.bind_frozen(graph_, params);
  encoded_ = actor.encode(graph_, bound_, PaddedBatch::from({source}));
}

namespace {

Tensor log_probs_of(Graph& g, Var readout) { return g.value(g.log_softmax(readout)); }

}  // namespace

Tensor ActorSession::start() {
  rows_ = encoded_;
  state_ = EncoderDecoder::initial(encoded_);
  count_ = 1;
  // The first distribution comes after consuming the start symbol.
  auto st = actor_->step(graph_, bound_, rows_, state_, {actor_->bos()});
  state_ = st.next;
  return log_probs_of(graph_, st.readout);
}

Tensor ActorSession::extend(const std::vector<std::size_t>& parents,
                            const std::vector<int>& tokens) {
  if (parents.size() != tokens.size() || parents.empty()) {
    throw std::invalid_argument("ActorSession::extend: parents/tokens mismatch");
  }
  bool identity = parents.size() == count_;
  for (std::size_t i = 0; identity && i < parents.size(); ++i) identity = parents[i] == i;
  if (!identity) {
    std::vector<std::size_t> source_rows(parents.size(), 0);
    rows_ = EncoderDecoder::select(graph_, encoded_, source_rows);
    state_ = EncoderDecoder::select(graph_, state_, parents);
  }
  count_ = parents.size();
  auto st = actor_->step(graph_, bound_, rows_, state_, tokens);
  state_ = st.next;
  return log_probs_of(graph_, st.readout);
}

SampledSequence sample_sequence(const EncoderDecoder& actor, const ParamSet& params,
                                const Tokens& source, int eos, std::size_t max_len, Rng& rng) {
  if (max_len < 1) throw std::invalid_argument("sample_sequence: max_len must be >= 1");
  ActorSession session(actor, params, source);
  SampledSequence out;
  Tensor logp = session.start();
  std::vector<double> probs(logp.size());
  for (std::size_t t = 0; t < max_len; ++t) {
    for (std::size_t a = 0; a < logp.size(); ++a) probs[a] = std::exp(logp[a]);
    const int action = static_cast<int>(rng.categorical(probs));
    out.actions.push_back(action);
    out.policy.push_back(probs);
    const Tensor& s = session.states();
    out.states.emplace_back(s.values().begin(), s.values().end());
    out.log_prob += logp[static_cast<std::size_t>(action)];
    if (action == eos) {
      out.finished = true;
      break;
    }
    if (t + 1 < max_len) logp = session.extend({0}, {action});
  }
  return out;
}

std::vector<std::vector<double>> critic_values(const EncoderDecoder& critic,
                                               const ParamSet& params, const Tokens& reference,
                                               const Tokens& actions,
                                               const std::vector<std::vector<double>>* actor_states) {
  if (actions.empty()) return {};
  Graph g;
  auto p = critic.bind_frozen(g, params);
  auto enc = critic.encode(g, p, PaddedBatch::from({reference}));
  std::vector<Tensor> extra;
  if (critic.dims().extra_input > 0) {
    if (!actor_states || actor_states->size() < actions.size()) {
      throw std::invalid_argument("critic_values: critic expects actor states");
    }
    for (std::size_t t = 0; t < actions.size(); ++t) {
      extra.emplace_back(Shape{1, critic.dims().extra_input}, (*actor_states)[t]);
    }
  }
  auto run = critic.unroll(g, p, enc, PaddedBatch::from({actions}), extra.empty() ? nullptr : &extra);
  std::vector<std::vector<double>> values;
  for (Var v : run.readout) {
    const Tensor& q = g.value(v);
    values.emplace_back(q.values().begin(), q.values().end());
  }
  return values;
}

}  // namespace seqac
