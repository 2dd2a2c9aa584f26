#include "seqac/trainers.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "seqac/decoding.hpp"

namespace seqac {

TrainMode parse_train_mode(const std::string& name) {
  if (name == "ll") return TrainMode::kLogLikelihood;
  if (name == "ac") return TrainMode::kActorCritic;
  if (name == "reinforce") return TrainMode::kReinforce;
  if (name == "reinforce-critic") return TrainMode::kReinforceCritic;
  throw std::invalid_argument("unknown mode '" + name + "' (expected ll, ac, reinforce or reinforce-critic)");
}

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kLogLikelihood: return "ll";
    case TrainMode::kActorCritic: return "ac";
    case TrainMode::kReinforce: return "reinforce";
    case TrainMode::kReinforceCritic: return "reinforce-critic";
  }
  return "?";
}

std::vector<std::string> TrainConfig::problems() const {
  std::vector<std::string> out;
  auto rate = [&](const char* key, double v) {
    if (!(v > 0.0 && v <= 1.0)) out.push_back(std::string(key) + " must lie in (0, 1], got " + std::to_string(v));
  };
  auto positive = [&](const char* key, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) out.push_back(std::string(key) + " must be positive, got " + std::to_string(v));
  };
  auto at_least_one = [&](const char* key, std::size_t v) {
    if (v < 1) out.push_back(std::string(key) + " must be >= 1");
  };
  rate("gamma_theta", gamma_theta);
  rate("gamma_phi", gamma_phi);
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) out.push_back("lambda must be >= 0");
  if (!(lambda_ll >= 0.0) || !std::isfinite(lambda_ll)) out.push_back("lambda_ll must be >= 0");
  at_least_one("samples", samples);
  at_least_one("embed", embed);
  at_least_one("hidden", hidden);
  at_least_one("batch_size", batch_size);
  at_least_one("rl_batch_size", rl_batch_size);
  at_least_one("ll_eval_every", ll_eval_every);
  at_least_one("ll_patience", ll_patience);
  at_least_one("critic_window", critic_window);
  at_least_one("eval_every", eval_every);
  at_least_one("log_every", log_every);
  positive("init_width", init_width);
  positive("ll_alpha", ll_alpha);
  positive("ll_alpha_annealed", ll_alpha_annealed);
  positive("critic_alpha", critic_alpha);
  positive("joint_alpha", joint_alpha);
  positive("divergence_factor", divergence_factor);
  if (!std::isfinite(clip_norm)) out.push_back("clip_norm must be finite");
  return out;
}

// ---------------------------------------------------------------------------
// Targets and losses

void Trajectory::validate() const {
  const std::size_t T = actions.size();
  auto check = [&](std::size_t n, const char* what, bool optional) {
    if ((optional && n == 0) || n == T) return;
    throw std::invalid_argument(std::string("Trajectory: ") + what + " has " + std::to_string(n) +
                                " steps, actions have " + std::to_string(T));
  };
  check(policy.size(), "policy", false);
  check(rewards.size(), "rewards", false);
  check(critic.size(), "critic", true);
  check(target_critic.size(), "target_critic", true);
  check(actor_states.size(), "actor_states", true);
}

std::vector<double> td_targets(const Trajectory& traj) {
  traj.validate();
  const std::size_t T = traj.length();
  if (T > 1 && traj.target_critic.size() != T) {
    throw std::invalid_argument("td_targets: target critic values are required");
  }
  std::vector<double> q(T);
  for (std::size_t t = 0; t < T; ++t) {
    q[t] = traj.rewards[t];
    if (t + 1 < T) {
      const auto& p = traj.policy[t + 1];
      const auto& v = traj.target_critic[t + 1];
      for (std::size_t a = 0; a < p.size(); ++a) q[t] += p[a] * v[a];
    }
  }
  return q;
}

std::vector<double> mc_targets(const Trajectory& traj) {
  std::vector<double> q(traj.rewards.size());
  double to_go = 0.0;
  for (std::size_t t = q.size(); t-- > 0;) q[t] = to_go += traj.rewards[t];
  return q;
}

Var critic_loss(Graph& g, Var values, const Tokens& actions, const std::vector<double>& targets,
                double lambda) {
  const std::size_t T = actions.size();
  if (targets.size() != T || g.shape(values).size() != 2 || g.shape(values)[0] != T) {
    throw ShapeError("critic_loss: values, actions and targets disagree on the step count");
  }
  Var diff = g.sub(g.pick(values, actions), g.constant(Tensor({T, 1}, targets)));
  Var loss = g.sum(g.mul(diff, diff));
  if (lambda > 0.0) {
    Var centered = g.center(values);
    loss = g.add(loss, g.scale(g.sum(g.mul(centered, centered)), lambda));
  }
  return loss;
}

double critic_loss(const std::vector<std::vector<double>>& values, const Tokens& actions,
                   const std::vector<double>& targets, double lambda) {
  if (values.size() != actions.size() || targets.size() != actions.size()) {
    throw ShapeError("critic_loss: values, actions and targets disagree on the step count");
  }
  double loss = 0.0;
  for (std::size_t t = 0; t < values.size(); ++t) {
    const auto& row = values[t];
    const double d = row.at(static_cast<std::size_t>(actions[t])) - targets[t];
    loss += d * d;
    const double mean = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(row.size());
    double var = 0.0;
    for (double x : row) var += (x - mean) * (x - mean);
    loss += lambda * var;
  }
  return loss;
}

namespace {

Tensor rows_to_tensor(const std::vector<std::vector<double>>& rows) {
  const std::size_t cols = rows.empty() ? 0 : rows[0].size();
  Tensor t({rows.size(), cols});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) throw ShapeError("ragged rows");
    std::copy(rows[r].begin(), rows[r].end(), t.row(r).begin());
  }
  return t;
}

// Per-step readouts of a teacher-forced run over `outputs`, as [T, width].
Var readout_matrix(Graph& g, const EncoderDecoder& net, const EncoderDecoder::Bound& p,
                   const Tokens& input, const Tokens& outputs,
                   const std::vector<Tensor>* extra = nullptr) {
  auto enc = net.encode(g, p, PaddedBatch::from({input}));
  auto run = net.unroll(g, p, enc, PaddedBatch::from({outputs}), extra);
  return g.reshape(g.stack(run.readout), {outputs.size(), net.dims().outputs});
}

Gradients negated_gradient(Graph& g, Var objective) {
  return g.backward(objective, Tensor({1}, -1.0));
}

Var add_ll_term(Graph& g, Var objective, const EncoderDecoder& actor,
                const EncoderDecoder::Bound& p, const Tokens& source, const Tokens& target,
                double lambda_ll, int eos) {
  if (lambda_ll == 0.0) return objective;
  Var ll = log_likelihood(g, actor, p, {source}, {target}, eos);
  return g.add(objective, g.scale(ll, lambda_ll));
}

}  // namespace

CriticUpdate critic_gradient(const EncoderDecoder& critic, ParamSet& params,
                             const Tokens& reference, const Tokens& actions,
                             const std::vector<double>& targets, double lambda,
                             const std::vector<std::vector<double>>* actor_states) {
  if (actions.empty()) throw std::invalid_argument("critic_gradient: empty trajectory");
  Graph g;
  auto p = critic.bind(g, params);
  std::vector<Tensor> extra;
  if (critic.dims().extra_input > 0) {
    if (!actor_states || actor_states->size() < actions.size()) {
      throw std::invalid_argument("critic_gradient: critic expects actor states");
    }
    for (std::size_t t = 0; t < actions.size(); ++t) {
      extra.emplace_back(Shape{1, critic.dims().extra_input}, (*actor_states)[t]);
    }
  }
  Var values = readout_matrix(g, critic, p, reference, actions, extra.empty() ? nullptr : &extra);
  Var loss = critic_loss(g, values, actions, targets, lambda);

  CriticUpdate out;
  const Tensor& v = g.value(values);
  for (std::size_t t = 0; t < actions.size(); ++t) {
    out.values.emplace_back(v.row(t).begin(), v.row(t).end());
    const double d = v.at(t, static_cast<std::size_t>(actions[t])) - targets[t];
    out.td_error += d * d;
  }
  out.td_error /= static_cast<double>(actions.size());
  out.loss = g.value(loss)[0];
  out.grads = g.backward(loss);
  return out;
}

Gradients ac_actor_gradient(const EncoderDecoder& actor, ParamSet& params, const Tokens& source,
                            const Tokens& actions, const std::vector<std::vector<double>>& qhat,
                            double lambda_ll, const Tokens& target, int eos, double* objective) {
  if (qhat.size() != actions.size()) throw ShapeError("ac_actor_gradient: one critic row per step required");
  Graph g;
  auto p = actor.bind(g, params);
  Var obj;
  if (!actions.empty()) {
    Var probs = g.softmax(readout_matrix(g, actor, p, source, actions));
    obj = g.sum(g.mul(probs, g.constant(rows_to_tensor(qhat))));
  } else {
    obj = g.constant(Tensor({1}, 0.0));
  }
  obj = add_ll_term(g, obj, actor, p, source, target, lambda_ll, eos);
  if (objective) *objective = g.value(obj)[0];
  return negated_gradient(g, obj);
}

Gradients reinforce_gradient(const EncoderDecoder& actor, ParamSet& params, const Tokens& source,
                             const Tokens& actions, const std::vector<double>& advantages,
                             double lambda_ll, const Tokens& target, int eos, double* objective) {
  if (advantages.size() != actions.size()) throw ShapeError("reinforce_gradient: one advantage per step required");
  Graph g;
  auto p = actor.bind(g, params);
  Var obj;
  if (!actions.empty()) {
    Var logp = g.pick(g.log_softmax(readout_matrix(g, actor, p, source, actions)), actions);
    obj = g.sum(g.mul(logp, g.constant(Tensor({actions.size(), 1}, advantages))));
  } else {
    obj = g.constant(Tensor({1}, 0.0));
  }
  obj = add_ll_term(g, obj, actor, p, source, target, lambda_ll, eos);
  if (objective) *objective = g.value(obj)[0];
  return negated_gradient(g, obj);
}

Gradients ll_gradient(const EncoderDecoder& actor, ParamSet& params,
                      const std::vector<SequencePair>& batch, int eos, double* loss) {
  if (batch.empty()) throw std::invalid_argument("ll_gradient: empty batch");
  std::vector<Tokens> sources, targets;
  for (const auto& pair : batch) {
    sources.push_back(pair.source);
    targets.push_back(pair.target);
  }
  Graph g;
  auto p = actor.bind(g, params);
  Var nll = g.scale(log_likelihood(g, actor, p, sources, targets, eos),
                    -1.0 / static_cast<double>(batch.size()));
  if (loss) *loss = g.value(nll)[0];
  return g.backward(nll);
}

namespace {

void optimizer_step(ParamSet& params, Gradients& grads, AdamState& adam, double clip_norm,
                    const char* what) {
  clip_global_norm(grads, clip_norm);
  try {
    adam_step(params, grads, adam);
  } catch (const NumericError& e) {
    throw DivergenceError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

double ll_step(const EncoderDecoder& actor, ParamSet& params, AdamState& adam,
               const std::vector<SequencePair>& batch, int eos, double clip_norm) {
  double loss = 0.0;
  Gradients grads;
  try {
    grads = ll_gradient(actor, params, batch, eos, &loss);
  } catch (const NumericError& e) {
    throw DivergenceError(std::string("log-likelihood step: ") + e.what());
  }
  if (!std::isfinite(loss)) throw DivergenceError("log-likelihood loss is not finite");
  optimizer_step(params, grads, adam, clip_norm, "log-likelihood update");
  return loss;
}

// ---------------------------------------------------------------------------
// Model state

ModelState ModelState::create(const TrainConfig& config, std::size_t vocab_size) {
  ModelState s;
  s.actor = make_actor(vocab_size, config.embed, config.hidden);
  s.critic = make_critic(vocab_size, config.embed, config.hidden,
                         config.critic_actor_states ? config.hidden : 0);
  s.baseline = LinearBaseline(config.hidden);
  s.actor.declare(s.actor_params);
  s.critic.declare(s.critic_params);
  s.baseline.declare(s.baseline_params);
  // One stream per network, so a critic created when resuming matches one
  // created at the start of a run.
  Rng actor_rng = Rng::derive(config.seed, 12);
  Rng critic_rng = Rng::derive(config.seed, 13);
  Rng baseline_rng = Rng::derive(config.seed, 14);
  init_uniform(s.actor_params, config.init_width, actor_rng);
  init_uniform(s.critic_params, config.init_width, critic_rng);
  init_uniform(s.baseline_params, config.init_width, baseline_rng);
  s.shadow_actor = s.actor_params;
  s.shadow_critic = s.critic_params;
  s.actor_adam = AdamState(s.actor_params, config.ll_alpha);
  s.critic_adam = AdamState(s.critic_params, config.critic_alpha);
  s.baseline_adam = AdamState(s.baseline_params, config.joint_alpha);
  return s;
}

namespace {

void put_adam(NamedTensors& out, const std::string& set, const AdamState& adam) {
  const std::string base = "adam." + set + ".";
  for (const auto& [name, t] : adam.m) out.set(base + "m." + name, t);
  for (const auto& [name, t] : adam.v) out.set(base + "v." + name, t);
  out.set(base + "step", Tensor({1}, static_cast<double>(adam.step)));
  out.set(base + "alpha", Tensor({1}, adam.alpha));
}

void restore(ParamSet& into, const NamedTensors& from, const std::string& prefix) {
  for (auto& [name, t] : into) {
    const std::string key = prefix + name;
    if (!from.contains(key)) continue;
    const Tensor& src = from.at(key);
    require_same_shape(t.shape(), src.shape(), ("checkpoint tensor '" + key + "'").c_str());
    t = src;
  }
}

bool has_all(const ParamSet& params, const NamedTensors& from, const std::string& prefix) {
  for (const auto& [name, t] : params) {
    if (!from.contains(prefix + name)) return false;
  }
  return true;
}

void get_adam(AdamState& adam, const NamedTensors& from, const std::string& set) {
  const std::string base = "adam." + set + ".";
  if (!from.contains(base + "step")) return;
  restore(adam.m, from, base + "m.");
  restore(adam.v, from, base + "v.");
  adam.step = static_cast<std::uint64_t>(from.at(base + "step")[0]);
  adam.alpha = from.at(base + "alpha")[0];
}

}  // namespace

NamedTensors ModelState::to_tensors() const {
  NamedTensors out;
  for (const ParamSet* set : {&actor_params, &critic_params, &baseline_params}) {
    for (const auto& [name, t] : *set) out.set(name, t);
  }
  for (const auto& [name, t] : shadow_actor) out.set("shadow." + name, t);
  for (const auto& [name, t] : shadow_critic) out.set("shadow." + name, t);
  put_adam(out, "actor", actor_adam);
  put_adam(out, "critic", critic_adam);
  put_adam(out, "baseline", baseline_adam);
  out.set("meta.phases_done", Tensor({1}, static_cast<double>(phases_done)));
  out.set("meta.step", Tensor({1}, static_cast<double>(step)));
  return out;
}

ModelState ModelState::from_tensors(const TrainConfig& config, std::size_t vocab_size,
                                    const NamedTensors& tensors) {
  ModelState s = create(config, vocab_size);
  if (!has_all(s.actor_params, tensors, "")) {
    throw std::invalid_argument("checkpoint holds no complete actor for this configuration");
  }
  if (tensors.contains("meta.phases_done")) s.phases_done = static_cast<int>(tensors.at("meta.phases_done")[0]);
  if (tensors.contains("meta.step")) s.step = static_cast<std::uint64_t>(tensors.at("meta.step")[0]);
  restore(s.actor_params, tensors, "");
  restore(s.baseline_params, tensors, "");
  s.shadow_actor = s.actor_params;
  restore(s.shadow_actor, tensors, "shadow.");
  get_adam(s.actor_adam, tensors, "actor");
  get_adam(s.baseline_adam, tensors, "baseline");
  // Critic weights saved before critic pretraining are just an initialization;
  // they are skipped so a resumed run may choose a different critic layout.
  if (s.phases_done >= 2 && has_all(s.critic_params, tensors, "")) {
    restore(s.critic_params, tensors, "");
    s.shadow_critic = s.critic_params;
    restore(s.shadow_critic, tensors, "shadow.");
    get_adam(s.critic_adam, tensors, "critic");
  } else {
    s.phases_done = std::min(s.phases_done, 1);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(TrainConfig config, const SpellingData& data, ModelState& state, MetricsLog& log)
    : config_(std::move(config)), data_(&data), state_(&state), log_(&log), eos_(data.vocab.eos()) {
  score_.kind = config_.score;
  if (data.train.empty() || data.valid.empty()) {
    throw std::invalid_argument("Trainer: training and validation data must be non-empty");
  }
}

std::size_t Trainer::max_len_for(const Tokens& source) const {
  return config_.sample_max_len > 0 ? config_.sample_max_len : default_max_len(source.size());
}

double Trainer::validation_cer(std::size_t limit) const {
  const std::size_t n = limit == 0 ? data_->valid.size() : std::min(limit, data_->valid.size());
  std::vector<Tokens> sources, targets;
  for (std::size_t i = 0; i < n; ++i) {
    sources.push_back(data_->valid[i].source);
    targets.push_back(data_->valid[i].target);
  }
  return corpus_cer(greedy_decode_all(state_->actor, state_->actor_params, sources, eos_), targets);
}

Trajectory Trainer::sample(const SequencePair& pair, Rng& rng) const {
  const std::size_t max_len = max_len_for(pair.source);
  SampledSequence s = sample_sequence(state_->actor, state_->shadow_actor, pair.source, eos_, max_len, rng);
  Trajectory traj;
  traj.actions = std::move(s.actions);
  traj.policy = std::move(s.policy);
  traj.actor_states = std::move(s.states);
  traj.rewards = shape_rewards(score_, traj.actions, pair.target, eos_, config_.shaping);
  if (config_.mode != TrainMode::kReinforce && config_.td) {
    traj.target_critic = critic_values(state_->critic, state_->shadow_critic, pair.target, traj.actions,
                                       config_.critic_actor_states ? &traj.actor_states : nullptr);
  }
  return traj;
}

void Trainer::check_divergence(const std::vector<std::vector<double>>& values,
                               const Tokens& reference, std::size_t max_len, double loss) const {
  if (!std::isfinite(loss)) throw DivergenceError("critic loss is not finite");
  const double bound = config_.divergence_factor * score_.max_abs_return(reference.size(), max_len);
  for (std::size_t t = 0; t < values.size(); ++t) {
    for (std::size_t a = 0; a < values[t].size(); ++a) {
      if (!(std::abs(values[t][a]) <= bound)) {
        throw DivergenceError("critic value " + std::to_string(values[t][a]) + " at step " +
                              std::to_string(t) + ", action " + std::to_string(a) +
                              " exceeds the bound " + std::to_string(bound));
      }
    }
  }
}

void Trainer::checkpoint(const std::string& tag) {
  if (on_checkpoint) on_checkpoint(tag);
}

Trainer::StepStats Trainer::rl_step(bool update_actor, BatchStream& stream, Rng& rng) try {
  ModelState& s = *state_;
  const bool uses_critic = config_.mode != TrainMode::kReinforce;
  const std::size_t n = config_.rl_batch_size * config_.samples;
  const double weight = 1.0 / static_cast<double>(n);
  Gradients critic_grads, actor_grads, baseline_grads;
  StepStats stats;

  for (std::size_t e = 0; e < config_.rl_batch_size; ++e) {
    const SequencePair pair = stream.next_example();
    for (std::size_t m = 0; m < config_.samples; ++m) {
      Trajectory traj = sample(pair, rng);
      const std::size_t T = traj.length();
      stats.score += weight * score_(prediction_of(traj.actions, eos_), pair.target);
      stats.length += weight * static_cast<double>(T);

      if (uses_critic) {
        const std::vector<double> targets = config_.td ? td_targets(traj) : mc_targets(traj);
        CriticUpdate cu = critic_gradient(s.critic, s.critic_params, pair.target, traj.actions, targets,
                                          config_.lambda,
                                          config_.critic_actor_states ? &traj.actor_states : nullptr);
        check_divergence(cu.values, pair.target, max_len_for(pair.source), cu.loss);
        accumulate(critic_grads, cu.grads, weight);
        stats.td_error += weight * cu.td_error;
        stats.critic_loss += weight * cu.loss;
        traj.critic = std::move(cu.values);
      }
      if (!update_actor) continue;

      double objective = 0.0;
      Gradients g;
      if (config_.mode == TrainMode::kActorCritic) {
        g = ac_actor_gradient(s.actor, s.actor_params, pair.source, traj.actions, traj.critic,
                              config_.lambda_ll, pair.target, eos_, &objective);
      } else {
        const std::vector<double> to_go = mc_targets(traj);
        std::vector<double> advantages(T);
        for (std::size_t t = 0; t < T; ++t) {
          double b = 0.0;
          if (config_.mode == TrainMode::kReinforce) {
            b = s.baseline.predict(s.baseline_params, traj.actor_states[t]);
          } else if (config_.rf_baseline == CriticBaseline::kTakenAction) {
            b = traj.critic[t][static_cast<std::size_t>(traj.actions[t])];
          } else {
            for (std::size_t a = 0; a < traj.policy[t].size(); ++a) b += traj.policy[t][a] * traj.critic[t][a];
          }
          advantages[t] = to_go[t] - b;
        }
        g = reinforce_gradient(s.actor, s.actor_params, pair.source, traj.actions, advantages,
                               config_.lambda_ll, pair.target, eos_, &objective);
        if (config_.mode == TrainMode::kReinforce) {
          // The linear baseline regresses the return-to-go from actor states.
          Graph bg;
          Var pred = s.baseline.predict(bg, s.baseline_params, bg.constant(rows_to_tensor(traj.actor_states)));
          Var diff = bg.sub(pred, bg.constant(Tensor({T, 1}, to_go)));
          accumulate(baseline_grads, bg.backward(bg.sum(bg.mul(diff, diff))), weight);
        }
      }
      if (!std::isfinite(objective)) throw DivergenceError("actor objective is not finite");
      stats.actor_objective += weight * objective;
      accumulate(actor_grads, g, weight);
    }
  }

  if (uses_critic) {
    optimizer_step(s.critic_params, critic_grads, s.critic_adam, config_.clip_norm, "critic update");
    shadow_update(s.shadow_critic, s.critic_params, config_.gamma_phi);
  }
  if (update_actor) {
    optimizer_step(s.actor_params, actor_grads, s.actor_adam, config_.clip_norm, "actor update");
    shadow_update(s.shadow_actor, s.actor_params, config_.effective_gamma_theta());
    if (config_.mode == TrainMode::kReinforce) {
      optimizer_step(s.baseline_params, baseline_grads, s.baseline_adam, config_.clip_norm, "baseline update");
    }
  }
  ++s.step;
  return stats;
} catch (const NumericError& e) {
  throw DivergenceError(std::string("reinforcement step: ") + e.what());
}

namespace {

// Running means reported every log_every steps.
struct Accumulator {
  std::vector<double> sums;
  std::size_t count = 0;
  void add(std::initializer_list<double> values) {
    sums.resize(values.size(), 0.0);
    std::size_t i = 0;
    for (double v : values) sums[i++] += v;
    ++count;
  }
  double mean(std::size_t i) const { return sums[i] / static_cast<double>(count); }
  void reset() {
    sums.assign(sums.size(), 0.0);
    count = 0;
  }
};

}  // namespace

PhaseResult Trainer::pretrain_ll() {
  ModelState& s = *state_;
  PhaseResult result{"ll", 0, 0.0, {}};
  StepSchedule schedule(config_.ll_alpha, config_.ll_alpha_annealed);
  schedule.apply(s.actor_adam);
  BatchStream stream(data_->train, data_->spec, data_->vocab.symbol_count(), config_.batch_size,
                     Rng::derive(config_.seed, 20).next());
  double best = std::numeric_limits<double>::infinity();
  ParamSet best_params = s.actor_params;
  std::size_t bad = 0;
  Accumulator acc;
  for (std::size_t step = 1; step <= config_.ll_max_steps; ++step) {
    acc.add({ll_step(s.actor, s.actor_params, s.actor_adam, stream.next(), eos_, config_.clip_norm)});
    ++s.step;
    result.steps = step;
    if (step % config_.log_every == 0) {
      log_->log(step, "ll", "train", "nll", acc.mean(0));
      acc.reset();
    }
    if (step % config_.ll_eval_every == 0 || step == config_.ll_max_steps) {
      const double cer = validation_cer(config_.eval_size);
      log_->log(step, "ll", "valid", "cer", cer);
      if (cer < best) {
        best = cer;
        best_params = s.actor_params;
        bad = 0;
      } else {
        ++bad;
        if (!schedule.annealed()) {
          schedule.anneal();
          schedule.apply(s.actor_adam);
          log_->log(step, "ll", "train", "alpha", schedule.current());
        }
        if (bad >= config_.ll_patience) break;
      }
    }
    if (config_.checkpoint_every > 0 && step % config_.checkpoint_every == 0) checkpoint("ll-" + std::to_string(step));
  }
  // Keep the best validated actor.
  s.actor_params = best_params;
  s.shadow_actor = s.actor_params;
  s.phases_done = 1;
  result.valid_cer = best;
  log_->log(result.steps, "ll", "valid", "best_cer", best);
  log_->flush();
  checkpoint("ll");
  return result;
}

PhaseResult Trainer::pretrain_critic() {
  ModelState& s = *state_;
  PhaseResult result{"critic", 0, 0.0, {}};
  if (config_.mode == TrainMode::kReinforce) return result;
  s.critic_adam.alpha = config_.critic_alpha;
  s.shadow_actor = s.actor_params;  // the actor stays fixed in this phase
  BatchStream stream(data_->train, data_->spec, data_->vocab.symbol_count(), 1,
                     Rng::derive(config_.seed, 21).next());
  Rng rng = Rng::derive(config_.seed, 22);

  std::deque<double> window;
  double window_sum = 0.0;
  double peak = -std::numeric_limits<double>::infinity();
  std::size_t since_peak = 0;
  std::size_t remaining = 0;  // > 0 once the stop rule has fired
  Accumulator acc;
  for (std::size_t step = 1; step <= config_.critic_max_steps; ++step) {
    const StepStats st = rl_step(false, stream, rng);
    result.steps = step;
    window.push_back(st.td_error);
    window_sum += st.td_error;
    if (window.size() > config_.critic_window) {
      window_sum -= window.front();
      window.pop_front();
    }
    const double smoothed = window_sum / static_cast<double>(window.size());
    result.smoothed_td.push_back(smoothed);
    if (smoothed > peak) {
      peak = smoothed;
      since_peak = 0;
    } else {
      ++since_peak;
    }
    acc.add({st.td_error, st.critic_loss, st.score});
    if (step % config_.log_every == 0) {
      log_->log(step, "critic", "train", "td_error", smoothed);
      log_->log(step, "critic", "train", "critic_loss", acc.mean(1));
      log_->log(step, "critic", "train", "score", acc.mean(2));
      acc.reset();
    }
    if (config_.checkpoint_every > 0 && step % config_.checkpoint_every == 0) {
      checkpoint("critic-" + std::to_string(step));
    }
    if (remaining > 0) {
      if (--remaining == 0) break;
    } else if (since_peak >= config_.critic_patience && window.size() >= config_.critic_window) {
      remaining = config_.critic_extra_steps;
      log_->log(step, "critic", "train", "td_error_peak", peak);
      if (remaining == 0) break;
    }
  }
  s.phases_done = 2;
  result.valid_cer = validation_cer(config_.eval_size);
  log_->log(result.steps, "critic", "train", "steps", static_cast<double>(result.steps));
  log_->flush();
  checkpoint("critic");
  return result;
}

PhaseResult Trainer::train_joint() {
  ModelState& s = *state_;
  PhaseResult result{to_string(config_.mode), 0, 0.0, {}};
  if (config_.mode == TrainMode::kLogLikelihood) return result;
  s.actor_adam.alpha = config_.joint_alpha;
  s.critic_adam.alpha = config_.joint_alpha;
  s.baseline_adam.alpha = config_.joint_alpha;
  if (config_.effective_gamma_theta() == 1.0) s.shadow_actor = s.actor_params;
  BatchStream stream(data_->train, data_->spec, data_->vocab.symbol_count(), 1,
                     Rng::derive(config_.seed, 30).next());
  Rng rng = Rng::derive(config_.seed, 31);
  const std::string phase = result.phase;
  Accumulator acc;
  for (std::size_t step = 1; step <= config_.joint_steps; ++step) {
    const StepStats st = rl_step(true, stream, rng);
    result.steps = step;
    acc.add({st.score, st.td_error, st.critic_loss, st.actor_objective, st.length});
    if (step % config_.log_every == 0) {
      log_->log(step, phase, "train", "score", acc.mean(0));
      if (config_.mode != TrainMode::kReinforce) {
        log_->log(step, phase, "train", "td_error", acc.mean(1));
        log_->log(step, phase, "train", "critic_loss", acc.mean(2));
      }
      log_->log(step, phase, "train", "objective", acc.mean(3));
      log_->log(step, phase, "train", "length", acc.mean(4));
      acc.reset();
    }
    if (step % config_.eval_every == 0 || step == config_.joint_steps) {
      result.valid_cer = validation_cer(config_.eval_size);
      log_->log(step, phase, "valid", "cer", result.valid_cer);
      log_->flush();
    }
    if (config_.checkpoint_every > 0 && step % config_.checkpoint_every == 0) {
      checkpoint(phase + "-" + std::to_string(step));
    }
  }
  s.phases_done = 3;
  log_->flush();
  checkpoint(phase);
  return result;
}

std::vector<PhaseResult> Trainer::run() {
  std::vector<PhaseResult> out;
  if (state_->phases_done < 1) out.push_back(pretrain_ll());
  if (config_.mode == TrainMode::kLogLikelihood) return out;
  const bool needs_critic = config_.mode == TrainMode::kActorCritic ||
                            config_.mode == TrainMode::kReinforceCritic;
  if (needs_critic && state_->phases_done < 2) out.push_back(pretrain_critic());
  if (state_->phases_done < 3) out.push_back(train_joint());
  return out;
}

}  // namespace seqac
