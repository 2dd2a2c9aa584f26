#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqac/adam.hpp"
#include "seqac/data.hpp"
#include "seqac/metrics.hpp"
#include "seqac/models.hpp"
#include "seqac/oracle.hpp"
#include "seqac/rewards.hpp"

namespace seqac {

/// Training aborted because the loss went non-finite or critic values left
/// the plausible range.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TrainMode { kLogLikelihood, kActorCritic, kReinforce, kReinforceCritic };

TrainMode parse_train_mode(const std::string& name);  // ll | ac | reinforce | reinforce-critic
std::string to_string(TrainMode mode);

struct TrainConfig {
  TrainMode mode = TrainMode::kLogLikelihood;
  std::uint64_t seed = 1;
  ScoreKind score = ScoreKind::kNegCer;

  // Networks.
  std::size_t embed = 32;
  std::size_t hidden = 64;
  double init_width = 0.1;  // uniform on [-width/2, width/2)

  // Log-likelihood pretraining.
  std::size_t batch_size = 32;
  double ll_alpha = 1e-3;
  double ll_alpha_annealed = 1e-4;
  std::size_t ll_max_steps = 30000;
  std::size_t ll_eval_every = 500;
  std::size_t ll_patience = 3;  // non-improving evaluations before stopping

  // Reinforcement phases.
  double gamma_theta = 1e-4;  // delayed actor rate
  double gamma_phi = 1e-4;    // target critic rate
  double lambda = 1e-3;       // critic variance penalty
  double lambda_ll = 0.1;     // log-likelihood term in the actor objective
  std::size_t samples = 1;    // sampled sequences per example
  std::size_t rl_batch_size = 1;
  bool shaping = true;
  bool td = true;             // false: Monte-Carlo critic targets
  bool critic_actor_states = false;
  CriticBaseline rf_baseline = CriticBaseline::kStateValue;
  double critic_alpha = 1e-3;  // critic pretraining
  double joint_alpha = 1e-4;   // joint phase, actor and critic
  std::size_t critic_max_steps = 20000;
  std::size_t critic_window = 100;    // TD error smoothing window
  std::size_t critic_patience = 500;  // steps without a new smoothed maximum
  std::size_t critic_extra_steps = 500;
  std::size_t joint_steps = 20000;
  std::size_t sample_max_len = 0;  // 0: default_max_len(|X|)

  // Safety and bookkeeping.
  double clip_norm = 1.0;  // <= 0 disables clipping
  double divergence_factor = 10.0;
  std::size_t eval_every = 1000;
  std::size_t eval_size = 500;  // validation pairs scored during training; 0 = all
  std::size_t log_every = 100;
  std::size_t checkpoint_every = 0;  // 0: phase boundaries only

  bool operator==(const TrainConfig&) const = default;

  /// Every violated constraint, one message per problem.
  std::vector<std::string> problems() const;
  /// Delayed-actor rate actually used: REINFORCE variants sample from the live actor.
  double effective_gamma_theta() const {
    return mode == TrainMode::kActorCritic ? gamma_theta : 1.0;
  }
};

/// A sampled output sequence with everything the updates need. Row t of
/// the per-step arrays describes the decision that produced actions[t].
struct Trajectory {
  Tokens actions;                                  // may end with <eos>
  std::vector<std::vector<double>> policy;         // sampling (delayed) actor p'(.|prefix)
  std::vector<double> rewards;                     // r_t
  std::vector<std::vector<double>> critic;         // Q(.; prefix)
  std::vector<std::vector<double>> target_critic;  // Q'(.; prefix)
  std::vector<std::vector<double>> actor_states;   // optional

  std::size_t length() const noexcept { return actions.size(); }
  /// Throws std::invalid_argument unless all per-step arrays agree in length.
  void validate() const;
};

/// q_t = r_t + sum_a p'(a | prefix_{t+1}) Q'(a; prefix_{t+1}); the last step
/// has no bootstrap term.
std::vector<double> td_targets(const Trajectory& traj);
/// q_t = sum_{tau >= t} r_tau.
std::vector<double> mc_targets(const Trajectory& traj);

/// sum_t (Q(a_t) - q_t)^2 + lambda * sum_t sum_a (Q(a) - mean Q)^2 over rows
/// of `values` [T, A]; targets are constants.
Var critic_loss(Graph& g, Var values, const Tokens& actions, const std::vector<double>& targets,
                double lambda);
double critic_loss(const std::vector<std::vector<double>>& values, const Tokens& actions,
                   const std::vector<double>& targets, double lambda);

/// Critic loss and its gradient for one trajectory.
struct CriticUpdate {
  Gradients grads;
  std::vector<std::vector<double>> values;  // Q before the update
  double loss = 0.0;
  double td_error = 0.0;  // mean over steps of (Q(a_t) - q_t)^2
};
CriticUpdate critic_gradient(const EncoderDecoder& critic, ParamSet& params,
                             const Tokens& reference, const Tokens& actions,
                             const std::vector<double>& targets, double lambda,
                             const std::vector<std::vector<double>>* actor_states = nullptr);

/// Gradient of the negated actor objective
///   sum_t sum_a p(a | prefix_t) Q(a; prefix_t)  +  lambda_ll * log p(Y | X)
/// with Q held constant. `objective` receives the objective's value.
Gradients ac_actor_gradient(const EncoderDecoder& actor, ParamSet& params, const Tokens& source,
                            const Tokens& actions, const std::vector<std::vector<double>>& qhat,
                            double lambda_ll, const Tokens& target, int eos,
                            double* objective = nullptr);

/// Gradient of the negated REINFORCE surrogate
///   sum_t log p(a_t | prefix_t) * advantage_t  +  lambda_ll * log p(Y | X).
Gradients reinforce_gradient(const EncoderDecoder& actor, ParamSet& params, const Tokens& source,
                             const Tokens& actions, const std::vector<double>& advantages,
                             double lambda_ll, const Tokens& target, int eos,
                             double* objective = nullptr);

/// Gradient of the negated mean teacher-forced log-likelihood of a batch.
Gradients ll_gradient(const EncoderDecoder& actor, ParamSet& params,
                      const std::vector<SequencePair>& batch, int eos, double* loss = nullptr);
/// ll_gradient followed by clipping and an Adam update. Returns the mean loss
/// per sequence; throws DivergenceError on a non-finite loss.
double ll_step(const EncoderDecoder& actor, ParamSet& params, AdamState& adam,
               const std::vector<SequencePair>& batch, int eos, double clip_norm);

/// Networks, shadows and optimizer state of a run.
struct ModelState {
  EncoderDecoder actor;
  EncoderDecoder critic;
  LinearBaseline baseline;
  ParamSet actor_params, critic_params, baseline_params;
  ParamSet shadow_actor, shadow_critic;
  AdamState actor_adam, critic_adam, baseline_adam;
  int phases_done = 0;  // 1: LL pretraining, 2: critic pretraining, 3: joint training
  std::uint64_t step = 0;  // optimizer steps across all phases

  /// Fresh state; weights drawn uniformly with config.init_width from
  /// streams derived from config.seed.
  static ModelState create(const TrainConfig& config, std::size_t vocab_size);
  /// Flat tensor view for checkpoints (see checkpoint.hpp for names).
  NamedTensors to_tensors() const;
  /// Restores whatever the tensors contain on top of a fresh state built
  /// from `config`; missing critic tensors leave the critic freshly initialized.
  static ModelState from_tensors(const TrainConfig& config, std::size_t vocab_size,
                                 const NamedTensors& tensors);
};

struct PhaseResult {
  std::string phase;
  std::uint64_t steps = 0;
  double valid_cer = 0.0;  // on the evaluation subset at the end of the phase
  std::vector<double> smoothed_td;  // critic pretraining only, one entry per step
};

/// Runs the training phases over a spelling dataset. Metrics go to `log`;
/// `on_checkpoint(tag)` is invoked at phase boundaries and every
/// checkpoint_every steps.
class Trainer {
 public:
  Trainer(TrainConfig config, const SpellingData& data, ModelState& state, MetricsLog& log);

  std::function<void(const std::string& tag)> on_checkpoint;

  PhaseResult pretrain_ll();
  PhaseResult pretrain_critic();
  PhaseResult train_joint();
  /// The phases `mode` needs that `state` has not completed yet.
  std::vector<PhaseResult> run();

  /// Greedy corpus CER on the first `limit` validation pairs (0 = all).
  double validation_cer(std::size_t limit) const;
  /// One sampled trajectory from the delayed actor, with rewards and target-critic values.
  Trajectory sample(const SequencePair& pair, Rng& rng) const;

 private:
  std::size_t max_len_for(const Tokens& source) const;
  void check_divergence(const std::vector<std::vector<double>>& values, const Tokens& reference,
                        std::size_t max_len, double loss) const;
  void checkpoint(const std::string& tag);
  struct StepStats {
    double td_error = 0.0;
    double critic_loss = 0.0;
    double actor_objective = 0.0;
    double score = 0.0;  // mean R of the sampled predictions
    double length = 0.0;
  };
  StepStats rl_step(bool update_actor, BatchStream& stream, Rng& rng);

  TrainConfig config_;
  const SpellingData* data_;
  ModelState* state_;
  MetricsLog* log_;
  ScoreFunction score_;
  int eos_;
};

}  // namespace seqac
