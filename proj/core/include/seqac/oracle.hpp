#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "seqac/data.hpp"
#include "seqac/decoding.hpp"
#include "seqac/models.hpp"

namespace seqac {

/// A policy over prefixes of a ToyTask-shaped action space: actions are
/// symbols plus <eos>, and <eos> is forced once a prefix has max_len symbols.
/// Parameters are exposed as one flat vector.
class PrefixPolicy {
 public:
  virtual ~PrefixPolicy() = default;
  virtual std::size_t num_actions() const = 0;
  virtual int eos() const = 0;
  virtual std::size_t max_len() const = 0;
  /// p(. | prefix) for prefixes shorter than max_len.
  virtual std::vector<double> distribution(const Tokens& prefix) const = 0;

  virtual std::size_t num_params() const = 0;
  virtual std::vector<double> params() const = 0;
  virtual void set_params(std::span<const double> values) = 0;
  /// grad += scale * sum_a weights[a] * d p(a | prefix) / d params
  virtual void add_prob_gradient(const Tokens& prefix, std::span<const double> weights,
                                 double scale, std::span<double> grad) const = 0;
  /// grad += scale * d log p(action | prefix) / d params
  virtual void add_log_prob_gradient(const Tokens& prefix, int action, double scale,
                                     std::span<double> grad) const = 0;

  /// Distribution with the forced <eos> at full length.
  std::vector<double> step_distribution(const Tokens& prefix) const;
};

/// One softmax logit row per prefix shorter than max_len.
class TabularPolicy final : public PrefixPolicy {
 public:
  TabularPolicy(std::size_t num_symbols, std::size_t max_len);

  std::size_t num_actions() const override { return symbols_ + 1; }
  int eos() const override { return static_cast<int>(symbols_); }
  std::size_t max_len() const override { return max_len_; }
  std::vector<double> distribution(const Tokens& prefix) const override;
  std::size_t num_params() const override { return logits_.size(); }
  std::vector<double> params() const override { return logits_; }
  void set_params(std::span<const double> values) override;
  void add_prob_gradient(const Tokens& prefix, std::span<const double> weights, double scale,
                         std::span<double> grad) const override;
  void add_log_prob_gradient(const Tokens& prefix, int action, double scale,
                             std::span<double> grad) const override;

  std::size_t num_prefixes() const noexcept { return rows_; }
  std::size_t row_of(const Tokens& prefix) const;
  void randomize(Rng& rng, double scale);

 private:
  std::size_t symbols_;
  std::size_t max_len_;
  std::size_t rows_ = 0;
  std::vector<double> logits_;
};

/// Adapter exposing an attention actor, for one fixed source, as a PrefixPolicy.
class NeuralPolicy final : public PrefixPolicy {
 public:
  NeuralPolicy(const EncoderDecoder& actor, ParamSet& params, Tokens source, int eos,
               std::size_t max_len);

  std::size_t num_actions() const override { return actor_->dims().outputs; }
  int eos() const override { return eos_; }
  std::size_t max_len() const override { return max_len_; }
  std::vector<double> distribution(const Tokens& prefix) const override;
  std::size_t num_params() const override { return params_->num_values(); }
  std::vector<double> params() const override { return params_->flatten(); }
  void set_params(std::span<const double> values) override { params_->unflatten(values); }
  void add_prob_gradient(const Tokens& prefix, std::span<const double> weights, double scale,
                         std::span<double> grad) const override;
  void add_log_prob_gradient(const Tokens& prefix, int action, double scale,
                             std::span<double> grad) const override;

 private:
  void add_gradient(const Tokens& prefix, std::span<const double> weights, bool log_space,
                    double scale, std::span<double> grad) const;

  const EncoderDecoder* actor_;
  ParamSet* params_;
  Tokens source_;
  int eos_;
  std::size_t max_len_;
};

/// Exact V and Q for every prefix reachable under a PrefixPolicy.
struct ExactValues {
  std::map<Tokens, double> value;
  std::map<Tokens, std::vector<double>> q;
  std::map<Tokens, std::vector<double>> policy;
  std::map<Tokens, std::vector<double>> reward;  // r(a; prefix)
};

/// Reward for appending `action` to `prefix` (see shape_rewards).
double step_reward(const ToyTask& task, const Tokens& prefix, int action, bool shaping);

/// Throws std::length_error when |A|^max_len exceeds `limit`.
void require_enumerable(std::size_t num_actions, std::size_t max_len, double limit = 1e6);

ExactValues enumerate_values(const PrefixPolicy& policy, const ToyTask& task, bool shaping);

/// Expected return V(empty prefix).
double expected_return(const PrefixPolicy& policy, const ToyTask& task);

/// sum over complete sequences Y of p(Y) sum_t sum_a dp(a|Y<t)/dtheta Q(a; Y<t),
/// with exact Q from enumeration.
std::vector<double> exact_policy_gradient(const PrefixPolicy& policy, const ToyTask& task,
                                          bool shaping);

/// Central differences of expected_return over every parameter.
std::vector<double> finite_difference_gradient(PrefixPolicy& policy, const ToyTask& task,
                                               double step = 1e-5);

/// Adapter for running beam search on a PrefixPolicy.
class PolicyScorer final : public StepScorer {
 public:
  explicit PolicyScorer(const PrefixPolicy& policy) : policy_(&policy) {}
  std::size_t num_actions() const override { return policy_->num_actions(); }
  int eos() const override { return policy_->eos(); }
  Tensor start() override;
  Tensor extend(const std::vector<std::size_t>& parents, const std::vector<int>& tokens) override;

 private:
  const PrefixPolicy* policy_;
  std::vector<Tokens> rows_;
};

/// Exhaustive minimum of the penalized cost over all complete sequences.
Hypothesis exhaustive_best(const PrefixPolicy& policy, double rho, double* best_cost = nullptr);
std::size_t count_sequences(std::size_t num_symbols, std::size_t max_len);

enum class Estimator { kActorCritic, kReinforce, kReinforceCritic };
enum class CriticBaseline { kStateValue, kTakenAction };

std::string to_string(Estimator e);

struct EstimatorReport {
  std::string estimator;
  std::size_t samples = 0;
  std::vector<double> mean;
  std::vector<double> std_error;
  std::vector<double> exact;
  std::vector<double> z;
  double max_abs_z = 0.0;
  double z_threshold = 0.0;  // 3-sigma, Bonferroni-corrected over coordinates
  double total_variance = 0.0;  // sum of per-coordinate sample variances
  bool consistent = false;     // max_abs_z < z_threshold
};

/// Two-sided threshold matching a 3-sigma false-alarm rate split over `coordinates`.
double bonferroni_threshold(std::size_t coordinates, double sigmas = 3.0);

/// Monte-Carlo mean and spread of an estimator against the exact gradient.
/// `critic` supplies Q-hat (exact values when null) for the actor-critic
/// estimator and the critic baseline.
EstimatorReport estimator_bias_report(const PrefixPolicy& policy, const ToyTask& task,
                                      bool shaping, Estimator estimator, std::size_t samples,
                                      Rng& rng, const ExactValues* critic = nullptr,
                                      CriticBaseline baseline = CriticBaseline::kStateValue);

struct OracleCheck {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
};

/// Runs a named suite ("identity", "bellman", "shaping", "estimators",
/// "beam" or "all") and returns one entry per check.
std::vector<OracleCheck> run_oracle_suite(const std::string& suite, std::uint64_t seed,
                                          std::size_t samples);
std::string oracle_report_json(const std::vector<OracleCheck>& checks);

}  // namespace seqac
