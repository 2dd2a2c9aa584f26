#include "seqac/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace seqac {

std::vector<double> PrefixPolicy::step_distribution(const Tokens& prefix) const {
  if (prefix.size() >= max_len()) {
    std::vector<double> forced(num_actions(), 0.0);
    forced[static_cast<std::size_t>(eos())] = 1.0;
    return forced;
  }
  return distribution(prefix);
}

// ---------------------------------------------------------------------------
// Tabular policy

TabularPolicy::TabularPolicy(std::size_t num_symbols, std::size_t max_len)
    : symbols_(num_symbols), max_len_(max_len) {
  if (num_symbols < 1 || max_len < 1) throw std::invalid_argument("TabularPolicy: empty space");
  require_enumerable(num_symbols + 1, max_len);
  std::size_t level = 1;
  for (std::size_t k = 0; k < max_len; ++k) {
    rows_ += level;
    level *= num_symbols;
  }
  logits_.assign(rows_ * num_actions(), 0.0);
}

std::size_t TabularPolicy::row_of(const Tokens& prefix) const {
  if (prefix.size() >= max_len_) throw std::out_of_range("TabularPolicy: prefix at full length");
  std::size_t offset = 0;
  std::size_t level = 1;
  for (std::size_t k = 0; k < prefix.size(); ++k) {
    offset += level;
    level *= symbols_;
  }
  std::size_t index = 0;
  for (int s : prefix) {
    if (s < 0 || static_cast<std::size_t>(s) >= symbols_) {
      throw std::out_of_range("TabularPolicy: prefix holds a non-symbol action");
    }
    index = index * symbols_ + static_cast<std::size_t>(s);
  }
  return offset + index;
}

std::vector<double> TabularPolicy::distribution(const Tokens& prefix) const {
  const std::size_t A = num_actions();
  const double* row = logits_.data() + row_of(prefix) * A;
  const double mx = *std::max_element(row, row + A);
  std::vector<double> p(A);
  double total = 0.0;
  for (std::size_t a = 0; a < A; ++a) total += p[a] = std::exp(row[a] - mx);
  for (double& x : p) x /= total;
  return p;
}

void TabularPolicy::set_params(std::span<const double> values) {
  if (values.size() != logits_.size()) throw ShapeError("TabularPolicy: parameter count mismatch");
  logits_.assign(values.begin(), values.end());
}

void TabularPolicy::add_prob_gradient(const Tokens& prefix, std::span<const double> weights,
                                      double scale, std::span<double> grad) const {
  const std::size_t A = num_actions();
  const std::vector<double> p = distribution(prefix);
  double mean = 0.0;
  for (std::size_t a = 0; a < A; ++a) mean += weights[a] * p[a];
  double* g = grad.data() + row_of(prefix) * A;
  // d p_a / d logit_b = p_a (delta_ab - p_b)
  for (std::size_t b = 0; b < A; ++b) g[b] += scale * p[b] * (weights[b] - mean);
}

void TabularPolicy::add_log_prob_gradient(const Tokens& prefix, int action, double scale,
                                          std::span<double> grad) const {
  const std::size_t A = num_actions();
  const std::vector<double> p = distribution(prefix);
  double* g = grad.data() + row_of(prefix) * A;
  for (std::size_t b = 0; b < A; ++b) {
    g[b] += scale * ((static_cast<int>(b) == action ? 1.0 : 0.0) - p[b]);
  }
}

void TabularPolicy::randomize(Rng& rng, double scale) {
  for (double& x : logits_) x = rng.uniform(-scale, scale);
}

// ---------------------------------------------------------------------------
// Neural policy

NeuralPolicy::NeuralPolicy(const EncoderDecoder& actor, ParamSet& params, Tokens source, int eos,
                           std::size_t max_len)
    : actor_(&actor), params_(&params), source_(std::move(source)), eos_(eos), max_len_(max_len) {
  require_enumerable(actor.dims().outputs, max_len);
}

namespace {

// Readout after consuming `prefix`: unroll over prefix + one placeholder.
Var readout_after(Graph& g, const EncoderDecoder& actor, const EncoderDecoder::Bound& p,
                  const Tokens& source, const Tokens& prefix) {
  auto enc = actor.encode(g, p, PaddedBatch::from({source}));
  Tokens outputs = prefix;
  outputs.push_back(0);
  auto run = actor.unroll(g, p, enc, PaddedBatch::from({outputs}));
  return run.readout.back();
}

}  // namespace

std::vector<double> NeuralPolicy::distribution(const Tokens& prefix) const {
  Graph g;
  auto p = actor_->bind_frozen(g, *params_);
  const Tensor& probs = g.value(g.softmax(readout_after(g, *actor_, p, source_, prefix)));
  return {probs.values().begin(), probs.values().end()};
}

void NeuralPolicy::add_gradient(const Tokens& prefix, std::span<const double> weights,
                                bool log_space, double scale, std::span<double> grad) const {
  Graph g;
  auto p = actor_->bind(g, *params_);
  Var logits = readout_after(g, *actor_, p, source_, prefix);
  Var dist = log_space ? g.log_softmax(logits) : g.softmax(logits);
  Tensor seed({1, num_actions()}, std::vector<double>(weights.begin(), weights.end()));
  const Gradients grads = g.backward(dist, seed);
  std::size_t offset = 0;
  for (const auto& [name, t] : *params_) {
    if (grads.contains(name)) {
      const Tensor& gt = grads.at(name);
      for (std::size_t i = 0; i < gt.size(); ++i) grad[offset + i] += scale * gt[i];
    }
    offset += t.size();
  }
}

void NeuralPolicy::add_prob_gradient(const Tokens& prefix, std::span<const double> weights,
                                     double scale, std::span<double> grad) const {
  add_gradient(prefix, weights, false, scale, grad);
}

void NeuralPolicy::add_log_prob_gradient(const Tokens& prefix, int action, double scale,
                                         std::span<double> grad) const {
  std::vector<double> onehot(num_actions(), 0.0);
  onehot[static_cast<std::size_t>(action)] = 1.0;
  add_gradient(prefix, onehot, true, scale, grad);
}

// ---------------------------------------------------------------------------
// Enumeration

void require_enumerable(std::size_t num_actions, std::size_t max_len, double limit) {
  const double size = std::pow(static_cast<double>(num_actions), static_cast<double>(max_len));
  if (size > limit) {
    throw std::length_error("sequence space |A|^max_len = " + std::to_string(num_actions) + "^" +
                            std::to_string(max_len) + " exceeds the enumeration bound " +
                            std::to_string(static_cast<long long>(limit)));
  }
}

double step_reward(const ToyTask& task, const Tokens& prefix, int action, bool shaping) {
  const double potential = prefix.empty() ? 0.0 : task.score_of(prefix);
  if (action == task.eos()) {
    const double final_score = task.score_of(prefix);
    return shaping ? final_score - potential : final_score;
  }
  if (!shaping) return 0.0;
  Tokens next = prefix;
  next.push_back(action);
  return task.score_of(next) - potential;
}

namespace {

void check_compatible(const PrefixPolicy& policy, const ToyTask& task) {
  if (policy.num_actions() != task.num_actions() || policy.eos() != task.eos() ||
      policy.max_len() != task.max_len) {
    throw std::invalid_argument("oracle: policy and task disagree on the action space");
  }
}

double fill_values(const PrefixPolicy& policy, const ToyTask& task, bool shaping,
                   const Tokens& prefix, ExactValues& out) {
  const std::size_t A = policy.num_actions();
  const int eos = policy.eos();
  const bool forced = prefix.size() >= policy.max_len();
  std::vector<double> p = policy.step_distribution(prefix);
  std::vector<double> r(A, 0.0), q(A, 0.0);
  double v = 0.0;
  for (std::size_t a = 0; a < A; ++a) {
    const int action = static_cast<int>(a);
    if (forced && action != eos) continue;
    r[a] = step_reward(task, prefix, action, shaping);
    q[a] = r[a];
    if (action != eos) {
      Tokens next = prefix;
      next.push_back(action);
      q[a] += fill_values(policy, task, shaping, next, out);
    }
    v += p[a] * q[a];
  }
  out.value[prefix] = v;
  out.q[prefix] = std::move(q);
  out.policy[prefix] = std::move(p);
  out.reward[prefix] = std::move(r);
  return v;
}

// Visits every complete sequence with its probability and the prefixes it passed.
void for_each_sequence(const PrefixPolicy& policy, Tokens& prefix, double prob,
                       const std::function<void(const Tokens&, double)>& visit) {
  const std::vector<double> p = policy.step_distribution(prefix);
  for (std::size_t a = 0; a < p.size(); ++a) {
    if (p[a] == 0.0) continue;
    const int action = static_cast<int>(a);
    prefix.push_back(action);
    if (action == policy.eos()) {
      visit(prefix, prob * p[a]);
    } else {
      for_each_sequence(policy, prefix, prob * p[a], visit);
    }
    prefix.pop_back();
  }
}

}  // namespace

ExactValues enumerate_values(const PrefixPolicy& policy, const ToyTask& task, bool shaping) {
  check_compatible(policy, task);
  ExactValues out;
  fill_values(policy, task, shaping, {}, out);
  return out;
}

double expected_return(const PrefixPolicy& policy, const ToyTask& task) {
  return enumerate_values(policy, task, false).value.at({});
}

std::vector<double> exact_policy_gradient(const PrefixPolicy& policy, const ToyTask& task,
                                          bool shaping) {
  const ExactValues exact = enumerate_values(policy, task, shaping);
  std::vector<double> grad(policy.num_params(), 0.0);
  Tokens prefix;
  for_each_sequence(policy, prefix, 1.0, [&](const Tokens& actions, double prob) {
    Tokens before;
    for (int a : actions) {
      if (before.size() < policy.max_len()) {
        policy.add_prob_gradient(before, exact.q.at(before), prob, grad);
      }
      before.push_back(a);
    }
  });
  return grad;
}

std::vector<double> finite_difference_gradient(PrefixPolicy& policy, const ToyTask& task,
                                               double step) {
  std::vector<double> theta = policy.params();
  std::vector<double> grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + step;
    policy.set_params(theta);
    const double up = expected_return(policy, task);
    theta[i] = saved - step;
    policy.set_params(theta);
    const double down = expected_return(policy, task);
    theta[i] = saved;
    grad[i] = (up - down) / (2.0 * step);
  }
  policy.set_params(theta);
  return grad;
}

// ---------------------------------------------------------------------------
// Beam checks

Tensor PolicyScorer::start() {
  rows_.assign(1, Tokens{});
  return extend({}, {});
}

Tensor PolicyScorer::extend(const std::vector<std::size_t>& parents,
                            const std::vector<int>& tokens) {
  if (!parents.empty() || !tokens.empty()) {
    std::vector<Tokens> next;
    for (std::size_t i = 0; i < parents.size(); ++i) {
      next.push_back(rows_.at(parents[i]));
      next.back().push_back(tokens[i]);
    }
    rows_ = std::move(next);
  }
  const std::size_t A = policy_->num_actions();
  Tensor logp({rows_.size(), A});
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    const std::vector<double> p = policy_->step_distribution(rows_[r]);
    for (std::size_t a = 0; a < A; ++a) logp.at(r, a) = std::log(p[a]);
  }
  return logp;
}

std::size_t count_sequences(std::size_t num_symbols, std::size_t max_len) {
  std::size_t total = 0, level = 1;
  for (std::size_t k = 0; k <= max_len; ++k) {
    total += level;
    level *= num_symbols;
  }
  return total;
}

Hypothesis exhaustive_best(const PrefixPolicy& policy, double rho, double* best_cost) {
  Hypothesis best;
  double cost = std::numeric_limits<double>::infinity();
  Tokens prefix;
  for_each_sequence(policy, prefix, 1.0, [&](const Tokens& actions, double prob) {
    const std::size_t len = actions.size() - 1;  // drop <eos>
    const double c = penalized_cost(std::log(prob), len, rho);
    if (c < cost) {
      cost = c;
      best.tokens.assign(actions.begin(), actions.end() - 1);
      best.log_prob = std::log(prob);
      best.finished = true;
    }
  });
  if (best_cost) *best_cost = cost;
  return best;
}

// ---------------------------------------------------------------------------
// Estimator statistics

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::kActorCritic: return "ac";
    case Estimator::kReinforce: return "reinforce";
    case Estimator::kReinforceCritic: return "reinforce-critic";
  }
  return "?";
}

double bonferroni_threshold(std::size_t coordinates, double sigmas) {
  // Two-sided tail mass of `sigmas`, shared across coordinates; invert the
  // normal tail by bisection on erfc.
  const double tail = std::erfc(sigmas / std::sqrt(2.0)) / static_cast<double>(std::max<std::size_t>(coordinates, 1));
  double lo = 0.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (std::erfc(mid / std::sqrt(2.0)) > tail) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

EstimatorReport estimator_bias_report(const PrefixPolicy& policy, const ToyTask& task,
                                      bool shaping, Estimator estimator, std::size_t samples,
                                      Rng& rng, const ExactValues* critic,
                                      CriticBaseline baseline) {
  if (samples < 2) throw std::invalid_argument("estimator_bias_report: need >= 2 samples");
  check_compatible(policy, task);
  ExactValues exact_values;
  if (!critic) {
    exact_values = enumerate_values(policy, task, shaping);
    critic = &exact_values;
  }
  const std::size_t d = policy.num_params();
  EstimatorReport report;
  report.estimator = to_string(estimator);
  report.samples = samples;
  report.exact = exact_policy_gradient(policy, task, shaping);

  std::vector<double> mean(d, 0.0), m2(d, 0.0), g(d);
  const int eos = policy.eos();
  for (std::size_t n = 1; n <= samples; ++n) {
    // Sample a complete sequence.
    std::vector<Tokens> prefixes;
    Tokens actions;
    Tokens prefix;
    while (true) {
      const std::vector<double> p = policy.step_distribution(prefix);
      const int a = static_cast<int>(rng.categorical(p));
      prefixes.push_back(prefix);
      actions.push_back(a);
      if (a == eos) break;
      prefix.push_back(a);
    }
    const std::size_t T = actions.size();
    std::vector<double> rewards(T);
    for (std::size_t t = 0; t < T; ++t) rewards[t] = step_reward(task, prefixes[t], actions[t], shaping);

    std::fill(g.begin(), g.end(), 0.0);
    double to_go = 0.0;
    for (std::size_t t = T; t-- > 0;) {
      to_go += rewards[t];
      const Tokens& before = prefixes[t];
      if (before.size() >= policy.max_len()) continue;  // forced <eos>: no parameters
      const std::vector<double>& qhat = critic->q.at(before);
      switch (estimator) {
        case Estimator::kActorCritic:
          policy.add_prob_gradient(before, qhat, 1.0, g);
          break;
        case Estimator::kReinforce:
          policy.add_log_prob_gradient(before, actions[t], to_go, g);
          break;
        case Estimator::kReinforceCritic: {
          double b = 0.0;
          if (baseline == CriticBaseline::kTakenAction) {
            b = qhat[static_cast<std::size_t>(actions[t])];
          } else {
            const std::vector<double> p = policy.distribution(before);
            for (std::size_t a = 0; a < p.size(); ++a) b += p[a] * qhat[a];
          }
          policy.add_log_prob_gradient(before, actions[t], to_go - b, g);
          break;
        }
      }
    }
    // Welford update per coordinate.
    for (std::size_t i = 0; i < d; ++i) {
      const double delta = g[i] - mean[i];
      mean[i] += delta / static_cast<double>(n);
      m2[i] += delta * (g[i] - mean[i]);
    }
  }

  report.mean = mean;
  report.std_error.resize(d);
  report.z.resize(d);
  report.z_threshold = bonferroni_threshold(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double var = m2[i] / static_cast<double>(samples - 1);
    report.total_variance += var;
    report.std_error[i] = std::sqrt(var / static_cast<double>(samples));
    const double diff = mean[i] - report.exact[i];
    if (report.std_error[i] > 1e-14) {
      report.z[i] = diff / report.std_error[i];
    } else {
      report.z[i] = std::abs(diff) < 1e-10 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    report.max_abs_z = std::max(report.max_abs_z, std::abs(report.z[i]));
  }
  report.consistent = report.max_abs_z < report.z_threshold;
  return report;
}

// ---------------------------------------------------------------------------
// Suites

namespace {

ToyTask suite_task(Rng& rng, std::size_t max_symbols, std::size_t max_len, int instance) {
  return random_toy_task(rng, max_symbols, max_len,
                         instance % 2 == 0 ? ScoreKind::kNegCer : ScoreKind::kSmoothedBleu);
}

std::string describe(const ToyTask& t) {
  std::ostringstream os;
  os << "symbols=" << t.num_symbols << " max_len=" << t.max_len << " score=" << to_string(t.score.kind);
  return os.str();
}

void identity_checks(std::uint64_t seed, std::vector<OracleCheck>& out) {
  Rng rng = Rng::derive(seed, 1);
  double worst = 0.0;
  std::string where;
  for (int k = 0; k < 10; ++k) {
    ToyTask task = suite_task(rng, 2, 3, k);
    TabularPolicy policy(task.num_symbols, task.max_len);
    policy.randomize(rng, 1.0);
    const auto exact = exact_policy_gradient(policy, task, true);
    const auto fd = finite_difference_gradient(policy, task);
    for (std::size_t i = 0; i < exact.size(); ++i) {
      const double err = std::abs(exact[i] - fd[i]);
      if (err > worst) {
        worst = err;
        where = describe(task);
      }
    }
  }
  out.push_back({"policy_gradient_identity", worst <= 1e-6, worst, 1e-6,
                 "10 tabular tasks; worst on " + where});
}

void bellman_checks(std::uint64_t seed, std::vector<OracleCheck>& out) {
  Rng rng = Rng::derive(seed, 2);
  double worst_bellman = 0.0, worst_consistency = 0.0;
  for (int k = 0; k < 10; ++k) {
    ToyTask task = suite_task(rng, 2, 3, k);
    TabularPolicy policy(task.num_symbols, task.max_len);
    policy.randomize(rng, 1.0);
    for (bool shaping : {false, true}) {
      const ExactValues ev = enumerate_values(policy, task, shaping);
      for (const auto& [prefix, q] : ev.q) {
        const auto& p = ev.policy.at(prefix);
        double v = 0.0;
        for (std::size_t a = 0; a < q.size(); ++a) v += p[a] * q[a];
        worst_consistency = std::max(worst_consistency, std::abs(v - ev.value.at(prefix)));
        for (std::size_t a = 0; a < q.size(); ++a) {
          if (p[a] == 0.0) continue;
          double expected = ev.reward.at(prefix)[a];
          if (static_cast<int>(a) != task.eos()) {
            Tokens next = prefix;
            next.push_back(static_cast<int>(a));
            const auto& pn = ev.policy.at(next);
            const auto& qn = ev.q.at(next);
            for (std::size_t b = 0; b < qn.size(); ++b) expected += pn[b] * qn[b];
          }
          worst_bellman = std::max(worst_bellman, std::abs(expected - q[a]));
        }
      }
    }
  }
  out.push_back({"value_consistency", worst_consistency <= 1e-12, worst_consistency, 1e-12,
                 "V = sum_a p Q at every prefix"});
  out.push_back({"bellman_consistency", worst_bellman <= 1e-12, worst_bellman, 1e-12,
                 "Q = r + sum_b p Q at the next prefix"});
}

void shaping_checks(std::uint64_t seed, std::vector<OracleCheck>& out) {
  Rng rng = Rng::derive(seed, 3);
  double worst_v = 0.0, worst_diff = 0.0;
  for (int k = 0; k < 10; ++k) {
    ToyTask task = suite_task(rng, 2, 3, k);
    TabularPolicy policy(task.num_symbols, task.max_len);
    policy.randomize(rng, 1.0);
    const ExactValues plain = enumerate_values(policy, task, false);
    const ExactValues shaped = enumerate_values(policy, task, true);
    worst_v = std::max(worst_v, std::abs(plain.value.at({}) - shaped.value.at({})));
    for (const auto& [prefix, q] : plain.q) {
      if (prefix.size() >= task.max_len) continue;
      const auto& qs = shaped.q.at(prefix);
      for (std::size_t a = 1; a < q.size(); ++a) {
        worst_diff = std::max(worst_diff, std::abs((q[a] - q[0]) - (qs[a] - qs[0])));
      }
    }
  }
  out.push_back({"shaping_preserves_value", worst_v <= 1e-12, worst_v, 1e-12, "V(empty) with and without shaping"});
  out.push_back({"shaping_preserves_q_differences", worst_diff <= 1e-12, worst_diff, 1e-12,
                 "Q(a) - Q(b) with and without shaping"});
}

void estimator_checks(std::uint64_t seed, std::size_t samples, std::vector<OracleCheck>& out) {
  ToyTask task;
  task.num_symbols = 2;
  task.max_len = 3;
  task.reference = {0, 1};
  task.score.kind = ScoreKind::kNegCer;
  TabularPolicy policy(task.num_symbols, task.max_len);
  Rng init = Rng::derive(seed, 4);
  policy.randomize(init, 1.0);

  auto run = [&](Estimator e, std::uint64_t stream) {
    Rng rng = Rng::derive(seed, stream);
    return estimator_bias_report(policy, task, true, e, samples, rng);
  };
  const auto rf = run(Estimator::kReinforce, 5);
  const auto rfc = run(Estimator::kReinforceCritic, 6);
  const auto ac = run(Estimator::kActorCritic, 7);
  for (const auto* r : {&rf, &rfc, &ac}) {
    out.push_back({"unbiased_" + r->estimator, r->consistent, r->max_abs_z, r->z_threshold,
                   std::to_string(r->samples) + " samples, max |z| against exact gradient"});
  }
  out.push_back({"ac_variance_below_reinforce", ac.total_variance < rf.total_variance,
                 ac.total_variance, rf.total_variance,
                 "total variance of actor-critic (exact Q) vs REINFORCE (zero baseline)"});
}

void beam_checks(std::uint64_t seed, std::vector<OracleCheck>& out) {
  Rng rng = Rng::derive(seed, 8);
  std::size_t mismatches = 0, total = 0;
  for (int k = 0; k < 10; ++k) {
    const std::size_t symbols = 1 + rng.index(3);
    const std::size_t max_len = 1 + rng.index(3);
    TabularPolicy policy(symbols, max_len);
    policy.randomize(rng, 2.0);
    for (double rho : {0.0, 0.5, 1.0, 2.0}) {
      PolicyScorer scorer(policy);
      const auto beam = beam_search(scorer, count_sequences(symbols, max_len), max_len, rho);
      double best = 0.0;
      const Hypothesis exact = exhaustive_best(policy, rho, &best);
      ++total;
      if (beam.best.tokens != exact.tokens || std::abs(beam.best_cost - best) > 1e-12) ++mismatches;
    }
  }
  out.push_back({"beam_matches_exhaustive", mismatches == 0, static_cast<double>(mismatches), 0.0,
                 std::to_string(total) + " model/rho combinations"});
}

}  // namespace

std::vector<OracleCheck> run_oracle_suite(const std::string& suite, std::uint64_t seed,
                                          std::size_t samples) {
  std::vector<OracleCheck> out;
  const bool all = suite == "all";
  bool known = all;
  if (all || suite == "identity") { identity_checks(seed, out); known = true; }
  if (all || suite == "bellman") { bellman_checks(seed, out); known = true; }
  if (all || suite == "shaping") { shaping_checks(seed, out); known = true; }
  if (all || suite == "estimators") { estimator_checks(seed, samples, out); known = true; }
  if (all || suite == "beam") { beam_checks(seed, out); known = true; }
  if (!known) {
    throw std::invalid_argument("unknown oracle suite '" + suite +
                                "' (expected identity, bellman, shaping, estimators, beam or all)");
  }
  return out;
}

std::string oracle_report_json(const std::vector<OracleCheck>& checks) {
  nlohmann::ordered_json j;
  j["schema"] = 1;
  bool passed = true;
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const OracleCheck& c : checks) {
    passed = passed && c.passed;
    list.push_back({{"name", c.name},
                    {"passed", c.passed},
                    {"measured", c.measured},
                    {"threshold", c.threshold},
                    {"detail", c.detail}});
  }
  j["passed"] = passed;
  j["checks"] = list;
  return j.dump(2) + "\n";
}

}  // namespace seqac
