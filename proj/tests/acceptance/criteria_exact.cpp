// Criteria decided on enumerable toy tasks and small networks.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "criteria.hpp"
#include "seqac/gradcheck.hpp"
#include "seqac/oracle.hpp"
#include "seqac/trainers.hpp"

namespace seqac::acceptance {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(3) << x;
  return os.str();
}

// ---------------------------------------------------------------------------
// Gradient checks, grouped by network component.

std::string component_of(const std::string& leaf) {
  if (leaf.rfind("baseline.", 0) == 0) return "linear baseline";
  const bool critic = leaf.rfind("critic.", 0) == 0;
  if (leaf.find("embed") != std::string::npos) return "embeddings";
  if (leaf.find(".enc_") != std::string::npos) return "bi-GRU encoder";
  if (leaf.find(".att.") != std::string::npos) return "attention";
  if (leaf.find(".dec.") != std::string::npos || leaf.find(".init.") != std::string::npos) {
    return "decoder GRU";
  }
  if (leaf.find(".out.") != std::string::npos) return critic ? "critic value head" : "softmax head";
  return "unclassified";
}

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& x : t.values()) x = rng.uniform(-1.0, 1.0);
  return t;
}

// Readouts [T, outputs] of a teacher-forced run over `actions` for one source.
Var readouts(Graph& g, const EncoderDecoder& net, const EncoderDecoder::Bound& p,
             const Tokens& source, const Tokens& actions, const std::vector<Tensor>* extra) {
  const auto enc = net.encode(g, p, PaddedBatch::from({source}));
  const auto run = net.unroll(g, p, enc, PaddedBatch::from({actions}), extra);
  return g.reshape(g.stack(run.readout), {actions.size(), net.dims().outputs});
}

void merge(std::map<std::string, double>& worst, const GradcheckReport& report) {
  for (const auto& leaf : report.leaves) {
    double& w = worst[component_of(leaf.name)];
    w = std::max(w, leaf.max_rel_error);
  }
}

void gradcheck_criterion(Reporter& reporter, std::uint64_t seed) {
  const auto start = Clock::now();
  Rng rng = Rng::derive(seed, 101);
  const std::size_t vocab = 5, embed = 3, hidden = 4;
  const int eos = static_cast<int>(vocab) - 1;
  std::map<std::string, double> worst;
  GradcheckOptions options;

  ParamSet actor_params;
  const EncoderDecoder actor = make_actor(vocab, embed, hidden);
  actor.declare(actor_params);
  init_uniform(actor_params, 1.0, rng);

  {  // Teacher-forced log-likelihood over a ragged batch.
    Graph g;
    const auto p = actor.bind(g, actor_params);
    Var ll = log_likelihood(g, actor, p, {{0, 1, 2}, {3, 1}}, {{2, 0}, {1, 1, 3}}, eos);
    merge(worst, gradcheck(g, ll, options));
  }
  {  // Expected critic value under the softmax policy.
    Graph g;
    const auto p = actor.bind(g, actor_params);
    const Tokens actions = {1, 0, eos};
    Var probs = g.softmax(readouts(g, actor, p, {2, 0, 1}, actions, nullptr));
    Var obj = g.sum(g.mul(probs, g.constant(random_tensor({actions.size(), vocab}, rng))));
    merge(worst, gradcheck(g, obj, options));
  }
  {  // Critic reading actor states, trained with the penalized TD loss.
    ParamSet critic_params;
    const EncoderDecoder critic = make_critic(vocab, embed, hidden, hidden);
    critic.declare(critic_params);
    init_uniform(critic_params, 1.0, rng);
    const Tokens actions = {3, 1, 2, eos};
    std::vector<Tensor> states;
    for (std::size_t t = 0; t < actions.size(); ++t) states.push_back(random_tensor({1, hidden}, rng));
    Graph g;
    const auto p = critic.bind(g, critic_params);
    Var values = readouts(g, critic, p, {1, 2, 3}, actions, &states);
    Var loss = critic_loss(g, values, actions, {0.3, -0.2, 0.1, -0.5}, 1e-1);
    merge(worst, gradcheck(g, loss, options));
  }
  {  // Baseline regression onto returns.
    ParamSet params;
    const LinearBaseline baseline(hidden);
    baseline.declare(params);
    init_uniform(params, 1.0, rng);
    Graph g;
    Var b = baseline.predict(g, params, g.constant(random_tensor({3, hidden}, rng)));
    Var d = g.sub(b, g.constant(random_tensor({3, 1}, rng)));
    merge(worst, gradcheck(g, g.sum(g.mul(d, d)), options));
  }

  const std::vector<std::string> required = {"embeddings",    "bi-GRU encoder", "attention",
                                             "decoder GRU",   "softmax head",   "critic value head",
                                             "linear baseline"};
  bool ok = !worst.contains("unclassified");
  double overall = 0.0;
  std::ostringstream detail;
  for (const auto& name : required) {
    auto it = worst.find(name);
    if (it == worst.end()) {
      ok = false;
      detail << name << "=unchecked ";
      continue;
    }
    overall = std::max(overall, it->second);
    detail << name << "=" << fmt(it->second) << " ";
  }
  const double elapsed = seconds_since(start);
  ok = ok && overall <= options.tolerance && elapsed < 120.0;
  detail << "| max rel err " << fmt(overall) << " <= 1e-4, " << fmt(elapsed) << " s < 120 s";
  reporter.add({"1", "gradient checks per component", ok, detail.str()});
}

// ---------------------------------------------------------------------------
// Exact policy gradient against finite differences of V.

void identity_criterion(Reporter& reporter, std::uint64_t seed) {
  const auto start = Clock::now();
  Rng rng = Rng::derive(seed, 102);
  double worst = 0.0;
  std::size_t tasks = 0;
  for (int k = 0; k < 10; ++k) {
    ToyTask task = random_toy_task(rng, 2, 3, k % 2 == 0 ? ScoreKind::kNegCer : ScoreKind::kSmoothedBleu);
    TabularPolicy policy(task.num_symbols, task.max_len);
    policy.randomize(rng, 1.0);
    const auto fd = finite_difference_gradient(policy, task);
    for (bool shaping : {false, true}) {
      const auto exact = exact_policy_gradient(policy, task, shaping);
      for (std::size_t i = 0; i < exact.size(); ++i) worst = std::max(worst, std::abs(exact[i] - fd[i]));
    }
    ++tasks;
  }
  const double elapsed = seconds_since(start);
  const bool ok = worst <= 1e-6 && elapsed < 60.0;
  reporter.add({"2", "exact policy gradient vs finite differences", ok,
                std::to_string(tasks) + " tasks, max abs diff " + fmt(worst) + " <= 1e-6, " +
                    fmt(elapsed) + " s < 60 s"});
}

// ---------------------------------------------------------------------------
// Monte-Carlo estimators against the exact gradient.

void estimator_criterion(Reporter& reporter, std::uint64_t seed) {
  const auto start = Clock::now();
  ToyTask task;
  task.num_symbols = 2;
  task.max_len = 3;
  task.reference = {0, 1};
  task.score.kind = ScoreKind::kNegCer;
  TabularPolicy policy(task.num_symbols, task.max_len);
  Rng init = Rng::derive(seed, 103);
  policy.randomize(init, 1.0);

  const std::size_t samples = 100000;
  auto run = [&](Estimator e, std::uint64_t stream) {
    Rng rng = Rng::derive(seed, stream);
    return estimator_bias_report(policy, task, true, e, samples, rng);
  };
  const auto rf = run(Estimator::kReinforce, 104);
  const auto rfc = run(Estimator::kReinforceCritic, 105);
  const auto ac = run(Estimator::kActorCritic, 106);
  const double elapsed = seconds_since(start);

  std::ostringstream detail;
  bool ok = true;
  for (const auto* r : {&rf, &rfc, &ac}) {
    ok = ok && r->consistent;
    detail << r->estimator << " max|z|=" << fmt(r->max_abs_z) << " ";
  }
  const bool variance_ok = ac.total_variance < rf.total_variance;
  ok = ok && variance_ok && elapsed < 300.0;
  detail << "< " << fmt(rf.z_threshold) << " (3 sigma, Bonferroni); var ac " << fmt(ac.total_variance)
         << " < var reinforce " << fmt(rf.total_variance) << "; " << fmt(elapsed) << " s < 300 s";
  reporter.add({"3", "estimators unbiased, actor-critic variance lower", ok, detail.str()});
}

// ---------------------------------------------------------------------------
// TD targets from exact values, and reward shaping telescoping.

Tokens sample_actions(const PrefixPolicy& policy, Rng& rng) {
  Tokens prefix;
  while (true) {
    const auto p = policy.step_distribution(prefix);
    const int a = static_cast<int>(rng.categorical(p));
    prefix.push_back(a);
    if (a == policy.eos()) return prefix;
  }
}

void identities_criterion(Reporter& reporter, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, 107);
  double worst_td = 0.0;
  for (int k = 0; k < 10; ++k) {
    ToyTask task = random_toy_task(rng, 2, 3, k % 2 == 0 ? ScoreKind::kNegCer : ScoreKind::kSmoothedBleu);
    TabularPolicy policy(task.num_symbols, task.max_len);
    policy.randomize(rng, 1.0);
    for (bool shaping : {false, true}) {
      const ExactValues ev = enumerate_values(policy, task, shaping);
      for (int n = 0; n < 100; ++n) {
        Trajectory traj;
        traj.actions = sample_actions(policy, rng);
        Tokens prefix;
        for (int a : traj.actions) {
          traj.policy.push_back(ev.policy.at(prefix));
          traj.rewards.push_back(ev.reward.at(prefix)[static_cast<std::size_t>(a)]);
          traj.critic.push_back(ev.q.at(prefix));
          traj.target_critic.push_back(ev.q.at(prefix));
          prefix.push_back(a);
        }
        const auto q = td_targets(traj);
        for (std::size_t t = 0; t < q.size(); ++t) {
          worst_td = std::max(worst_td, std::abs(q[t] - traj.critic[t][static_cast<std::size_t>(traj.actions[t])]));
        }
      }
    }
  }

  double worst_shaping = 0.0;
  std::size_t trajectories = 0;
  for (ScoreKind kind : {ScoreKind::kNegCer, ScoreKind::kSmoothedBleu}) {
    ScoreFunction score;
    score.kind = kind;
    for (int n = 0; n < 1000; ++n) {
      const std::size_t symbols = 2 + rng.index(6);
      const int eos = static_cast<int>(symbols);
      Tokens reference(1 + rng.index(10)), actions(rng.index(15));
      for (int& x : reference) x = static_cast<int>(rng.index(symbols));
      for (int& x : actions) x = static_cast<int>(rng.index(symbols));
      // A trajectory holds at least one action; some are cut off before <eos>.
      if (actions.empty() || rng.index(4) != 0) actions.push_back(eos);
      const auto r = shape_rewards(score, actions, reference, eos, true);
      double total = 0.0;
      for (double x : r) total += x;
      const double expected = score(prediction_of(actions, eos), reference);  // minus R(empty) = 0
      worst_shaping = std::max(worst_shaping, std::abs(total - expected));
      ++trajectories;
    }
  }
  const bool ok = worst_td <= 1e-10 && worst_shaping <= 1e-12;
  reporter.add({"4", "TD targets and shaping identities", ok,
                "TD with exact Q max err " + fmt(worst_td) + " <= 1e-10; shaping over " +
                    std::to_string(trajectories) + " trajectories (both scores) max err " +
                    fmt(worst_shaping) + " <= 1e-12"});
}

// ---------------------------------------------------------------------------
// Wide beam equals the exhaustive optimum.

void beam_criterion(Reporter& reporter, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, 108);
  std::size_t total = 0, mismatches = 0;
  auto check = [&](const PrefixPolicy& policy, std::size_t symbols, std::size_t max_len) {
    for (double rho : {0.0, 0.5, 1.0, 2.0}) {
      PolicyScorer scorer(policy);
      const auto beam = beam_search(scorer, count_sequences(symbols, max_len), max_len, rho);
      double best = 0.0;
      const Hypothesis exact = exhaustive_best(policy, rho, &best);
      ++total;
      if (beam.best.tokens != exact.tokens || std::abs(beam.best_cost - best) > 1e-12) ++mismatches;
    }
  };
  for (int k = 0; k < 20; ++k) {
    const std::size_t symbols = 1 + rng.index(3), max_len = 1 + rng.index(4);
    TabularPolicy policy(symbols, max_len);
    policy.randomize(rng, 2.0);
    check(policy, symbols, max_len);
  }
  for (int k = 0; k < 5; ++k) {
    const std::size_t symbols = 2 + rng.index(2), max_len = 2 + rng.index(2);
    ParamSet params;
    const EncoderDecoder actor = make_actor(symbols + 1, 3, 4);
    actor.declare(params);
    init_uniform(params, 3.0, rng);
    Tokens source(1 + rng.index(4));
    for (int& x : source) x = static_cast<int>(rng.index(symbols));
    NeuralPolicy policy(actor, params, source, static_cast<int>(symbols), max_len);
    check(policy, symbols, max_len);
  }
  reporter.add({"8a", "beam as wide as the output space is exhaustive", mismatches == 0,
                std::to_string(mismatches) + " mismatches over " + std::to_string(total) +
                    " tabular and neural model/rho combinations"});
}

}  // namespace

void run_exact_suite(Reporter& reporter, std::uint64_t seed) {
  gradcheck_criterion(reporter, seed);
  identity_criterion(reporter, seed);
  estimator_criterion(reporter, seed);
  identities_criterion(reporter, seed);
  beam_criterion(reporter, seed);
}

}  // namespace seqac::acceptance
