#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <set>

#include "json.hpp"
#include "seqac/oracle.hpp"
#include "test_util.hpp"

using namespace seqac;

namespace {

// Independent enumeration of complete sequences under a prefix policy,
// written against distribution() only.
void brute_force(const PrefixPolicy& pol, Tokens& prefix, double prob,
                 const std::function<void(const Tokens&, double)>& visit) {
  const int eos = pol.eos();
  if (prefix.size() == pol.max_len()) {
    visit(prefix, prob);
    return;
  }
  const auto p = pol.distribution(prefix);
  visit(prefix, prob * p[static_cast<std::size_t>(eos)]);
  for (int a = 0; a < eos; ++a) {
    prefix.push_back(a);
    brute_force(pol, prefix, prob * p[static_cast<std::size_t>(a)], visit);
    prefix.pop_back();
  }
}

double brute_expected_return(const PrefixPolicy& pol, const ToyTask& task) {
  double total = 0.0;
  Tokens prefix;
  brute_force(pol, prefix, 1.0, [&](const Tokens& y, double p) { total += p * task.score_of(y); });
  return total;
}

ToyTask make_task(std::size_t symbols, std::size_t max_len, Tokens ref, ScoreKind kind = ScoreKind::kNegCer) {
  ToyTask t;
  t.num_symbols = symbols;
  t.max_len = max_len;
  t.reference = std::move(ref);
  t.score = ScoreFunction{kind};
  return t;
}

}  // namespace

TEST(Tabular, RowsIndexEveryShortPrefixOnce) {
  TabularPolicy pol(3, 3);
  EXPECT_EQ(pol.num_prefixes(), 1u + 3u + 9u);
  EXPECT_EQ(pol.num_params(), 13u * 4u);
  std::set<std::size_t> rows;
  std::function<void(Tokens&)> walk = [&](Tokens& p) {
    if (p.size() == 3) return;
    rows.insert(pol.row_of(p));
    for (int a = 0; a < 3; ++a) {
      p.push_back(a);
      walk(p);
      p.pop_back();
    }
  };
  Tokens p;
  walk(p);
  EXPECT_EQ(rows.size(), 13u);
  EXPECT_EQ(*rows.rbegin(), 12u);
}

TEST(Tabular, ForcedEndAtFullLength) {
  TabularPolicy pol(2, 2);
  Rng rng(1);
  pol.randomize(rng, 2.0);
  const auto full = pol.step_distribution({1, 0});
  EXPECT_EQ(full, (std::vector<double>{0.0, 0.0, 1.0}));
  const auto d = pol.step_distribution({1});
  EXPECT_NEAR(d[0] + d[1] + d[2], 1.0, 1e-15);
}

TEST(Tabular, GradientsMatchFiniteDifferences) {
  TabularPolicy pol(2, 2);
  Rng rng(2);
  pol.randomize(rng, 1.5);
  const Tokens prefix = {1};
  const std::vector<double> w = {0.3, -1.2, 0.7};
  std::vector<double> grad(pol.num_params(), 0.0), grad_log(pol.num_params(), 0.0);
  pol.add_prob_gradient(prefix, w, 2.0, grad);
  pol.add_log_prob_gradient(prefix, 2, 1.0, grad_log);
  std::vector<double> theta = pol.params();
  const double h = 1e-6;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    auto eval = [&](double delta) {
      auto t = theta;
      t[i] += delta;
      pol.set_params(t);
      const auto p = pol.distribution(prefix);
      return std::pair{2.0 * (w[0] * p[0] + w[1] * p[1] + w[2] * p[2]), std::log(p[2])};
    };
    const auto [fp, lp] = eval(h);
    const auto [fm, lm] = eval(-h);
    EXPECT_NEAR(grad[i], (fp - fm) / (2 * h), 1e-8);
    EXPECT_NEAR(grad_log[i], (lp - lm) / (2 * h), 1e-8);
  }
}

TEST(Enumeration, CountsAllCompleteSequences) {
  EXPECT_EQ(count_sequences(2, 2), 7u);
  EXPECT_EQ(count_sequences(3, 0), 1u);
  TabularPolicy pol(3, 2);
  std::size_t n = 0;
  Tokens p;
  brute_force(pol, p, 1.0, [&](const Tokens&, double) { ++n; });
  EXPECT_EQ(n, count_sequences(3, 2));
  EXPECT_THROW(require_enumerable(10, 7), std::length_error);
  EXPECT_NO_THROW(require_enumerable(3, 3));
}

TEST(Enumeration, SingleSymbolTaskByHand) {
  // Y in {[], [0]}, reference [0], negative CER: R([]) = -1, R([0]) = 0.
  TabularPolicy pol(1, 1);
  pol.set_params(std::vector<double>{std::log(3.0), 0.0});  // p(0) = 0.75 at the root
  const ToyTask task = make_task(1, 1, {0});
  EXPECT_NEAR(expected_return(pol, task), -0.25, 1e-15);
  for (bool shaping : {false, true}) {
    const ExactValues v = enumerate_values(pol, task, shaping);
    EXPECT_NEAR(v.q.at({})[1], -1.0, 1e-15);  // stop now
    // Continuing with 0: shaped reward R([0]) - 0 = 0 then eos earns 0, so Q = 0 either way.
    EXPECT_NEAR(v.q.at({})[0], 0.0, 1e-15);
  }
}

TEST(Enumeration, ValuesSatisfyBellmanAndMatchBruteForce) {
  Rng rng(3);
  for (int trial = 0; trial < 12; ++trial) {
    const ToyTask task = random_toy_task(rng, 3, 3, trial % 2 ? ScoreKind::kSmoothedBleu : ScoreKind::kNegCer);
    TabularPolicy pol(task.num_symbols, task.max_len);
    pol.randomize(rng, 2.0);
    const double brute = brute_expected_return(pol, task);
    EXPECT_NEAR(expected_return(pol, task), brute, 1e-12);
    for (bool shaping : {false, true}) {
      const ExactValues v = enumerate_values(pol, task, shaping);
      EXPECT_NEAR(v.value.at({}), brute, 1e-12);
      for (const auto& [prefix, q] : v.q) {
        const auto& pi = v.policy.at(prefix);
        double vp = 0.0;
        for (std::size_t a = 0; a < q.size(); ++a) {
          vp += pi[a] * q[a];
          if (static_cast<int>(a) == task.eos() || pi[a] == 0.0) continue;
          Tokens next = prefix;
          next.push_back(static_cast<int>(a));
          EXPECT_NEAR(q[a], v.reward.at(prefix)[a] + v.value.at(next), 1e-12);
        }
        EXPECT_NEAR(v.value.at(prefix), vp, 1e-12);
      }
    }
  }
}

TEST(Enumeration, ShapingShiftsValuesByPotentialOnly) {
  Rng rng(4);
  const ToyTask task = make_task(2, 3, {1, 0});
  TabularPolicy pol(2, 3);
  pol.randomize(rng, 1.0);
  const ExactValues plain = enumerate_values(pol, task, false);
  const ExactValues shaped = enumerate_values(pol, task, true);
  for (const auto& [prefix, q] : plain.q) {
    const double potential = prefix.empty() ? 0.0 : task.score_of(prefix);
    EXPECT_NEAR(shaped.value.at(prefix), plain.value.at(prefix) - potential, 1e-12);
    for (std::size_t a = 0; a < q.size(); ++a) {
      if (plain.policy.at(prefix)[a] == 0.0) continue;  // unreachable after forced <eos>
      EXPECT_NEAR(shaped.q.at(prefix)[a], q[a] - potential, 1e-12);
    }
  }
}

TEST(PolicyGradient, ExactMatchesFiniteDifferences) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const ToyTask task = random_toy_task(rng, 3, 3, ScoreKind::kNegCer);
    TabularPolicy pol(task.num_symbols, task.max_len);
    pol.randomize(rng, 1.0);
    const auto fd = finite_difference_gradient(pol, task);
    for (bool shaping : {false, true}) {
      const auto exact = exact_policy_gradient(pol, task, shaping);
      EXPECT_LT(test::max_abs_diff(exact, fd), 1e-8);
    }
  }
}

TEST(PolicyGradient, NeuralPolicyMatchesFiniteDifferences) {
  const EncoderDecoder actor("a.", NetDims{3, 2, 2, 3, 0});
  ParamSet params;
  actor.declare(params);
  Rng rng(6);
  init_uniform(params, 1.0, rng);
  NeuralPolicy pol(actor, params, {0, 1}, 2, 2);
  const ToyTask task = make_task(2, 2, {1, 1});
  const auto exact = exact_policy_gradient(pol, task, true);
  const auto fd = finite_difference_gradient(pol, task);
  EXPECT_LT(test::max_abs_diff(exact, fd), 1e-8);
  // The adapter reproduces the session's step distributions.
  ActorSession s(actor, params, {0, 1});
  const Tensor first = s.start();
  const auto d = pol.distribution({});
  for (std::size_t a = 0; a < 3; ++a) EXPECT_NEAR(d[a], std::exp(first[a]), 1e-12);
}

TEST(Beam, PolicyScorerSearchMatchesBruteForce) {
  Rng rng(7);
  for (int trial = 0; trial < 6; ++trial) {
    TabularPolicy pol(2, 3);
    pol.randomize(rng, 3.0);
    for (double rho : {0.0, 0.7, 2.0}) {
      double best = INFINITY;
      Tokens best_tokens;
      Tokens p;
      brute_force(pol, p, 1.0, [&](const Tokens& y, double prob) {
        const double c = penalized_cost(std::log(prob), y.size(), rho);
        if (c < best) { best = c; best_tokens = y; }
      });
      double exhaustive_cost = 0.0;
      EXPECT_EQ(exhaustive_best(pol, rho, &exhaustive_cost).tokens, best_tokens);
      EXPECT_NEAR(exhaustive_cost, best, 1e-12);
      PolicyScorer scorer(pol);
      const auto beam = beam_search(scorer, count_sequences(2, 3), 3, rho);
      EXPECT_EQ(beam.best.tokens, best_tokens);
    }
  }
}

TEST(Statistics, BonferroniThreshold) {
  EXPECT_NEAR(bonferroni_threshold(1), 3.0, 1e-9);
  // P(|Z| > t) = P(|Z| > 3) / 10
  EXPECT_NEAR(std::erfc(bonferroni_threshold(10) / std::sqrt(2.0)), std::erfc(3.0 / std::sqrt(2.0)) / 10, 1e-12);
  EXPECT_LT(bonferroni_threshold(10), bonferroni_threshold(100));
}

TEST(Statistics, UnbiasedEstimatorsAreConsistent) {
  const ToyTask task = make_task(2, 2, {0, 1});
  TabularPolicy pol(2, 2);
  Rng init(8);
  pol.randomize(init, 1.0);
  for (Estimator e : {Estimator::kActorCritic, Estimator::kReinforce, Estimator::kReinforceCritic}) {
    Rng rng(9);
    const auto r = estimator_bias_report(pol, task, true, e, 20000, rng);
    EXPECT_TRUE(r.consistent) << to_string(e) << " max|z| " << r.max_abs_z;
    EXPECT_EQ(r.mean.size(), pol.num_params());
  }
}

TEST(Statistics, WrongCriticIsDetectedAsBias) {
  const ToyTask task = make_task(2, 2, {0, 1});
  TabularPolicy pol(2, 2);
  Rng init(10);
  pol.randomize(init, 1.0);
  ExactValues wrong = enumerate_values(pol, task, true);
  Rng noise(11);
  for (auto& [prefix, q] : wrong.q) {
    for (double& x : q) x += noise.uniform(-2.0, 2.0);
  }
  Rng rng(12);
  const auto r = estimator_bias_report(pol, task, true, Estimator::kActorCritic, 20000, rng, &wrong);
  EXPECT_FALSE(r.consistent);
  // Exact Q: the actor-critic estimate is a sum over all actions, so it
  // never has more spread than plain REINFORCE.
  Rng r1(13), r2(13);
  const auto ac = estimator_bias_report(pol, task, true, Estimator::kActorCritic, 5000, r1);
  const auto rf = estimator_bias_report(pol, task, true, Estimator::kReinforce, 5000, r2);
  EXPECT_LT(ac.total_variance, rf.total_variance);
}

TEST(Suite, ReportsEveryCheckAsJson) {
  const auto checks = run_oracle_suite("bellman", 1, 100);
  ASSERT_FALSE(checks.empty());
  for (const auto& c : checks) EXPECT_TRUE(c.passed) << c.name << " " << c.detail;
  const auto j = nlohmann::json::parse(oracle_report_json(checks));
  EXPECT_EQ(j.at("schema"), 1);
  EXPECT_TRUE(j.at("passed").get<bool>());
  EXPECT_EQ(j.at("checks").size(), checks.size());
  EXPECT_THROW(run_oracle_suite("nope", 1, 10), std::invalid_argument);
}
