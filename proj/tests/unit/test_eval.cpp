#include <gtest/gtest.h>

#include <algorithm>

#include "json.hpp"
#include "seqac/decoding.hpp"
#include "seqac/eval.hpp"

using namespace seqac;

namespace {

struct Nets {
  EncoderDecoder actor{"actor.", NetDims{5, 3, 4, 5, 0}};
  EncoderDecoder critic{"critic.", NetDims{5, 3, 4, 5, 0}};
  ParamSet actor_params, critic_params;
  Nets() {
    actor.declare(actor_params);
    critic.declare(critic_params);
    Rng rng(4);
    init_uniform(actor_params, 3.0, rng);
    init_uniform(critic_params, 3.0, rng);
  }
};

const std::vector<SequencePair> kPairs = {
    {{0, 1, 2}, {0, 1, 2}}, {{3, 3}, {2, 3}}, {{1}, {1}}, {{2, 0, 1, 3}, {2, 0, 0, 3}}};

}  // namespace

TEST(Evaluate, ScoresTheDecodedPredictions) {
  Nets n;
  std::vector<Tokens> preds;
  const EvalReport r = evaluate(n.actor, n.actor_params, kPairs, 4, DecodeMode{}, ScoreKind::kNegCer, &preds);
  ASSERT_EQ(preds.size(), kPairs.size());
  std::vector<Tokens> refs;
  double score = 0.0;
  for (std::size_t i = 0; i < kPairs.size(); ++i) {
    refs.push_back(kPairs[i].target);
    EXPECT_EQ(preds[i], greedy_decode(n.actor, n.actor_params, kPairs[i].source, 4, default_max_len(kPairs[i].source.size())));
    score += neg_cer(preds[i], kPairs[i].target);
  }
  EXPECT_EQ(r.examples, kPairs.size());
  EXPECT_DOUBLE_EQ(r.cer, corpus_cer(preds, refs));
  EXPECT_NEAR(r.mean_score, score / kPairs.size(), 1e-12);
  const EvalReport again = evaluate(n.actor, n.actor_params, kPairs, 4, DecodeMode{}, ScoreKind::kNegCer);
  EXPECT_EQ(again.cer, r.cer);
}

TEST(Evaluate, BeamDecodingUsesTheSearch) {
  Nets n;
  DecodeMode beam{.beam = true, .width = 3, .rho = 0.5, .max_len = 6};
  std::vector<Tokens> sources;
  for (const auto& p : kPairs) sources.push_back(p.source);
  const auto preds = decode_all(n.actor, n.actor_params, sources, 4, beam);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    EXPECT_EQ(preds[i], beam_decode(n.actor, n.actor_params, sources[i], 4, 3, 6, 0.5));
  }
  EXPECT_EQ(beam.describe(), "beam(width=3,rho=0.5)");
  EXPECT_EQ(DecodeMode{}.describe(), "greedy");
}

TEST(Evaluate, ReportJsonCarriesSchemaAndDecodeSettings) {
  EvalReport r;
  r.split = "test";
  r.decode = DecodeMode{.beam = true, .width = 10, .rho = 0.8};
  r.examples = 3;
  r.cer = 0.125;
  const auto j = nlohmann::json::parse(r.to_json());
  EXPECT_EQ(j.at("schema_version"), kEvalSchemaVersion);
  EXPECT_EQ(j.at("split"), "test");
  EXPECT_EQ(j.at("decode").at("mode"), "beam");
  EXPECT_EQ(j.at("decode").at("width"), 10);
  EXPECT_DOUBLE_EQ(j.at("cer").get<double>(), 0.125);
  EXPECT_EQ(j.at("score_kind"), "neg-cer");
}

TEST(InspectCritic, ListsTopValuesAlongTheGreedyPath) {
  Nets n;
  const SequencePair& ex = kPairs[3];
  const auto view = inspect_critic(n.actor, n.actor_params, n.critic, n.critic_params, ex, 4, 3);
  const std::size_t max_len = default_max_len(ex.source.size());
  Tokens path = greedy_decode(n.actor, n.actor_params, ex.source, 4, max_len);
  if (path.size() < max_len) path.push_back(4);  // a truncated output has no <eos> step
  ASSERT_EQ(view.size(), path.size());
  const auto values = critic_values(n.critic, n.critic_params, ex.target, path);
  for (std::size_t t = 0; t < view.size(); ++t) {
    EXPECT_EQ(view[t].chosen, path[t]);
    ASSERT_EQ(view[t].top.size(), 3u);
    const double best = *std::max_element(values[t].begin(), values[t].end());
    EXPECT_EQ(view[t].top[0].second, best);
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_EQ(view[t].top[k].second, values[t][static_cast<std::size_t>(view[t].top[k].first)]);
      if (k > 0) EXPECT_GE(view[t].top[k - 1].second, view[t].top[k].second);
    }
  }
}

TEST(Curves, GroupsByPhaseAndSplit) {
  const std::vector<MetricRecord> records = {
      {0, "ll", "valid", "cer", 0.9, 0},    {10, "ll", "train", "loss", 3.0, 0},
      {10, "ll", "valid", "cer", 0.5, 0},   {0, "ac", "valid", "cer", 0.5, 0},
      {5, "ac", "train", "cer", 0.6, 0},    {20, "ac", "valid", "cer", 0.4, 0}};
  const auto all = curves(records, "cer");
  ASSERT_EQ(all.size(), 3u);
  EXPECT_EQ(all[0].phase, "ll");
  EXPECT_EQ(all[0].points.size(), 2u);
  EXPECT_EQ(all[0].points[1].step, 10u);
  EXPECT_EQ(all[1].phase, "ac");
  EXPECT_EQ(all[1].split, "valid");
  const auto valid = curves(records, "cer", {"valid"});
  EXPECT_EQ(valid.size(), 2u);
  EXPECT_EQ(curves_csv(valid), "phase,split,step,value\nll,valid,0,0.90000000000000002\nll,valid,10,0.5\n"
                               "ac,valid,0,0.5\nac,valid,20,0.40000000000000002\n");
  try {
    curves(records, "bleu");
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("loss"), std::string::npos);
  }
}

TEST(InspectCritic, FinishedOutputEndsWithTheEosStep) {
  Nets n;
  n.actor_params.at("actor.out.b")[4] = 100.0;  // <eos> dominates every step
  const SequencePair& ex = kPairs[0];
  const auto view = inspect_critic(n.actor, n.actor_params, n.critic, n.critic_params, ex, 4, 2);
  ASSERT_EQ(view.size(), 1u);
  EXPECT_EQ(view[0].chosen, 4);
  const auto values = critic_values(n.critic, n.critic_params, ex.target, Tokens{4});
  EXPECT_EQ(view[0].top[0].second, *std::max_element(values[0].begin(), values[0].end()));
}
