#include <cmath>

#include <gtest/gtest.h>

#include "aigt/lda.hpp"
#include "aigt/rng.hpp"
#include "support.hpp"

using namespace aigt;
using namespace aigt::testing;

namespace {

LdaParams params(int k, uint64_t seed = 1, int sweeps = 20) {
  LdaParams p;
  p.num_topics = k;
  p.seed = seed;
  p.sweeps = sweeps;
  return p;
}

}  // namespace

TEST(Params, DefaultsAndValidation) {
  const LdaParams p;
  EXPECT_EQ(p.alpha, 0.5);
  EXPECT_EQ(p.beta, 0.02);
  EXPECT_EQ(p.top_n_words, 10);
  EXPECT_EQ(p.sweeps, 1000);
  auto bad = [](auto mutate) {
    LdaParams q;
    mutate(q);
    EXPECT_THROW(q.validate(), Error);
  };
  bad([](LdaParams& q) { q.num_topics = 0; });
  bad([](LdaParams& q) { q.alpha = 0; });
  bad([](LdaParams& q) { q.beta = -1; });
  bad([](LdaParams& q) { q.alpha = NAN; });
  bad([](LdaParams& q) { q.sweeps = 0; });
  bad([](LdaParams& q) { q.top_n_words = -1; });
  bad([](LdaParams& q) { q.average_last = q.sweeps + 1; });
  EXPECT_EQ(lda_params_from_json(nlohmann::json::object()), LdaParams{});
  EXPECT_EQ(lda_params_from_json(to_json(params(7, 99))), params(7, 99));
}

TEST(Rng, UniformIndexInRangeAndReproducible) {
  Rng a(5), b(5);
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.uniform_index(7);
    EXPECT_LT(x, 7u);
    EXPECT_EQ(x, b.uniform_index(7));
    const double u = a.uniform01();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    b.uniform01();
  }
  Rng c;
  c.set_state(a.state());
  EXPECT_EQ(c, a);
  EXPECT_EQ(c.next_u64(), a.next_u64());
  // First output of mt19937_64 seeded with 5489 is fixed by the standard.
  Rng std_seed(5489);
  EXPECT_EQ(std_seed.next_u64(), 14514284786278117030ull);
}

TEST(Rng, DerivedSeedsDiffer) {
  EXPECT_NE(derive_seed(0, 40), derive_seed(0, 50));
  EXPECT_NE(derive_seed(1, 40), derive_seed(0, 40));
  EXPECT_EQ(derive_seed(3, 40), mix64(3 ^ mix64(40)));
}

TEST(Init, SingleTopicAndCounts) {
  const EncodedCorpus c = random_corpus(10, 30, 20, 40, 1);
  const SamplerState one = init_state(c, params(1));
  for (const auto& row : one.z) {
    for (int k : row) EXPECT_EQ(k, 0);
  }
  EXPECT_EQ(static_cast<size_t>(one.topic_total[0]), c.num_tokens());
  const SamplerState s = init_state(random_corpus(10, 30, 30, 30, 2), params(3, 8));
  EXPECT_EQ(check_counts(s, random_corpus(10, 30, 30, 30, 2)), "");
  EXPECT_EQ(init_state(c, params(3, 8)), init_state(c, params(3, 8)));
  EXPECT_THROW(init_state(make_corpus({}, 3), params(2)), Error);
}

TEST(Conditional, TrivialCases) {
  const EncodedCorpus c = random_corpus(3, 5, 3, 5, 4);
  const SamplerState s = init_state(c, params(1));
  EXPECT_EQ(gibbs_conditional(s, c, params(1), 0, 0), std::vector<double>{1.0});
  const EncodedCorpus single = make_corpus({{0}}, 1);
  const auto p = gibbs_conditional(init_state(single, params(2)), single, params(2), 0, 0);
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
  EXPECT_THROW(gibbs_conditional(s, c, params(1), 0, 99), Error);
  EXPECT_THROW(gibbs_conditional(s, c, params(1), 99, 0), Error);
}

TEST(Conditional, MatchesRecountOracleOnFiveTokenCorpus) {
  const EncodedCorpus c = make_corpus({{0, 1, 0}, {2, 1}}, 3);
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const LdaParams p = params(2, seed);
    SamplerState s = init_state(c, p);
    gibbs_sweep(s, c, p);
    for (size_t d = 0; d < c.num_docs(); ++d) {
      for (size_t i = 0; i < c.docs[d].size(); ++i) {
        const auto got = gibbs_conditional(s, c, p, d, i);
        const auto want = brute_conditional(s, c, p, d, i);
        double sum = 0;
        for (size_t k = 0; k < 2; ++k) {
          EXPECT_NEAR(got[k], want[k], 1e-12);
          EXPECT_GE(got[k], 0.0);
          sum += got[k];
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
      }
    }
  }
}

TEST(Sweep, InvariantsHoldEverySweep) {
  const EncodedCorpus c = random_corpus(12, 25, 20, 30, 9);
  const LdaParams p = params(3, 4);
  SamplerState s = init_state(c, p);
  for (int i = 0; i < 50; ++i) {
    gibbs_sweep(s, c, p);
    ASSERT_EQ(check_counts(s, c), "") << "sweep " << i;
  }
}

TEST(Sweep, SingleTopicOnlyAdvancesRng) {
  const EncodedCorpus c = random_corpus(4, 10, 5, 10, 3);
  const LdaParams p = params(1);
  SamplerState s = init_state(c, p);
  SamplerState before = s;
  gibbs_sweep(s, c, p);
  EXPECT_EQ(s.z, before.z);
  EXPECT_EQ(s.word_topic, before.word_topic);
  before.rng = s.rng;
  EXPECT_EQ(s, before);
}

TEST(LogLikelihood, MatchesChainRuleAndEnumerationFixture) {
  const EncodedCorpus c = random_corpus(6, 12, 5, 15, 21);
  const LdaParams p = params(3, 2);
  SamplerState s = init_state(c, p);
  for (int i = 0; i < 5; ++i) {
    const double ll = log_likelihood(s, p);
    EXPECT_TRUE(std::isfinite(ll));
    EXPECT_LE(ll, 0.0);
    EXPECT_NEAR(ll, chain_rule_log_joint(s, c, p), 1e-9);
    gibbs_sweep(s, c, p);
  }
  // Closed-form values from the oracle script.
  const auto fx = parse_json(read_file(fixture("micro_posterior.json")), "fixture");
  const EncodedCorpus micro = make_corpus(fx["docs"].get<std::vector<std::vector<uint32_t>>>(), 3);
  LdaParams mp = params(2);
  SamplerState ms = init_state(micro, mp);
  for (const auto& entry : fx["log_joint"]) {
    const auto z = entry["z"].get<std::vector<int>>();
    std::fill(ms.word_topic.begin(), ms.word_topic.end(), 0);
    std::fill(ms.doc_topic.begin(), ms.doc_topic.end(), 0);
    std::fill(ms.topic_total.begin(), ms.topic_total.end(), 0);
    size_t t = 0;
    for (size_t d = 0; d < micro.num_docs(); ++d) {
      for (size_t i = 0; i < micro.docs[d].size(); ++i, ++t) {
        ms.z[d][i] = z[t];
        ++ms.word_topic[micro.docs[d][i] * 2 + z[t]];
        ++ms.doc_topic[d * 2 + z[t]];
        ++ms.topic_total[z[t]];
      }
    }
    EXPECT_NEAR(log_likelihood(ms, mp), entry["value"].get<double>(), 1e-10);
  }
}

TEST(RunLda, NormalizedAndSmoothedEstimators) {
  const EncodedCorpus c = random_corpus(8, 20, 10, 20, 5);
  const LdaParams p = params(3, 6, 10);
  const TopicModel m = run_lda(c, p);
  ASSERT_EQ(m.log_likelihood_trace.size(), 10u);
  for (size_t k = 0; k < 3; ++k) {
    double sum = 0;
    for (size_t w = 0; w < m.num_words(); ++w) sum += m.phi_at(k, w);
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
  for (size_t d = 0; d < m.num_docs(); ++d) {
    double sum = 0;
    for (size_t k = 0; k < 3; ++k) sum += m.theta_at(d, k);
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
  // Recompute the estimators by hand from the final assignments.
  std::vector<double> nwt(3 * m.num_words(), 0), nt(3, 0);
  for (size_t d = 0; d < c.num_docs(); ++d) {
    std::vector<double> ndt(3, 0);
    for (size_t i = 0; i < c.docs[d].size(); ++i) {
      const int k = m.assignments[d][i];
      nwt[k * m.num_words() + c.docs[d][i]] += 1;
      nt[k] += 1;
      ndt[k] += 1;
    }
    for (size_t k = 0; k < 3; ++k) {
      EXPECT_NEAR(m.theta_at(d, k), (ndt[k] + p.alpha) / (c.docs[d].size() + 3 * p.alpha), 1e-15);
    }
  }
  for (size_t k = 0; k < 3; ++k) {
    for (size_t w = 0; w < m.num_words(); ++w) {
      EXPECT_NEAR(m.phi_at(k, w), (nwt[k * m.num_words() + w] + p.beta) / (nt[k] + m.num_words() * p.beta), 1e-15);
    }
  }
}

TEST(RunLda, SingleTopicGivesUnigramDistribution) {
  const EncodedCorpus c = make_corpus({{0, 0, 1}, {2, 0}}, 3);
  const TopicModel m = run_lda(c, params(1, 0, 3));
  EXPECT_NEAR(m.phi_at(0, 0), (3 + 0.02) / (5 + 3 * 0.02), 1e-15);
  for (size_t d = 0; d < 2; ++d) EXPECT_DOUBLE_EQ(m.theta_at(d, 0), 1.0);
}

TEST(RunLda, CallbackAndAveraging) {
  const EncodedCorpus c = random_corpus(8, 20, 10, 20, 5);
  LdaParams p = params(3, 6, 10);
  int calls = 0;
  run_lda(c, p, [&](int, double ll) {
    ++calls;
    EXPECT_TRUE(std::isfinite(ll));
  });
  EXPECT_EQ(calls, 10);
  p.average_last = 5;
  const TopicModel m = run_lda(c, p);
  double sum = 0;
  for (size_t w = 0; w < m.num_words(); ++w) sum += m.phi_at(0, w);
  EXPECT_NEAR(sum, 1.0, 1e-9);
  EXPECT_EQ(m.assignments, run_lda(c, params(3, 6, 10)).assignments);
}

TEST(TopWords, OrderTiesAndPrefix) {
  TopicModel m;
  m.num_topics = 1;
  m.words = {"c", "a", "b", "d"};
  m.phi = {0.3, 0.3, 0.2, 0.2};
  EXPECT_EQ(top_words(m, 0, 2), (std::vector<std::string>{"a", "c"}));
  EXPECT_EQ(top_words(m, 0, 4), (std::vector<std::string>{"a", "c", "b", "d"}));
  EXPECT_EQ(top_words(m, 0, 9).size(), 4u);
  EXPECT_TRUE(top_words(m, 0, 0).empty());
  EXPECT_THROW(top_words(m, 1, 2), Error);
  m.words = {"x", "y", "z"};
  m.phi = {0.5, 0.3, 0.2};
  EXPECT_EQ(top_words(m, 0, 2), (std::vector<std::string>{"x", "y"}));
}

// Five documents with hand-set theta columns; ordering is by an independent
// sort on (-theta, doc_id).
TEST(TopDocuments, OrderMatchesIndependentSort) {
  TopicModel m;
  m.num_topics = 2;
  m.doc_ids = {"e", "b", "d", "a", "c"};
  const std::vector<double> col = {0.2, 0.7, 0.2, 0.7, 0.1};
  for (double v : col) {
    m.theta.push_back(v);
    m.theta.push_back(1 - v);
  }
  const auto top = top_documents(m, 0, 10);
  ASSERT_EQ(top.size(), 5u);
  const std::vector<std::string> want = {"a", "b", "d", "e", "c"};
  for (size_t i = 0; i < 5; ++i) EXPECT_EQ(top[i].doc_id, want[i]);
  EXPECT_DOUBLE_EQ(top[0].weight, 0.7);
  EXPECT_EQ(top_documents(m, 1, 1)[0].doc_id, "c");
  EXPECT_THROW(top_documents(m, 2, 1), Error);
}

TEST(Model, JsonRoundTripAndCsv) {
  const EncodedCorpus c = random_corpus(4, 10, 5, 10, 3);
  const TopicModel m = run_lda(c, params(2, 1, 5));
  const TopicModel back = topic_model_from_json(to_json(m, true));
  EXPECT_EQ(back, m);
  const auto j = to_json(m);
  EXPECT_EQ(j["topics"].size(), 2u);
  EXPECT_EQ(j["topics"][0]["top_words"].size(), 10u);
  auto bad = j;
  bad["phi"].erase(0);
  EXPECT_THROW(topic_model_from_json(bad), Error);

  const auto rows = parse_csv(doc_topic_csv(m));
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"doc_id", "topic_0", "topic_1"}));
  EXPECT_EQ(rows[1][0], "d0");
  EXPECT_EQ(std::stod(rows[1][1]), m.theta_at(0, 0));
  EXPECT_EQ(m.model_id(), back.model_id());
}

TEST(Determinism, SameSeedSameModelDifferentSeedDifferentZ) {
  const EncodedCorpus c = random_corpus(20, 60, 50, 50, 77);
  const TopicModel a = run_lda(c, params(5, 42, 30));
  const TopicModel b = run_lda(c, params(5, 42, 30));
  EXPECT_EQ(a, b);
  EXPECT_NE(run_lda(c, params(5, 43, 30)).assignments, a.assignments);
}
