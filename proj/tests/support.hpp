#pragma once

// Shared fixtures and oracles for the unit and acceptance tests. Everything
// here recomputes from first principles rather than calling the code under
// test.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "aigt/corpus.hpp"
#include "aigt/io.hpp"
#include "aigt/lda.hpp"
#include "aigt/topicsim.hpp"
#include "aigt/workflow.hpp"

namespace aigt::testing {

inline std::string fixture(const std::string& name) { return std::string(AIGT_FIXTURE_DIR) + "/" + name; }

// Corpus over words "w000", "w001", ... from raw id lists.
inline EncodedCorpus make_corpus(const std::vector<std::vector<uint32_t>>& docs, size_t num_words) {
  std::vector<std::string> words;
  std::vector<int> df(num_words, 0);
  for (size_t w = 0; w < num_words; ++w) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "w%03zu", w);
    words.push_back(buf);
  }
  for (const auto& d : docs) {
    for (uint32_t w : std::set<uint32_t>(d.begin(), d.end())) ++df[w];
  }
  EncodedCorpus c;
  c.vocabulary = Vocabulary(words, df);
  c.docs = docs;
  for (size_t i = 0; i < docs.size(); ++i) c.doc_ids.push_back("d" + std::to_string(i));
  return c;
}

inline EncodedCorpus random_corpus(size_t num_docs, size_t num_words, size_t min_len, size_t max_len,
                                   uint32_t seed) {
  std::mt19937 gen(seed);
  std::uniform_int_distribution<size_t> len(min_len, max_len);
  std::uniform_int_distribution<uint32_t> word(0, static_cast<uint32_t>(num_words - 1));
  std::vector<std::vector<uint32_t>> docs(num_docs);
  for (auto& d : docs) {
    d.resize(len(gen));
    for (auto& w : d) w = word(gen);
  }
  return make_corpus(docs, num_words);
}

// Recount oracle: rebuilds every table from z and the corpus and compares.
// Returns an empty string when invariants (a)-(e) hold.
inline std::string check_counts(const SamplerState& s, const EncodedCorpus& c) {
  const size_t K = s.num_topics;
  const size_t W = c.vocabulary.size();
  std::vector<long> nwt(W * K, 0), ndt(c.num_docs() * K, 0), nt(K, 0), nd(c.num_docs(), 0), freq(W, 0);
  for (size_t d = 0; d < c.num_docs(); ++d) {
    if (s.z[d].size() != c.docs[d].size()) return "z shape differs in doc " + std::to_string(d);
    for (size_t i = 0; i < c.docs[d].size(); ++i) {
      const int k = s.z[d][i];
      if (k < 0 || static_cast<size_t>(k) >= K) return "topic out of range";
      const uint32_t w = c.docs[d][i];
      ++nwt[w * K + k];
      ++ndt[d * K + k];
      ++nt[k];
      ++nd[d];
      ++freq[w];
    }
  }
  long total = 0;
  for (size_t k = 0; k < K; ++k) {
    long col = 0;
    for (size_t w = 0; w < W; ++w) {
      if (s.n_wt(w, k) < 0) return "(d) negative n_wt";
      if (s.n_wt(w, k) != nwt[w * K + k]) return "n_wt differs from recount";
      col += s.n_wt(w, k);
    }
    if (col != s.topic_total[k]) return "(a) column sum of n_wt != n_t";
    if (s.topic_total[k] != nt[k]) return "n_t differs from recount";
    total += s.topic_total[k];
  }
  for (size_t d = 0; d < c.num_docs(); ++d) {
    long row = 0;
    for (size_t k = 0; k < K; ++k) {
      if (s.n_dt(d, k) < 0) return "(d) negative n_dt";
      if (s.n_dt(d, k) != ndt[d * K + k]) return "n_dt differs from recount";
      row += s.n_dt(d, k);
    }
    if (row != s.doc_total[d] || row != nd[d]) return "(b) row sum of n_dt != n_d";
  }
  for (size_t w = 0; w < W; ++w) {
    long row = 0;
    for (size_t k = 0; k < K; ++k) row += s.n_wt(w, k);
    if (row != freq[w]) return "(c) word frequency mismatch";
  }
  if (total != static_cast<long>(c.num_tokens())) return "(e) sum of n_t != token count";
  return {};
}

// Conditional for token (d, i) recomputed by counting every other token from z.
inline std::vector<double> brute_conditional(const SamplerState& s, const EncodedCorpus& c,
                                             const LdaParams& p, size_t doc, size_t pos) {
  const size_t K = s.num_topics;
  const double W = static_cast<double>(c.vocabulary.size());
  const uint32_t w = c.docs[doc][pos];
  std::vector<double> out(K, 0.0);
  for (size_t k = 0; k < K; ++k) {
    double nwt = 0, nt = 0, ndt = 0;
    for (size_t d = 0; d < c.num_docs(); ++d) {
      for (size_t i = 0; i < c.docs[d].size(); ++i) {
        if (d == doc && i == pos) continue;
        if (static_cast<size_t>(s.z[d][i]) != k) continue;
        nt += 1;
        if (c.docs[d][i] == w) nwt += 1;
        if (d == doc) ndt += 1;
      }
    }
    out[k] = (nwt + p.beta) / (nt + W * p.beta) * (ndt + p.alpha);
  }
  double sum = 0;
  for (double v : out) sum += v;
  for (double& v : out) v /= sum;
  return out;
}

// log p(w, z) by the chain rule: the product of sequential predictive
// probabilities of each (word, topic) pair given the ones before it.
inline double chain_rule_log_joint(const SamplerState& s, const EncodedCorpus& c, const LdaParams& p) {
  const size_t K = s.num_topics;
  const double W = static_cast<double>(c.vocabulary.size());
  std::map<std::pair<uint32_t, int>, double> nwt;
  std::vector<double> nt(K, 0.0);
  double lp = 0.0;
  for (size_t d = 0; d < c.num_docs(); ++d) {
    std::vector<double> ndt(K, 0.0);
    double nd = 0.0;
    for (size_t i = 0; i < c.docs[d].size(); ++i) {
      const int k = s.z[d][i];
      const uint32_t w = c.docs[d][i];
      lp += std::log((ndt[k] + p.alpha) / (nd + K * p.alpha));
      lp += std::log((nwt[{w, k}] + p.beta) / (nt[k] + W * p.beta));
      ndt[k] += 1;
      nd += 1;
      nwt[{w, k}] += 1;
      nt[k] += 1;
    }
  }
  return lp;
}

// Synthetic corpus drawn from known topics: each planted topic puts most of
// its mass on its own block of W/K words.
struct PlantedCorpus {
  EncodedCorpus corpus;
  std::vector<std::vector<double>> phi;  // K x W
};

inline PlantedCorpus planted_corpus(size_t K, size_t W, size_t D, size_t tokens_per_doc, uint32_t seed) {
  std::mt19937_64 gen(seed);
  PlantedCorpus out;
  out.phi.assign(K, std::vector<double>(W, 0.0));
  const size_t block = W / K;
  for (size_t k = 0; k < K; ++k) {
    double sum = 0;
    for (size_t w = 0; w < W; ++w) {
      const bool own = w / block == k;
      out.phi[k][w] = own ? 1.0 + std::uniform_real_distribution<double>(0, 1)(gen) : 0.01;
      sum += out.phi[k][w];
    }
    for (double& v : out.phi[k]) v /= sum;
  }
  std::gamma_distribution<double> g(0.2, 1.0);
  std::vector<std::vector<uint32_t>> docs(D);
  for (auto& doc : docs) {
    std::vector<double> theta(K);
    for (double& t : theta) t = g(gen) + 1e-6;
    std::discrete_distribution<size_t> topic(theta.begin(), theta.end());
    for (size_t i = 0; i < tokens_per_doc; ++i) {
      const size_t k = topic(gen);
      std::discrete_distribution<uint32_t> word(out.phi[k].begin(), out.phi[k].end());
      doc.push_back(word(gen));
    }
  }
  out.corpus = make_corpus(docs, W);
  return out;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

// Greedy one-to-one matching on cosine similarity; returns the mean cosine of
// the matched pairs.
inline double matched_mean_cosine(const std::vector<std::vector<double>>& found,
                                  const std::vector<std::vector<double>>& truth) {
  std::vector<std::tuple<double, size_t, size_t>> pairs;
  for (size_t i = 0; i < found.size(); ++i) {
    for (size_t j = 0; j < truth.size(); ++j) pairs.emplace_back(cosine(found[i], truth[j]), i, j);
  }
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return std::get<0>(a) > std::get<0>(b); });
  std::set<size_t> used_i, used_j;
  double sum = 0;
  for (const auto& [c, i, j] : pairs) {
    if (used_i.contains(i) || used_j.contains(j)) continue;
    used_i.insert(i);
    used_j.insert(j);
    sum += c;
  }
  return sum / static_cast<double>(truth.size());
}

// Best total overlap over every one-to-one matching with pairs >= threshold.
inline int exhaustive_best_overlap(const TopicSet& a, const TopicSet& b, int threshold) {
  const size_t n = a.topics.size();
  const size_t m = b.topics.size();
  std::vector<std::vector<int>> shared(n, std::vector<int>(m));
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < m; ++j) {
      std::set<std::string> sa(a.topics[i].words.begin(), a.topics[i].words.end());
      int s = 0;
      for (const auto& w : b.topics[j].words) s += sa.contains(w);
      shared[i][j] = s >= threshold ? s : 0;
    }
  }
  // DP over from-topics with a bitmask of used to-topics.
  std::vector<int> best(size_t{1} << m, -1);
  best[0] = 0;
  for (size_t i = 0; i < n; ++i) {
    std::vector<int> next = best;
    for (size_t mask = 0; mask < best.size(); ++mask) {
      if (best[mask] < 0) continue;
      for (size_t j = 0; j < m; ++j) {
        if ((mask >> j) & 1 || shared[i][j] == 0) continue;
        const size_t nm = mask | (size_t{1} << j);
        next[nm] = std::max(next[nm], best[mask] + shared[i][j]);
      }
    }
    best = next;
  }
  return *std::max_element(best.begin(), best.end());
}

inline TopicSet random_topic_set(std::mt19937& gen, size_t topics, size_t words, size_t pool,
                                 const std::string& ref) {
  TopicSet s;
  s.model_ref = ref;
  std::vector<int> ids(pool);
  for (size_t i = 0; i < pool; ++i) ids[i] = static_cast<int>(i);
  for (size_t t = 0; t < topics; ++t) {
    std::shuffle(ids.begin(), ids.end(), gen);
    Topic topic;
    topic.topic_id = static_cast<int>(t);
    for (size_t i = 0; i < words; ++i) topic.words.push_back("v" + std::to_string(ids[i]));
    s.topics.push_back(topic);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Workflow funnel script. Forty topics go through the four stages ending with
// the six categories and two dimensions of the reference study.

inline Project::Clock counting_clock() {
  auto n = std::make_shared<int>(0);
  return [n] {
    char buf[32];
    const int s = (*n)++;
    std::snprintf(buf, sizeof buf, "2026-01-01T%02d:%02d:%02d.000Z", s / 3600, (s / 60) % 60, s % 60);
    return std::string(buf);
  };
}

inline TopicSet funnel_topics() {
  TopicSet s;
  s.model_ref = "model-funnel";
  for (int k = 0; k < 40; ++k) {
    Topic t;
    t.topic_id = k;
    for (int i = 0; i < 10; ++i) t.words.push_back("t" + std::to_string(k) + "w" + std::to_string(i));
    s.topics.push_back(t);
  }
  return s;
}

struct FunnelCounts {
  size_t initial = 0;
  size_t after_outliers = 0;
  size_t labeled_by_each_expert = 0;
  std::vector<int> rating_removed;
  size_t after_rating_prune = 0;
  size_t categories_before_prune = 0;
  size_t singletons = 0;
  size_t categories_after_prune = 0;
  size_t topic20_categories = 0;
  size_t core_categories = 0;
  size_t dimensions = 0;
};

inline const std::vector<int>& funnel_outliers() {
  static const std::vector<int> v{5, 9, 16, 22, 26, 38};
  return v;
}
// Codes whose two ratings average below 2.
inline const std::vector<int>& funnel_low_rated() {
  static const std::vector<int> v{6, 11, 19, 23};
  return v;
}

struct FunnelCategory {
  const char* name;
  CategoryKind kind;
  std::vector<int> topics;
  const char* dimension;  // nullptr: none
};

inline const std::vector<FunnelCategory>& funnel_categories() {
  static const std::vector<FunnelCategory> v{
      {"Leadership Involvement for Collaboration", CategoryKind::kCore, {0, 1, 20, 18, 21, 33, 36}, "Governance of CI"},
      {"Singleton A", CategoryKind::kCore, {2}, nullptr},
      {"CI During a Project", CategoryKind::kGeneric, {15, 30, 31, 37, 39}, nullptr},
      {"Innovation and Stakeholder Involvement", CategoryKind::kCore, {2, 13, 14, 17, 29, 30, 32}, "Governance of CI"},
      {"Singleton B", CategoryKind::kCore, {24}, nullptr},
      {"Project Management", CategoryKind::kGeneric, {20, 24, 25, 28, 34, 35}, nullptr},
      {"Singleton C", CategoryKind::kGeneric, {7}, nullptr},
      {"Human Capital of CI", CategoryKind::kCore, {3, 12}, "Capabilities for CI"},
      {"Singleton D", CategoryKind::kCore, {33}, nullptr},
      {"Structural capital of CI", CategoryKind::kCore, {3, 4, 7, 8, 10, 17, 20, 27}, "Capabilities for CI"},
  };
  return v;
}

// Runs the whole funnel on `p` (created from funnel_topics()).
inline FunnelCounts run_funnel(Project& p) {
  FunnelCounts n;
  n.initial = p.count(CodeStatus::kActive);
  for (int t : funnel_outliers()) p.mark_outlier(t, "off-topic boilerplate");
  n.after_outliers = p.count(CodeStatus::kActive);
  p.advance_stage();

  const std::set<int> low(funnel_low_rated().begin(), funnel_low_rated().end());
  size_t labeled_e1 = 0, labeled_e2 = 0;
  for (const Code& c : std::vector<Code>(p.codes())) {
    if (!c.active()) continue;
    const int t = c.topic_id;
    // Low codes average 1 or 1.5; topic 10 sits exactly on the 2.0 boundary and stays.
    const int r1 = low.contains(t) ? 1 + (t % 2) : (t == 10 ? 2 : 3 + t % 3);
    const int r2 = low.contains(t) ? 1 : (t == 10 ? 2 : 4);
    p.submit_expert_label("expert-1", t, "label one " + std::to_string(t), r1);
    ++labeled_e1;
    p.submit_expert_label("expert-2", t, "label two " + std::to_string(t), r2);
    ++labeled_e2;
    p.set_aggregate_label(t, "Aggregate " + std::to_string(t));
  }
  n.labeled_by_each_expert = std::min(labeled_e1, labeled_e2);
  n.rating_removed = p.prune_low_rated(2.0);
  n.after_rating_prune = p.count(CodeStatus::kActive);
  p.advance_stage();

  std::map<std::string, int> ids;
  for (const auto& fc : funnel_categories()) {
    const int id = p.create_category(fc.name, fc.kind);
    ids[fc.name] = id;
    for (int t : fc.topics) p.assign_code(id, t);
  }
  n.categories_before_prune = p.categories().size();
  for (const auto& c : p.categories()) n.singletons += c.member_codes.size() < 2;
  p.prune_singleton_categories();
  n.categories_after_prune = p.categories().size();
  for (const auto& c : p.categories()) n.topic20_categories += c.has(20);
  p.add_memo({AttachmentKind::kCode, 20}, "researcher", "topic_20 spans leadership, structure and PM");
  p.advance_stage();

  std::map<std::string, int> dims;
  for (const auto& fc : funnel_categories()) {
    if (fc.dimension == nullptr) continue;
    if (!dims.contains(fc.dimension)) dims[fc.dimension] = p.create_dimension(fc.dimension);
    p.assign_category(dims[fc.dimension], ids[fc.name]);
    ++n.core_categories;
  }
  n.dimensions = p.dimensions().size();
  p.add_memo({AttachmentKind::kProject, 0}, "researcher", "two themes emerged");
  return n;
}

}  // namespace aigt::testing
