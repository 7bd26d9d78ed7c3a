#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "aigt/corpus.hpp"
#include "aigt/rng.hpp"

namespace aigt {

struct LdaParams {
  int num_topics = 40;
  double alpha = 0.5;  // symmetric document-topic prior
  double beta = 0.02;  // symmetric topic-word prior
  int sweeps = 1000;
  uint64_t seed = 0;
  int top_n_words = 10;
  // When > 0, phi and theta are averaged over the estimates of the last
  // `average_last` sweeps instead of taken from the final state alone.
  int average_last = 0;

  void validate() const;
  bool operator==(const LdaParams&) const = default;
};

// Collapsed Gibbs sampler state. Count tables are dense row-major arrays:
// word_topic is W x K, doc_topic is D x K.
struct SamplerState {
  size_t num_topics = 0;
  size_t num_words = 0;
  std::vector<std::vector<int32_t>> z;
  std::vector<int32_t> word_topic;
  std::vector<int32_t> doc_topic;
  std::vector<int32_t> topic_total;
  std::vector<int32_t> doc_total;
  Rng rng;

  int32_t n_wt(size_t w, size_t k) const { return word_topic[w * num_topics + k]; }
  int32_t n_dt(size_t d, size_t k) const { return doc_topic[d * num_topics + k]; }

  bool operator==(const SamplerState&) const = default;
};

// Assigns every token a uniformly drawn topic and builds the count tables.
SamplerState init_state(const EncodedCorpus& corpus, const LdaParams& params);

// Full conditional p(z_i = k | z_-i, w) for the token at (doc, position), with
// the token's own assignment removed from every count.
std::vector<double> gibbs_conditional(const SamplerState& state, const EncodedCorpus& corpus,
                                      const LdaParams& params, size_t doc, size_t position);

// Resamples every token once, documents in order and positions in order.
void gibbs_sweep(SamplerState& state, const EncodedCorpus& corpus, const LdaParams& params);

// log p(w | z) + log p(z) with phi and theta integrated out.
double log_likelihood(const SamplerState& state, const LdaParams& params);

struct TopicModel {
  LdaParams params;
  std::string corpus_ref;
  std::vector<std::string> words;    // vocabulary, indexed by word id
  std::vector<std::string> doc_ids;  // indexed by document row
  size_t num_topics = 0;
  std::vector<double> phi;    // K x W, rows sum to 1
  std::vector<double> theta;  // D x K, rows sum to 1
  std::vector<double> log_likelihood_trace;
  std::vector<std::vector<int32_t>> assignments;  // final z

  size_t num_words() const { return words.size(); }
  size_t num_docs() const { return doc_ids.size(); }
  double phi_at(size_t topic, size_t word) const { return phi[topic * words.size() + word]; }
  double theta_at(size_t doc, size_t topic) const { return theta[doc * num_topics + topic]; }
  // Deterministic identifier derived from corpus_ref and params.
  std::string model_id() const;

  bool operator==(const TopicModel&) const = default;
};

using SweepCallback = std::function<void(int sweep, double log_likelihood)>;

// init_state, then params.sweeps sweeps, then the smoothed estimators
// phi[k][w] = (n_wt + beta) / (n_t + W beta) and
// theta[d][k] = (n_dt + alpha) / (n_d + K alpha).
TopicModel run_lda(const EncodedCorpus& corpus, const LdaParams& params,
                   const SweepCallback& on_sweep = {});

// Smoothed estimators for a single state.
std::vector<double> estimate_phi(const SamplerState& state, const LdaParams& params);
std::vector<double> estimate_theta(const SamplerState& state, const LdaParams& params);

// Highest-probability words, ties broken by ascending word.
std::vector<std::string> top_words(const TopicModel& model, size_t topic, size_t n);

struct DocumentWeight {
  std::string doc_id;
  double weight = 0.0;

  bool operator==(const DocumentWeight&) const = default;
};

// Documents by descending theta for the topic, ties by ascending doc_id.
std::vector<DocumentWeight> top_documents(const TopicModel& model, size_t topic, size_t n);

nlohmann::json to_json(const LdaParams& params);
LdaParams lda_params_from_json(const nlohmann::json& j);  // absent keys keep defaults

// Model document: params, top-word lists, dense phi/theta, trace. The final
// assignments are included only on request.
nlohmann::json to_json(const TopicModel& model, bool include_assignments = false);
TopicModel topic_model_from_json(const nlohmann::json& j);

// Document-topic matrix: header doc_id,topic_0..topic_{K-1}; values printed
// with 17 significant digits.
std::string doc_topic_csv(const TopicModel& model);

}  // namespace aigt
