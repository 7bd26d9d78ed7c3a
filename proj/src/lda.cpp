#include "aigt/lda.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "aigt/error.hpp"
#include "aigt/io.hpp"

namespace aigt {

void LdaParams::validate() const {
  if (num_topics < 1) throw contract_error("num_topics must be >= 1", "num_topics");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw contract_error("alpha must be > 0", "alpha");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw contract_error("beta must be > 0", "beta");
  if (sweeps < 1) throw contract_error("sweeps must be >= 1", "sweeps");
  if (top_n_words < 0) throw contract_error("top_n_words must be >= 0", "top_n_words");
  if (average_last < 0 || average_last > sweeps) {
    throw contract_error("average_last must be in [0, sweeps]", "average_last");
  }
}

SamplerState init_state(const EncodedCorpus& corpus, const LdaParams& params) {
  params.validate();
  if (corpus.vocabulary.empty() || corpus.num_tokens() == 0) {
    throw contract_error("cannot sample an empty corpus", "corpus");
  }
  const size_t K = static_cast<size_t>(params.num_topics);
  const size_t W = corpus.vocabulary.size();
  const size_t D = corpus.num_docs();

  SamplerState s;
  s.num_topics = K;
  s.num_words = W;
  s.word_topic.assign(W * K, 0);
  s.doc_topic.assign(D * K, 0);
  s.topic_total.assign(K, 0);
  s.doc_total.assign(D, 0);
  s.rng = Rng(params.seed);
  s.z.resize(D);
  for (size_t d = 0; d < D; ++d) {
    const auto& doc = corpus.docs[d];
    s.z[d].resize(doc.size());
    for (size_t i = 0; i < doc.size(); ++i) {
      const auto k = static_cast<int32_t>(s.rng.uniform_index(K));
      s.z[d][i] = k;
      ++s.word_topic[doc[i] * K + k];
      ++s.doc_topic[d * K + k];
      ++s.topic_total[k];
      ++s.doc_total[d];
    }
  }
  return s;
}

std::vector<double> gibbs_conditional(const SamplerState& state, const EncodedCorpus& corpus,
                                      const LdaParams& params, size_t doc, size_t position) {
  if (doc >= corpus.docs.size() || position >= corpus.docs[doc].size()) {
    throw contract_error("token index out of range", "position");
  }
  const size_t K = state.num_topics;
  const double w_beta = static_cast<double>(state.num_words) * params.beta;
  const uint32_t w = corpus.docs[doc][position];
  const int32_t current = state.z[doc][position];

  std::vector<double> p(K);
  double total = 0.0;
  for (size_t k = 0; k < K; ++k) {
    const int32_t own = static_cast<int32_t>(k) == current ? 1 : 0;
    const double word_part = (state.n_wt(w, k) - own + params.beta) /
                             (state.topic_total[k] - own + w_beta);
    p[k] = word_part * (state.n_dt(doc, k) - own + params.alpha);
    total += p[k];
  }
  for (double& v : p) v /= total;
  return p;
}

void gibbs_sweep(SamplerState& s, const EncodedCorpus& corpus, const LdaParams& params) {
  const size_t K = s.num_topics;
  const double beta = params.beta;
  const double alpha = params.alpha;
  const double w_beta = static_cast<double>(s.num_words) * beta;
  std::vector<double> cumulative(K);

  for (size_t d = 0; d < corpus.docs.size(); ++d) {
    const auto& doc = corpus.docs[d];
    int32_t* doc_row = &s.doc_topic[d * K];
    for (size_t i = 0; i < doc.size(); ++i) {
      const uint32_t w = doc[i];
      int32_t* word_row = &s.word_topic[static_cast<size_t>(w) * K];
      int32_t k_old = s.z[d][i];
      --word_row[k_old];
      --doc_row[k_old];
      --s.topic_total[k_old];

      double total = 0.0;
      for (size_t k = 0; k < K; ++k) {
        total += (word_row[k] + beta) / (s.topic_total[k] + w_beta) * (doc_row[k] + alpha);
        cumulative[k] = total;
      }
      const double u = s.rng.uniform01() * total;
      size_t k_new = 0;
      while (k_new + 1 < K && cumulative[k_new] <= u) ++k_new;

      s.z[d][i] = static_cast<int32_t>(k_new);
      ++word_row[k_new];
      ++doc_row[k_new];
      ++s.topic_total[k_new];
    }
  }
}

double log_likelihood(const SamplerState& s, const LdaParams& params) {
  const size_t K = s.num_topics;
  const size_t W = s.num_words;
  const size_t D = s.doc_total.size();
  const double beta = params.beta;
  const double alpha = params.alpha;

  // log p(w | z): one Dirichlet-multinomial per topic.
  double ll = static_cast<double>(K) *
              (std::lgamma(W * beta) - static_cast<double>(W) * std::lgamma(beta));
  for (size_t k = 0; k < K; ++k) {
    double row = 0.0;
    for (size_t w = 0; w < W; ++w) row += std::lgamma(s.n_wt(w, k) + beta);
    ll += row - std::lgamma(s.topic_total[k] + W * beta);
  }
  // log p(z): one Dirichlet-multinomial per document.
  ll += static_cast<double>(D) *
        (std::lgamma(K * alpha) - static_cast<double>(K) * std::lgamma(alpha));
  for (size_t d = 0; d < D; ++d) {
    double row = 0.0;
    for (size_t k = 0; k < K; ++k) row += std::lgamma(s.n_dt(d, k) + alpha);
    ll += row - std::lgamma(s.doc_total[d] + K * alpha);
  }
  return ll;
}

std::vector<double> estimate_phi(const SamplerState& s, const LdaParams& params) {
  const size_t K = s.num_topics;
  const size_t W = s.num_words;
  std::vector<double> phi(K * W);
  const double w_beta = static_cast<double>(W) * params.beta;
  for (size_t k = 0; k < K; ++k) {
    const double denom = s.topic_total[k] + w_beta;
    for (size_t w = 0; w < W; ++w) phi[k * W + w] = (s.n_wt(w, k) + params.beta) / denom;
  }
  return phi;
}

std::vector<double> estimate_theta(const SamplerState& s, const LdaParams& params) {
  const size_t K = s.num_topics;
  const size_t D = s.doc_total.size();
  std::vector<double> theta(D * K);
  const double k_alpha = static_cast<double>(K) * params.alpha;
  for (size_t d = 0; d < D; ++d) {
    const double denom = s.doc_total[d] + k_alpha;
    for (size_t k = 0; k < K; ++k) theta[d * K + k] = (s.n_dt(d, k) + params.alpha) / denom;
  }
  return theta;
}

TopicModel run_lda(const EncodedCorpus& corpus, const LdaParams& params,
                   const SweepCallback& on_sweep) {
  SamplerState state = init_state(corpus, params);

  TopicModel model;
  model.params = params;
  model.corpus_ref = corpus.fingerprint();
  model.words = corpus.vocabulary.words();
  model.doc_ids = corpus.doc_ids;
  model.num_topics = state.num_topics;
  model.log_likelihood_trace.reserve(params.sweeps);

  std::vector<double> phi_sum;
  std::vector<double> theta_sum;
  const int average_from = params.sweeps - params.average_last;
  for (int sweep = 0; sweep < params.sweeps; ++sweep) {
    gibbs_sweep(state, corpus, params);
    const double ll = log_likelihood(state, params);
    model.log_likelihood_trace.push_back(ll);
    if (params.average_last > 0 && sweep >= average_from) {
      auto phi = estimate_phi(state, params);
      auto theta = estimate_theta(state, params);
      if (phi_sum.empty()) {
        phi_sum = std::move(phi);
        theta_sum = std::move(theta);
      } else {
        for (size_t i = 0; i < phi.size(); ++i) phi_sum[i] += phi[i];
        for (size_t i = 0; i < theta.size(); ++i) theta_sum[i] += theta[i];
      }
    }
    if (on_sweep) on_sweep(sweep + 1, ll);
  }

  if (params.average_last > 0) {
    const double n = params.average_last;
    for (double& v : phi_sum) v /= n;
    for (double& v : theta_sum) v /= n;
    model.phi = std::move(phi_sum);
    model.theta = std::move(theta_sum);
  } else {
    model.phi = estimate_phi(state, params);
    model.theta = estimate_theta(state, params);
  }
  model.assignments = std::move(state.z);
  return model;
}

std::string TopicModel::model_id() const {
  const std::string key = corpus_ref + "|" + to_json(params).dump();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "model-%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::string> top_words(const TopicModel& model, size_t topic, size_t n) {
  if (topic >= model.num_topics) throw contract_error("topic out of range", "topic");
  const size_t W = model.num_words();
  std::vector<size_t> order(W);
  std::iota(order.begin(), order.end(), 0);
  const double* row = &model.phi[topic * W];
  const size_t take = std::min(n, W);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](size_t a, size_t b) {
                      if (row[a] != row[b]) return row[a] > row[b];
                      return model.words[a] < model.words[b];
                    });
  std::vector<std::string> out;
  out.reserve(take);
  for (size_t i = 0; i < take; ++i) out.push_back(model.words[order[i]]);
  return out;
}

std::vector<DocumentWeight> top_documents(const TopicModel& model, size_t topic, size_t n) {
  if (topic >= model.num_topics) throw contract_error("topic out of range", "topic");
  std::vector<DocumentWeight> docs;
  docs.reserve(model.num_docs());
  for (size_t d = 0; d < model.num_docs(); ++d) {
    docs.push_back({model.doc_ids[d], model.theta_at(d, topic)});
  }
  std::sort(docs.begin(), docs.end(), [](const DocumentWeight& a, const DocumentWeight& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.doc_id < b.doc_id;
  });
  if (docs.size() > n) docs.resize(n);
  return docs;
}

nlohmann::json to_json(const LdaParams& p) {
  return {{"num_topics", p.num_topics}, {"alpha", p.alpha},   {"beta", p.beta},
          {"sweeps", p.sweeps},         {"seed", p.seed},     {"top_n_words", p.top_n_words},
          {"average_last", p.average_last}};
}

LdaParams lda_params_from_json(const nlohmann::json& j) {
  namespace jf = json_field;
  LdaParams p;
  if (!j.is_object()) throw Error(ErrorKind::kCorrupt, "params must be an object", "params");
  if (j.contains("num_topics")) p.num_topics = static_cast<int>(jf::integer(j, "num_topics", ""));
  if (j.contains("alpha")) p.alpha = jf::number(j, "alpha", "");
  if (j.contains("beta")) p.beta = jf::number(j, "beta", "");
  if (j.contains("sweeps")) p.sweeps = static_cast<int>(jf::integer(j, "sweeps", ""));
  if (j.contains("seed")) p.seed = jf::unsigned_integer(j, "seed", "");
  if (j.contains("top_n_words")) p.top_n_words = static_cast<int>(jf::integer(j, "top_n_words", ""));
  if (j.contains("average_last")) {
    p.average_last = static_cast<int>(jf::integer(j, "average_last", ""));
  }
  return p;
}

nlohmann::json to_json(const TopicModel& m, bool include_assignments) {
  nlohmann::json topics = nlohmann::json::array();
  const size_t n = static_cast<size_t>(m.params.top_n_words);
  for (size_t k = 0; k < m.num_topics; ++k) {
    topics.push_back({{"topic_id", k}, {"top_words", top_words(m, k, n)}});
  }
  nlohmann::json j = {{"format", "aigt.topic_model"},
                      {"schema_version", 1},
                      {"model_id", m.model_id()},
                      {"corpus_ref", m.corpus_ref},
                      {"params", to_json(m.params)},
                      {"num_topics", m.num_topics},
                      {"vocabulary", m.words},
                      {"doc_ids", m.doc_ids},
                      {"topics", topics},
                      {"phi", m.phi},
                      {"theta", m.theta},
                      {"log_likelihood_trace", m.log_likelihood_trace}};
  if (include_assignments) j["assignments"] = m.assignments;
  return j;
}

TopicModel topic_model_from_json(const nlohmann::json& j) {
  namespace jf = json_field;
  if (jf::integer(j, "schema_version", "") != 1) {
    throw Error(ErrorKind::kVersion, "unsupported topic model schema_version", "schema_version");
  }
  TopicModel m;
  m.params = lda_params_from_json(jf::object(j, "params", ""));
  m.corpus_ref = jf::string(j, "corpus_ref", "");
  m.num_topics = static_cast<size_t>(jf::integer(j, "num_topics", ""));
  const char* field = "vocabulary";
  try {
    m.words = jf::array(j, "vocabulary", "").get<std::vector<std::string>>();
    field = "doc_ids";
    m.doc_ids = jf::array(j, "doc_ids", "").get<std::vector<std::string>>();
    field = "phi";
    m.phi = jf::array(j, "phi", "").get<std::vector<double>>();
    field = "theta";
    m.theta = jf::array(j, "theta", "").get<std::vector<double>>();
    field = "log_likelihood_trace";
    m.log_likelihood_trace = jf::array(j, "log_likelihood_trace", "").get<std::vector<double>>();
    field = "assignments";
    if (j.contains("assignments")) {
      m.assignments = j["assignments"].get<std::vector<std::vector<int32_t>>>();
    }
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::kCorrupt, std::string("invalid field ") + field, field);
  }
  if (m.num_topics != static_cast<size_t>(m.params.num_topics)) {
    throw Error(ErrorKind::kCorrupt, "num_topics disagrees with params", "num_topics");
  }
  if (m.phi.size() != m.num_topics * m.words.size()) {
    throw Error(ErrorKind::kCorrupt, "phi has the wrong size", "phi");
  }
  if (m.theta.size() != m.num_topics * m.doc_ids.size()) {
    throw Error(ErrorKind::kCorrupt, "theta has the wrong size", "theta");
  }
  return m;
}

std::string doc_topic_csv(const TopicModel& m) {
  std::vector<std::string> header{"doc_id"};
  for (size_t k = 0; k < m.num_topics; ++k) header.push_back("topic_" + std::to_string(k));
  std::string out = csv_row(header);
  char buf[40];
  for (size_t d = 0; d < m.num_docs(); ++d) {
    std::vector<std::string> row{m.doc_ids[d]};
    for (size_t k = 0; k < m.num_topics; ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", m.theta_at(d, k));
      row.emplace_back(buf);
    }
    out += csv_row(row);
  }
  return out;
}

}  // namespace aigt
