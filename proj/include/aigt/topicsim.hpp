#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aigt/corpus.hpp"
#include "aigt/lda.hpp"

namespace aigt {

struct Topic {
  int topic_id = 0;
  std::vector<std::string> words;

  bool operator==(const Topic&) const = default;
};

struct TopicSet {
  std::string model_ref;
  std::vector<Topic> topics;

  // Throws when topic ids repeat or a word list is empty or has duplicates.
  void validate() const;
  bool operator==(const TopicSet&) const = default;
};

// The model's topics with their top `words_per_topic` words.
TopicSet topic_set_from_model(const TopicModel& model, size_t words_per_topic);

struct TopicPair {
  int from_id = 0;
  int to_id = 0;
  int shared = 0;

  bool operator==(const TopicPair&) const = default;
};

struct TopicMatching {
  std::vector<TopicPair> pairs;  // in the order the greedy pass chose them
  std::vector<int> unmatched_from;
  std::vector<int> unmatched_to;

  int total_overlap() const;
};

// Number of words the two lists have in common.
int shared_word_count(const std::vector<std::string>& a, const std::vector<std::string>& b);

// Greedy one-to-one matching: repeatedly take the pair with the most shared
// words (at least `threshold`), ties by lower from-id then lower to-id.
TopicMatching match_topics(const TopicSet& from, const TopicSet& to, int threshold);

struct TopicCoverage {
  int topic_id = 0;
  std::optional<int> matched_id;
  int shared = 0;

  bool operator==(const TopicCoverage&) const = default;
};

struct CoverageReport {
  std::string from_set;
  std::string to_set;
  int threshold = 0;
  std::vector<TopicCoverage> per_topic;  // one entry per from-topic, by topic id
  int covered_count = 0;
  double coverage_percent = 0.0;

  bool operator==(const CoverageReport&) const = default;
};

// Fraction of `from` topics matched into `to`. Directional.
CoverageReport coverage(const TopicSet& from, const TopicSet& to, int threshold);

struct GridEntry {
  int from_k = 0;
  int to_k = 0;
  CoverageReport report;
};

struct CoverageGrid {
  std::vector<int> k_list;       // distinct, ascending
  std::vector<GridEntry> entries;  // every ordered pair (from_k != to_k)
  std::map<int, TopicSet> topic_sets;

  const GridEntry* find(int from_k, int to_k) const;
};

struct GridOptions {
  int threshold = 5;
  size_t words_per_topic = 10;
  // Upper bound on concurrently running samplers; 0 means one per K.
  unsigned max_parallel = 0;
};

// Runs one model per K (seed derive_seed(params.seed, K)) and compares all
// ordered pairs. The returned models are keyed by K.
CoverageGrid compare_grid(const EncodedCorpus& corpus, const std::vector<int>& k_list,
                          const LdaParams& params, const GridOptions& options = {},
                          std::map<int, TopicModel>* models_out = nullptr);

// Builds a grid from already computed topic sets (no sampling).
CoverageGrid grid_from_topic_sets(const std::map<int, TopicSet>& sets, int threshold);

struct KSelection {
  int selected_k = 0;
  std::string rule;
  std::map<int, double> scores;  // K -> mean coverage of K's topics by the other sets
  std::vector<GridEntry> inputs;
};

// Picks the K whose topics are best covered by the other candidate sets: the
// score of K is the mean of coverage(K -> K') over every other K' in the
// grid. Highest score wins; ties go to the smaller K.
KSelection select_k(const CoverageGrid& grid);

nlohmann::json to_json(const TopicSet& set);
TopicSet topic_set_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CoverageReport& report);
nlohmann::json to_json(const CoverageGrid& grid);
// Grid JSON carrying only k_list and {from_k, to_k, coverage_percent} entries
// is accepted (per-topic detail optional).
CoverageGrid coverage_grid_from_json(const nlohmann::json& j);
nlohmann::json to_json(const KSelection& selection);
// Rows = from-K, columns = to-K, cells = coverage_percent; diagonal is 100.
std::string coverage_grid_csv(const CoverageGrid& grid);

}  // namespace aigt
