#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace aigt {

struct Document {
  std::string doc_id;
  std::string title;
  std::vector<std::string> section_tags;
  std::string raw_text;

  bool operator==(const Document&) const = default;
};

// Selects documents by their section tags. A document passes when it carries
// at least one `include` tag (or `include` is unset) and none of the
// `exclude` tags.
struct SectionFilter {
  std::optional<std::set<std::string>> include;
  std::set<std::string> exclude;

  bool accepts(const Document& doc) const;
  bool operator==(const SectionFilter&) const = default;
};

struct PreprocessConfig {
  std::set<std::string> stopword_list;  // defaults to default_stopwords()
  int min_token_length = 2;
  int min_document_frequency = 2;
  bool stemming_enabled = true;
  bool prefix_stripping_enabled = false;
  std::optional<SectionFilter> section_filter;

  PreprocessConfig();
  void validate() const;
  bool operator==(const PreprocessConfig&) const = default;
};

struct SkippedDocument {
  std::string doc_id;
  std::string reason;

  bool operator==(const SkippedDocument&) const = default;
};

struct Corpus {
  std::vector<Document> documents;
  std::vector<SkippedDocument> skipped;  // ingestion report
};

struct IngestManifest {
  std::optional<SectionFilter> section_filter;
};

// Reads a directory of .txt files (doc_id = file stem, sorted by name) or a
// JSON-Lines file of {doc_id, title, section_tags, raw_text} objects.
// Whitespace-only documents and documents rejected by the manifest filter are
// skipped and listed in Corpus::skipped.
Corpus ingest(const std::string& source_path, const IngestManifest& manifest = {});

// Parses JSON-Lines text; `origin` names the source in error messages.
Corpus ingest_jsonl_text(const std::string& text, const IngestManifest& manifest = {},
                         const std::string& origin = "<jsonl>");

class Vocabulary {
 public:
  Vocabulary() = default;
  // `words` must be duplicate-free; ids are assigned in the given order.
  Vocabulary(std::vector<std::string> words, std::vector<int> document_frequency);

  size_t size() const { return id_to_word_.size(); }
  bool empty() const { return id_to_word_.empty(); }
  const std::string& word(uint32_t id) const { return id_to_word_.at(id); }
  std::optional<uint32_t> id(const std::string& word) const;
  int document_frequency(uint32_t id) const { return document_frequency_.at(id); }
  const std::vector<std::string>& words() const { return id_to_word_; }
  const std::vector<int>& document_frequencies() const { return document_frequency_; }

  bool operator==(const Vocabulary& other) const {
    return id_to_word_ == other.id_to_word_ && document_frequency_ == other.document_frequency_;
  }

 private:
  std::map<std::string, uint32_t> word_to_id_;
  std::vector<std::string> id_to_word_;
  std::vector<int> document_frequency_;
};

struct DroppedWord {
  std::string word;
  int document_frequency = 0;

  bool operator==(const DroppedWord&) const = default;
};

struct PreprocessReport {
  std::vector<SkippedDocument> filtered_documents;  // rejected by section filter
  std::vector<SkippedDocument> dropped_documents;   // empty after preprocessing
  std::vector<DroppedWord> dropped_words;           // below min_document_frequency
  size_t token_count = 0;
  size_t vocabulary_size = 0;

  bool operator==(const PreprocessReport&) const = default;
};

struct EncodedCorpus {
  Vocabulary vocabulary;
  std::vector<std::string> doc_ids;
  std::vector<std::vector<uint32_t>> docs;
  PreprocessConfig provenance;
  PreprocessReport report;

  size_t num_docs() const { return docs.size(); }
  size_t num_tokens() const;
  // Stable content identifier: FNV-1a over the canonical JSON form.
  std::string fingerprint() const;

  bool operator==(const EncodedCorpus&) const = default;
};

// Section filter, tokenize, stopwords, optional prefix strip and stem, then a
// vocabulary pruned by document frequency (ids in lexicographic word order)
// and integer encoding. Throws when every document ends up empty.
EncodedCorpus build_encoded_corpus(const Corpus& corpus, const PreprocessConfig& config);

// The per-document token pipeline used by build_encoded_corpus.
std::vector<std::string> preprocess_text(const std::string& raw_text,
                                         const PreprocessConfig& config);

nlohmann::json to_json(const PreprocessConfig& config);
PreprocessConfig preprocess_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PreprocessReport& report);
nlohmann::json to_json(const Document& doc);
Document document_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EncodedCorpus& corpus);
EncodedCorpus encoded_corpus_from_json(const nlohmann::json& j);

}  // namespace aigt
