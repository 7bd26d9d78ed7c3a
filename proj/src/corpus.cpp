#include "aigt/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "aigt/error.hpp"
#include "aigt/io.hpp"
#include "aigt/text.hpp"

namespace aigt {
namespace {

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return c == ' ' || (c >= '\t' && c <= '\r'); });
}

void add_document(Corpus& corpus, std::set<std::string>& seen, Document doc,
                  const IngestManifest& manifest) {
  if (!seen.insert(doc.doc_id).second) {
    throw contract_error("duplicate doc_id: " + doc.doc_id, "doc_id");
  }
  if (is_blank(doc.raw_text)) {
    corpus.skipped.push_back({doc.doc_id, "empty"});
    return;
  }
  if (manifest.section_filter && !manifest.section_filter->accepts(doc)) {
    corpus.skipped.push_back({doc.doc_id, "section_filter"});
    return;
  }
  corpus.documents.push_back(std::move(doc));
}

Corpus ingest_directory(const std::filesystem::path& dir, const IngestManifest& manifest) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      files.push_back(entry.path());
    }
  }
  if (ec) throw Error(ErrorKind::kIo, "cannot list " + dir.string() + ": " + ec.message(), "path");
  std::sort(files.begin(), files.end());
  Corpus corpus;
  std::set<std::string> seen;
  for (const auto& file : files) {
    Document doc;
    doc.doc_id = file.stem().string();
    doc.title = doc.doc_id;
    doc.raw_text = read_file(file.string());
    add_document(corpus, seen, std::move(doc), manifest);
  }
  return corpus;
}

std::string fnv1a64_hex(std::string_view data) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

bool SectionFilter::accepts(const Document& doc) const {
  for (const auto& tag : doc.section_tags) {
    if (exclude.contains(tag)) return false;
  }
  if (!include) return true;
  return std::any_of(doc.section_tags.begin(), doc.section_tags.end(),
                     [&](const std::string& tag) { return include->contains(tag); });
}

PreprocessConfig::PreprocessConfig() : stopword_list(default_stopwords()) {}

void PreprocessConfig::validate() const {
  if (min_token_length < 1) throw contract_error("min_token_length must be >= 1", "min_token_length");
  if (min_document_frequency < 1) {
    throw contract_error("min_document_frequency must be >= 1", "min_document_frequency");
  }
}

Document document_from_json(const nlohmann::json& j) {
  Document doc;
  if (!j.is_object()) throw Error(ErrorKind::kMalformed, "document must be a JSON object");
  auto id = j.find("doc_id");
  if (id == j.end() || !id->is_string() || id->get<std::string>().empty()) {
    throw Error(ErrorKind::kMalformed, "doc_id must be a non-empty string", "doc_id");
  }
  doc.doc_id = id->get<std::string>();
  auto text = j.find("raw_text");
  if (text == j.end() || !text->is_string()) {
    throw Error(ErrorKind::kMalformed, "raw_text must be a string", "raw_text");
  }
  doc.raw_text = text->get<std::string>();
  if (auto title = j.find("title"); title != j.end()) {
    if (!title->is_string()) throw Error(ErrorKind::kMalformed, "title must be a string", "title");
    doc.title = title->get<std::string>();
  }
  if (auto tags = j.find("section_tags"); tags != j.end()) {
    if (!tags->is_array()) {
      throw Error(ErrorKind::kMalformed, "section_tags must be an array", "section_tags");
    }
    for (const auto& t : *tags) {
      if (!t.is_string()) {
        throw Error(ErrorKind::kMalformed, "section_tags entries must be strings", "section_tags");
      }
      doc.section_tags.push_back(t.get<std::string>());
    }
  }
  return doc;
}

nlohmann::json to_json(const Document& doc) {
  return {{"doc_id", doc.doc_id},
          {"title", doc.title},
          {"section_tags", doc.section_tags},
          {"raw_text", doc.raw_text}};
}

Corpus ingest_jsonl_text(const std::string& text, const IngestManifest& manifest,
                         const std::string& origin) {
  Corpus corpus;
  std::set<std::string> seen;
  std::istringstream lines(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw Error(ErrorKind::kMalformed,
                  origin + ": malformed JSON on line " + std::to_string(line_no),
                  "line " + std::to_string(line_no));
    }
    Document doc;
    try {
      doc = document_from_json(j);
    } catch (const Error& e) {
      throw Error(ErrorKind::kMalformed,
                  origin + ": line " + std::to_string(line_no) + ": " + e.what(),
                  "line " + std::to_string(line_no));
    }
    add_document(corpus, seen, std::move(doc), manifest);
  }
  return corpus;
}

Corpus ingest(const std::string& source_path, const IngestManifest& manifest) {
  namespace fs = std::filesystem;
  std::error_code ec;
  const fs::path path(source_path);
  if (fs::is_directory(path, ec)) return ingest_directory(path, manifest);
  if (!fs::is_regular_file(path, ec)) {
    throw Error(ErrorKind::kIo, "unreadable source path: " + source_path, "source_path");
  }
  return ingest_jsonl_text(read_file(source_path), manifest, source_path);
}

Vocabulary::Vocabulary(std::vector<std::string> words, std::vector<int> document_frequency)
    : id_to_word_(std::move(words)), document_frequency_(std::move(document_frequency)) {
  if (document_frequency_.size() != id_to_word_.size()) {
    throw contract_error("vocabulary words and frequencies differ in length");
  }
  for (uint32_t i = 0; i < id_to_word_.size(); ++i) {
    if (!word_to_id_.emplace(id_to_word_[i], i).second) {
      throw contract_error("duplicate vocabulary word: " + id_to_word_[i]);
    }
  }
}

std::optional<uint32_t> Vocabulary::id(const std::string& word) const {
  auto it = word_to_id_.find(word);
  if (it == word_to_id_.end()) return std::nullopt;
  return it->second;
}

size_t EncodedCorpus::num_tokens() const {
  size_t n = 0;
  for (const auto& d : docs) n += d.size();
  return n;
}

std::string EncodedCorpus::fingerprint() const {
  nlohmann::json j = {{"words", vocabulary.words()}, {"doc_ids", doc_ids}, {"docs", docs}};
  return "fnv1a64:" + fnv1a64_hex(j.dump());
}

std::vector<std::string> preprocess_text(const std::string& raw_text,
                                         const PreprocessConfig& config) {
  auto tokens = remove_stopwords(tokenize(raw_text, config.min_token_length), config.stopword_list);
  if (config.prefix_stripping_enabled) {
    for (auto& t : tokens) t = strip_prefix(t);
  }
  if (config.stemming_enabled) {
    for (auto& t : tokens) t = stem(t);
  }
  return tokens;
}

EncodedCorpus build_encoded_corpus(const Corpus& corpus, const PreprocessConfig& config) {
  config.validate();
  if (corpus.documents.empty()) throw contract_error("corpus is empty", "corpus");

  EncodedCorpus out;
  out.provenance = config;

  std::vector<const Document*> kept;
  std::vector<std::vector<std::string>> token_lists;
  for (const auto& doc : corpus.documents) {
    if (config.section_filter && !config.section_filter->accepts(doc)) {
      out.report.filtered_documents.push_back({doc.doc_id, "section_filter"});
      continue;
    }
    kept.push_back(&doc);
    token_lists.push_back(preprocess_text(doc.raw_text, config));
  }

  std::map<std::string, int> df;
  for (const auto& tokens : token_lists) {
    std::set<std::string> distinct(tokens.begin(), tokens.end());
    for (const auto& w : distinct) ++df[w];
  }
  std::vector<std::string> words;
  std::vector<int> freqs;
  for (const auto& [word, count] : df) {
    if (count >= config.min_document_frequency) {
      words.push_back(word);
      freqs.push_back(count);
    } else {
      out.report.dropped_words.push_back({word, count});
    }
  }
  out.vocabulary = Vocabulary(std::move(words), std::move(freqs));

  for (size_t i = 0; i < kept.size(); ++i) {
    std::vector<uint32_t> ids;
    ids.reserve(token_lists[i].size());
    for (const auto& t : token_lists[i]) {
      if (auto id = out.vocabulary.id(t)) ids.push_back(*id);
    }
    if (ids.empty()) {
      out.report.dropped_documents.push_back({kept[i]->doc_id, "empty_after_preprocessing"});
      continue;
    }
    out.doc_ids.push_back(kept[i]->doc_id);
    out.docs.push_back(std::move(ids));
  }
  if (out.docs.empty()) {
    throw contract_error("all documents are empty after preprocessing", "corpus");
  }
  out.report.token_count = out.num_tokens();
  out.report.vocabulary_size = out.vocabulary.size();
  return out;
}

nlohmann::json to_json(const PreprocessConfig& config) {
  nlohmann::json j = {
      {"stopword_list", config.stopword_list},
      {"min_token_length", config.min_token_length},
      {"min_document_frequency", config.min_document_frequency},
      {"stemming_enabled", config.stemming_enabled},
      {"prefix_stripping_enabled", config.prefix_stripping_enabled},
      {"section_filter", nullptr},
  };
  if (config.section_filter) {
    nlohmann::json f = {{"include", nullptr}, {"exclude", config.section_filter->exclude}};
    if (config.section_filter->include) f["include"] = *config.section_filter->include;
    j["section_filter"] = f;
  }
  return j;
}

namespace {

std::set<std::string> string_set(const nlohmann::json& arr, const std::string& path) {
  std::set<std::string> out;
  for (size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string()) {
      throw Error(ErrorKind::kCorrupt, json_field::index(path, i) + " must be a string",
                  json_field::index(path, i));
    }
    out.insert(arr[i].get<std::string>());
  }
  return out;
}

}  // namespace

// Every key is optional; absent keys keep the defaults.
PreprocessConfig preprocess_config_from_json(const nlohmann::json& j) {
  namespace jf = json_field;
  PreprocessConfig c;
  if (!j.is_object()) throw Error(ErrorKind::kCorrupt, "config must be an object", "config");
  if (j.contains("stopword_list")) c.stopword_list = string_set(jf::array(j, "stopword_list", ""), "stopword_list");
  if (j.contains("min_token_length")) c.min_token_length = static_cast<int>(jf::integer(j, "min_token_length", ""));
  if (j.contains("min_document_frequency")) {
    c.min_document_frequency = static_cast<int>(jf::integer(j, "min_document_frequency", ""));
  }
  if (j.contains("stemming_enabled")) c.stemming_enabled = jf::boolean(j, "stemming_enabled", "");
  if (j.contains("prefix_stripping_enabled")) {
    c.prefix_stripping_enabled = jf::boolean(j, "prefix_stripping_enabled", "");
  }
  if (j.contains("section_filter") && !j["section_filter"].is_null()) {
    const auto& f = jf::object(j, "section_filter", "");
    SectionFilter filter;
    if (f.contains("include") && !f["include"].is_null()) {
      filter.include = string_set(jf::array(f, "include", "section_filter"), "section_filter.include");
    }
    if (f.contains("exclude")) {
      filter.exclude = string_set(jf::array(f, "exclude", "section_filter"), "section_filter.exclude");
    }
    c.section_filter = std::move(filter);
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const PreprocessReport& report) {
  auto skipped = [](const std::vector<SkippedDocument>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : v) arr.push_back({{"doc_id", s.doc_id}, {"reason", s.reason}});
    return arr;
  };
  nlohmann::json words = nlohmann::json::array();
  for (const auto& w : report.dropped_words) {
    words.push_back({{"word", w.word}, {"document_frequency", w.document_frequency}});
  }
  return {{"filtered_documents", skipped(report.filtered_documents)},
          {"dropped_documents", skipped(report.dropped_documents)},
          {"dropped_words", words},
          {"token_count", report.token_count},
          {"vocabulary_size", report.vocabulary_size}};
}

nlohmann::json to_json(const EncodedCorpus& corpus) {
  return {{"format", "aigt.encoded_corpus"},
          {"schema_version", 1},
          {"fingerprint", corpus.fingerprint()},
          {"vocabulary",
           {{"words", corpus.vocabulary.words()},
            {"document_frequency", corpus.vocabulary.document_frequencies()}}},
          {"doc_ids", corpus.doc_ids},
          {"docs", corpus.docs},
          {"provenance", to_json(corpus.provenance)},
          {"report", to_json(corpus.report)}};
}

EncodedCorpus encoded_corpus_from_json(const nlohmann::json& j) {
  namespace jf = json_field;
  if (jf::integer(j, "schema_version", "") != 1) {
    throw Error(ErrorKind::kVersion, "unsupported encoded corpus schema_version", "schema_version");
  }
  EncodedCorpus c;
  const auto& vocab = jf::object(j, "vocabulary", "");
  const auto& words_json = jf::array(vocab, "words", "vocabulary");
  const auto& df_json = jf::array(vocab, "document_frequency", "vocabulary");
  std::vector<std::string> words;
  std::vector<int> df;
  try {
    words = words_json.get<std::vector<std::string>>();
    df = df_json.get<std::vector<int>>();
    c.vocabulary = Vocabulary(std::move(words), std::move(df));
    c.doc_ids = jf::array(j, "doc_ids", "").get<std::vector<std::string>>();
    c.docs = jf::array(j, "docs", "").get<std::vector<std::vector<uint32_t>>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kCorrupt, std::string("invalid encoded corpus: ") + e.what(), "vocabulary");
  } catch (const Error& e) {
    throw Error(ErrorKind::kCorrupt, e.what(), "vocabulary");
  }
  if (c.doc_ids.size() != c.docs.size()) {
    throw Error(ErrorKind::kCorrupt, "doc_ids and docs differ in length", "doc_ids");
  }
  for (size_t d = 0; d < c.docs.size(); ++d) {
    for (uint32_t id : c.docs[d]) {
      if (id >= c.vocabulary.size()) {
        throw Error(ErrorKind::kCorrupt, "token id out of vocabulary range",
                    jf::index("docs", d));
      }
    }
  }
  if (j.contains("provenance")) c.provenance = preprocess_config_from_json(j["provenance"]);
  if (j.contains("report")) {
    const auto& r = j["report"];
    auto skipped = [&](const char* key) {
      std::vector<SkippedDocument> out;
      if (!r.contains(key)) return out;
      for (const auto& s : r[key]) out.push_back({s.value("doc_id", ""), s.value("reason", "")});
      return out;
    };
    c.report.filtered_documents = skipped("filtered_documents");
    c.report.dropped_documents = skipped("dropped_documents");
    if (r.contains("dropped_words")) {
      for (const auto& w : r["dropped_words"]) {
        c.report.dropped_words.push_back({w.value("word", ""), w.value("document_frequency", 0)});
      }
    }
  }
  c.report.token_count = c.num_tokens();
  c.report.vocabulary_size = c.vocabulary.size();
  return c;
}

}  // namespace aigt
