#include "aigt/topicsim.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include "aigt/error.hpp"
#include "aigt/io.hpp"

namespace aigt {

void TopicSet::validate() const {
  std::set<int> ids;
  for (const auto& t : topics) {
    if (!ids.insert(t.topic_id).second) {
      throw contract_error("duplicate topic id " + std::to_string(t.topic_id), "topics");
    }
    if (t.words.empty()) {
      throw contract_error("topic " + std::to_string(t.topic_id) + " has no words", "topics");
    }
    std::set<std::string> distinct(t.words.begin(), t.words.end());
    if (distinct.size() != t.words.size()) {
      throw contract_error("topic " + std::to_string(t.topic_id) + " repeats a word", "topics");
    }
  }
}

TopicSet topic_set_from_model(const TopicModel& model, size_t words_per_topic) {
  TopicSet set;
  set.model_ref = model.model_id();
  for (size_t k = 0; k < model.num_topics; ++k) {
    set.topics.push_back({static_cast<int>(k), top_words(model, k, words_per_topic)});
  }
  return set;
}

int TopicMatching::total_overlap() const {
  int total = 0;
  for (const auto& p : pairs) total += p.shared;
  return total;
}

int shared_word_count(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::set<std::string> left(a.begin(), a.end());
  int shared = 0;
  for (const auto& w : std::set<std::string>(b.begin(), b.end())) {
    if (left.contains(w)) ++shared;
  }
  return shared;
}

TopicMatching match_topics(const TopicSet& from, const TopicSet& to, int threshold) {
  if (from.topics.empty() || to.topics.empty()) {
    throw contract_error("topic sets must be non-empty", "topics");
  }
  if (threshold < 1) throw contract_error("threshold must be >= 1", "threshold");

  std::vector<TopicPair> candidates;
  for (const auto& a : from.topics) {
    for (const auto& b : to.topics) {
      const int shared = shared_word_count(a.words, b.words);
      if (shared >= threshold) candidates.push_back({a.topic_id, b.topic_id, shared});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const TopicPair& x, const TopicPair& y) {
    if (x.shared != y.shared) return x.shared > y.shared;
    if (x.from_id != y.from_id) return x.from_id < y.from_id;
    return x.to_id < y.to_id;
  });

  TopicMatching m;
  std::set<int> used_from;
  std::set<int> used_to;
  for (const auto& c : candidates) {
    if (used_from.contains(c.from_id) || used_to.contains(c.to_id)) continue;
    used_from.insert(c.from_id);
    used_to.insert(c.to_id);
    m.pairs.push_back(c);
  }
  for (const auto& a : from.topics) {
    if (!used_from.contains(a.topic_id)) m.unmatched_from.push_back(a.topic_id);
  }
  for (const auto& b : to.topics) {
    if (!used_to.contains(b.topic_id)) m.unmatched_to.push_back(b.topic_id);
  }
  std::sort(m.unmatched_from.begin(), m.unmatched_from.end());
  std::sort(m.unmatched_to.begin(), m.unmatched_to.end());
  return m;
}

CoverageReport coverage(const TopicSet& from, const TopicSet& to, int threshold) {
  const TopicMatching m = match_topics(from, to, threshold);
  CoverageReport r;
  r.from_set = from.model_ref;
  r.to_set = to.model_ref;
  r.threshold = threshold;
  std::map<int, const TopicPair*> by_from;
  for (const auto& p : m.pairs) by_from[p.from_id] = &p;
  for (const auto& t : from.topics) {
    TopicCoverage c{t.topic_id, std::nullopt, 0};
    if (auto it = by_from.find(t.topic_id); it != by_from.end()) {
      c.matched_id = it->second->to_id;
      c.shared = it->second->shared;
    }
    r.per_topic.push_back(c);
  }
  std::sort(r.per_topic.begin(), r.per_topic.end(),
            [](const TopicCoverage& a, const TopicCoverage& b) { return a.topic_id < b.topic_id; });
  r.covered_count = static_cast<int>(m.pairs.size());
  r.coverage_percent = 100.0 * r.covered_count / static_cast<double>(from.topics.size());
  return r;
}

const GridEntry* CoverageGrid::find(int from_k, int to_k) const {
  for (const auto& e : entries) {
    if (e.from_k == from_k && e.to_k == to_k) return &e;
  }
  return nullptr;
}

CoverageGrid grid_from_topic_sets(const std::map<int, TopicSet>& sets, int threshold) {
  if (sets.size() < 2) throw contract_error("a grid needs at least two topic counts", "k_list");
  CoverageGrid grid;
  for (const auto& [k, set] : sets) grid.k_list.push_back(k);
  grid.topic_sets = sets;
  for (int a : grid.k_list) {
    for (int b : grid.k_list) {
      if (a == b) continue;
      grid.entries.push_back({a, b, coverage(sets.at(a), sets.at(b), threshold)});
    }
  }
  return grid;
}

CoverageGrid compare_grid(const EncodedCorpus& corpus, const std::vector<int>& k_list,
                          const LdaParams& params, const GridOptions& options,
                          std::map<int, TopicModel>* models_out) {
  const std::set<int> distinct(k_list.begin(), k_list.end());
  if (distinct.size() < 2) {
    throw contract_error("k_list needs at least two distinct values", "k_list");
  }
  const std::vector<int> ks(distinct.begin(), distinct.end());
  std::vector<TopicModel> models(ks.size());
  std::vector<std::exception_ptr> errors(ks.size());
  std::atomic<size_t> next{0};

  auto worker = [&] {
    for (size_t i = next++; i < ks.size(); i = next++) {
      try {
        LdaParams p = params;
        p.num_topics = ks[i];
        p.seed = derive_seed(params.seed, static_cast<uint64_t>(ks[i]));
        models[i] = run_lda(corpus, p);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const size_t threads =
      options.max_parallel == 0 ? ks.size() : std::min<size_t>(options.max_parallel, ks.size());
  std::vector<std::thread> pool;
  for (size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::map<int, TopicSet> sets;
  for (size_t i = 0; i < ks.size(); ++i) {
    sets[ks[i]] = topic_set_from_model(models[i], options.words_per_topic);
    if (models_out) (*models_out)[ks[i]] = std::move(models[i]);
  }
  return grid_from_topic_sets(sets, options.threshold);
}

KSelection select_k(const CoverageGrid& grid) {
  if (grid.k_list.size() < 2) throw contract_error("grid needs at least two topic counts", "k_list");
  KSelection sel;
  sel.rule =
      "score(K) = mean over every other K' of coverage(K -> K'); the highest score wins, "
      "ties go to the smaller K";
  sel.inputs = grid.entries;
  bool have_best = false;
  double best = 0.0;
  for (int k : grid.k_list) {
    double sum = 0.0;
    int n = 0;
    for (int other : grid.k_list) {
      if (other == k) continue;
      const GridEntry* e = grid.find(k, other);
      if (!e) {
        throw contract_error("grid is missing coverage " + std::to_string(k) + "->" +
                                 std::to_string(other),
                             "entries");
      }
      sum += e->report.coverage_percent;
      ++n;
    }
    const double score = sum / n;
    sel.scores[k] = score;
    // k_list is ascending, so a strict comparison keeps the smaller K on ties.
    if (!have_best || score > best) {
      best = score;
      sel.selected_k = k;
      have_best = true;
    }
  }
  return sel;
}

nlohmann::json to_json(const TopicSet& set) {
  nlohmann::json topics = nlohmann::json::array();
  for (const auto& t : set.topics) topics.push_back({{"topic_id", t.topic_id}, {"words", t.words}});
  return {{"model_ref", set.model_ref}, {"topics", topics}};
}

TopicSet topic_set_from_json(const nlohmann::json& j) {
  namespace jf = json_field;
  TopicSet set;
  set.model_ref = j.value("model_ref", "");
  const auto& topics = jf::array(j, "topics", "");
  for (size_t i = 0; i < topics.size(); ++i) {
    const std::string path = jf::index("topics", i);
    Topic t;
    t.topic_id = static_cast<int>(jf::integer(topics[i], "topic_id", path));
    const auto& words = jf::array(topics[i], "words", path);
    for (const auto& w : words) {
      if (!w.is_string()) throw Error(ErrorKind::kCorrupt, "words must be strings", path + ".words");
      t.words.push_back(w.get<std::string>());
    }
    set.topics.push_back(std::move(t));
  }
  set.validate();
  return set;
}

nlohmann::json to_json(const CoverageReport& r) {
  nlohmann::json per_topic = nlohmann::json::array();
  for (const auto& c : r.per_topic) {
    per_topic.push_back({{"topic_id", c.topic_id},
                         {"matched_id", c.matched_id ? nlohmann::json(*c.matched_id) : nlohmann::json(nullptr)},
                         {"shared", c.shared}});
  }
  return {{"from_set", r.from_set},         {"to_set", r.to_set},
          {"threshold", r.threshold},       {"per_topic", per_topic},
          {"covered_count", r.covered_count}, {"coverage_percent", r.coverage_percent}};
}

nlohmann::json to_json(const CoverageGrid& grid) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : grid.entries) {
    entries.push_back({{"from_k", e.from_k},
                       {"to_k", e.to_k},
                       {"coverage_percent", e.report.coverage_percent},
                       {"report", to_json(e.report)}});
  }
  nlohmann::json sets = nlohmann::json::object();
  for (const auto& [k, set] : grid.topic_sets) sets[std::to_string(k)] = to_json(set);
  return {{"k_list", grid.k_list}, {"entries", entries}, {"topic_sets", sets}};
}

CoverageGrid coverage_grid_from_json(const nlohmann::json& j) {
  namespace jf = json_field;
  CoverageGrid grid;
  try {
    grid.k_list = jf::array(j, "k_list", "").get<std::vector<int>>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::kCorrupt, "k_list must hold integers", "k_list");
  }
  std::sort(grid.k_list.begin(), grid.k_list.end());
  const auto& entries = jf::array(j, "entries", "");
  for (size_t i = 0; i < entries.size(); ++i) {
    const std::string path = jf::index("entries", i);
    GridEntry e;
    e.from_k = static_cast<int>(jf::integer(entries[i], "from_k", path));
    e.to_k = static_cast<int>(jf::integer(entries[i], "to_k", path));
    e.report.coverage_percent = jf::number(entries[i], "coverage_percent", path);
    if (e.report.coverage_percent < 0.0 || e.report.coverage_percent > 100.0) {
      throw Error(ErrorKind::kCorrupt, "coverage_percent must be in [0, 100]",
                  path + ".coverage_percent");
    }
    if (entries[i].contains("report")) {
      const auto& r = entries[i]["report"];
      e.report.from_set = r.value("from_set", "");
      e.report.to_set = r.value("to_set", "");
      e.report.threshold = r.value("threshold", 0);
      e.report.covered_count = r.value("covered_count", 0);
      if (r.contains("per_topic")) {
        for (const auto& c : r["per_topic"]) {
          TopicCoverage tc;
          tc.topic_id = c.value("topic_id", 0);
          if (c.contains("matched_id") && !c["matched_id"].is_null()) {
            tc.matched_id = c["matched_id"].get<int>();
          }
          tc.shared = c.value("shared", 0);
          e.report.per_topic.push_back(tc);
        }
      }
    }
    grid.entries.push_back(std::move(e));
  }
  if (j.contains("topic_sets")) {
    for (const auto& [key, set] : j["topic_sets"].items()) {
      grid.topic_sets[std::stoi(key)] = topic_set_from_json(set);
    }
  }
  return grid;
}

nlohmann::json to_json(const KSelection& sel) {
  nlohmann::json scores = nlohmann::json::object();
  for (const auto& [k, s] : sel.scores) scores[std::to_string(k)] = s;
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& e : sel.inputs) {
    inputs.push_back(
        {{"from_k", e.from_k}, {"to_k", e.to_k}, {"coverage_percent", e.report.coverage_percent}});
  }
  return {{"selected_k", sel.selected_k}, {"rule", sel.rule}, {"scores", scores},
          {"inputs", inputs}};
}

std::string coverage_grid_csv(const CoverageGrid& grid) {
  std::vector<std::string> header{"from_k\\to_k"};
  for (int k : grid.k_list) header.push_back(std::to_string(k));
  std::string out = csv_row(header);
  char buf[40];
  for (int a : grid.k_list) {
    std::vector<std::string> row{std::to_string(a)};
    for (int b : grid.k_list) {
      double v = 100.0;
      if (a != b) {
        const GridEntry* e = grid.find(a, b);
        v = e ? e->report.coverage_percent : 0.0;
      }
      std::snprintf(buf, sizeof buf, "%.17g", v);
      row.emplace_back(buf);
    }
    out += csv_row(row);
  }
  return out;
}

}  // namespace aigt
