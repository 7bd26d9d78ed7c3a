#include "aigt/server.hpp"

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include <httplib.h>

#include "aigt/corpus.hpp"
#include "aigt/io.hpp"
#include "aigt/lda.hpp"
#include "aigt/topicsim.hpp"
#include "aigt/workflow.hpp"

namespace aigt {

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kContract: return 400;
    case ErrorKind::kNotFound: return 404;
    case ErrorKind::kStage: return 409;
    case ErrorKind::kMalformed:
    case ErrorKind::kCorrupt:
    case ErrorKind::kVersion: return 422;
    case ErrorKind::kIo: return 500;
  }
  return 500;
}

nlohmann::json error_body(const Error& e) {
  return {{"error",
           {{"code", to_string(e.kind())},
            {"message", e.what()},
            {"field", e.field().empty() ? nlohmann::json(nullptr) : nlohmann::json(e.field())}}}};
}

namespace {

namespace fs = std::filesystem;
namespace jf = json_field;

std::string random_id(const char* prefix) {
  static std::mutex mu;
  static std::mt19937_64 gen{std::random_device{}()};
  std::lock_guard lock(mu);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s-%016llx", prefix, static_cast<unsigned long long>(gen()));
  return buf;
}

// Ids arrive in URLs and become file names.
void check_id(const std::string& id, const char* field) {
  if (id.empty() || id.size() > 128 ||
      id.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_.:") !=
          std::string::npos ||
      id.find("..") != std::string::npos) {
    throw not_found_error(std::string("unknown ") + field + " " + id, field);
  }
}

std::string file_safe(std::string id) {
  for (char& c : id) {
    if (c == ':') c = '_';
  }
  return id;
}

enum class JobKind { kLdaRun, kGridCompare };
enum class JobStatus { kQueued, kRunning, kDone, kFailed };

std::string_view to_string(JobKind k) { return k == JobKind::kLdaRun ? "LDA_RUN" : "GRID_COMPARE"; }

std::string_view to_string(JobStatus s) {
  switch (s) {
    case JobStatus::kQueued: return "QUEUED";
    case JobStatus::kRunning: return "RUNNING";
    case JobStatus::kDone: return "DONE";
    case JobStatus::kFailed: return "FAILED";
  }
  return "";
}

JobStatus job_status_from_string(std::string_view s) {
  if (s == "QUEUED") return JobStatus::kQueued;
  if (s == "RUNNING") return JobStatus::kRunning;
  if (s == "DONE") return JobStatus::kDone;
  return JobStatus::kFailed;
}

struct JobRecord {
  std::string job_id;
  JobKind kind = JobKind::kLdaRun;
  JobStatus status = JobStatus::kQueued;
  nlohmann::json params;  // request echo
  std::string result_ref;
  std::string error;
  int progress = 0;  // sweeps done (LDA_RUN only)

  bool terminal() const { return status == JobStatus::kDone || status == JobStatus::kFailed; }
};

nlohmann::json to_json(const JobRecord& j) {
  return {{"job_id", j.job_id},
          {"kind", to_string(j.kind)},
          {"status", to_string(j.status)},
          {"params", j.params},
          {"result_ref", j.result_ref.empty() ? nlohmann::json(nullptr) : nlohmann::json(j.result_ref)},
          {"error", j.error.empty() ? nlohmann::json(nullptr) : nlohmann::json(j.error)},
          {"progress", j.progress}};
}

JobRecord job_from_json(const nlohmann::json& j) {
  JobRecord r;
  r.job_id = jf::string(j, "job_id", "");
  r.kind = jf::string(j, "kind", "") == "LDA_RUN" ? JobKind::kLdaRun : JobKind::kGridCompare;
  r.status = job_status_from_string(jf::string(j, "status", ""));
  r.params = j.value("params", nlohmann::json::object());
  if (j.contains("result_ref") && j["result_ref"].is_string()) r.result_ref = j["result_ref"];
  if (j.contains("error") && j["error"].is_string()) r.error = j["error"];
  r.progress = j.value("progress", 0);
  return r;
}

nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::parse_error&) {
    throw Error(ErrorKind::kMalformed, "request body is not valid JSON", "body");
  }
  if (!j.is_object()) throw Error(ErrorKind::kMalformed, "request body must be a JSON object", "body");
  return j;
}

// Payload fields: missing or mistyped fields are 422 malformed.
template <typename Fn>
auto payload(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kCorrupt) throw Error(ErrorKind::kMalformed, e.what(), e.field());
    throw;
  }
}

}  // namespace

class Server::Impl {
 public:
  explicit Impl(ServerConfig config) : config_(std::move(config)) {
    for (const char* sub : {"corpora", "models", "comparisons", "jobs", "projects"}) {
      std::error_code ec;
      fs::create_directories(fs::path(config_.data_dir) / sub, ec);
      if (ec) throw Error(ErrorKind::kIo, "cannot create data directory: " + ec.message(), "data_dir");
    }
    recover_jobs();
    routes();
    const unsigned n = std::max(1u, config_.workers);
    for (unsigned i = 0; i < n; ++i) workers_.emplace_back([this] { worker_loop(); });
  }

  ~Impl() {
    http_.stop();
    {
      std::lock_guard lock(jobs_mu_);
      shutting_down_ = true;
    }
    jobs_cv_.notify_all();
    for (auto& t : workers_) t.join();
  }

  int bind() {
    if (config_.port == 0) {
      port_ = http_.bind_to_any_port(config_.bind_address);
      if (port_ < 0) throw Error(ErrorKind::kIo, "cannot bind " + config_.bind_address, "bind_address");
    } else {
      if (!http_.bind_to_port(config_.bind_address, config_.port)) {
        throw Error(ErrorKind::kIo,
                    "cannot bind " + config_.bind_address + ":" + std::to_string(config_.port),
                    "bind_address");
      }
      port_ = config_.port;
    }
    return port_;
  }

  void listen() { http_.listen_after_bind(); }
  void stop() { http_.stop(); }

  void wait_for_jobs() {
    std::unique_lock lock(jobs_mu_);
    idle_cv_.wait(lock, [&] { return queue_.empty() && running_ == 0; });
  }

 private:
  fs::path path_of(const char* sub, const std::string& id) const {
    return fs::path(config_.data_dir) / sub / (file_safe(id) + ".json");
  }

  // ------------------------------------------------------------------ stores

  nlohmann::json load_document(const char* sub, const std::string& id, const char* field) {
    check_id(id, field);
    const fs::path p = path_of(sub, id);
    if (!fs::exists(p)) throw not_found_error(std::string("unknown ") + field + " " + id, field);
    return parse_json(read_file(p.string()), p.string());
  }

  std::shared_ptr<const EncodedCorpus> corpus(const std::string& id) {
    {
      std::lock_guard lock(cache_mu_);
      if (auto it = corpora_.find(id); it != corpora_.end()) return it->second;
    }
    auto c = std::make_shared<const EncodedCorpus>(
        encoded_corpus_from_json(load_document("corpora", id, "corpus_id")));
    std::lock_guard lock(cache_mu_);
    corpora_[id] = c;
    return c;
  }

  std::shared_ptr<const TopicModel> model(const std::string& id) {
    {
      std::lock_guard lock(cache_mu_);
      if (auto it = models_.find(id); it != models_.end()) return it->second;
    }
    auto m = std::make_shared<const TopicModel>(
        topic_model_from_json(load_document("models", id, "model_id")));
    std::lock_guard lock(cache_mu_);
    models_[id] = m;
    return m;
  }

  void store_model(const TopicModel& m) {
    const std::string id = m.model_id();
    write_file_atomic(path_of("models", id).string(), to_json(m).dump());
    std::lock_guard lock(cache_mu_);
    models_[id] = std::make_shared<const TopicModel>(m);
  }

  std::shared_ptr<std::mutex> project_lock(const std::string& id) {
    std::lock_guard lock(cache_mu_);
    auto& mu = project_locks_[id];
    if (!mu) mu = std::make_shared<std::mutex>();
    return mu;
  }

  Project load_stored_project(const std::string& id) {
    check_id(id, "project_id");
    const fs::path p = path_of("projects", id);
    if (!fs::exists(p)) throw not_found_error("unknown project " + id, "project_id");
    return load_project(p.string());
  }

  void store_project(const Project& p) { save_project(p, path_of("projects", p.project_id()).string()); }

  // Runs `fn` on the project under its write lock and persists the result.
  template <typename Fn>
  nlohmann::json mutate(const std::string& id, Fn&& fn) {
    auto mu = project_lock(id);
    std::lock_guard lock(*mu);
    Project p = load_stored_project(id);
    nlohmann::json extra = fn(p);
    store_project(p);
    nlohmann::json out = to_json(p);
    if (!extra.is_null()) out["result"] = extra;
    return out;
  }

  // -------------------------------------------------------------------- jobs

  void persist_job(const JobRecord& job) {
    write_file_atomic(path_of("jobs", job.job_id).string(), to_json(job).dump());
  }

  void recover_jobs() {
    for (const auto& entry : fs::directory_iterator(fs::path(config_.data_dir) / "jobs")) {
      if (entry.path().extension() != ".json") continue;
      try {
        JobRecord job = job_from_json(parse_json(read_file(entry.path().string()), entry.path().string()));
        if (!job.terminal()) {
          job.status = JobStatus::kFailed;
          job.error = "interrupted by server restart";
          persist_job(job);
        }
        jobs_[job.job_id] = job;
      } catch (const Error&) {
        // Unreadable job files are left on disk and ignored.
      }
    }
  }

  JobRecord submit_job(JobKind kind, nlohmann::json params) {
    JobRecord job;
    job.job_id = random_id("job");
    job.kind = kind;
    job.params = std::move(params);
    persist_job(job);
    {
      std::lock_guard lock(jobs_mu_);
      jobs_[job.job_id] = job;
      queue_.push_back(job.job_id);
    }
    jobs_cv_.notify_one();
    return job;
  }

  JobRecord job(const std::string& id) {
    check_id(id, "job_id");
    std::lock_guard lock(jobs_mu_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) throw not_found_error("unknown job " + id, "job_id");
    return it->second;
  }

  void update_job(const std::string& id, const std::function<void(JobRecord&)>& fn) {
    JobRecord copy;
    {
      std::lock_guard lock(jobs_mu_);
      JobRecord& job = jobs_.at(id);
      if (job.terminal()) return;
      fn(job);
      copy = job;
    }
    if (copy.terminal() || copy.status == JobStatus::kRunning) persist_job(copy);
  }

  void worker_loop() {
    for (;;) {
      std::string id;
      {
        std::unique_lock lock(jobs_mu_);
        jobs_cv_.wait(lock, [&] { return shutting_down_ || !queue_.empty(); });
        if (shutting_down_) return;
        id = queue_.front();
        queue_.pop_front();
        ++running_;
      }
      run_job(id);
      {
        std::lock_guard lock(jobs_mu_);
        --running_;
      }
      idle_cv_.notify_all();
    }
  }

  void run_job(const std::string& id) {
    JobRecord snapshot;
    {
      std::lock_guard lock(jobs_mu_);
      snapshot = jobs_.at(id);
    }
    update_job(id, [](JobRecord& j) { j.status = JobStatus::kRunning; });
    try {
      auto c = corpus(snapshot.params.at("corpus_id").get<std::string>());
      const LdaParams params = lda_params_from_json(snapshot.params.value("params", nlohmann::json::object()));
      std::string result;
      if (snapshot.kind == JobKind::kLdaRun) {
        TopicModel m = run_lda(*c, params, [&](int sweep, double) {
          if (sweep % 10 == 0) {
            std::lock_guard lock(jobs_mu_);
            jobs_.at(id).progress = sweep;
          }
        });
        store_model(m);
        result = m.model_id();
      } else {
        GridOptions opts;
        opts.threshold = snapshot.params.value("threshold", 5);
        opts.words_per_topic = static_cast<size_t>(params.top_n_words);
        std::map<int, TopicModel> models;
        const auto k_list = snapshot.params.at("k_list").get<std::vector<int>>();
        CoverageGrid grid = compare_grid(*c, k_list, params, opts, &models);
        nlohmann::json doc = to_json(grid);
        doc["selection"] = to_json(select_k(grid));
        nlohmann::json model_ids = nlohmann::json::object();
        for (const auto& [k, m] : models) {
          store_model(m);
          model_ids[std::to_string(k)] = m.model_id();
        }
        doc["model_ids"] = model_ids;
        doc["comparison_id"] = id;
        write_file_atomic(path_of("comparisons", id).string(), doc.dump());
        result = id;
      }
      update_job(id, [&](JobRecord& j) {
        j.status = JobStatus::kDone;
        j.result_ref = result;
        if (j.kind == JobKind::kLdaRun) j.progress = params.sweeps;
      });
    } catch (const std::exception& e) {
      const std::string message = e.what();
      update_job(id, [&](JobRecord& j) {
        j.status = JobStatus::kFailed;
        j.error = message;
      });
    }
  }

  // ------------------------------------------------------------------ routes

  using Handler = std::function<nlohmann::json(const httplib::Request&)>;

  static void reply(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  httplib::Server::Handler wrap(Handler fn, int ok_status = 200) {
    return [fn = std::move(fn), ok_status](const httplib::Request& req, httplib::Response& res) {
      try {
        reply(res, ok_status, fn(req));
      } catch (const Error& e) {
        reply(res, http_status(e.kind()), error_body(e));
      } catch (const std::exception& e) {
        reply(res, 500, error_body(Error(ErrorKind::kIo, e.what())));
      }
    };
  }

  void get(const std::string& pattern, Handler fn) { http_.Get(pattern, wrap(std::move(fn))); }
  void post(const std::string& pattern, Handler fn, int ok = 200) {
    http_.Post(pattern, wrap(std::move(fn), ok));
  }

  // Mutation routes on a project: the handler receives the parsed body and
  // the project and may return an extra "result" value.
  void project_route(const char* method, const std::string& suffix,
                     std::function<nlohmann::json(const httplib::Request&, const nlohmann::json&, Project&)> fn) {
    const std::string pattern = R"(/api/v1/projects/([^/]+))" + suffix;
    auto handler = wrap([this, fn = std::move(fn)](const httplib::Request& req) {
      const nlohmann::json body = parse_body(req);
      return mutate(req.matches[1], [&](Project& p) { return fn(req, body, p); });
    });
    if (std::string_view(method) == "POST") {
      http_.Post(pattern, handler);
    } else if (std::string_view(method) == "PUT") {
      http_.Put(pattern, handler);
    } else if (std::string_view(method) == "PATCH") {
      http_.Patch(pattern, handler);
    } else {
      http_.Delete(pattern, handler);
    }
  }

  static int int_field(const nlohmann::json& body, const char* key) {
    return payload([&] { return static_cast<int>(jf::integer(body, key, "")); });
  }
  static std::string string_field(const nlohmann::json& body, const char* key) {
    return payload([&] { return jf::string(body, key, ""); });
  }
  static int path_int(const httplib::Request& req, size_t i, const char* field) {
    try {
      size_t used = 0;
      const std::string s = req.matches[i];
      const int v = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw not_found_error(std::string("unknown ") + field + " " + std::string(req.matches[i]), field);
    }
  }

  static size_t query_count(const httplib::Request& req, const char* key) {
    const std::string s = req.get_param_value(key);
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos || s.size() > 9) {
      throw contract_error(std::string(key) + " must be a non-negative integer", key);
    }
    return std::stoul(s);
  }

  nlohmann::json corpus_summary(const std::string& id, const EncodedCorpus& c) {
    return {{"corpus_id", id},
            {"fingerprint", c.fingerprint()},
            {"num_docs", c.num_docs()},
            {"num_tokens", c.num_tokens()},
            {"vocabulary_size", c.vocabulary.size()},
            {"report", to_json(c.report)}};
  }

  nlohmann::json model_summary(const TopicModel& m) {
    return {{"model_id", m.model_id()},
            {"corpus_ref", m.corpus_ref},
            {"params", to_json(m.params)},
            {"num_topics", m.num_topics},
            {"num_docs", m.num_docs()},
            {"vocabulary_size", m.num_words()},
            {"final_log_likelihood",
             m.log_likelihood_trace.empty() ? nlohmann::json(nullptr)
                                            : nlohmann::json(m.log_likelihood_trace.back())}};
  }

  std::vector<std::string> list_ids(const char* sub) {
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(fs::path(config_.data_dir) / sub)) {
      const auto name = entry.path().filename().string();
      if (entry.path().extension() == ".json" && name.find(".tmp") == std::string::npos) {
        ids.push_back(entry.path().stem().string());
      }
    }
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  void routes() {
    http_.set_payload_max_length(256ull << 20);

    get("/api/v1/health", [](const httplib::Request&) { return nlohmann::json{{"status", "ok"}}; });

    // Corpora. Body: {"documents": [...]} or {"jsonl": "..."}, optional "config"
    // (preprocess options) and "section_filter".
    post("/api/v1/corpora", [this](const httplib::Request& req) {
      const nlohmann::json body = parse_body(req);
      Corpus raw;
      payload([&] {
        if (body.contains("jsonl")) {
          raw = ingest_jsonl_text(jf::string(body, "jsonl", ""));
        } else {
          const auto& docs = jf::array(body, "documents", "");
          std::set<std::string> seen;
          for (size_t i = 0; i < docs.size(); ++i) {
            Document d;
            try {
              d = document_from_json(docs[i]);
            } catch (const Error& e) {
              throw Error(ErrorKind::kMalformed, e.what(), jf::index("documents", i) + "." + e.field());
            }
            if (!seen.insert(d.doc_id).second) {
              throw contract_error("duplicate doc_id: " + d.doc_id, "doc_id");
            }
            if (d.raw_text.find_first_not_of(" \t\r\n") == std::string::npos) {
              raw.skipped.push_back({d.doc_id, "empty"});
            } else {
              raw.documents.push_back(std::move(d));
            }
          }
        }
        return 0;
      });
      const PreprocessConfig config = payload([&] {
        return body.contains("config") ? preprocess_config_from_json(body["config"]) : PreprocessConfig{};
      });
      EncodedCorpus encoded = build_encoded_corpus(raw, config);
      const std::string id = "corpus-" + encoded.fingerprint().substr(8);
      write_file_atomic(path_of("corpora", id).string(), to_json(encoded).dump());
      nlohmann::json docs = nlohmann::json::array();
      for (const auto& d : raw.documents) docs.push_back(to_json(d));
      write_file_atomic((fs::path(config_.data_dir) / "corpora" / (id + ".documents")).string(),
                        docs.dump());
      {
        std::lock_guard lock(cache_mu_);
        corpora_[id] = std::make_shared<const EncodedCorpus>(encoded);
      }
      nlohmann::json out = corpus_summary(id, encoded);
      nlohmann::json skipped = nlohmann::json::array();
      for (const auto& s : raw.skipped) skipped.push_back({{"doc_id", s.doc_id}, {"reason", s.reason}});
      out["ingest_skipped"] = skipped;
      return out;
    }, 201);

    get("/api/v1/corpora", [this](const httplib::Request&) {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& id : list_ids("corpora")) out.push_back(corpus_summary(id, *corpus(id)));
      return out;
    });

    get(R"(/api/v1/corpora/([^/]+))", [this](const httplib::Request& req) {
      const std::string id = req.matches[1];
      return corpus_summary(id, *corpus(id));
    });

    get(R"(/api/v1/corpora/([^/]+)/documents/([^/]+))", [this](const httplib::Request& req) {
      const std::string id = req.matches[1];
      const std::string doc_id = req.matches[2];
      corpus(id);
      const auto docs = parse_json(
          read_file((fs::path(config_.data_dir) / "corpora" / (file_safe(id) + ".documents")).string()),
          "documents");
      for (const auto& d : docs) {
        if (d.value("doc_id", "") == doc_id) return d;
      }
      throw not_found_error("unknown document " + doc_id, "doc_id");
    });

    // Jobs.
    post("/api/v1/jobs", [this](const httplib::Request& req) {
      const nlohmann::json body = parse_body(req);
      const std::string kind = string_field(body, "kind");
      const std::string corpus_id = string_field(body, "corpus_id");
      corpus(corpus_id);
      const nlohmann::json params_json = body.value("params", nlohmann::json::object());
      const LdaParams params = payload([&] { return lda_params_from_json(params_json); });
      params.validate();
      nlohmann::json echo = {{"corpus_id", corpus_id}, {"params", to_json(params)}};
      if (kind == "LDA_RUN") return to_json(submit_job(JobKind::kLdaRun, echo));
      if (kind == "GRID_COMPARE") {
        const auto k_list = payload([&] {
          try {
            return jf::array(body, "k_list", "").get<std::vector<int>>();
          } catch (const nlohmann::json::exception&) {
            throw Error(ErrorKind::kMalformed, "k_list must hold integers", "k_list");
          }
        });
        if (std::set<int>(k_list.begin(), k_list.end()).size() < 2) {
          throw contract_error("k_list needs at least two distinct values", "k_list");
        }
        for (int k : k_list) {
          if (k < 1) throw contract_error("every K must be >= 1", "k_list");
        }
        const int threshold = body.contains("threshold") ? int_field(body, "threshold") : 5;
        if (threshold < 1) throw contract_error("threshold must be >= 1", "threshold");
        echo["k_list"] = k_list;
        echo["threshold"] = threshold;
        return to_json(submit_job(JobKind::kGridCompare, echo));
      }
      throw contract_error("kind must be LDA_RUN or GRID_COMPARE", "kind");
    }, 202);

    get(R"(/api/v1/jobs/([^/]+))", [this](const httplib::Request& req) {
      return to_json(job(req.matches[1]));
    });

    get("/api/v1/jobs", [this](const httplib::Request&) {
      std::lock_guard lock(jobs_mu_);
      nlohmann::json out = nlohmann::json::array();
      for (const auto& [id, j] : jobs_) out.push_back(to_json(j));
      return out;
    });

    // Models.
    get("/api/v1/models", [this](const httplib::Request&) {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& id : list_ids("models")) out.push_back(model_summary(*model(id)));
      return out;
    });

    get(R"(/api/v1/models/([^/]+))", [this](const httplib::Request& req) {
      return to_json(*model(req.matches[1]));
    });

    get(R"(/api/v1/models/([^/]+)/topics)", [this](const httplib::Request& req) {
      auto m = model(req.matches[1]);
      size_t words = static_cast<size_t>(m->params.top_n_words);
      size_t docs = 5;
      if (req.has_param("words")) words = query_count(req, "words");
      if (req.has_param("docs")) docs = query_count(req, "docs");
      nlohmann::json out = nlohmann::json::array();
      for (size_t k = 0; k < m->num_topics; ++k) {
        nlohmann::json top_docs = nlohmann::json::array();
        for (const auto& d : top_documents(*m, k, docs)) {
          top_docs.push_back({{"doc_id", d.doc_id}, {"theta", d.weight}});
        }
        out.push_back({{"topic_id", k}, {"top_words", top_words(*m, k, words)}, {"top_documents", top_docs}});
      }
      return out;
    });

    http_.Get(R"(/api/v1/models/([^/]+)/doc-topic\.csv)",
              [this](const httplib::Request& req, httplib::Response& res) {
                try {
                  res.set_content(doc_topic_csv(*model(req.matches[1])), "text/csv");
                } catch (const Error& e) {
                  reply(res, http_status(e.kind()), error_body(e));
                }
              });

    get(R"(/api/v1/comparisons/([^/]+))", [this](const httplib::Request& req) {
      return load_document("comparisons", req.matches[1], "comparison_id");
    });

    // Projects.
    post("/api/v1/projects", [this](const httplib::Request& req) {
      const nlohmann::json body = parse_body(req);
      auto m = model(string_field(body, "model_id"));
      Project p = Project::create(*m);
      store_project(p);
      return to_json(p);
    }, 201);

    get("/api/v1/projects", [this](const httplib::Request&) {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& id : list_ids("projects")) {
        const Project p = load_stored_project(id);
        out.push_back({{"project_id", p.project_id()},
                       {"model_ref", p.model_ref()},
                       {"stage", to_string(p.stage())},
                       {"active_codes", p.count(CodeStatus::kActive)}});
      }
      return out;
    });

    get(R"(/api/v1/projects/([^/]+))", [this](const httplib::Request& req) {
      auto mu = project_lock(req.matches[1]);
      std::lock_guard lock(*mu);
      return to_json(load_stored_project(req.matches[1]));
    });

    get(R"(/api/v1/projects/([^/]+)/codes/(-?\d+)/average-rating)", [this](const httplib::Request& req) {
      const Project p = load_stored_project(req.matches[1]);
      const int topic = path_int(req, 2, "topic_id");
      return nlohmann::json{{"topic_id", topic}, {"average_rating", p.average_rating(topic)}};
    });

    get(R"(/api/v1/projects/([^/]+)/memos)", [this](const httplib::Request& req) {
      const Project p = load_stored_project(req.matches[1]);
      return to_json(p)["memos"];
    });

    http_.Get(R"(/api/v1/projects/([^/]+)/export)", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        const Project p = load_stored_project(req.matches[1]);
        const ExportFormat format =
            export_format_from_string(req.has_param("format") ? req.get_param_value("format") : "json");
        const ExportArtifact art = export_tables(p, format);
        if (format == ExportFormat::kJson) {
          res.set_content(art.files.at("tables.json"), "application/json");
          return;
        }
        const std::string table = req.has_param("table") ? req.get_param_value("table") : "2";
        const std::string name = "table" + table + ".csv";
        if (!art.files.contains(name)) throw contract_error("table must be 2 or 3", "table");
        res.set_content(art.files.at(name), "text/csv");
      } catch (const Error& e) {
        reply(res, http_status(e.kind()), error_body(e));
      }
    });

    project_route("POST", "/outliers", [](auto&, const nlohmann::json& b, Project& p) {
      p.mark_outlier(int_field(b, "topic_id"), string_field(b, "reason"));
      return nlohmann::json();
    });
    project_route("POST", "/labels", [](auto&, const nlohmann::json& b, Project& p) {
      p.submit_expert_label(string_field(b, "expert_id"), int_field(b, "topic_id"),
                            string_field(b, "label"), int_field(b, "rating"));
      return nlohmann::json();
    });
    project_route("PUT", R"(/codes/(-?\d+)/aggregate-label)", [](const httplib::Request& req, const nlohmann::json& b, Project& p) {
      p.set_aggregate_label(path_int(req, 2, "topic_id"), string_field(b, "label"));
      return nlohmann::json();
    });
    project_route("POST", "/prune-rated", [](auto&, const nlohmann::json& b, Project& p) {
      const double threshold = b.contains("threshold") ? payload([&] { return jf::number(b, "threshold", ""); }) : 2.0;
      return nlohmann::json{{"removed", p.prune_low_rated(threshold)}};
    });
    project_route("POST", "/categories", [](auto&, const nlohmann::json& b, Project& p) {
      const std::string kind = b.contains("kind") ? string_field(b, "kind") : "CORE";
      return nlohmann::json{{"category_id", p.create_category(string_field(b, "name"), category_kind_from_string(kind))}};
    });
    project_route("PATCH", R"(/categories/(\d+))", [](const httplib::Request& req, const nlohmann::json& b, Project& p) {
      const int id = path_int(req, 2, "category_id");
      p.category(id);
      if (b.contains("name")) p.rename_category(id, string_field(b, "name"));
      if (b.contains("kind")) p.set_category_kind(id, category_kind_from_string(string_field(b, "kind")));
      return nlohmann::json();
    });
    project_route("POST", R"(/categories/(\d+)/codes)", [](const httplib::Request& req, const nlohmann::json& b, Project& p) {
      p.assign_code(path_int(req, 2, "category_id"), int_field(b, "topic_id"));
      return nlohmann::json();
    });
    project_route("DELETE", R"(/categories/(\d+)/codes/(-?\d+))", [](const httplib::Request& req, const nlohmann::json&, Project& p) {
      p.unassign_code(path_int(req, 2, "category_id"), path_int(req, 3, "topic_id"));
      return nlohmann::json();
    });
    project_route("POST", "/prune-singletons", [](auto&, const nlohmann::json&, Project& p) {
      nlohmann::json deleted = nlohmann::json::array();
      for (const auto& c : p.prune_singleton_categories()) deleted.push_back(c.category_id);
      return nlohmann::json{{"deleted", deleted}};
    });
    project_route("POST", "/dimensions", [](auto&, const nlohmann::json& b, Project& p) {
      return nlohmann::json{{"dimension_id", p.create_dimension(string_field(b, "name"))}};
    });
    project_route("POST", R"(/dimensions/(\d+)/categories)", [](const httplib::Request& req, const nlohmann::json& b, Project& p) {
      p.assign_category(path_int(req, 2, "dimension_id"), int_field(b, "category_id"));
      return nlohmann::json();
    });
    project_route("DELETE", R"(/dimensions/(\d+)/categories/(\d+))", [](const httplib::Request& req, const nlohmann::json&, Project& p) {
      p.unassign_category(path_int(req, 2, "dimension_id"), path_int(req, 3, "category_id"));
      return nlohmann::json();
    });
    project_route("POST", "/memos", [](auto&, const nlohmann::json& b, Project& p) {
      Attachment a;
      payload([&] {
        const auto& at = jf::object(b, "attached_to", "");
        a.kind = attachment_kind_from_string(jf::string(at, "kind", "attached_to"));
        a.id = at.contains("id") ? static_cast<int>(jf::integer(at, "id", "attached_to")) : 0;
        return 0;
      });
      return nlohmann::json{{"memo_id", p.add_memo(a, string_field(b, "author"), string_field(b, "text"))}};
    });
    project_route("POST", "/advance", [](auto&, const nlohmann::json&, Project& p) {
      p.advance_stage();
      return nlohmann::json();
    });

    // Save a copy to / load a project from a server-side path.
    post(R"(/api/v1/projects/([^/]+)/save)", [this](const httplib::Request& req) {
      const nlohmann::json body = parse_body(req);
      const std::string path = string_field(body, "path");
      auto mu = project_lock(req.matches[1]);
      std::lock_guard lock(*mu);
      save_project(load_stored_project(req.matches[1]), path);
      return nlohmann::json{{"saved", path}};
    });
    post("/api/v1/projects/load", [this](const httplib::Request& req) {
      const nlohmann::json body = parse_body(req);
      const Project p = load_project(string_field(body, "path"));
      auto mu = project_lock(p.project_id());
      std::lock_guard lock(*mu);
      store_project(p);
      return to_json(p);
    }, 201);
  }

  ServerConfig config_;
  httplib::Server http_;
  int port_ = -1;

  std::mutex cache_mu_;
  std::map<std::string, std::shared_ptr<const EncodedCorpus>> corpora_;
  std::map<std::string, std::shared_ptr<const TopicModel>> models_;
  std::map<std::string, std::shared_ptr<std::mutex>> project_locks_;

  std::mutex jobs_mu_;
  std::condition_variable jobs_cv_;
  std::condition_variable idle_cv_;
  std::map<std::string, JobRecord> jobs_;
  std::deque<std::string> queue_;
  int running_ = 0;
  bool shutting_down_ = false;
  std::vector<std::thread> workers_;
};

Server::Server(ServerConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}
Server::~Server() = default;
int Server::bind() { return impl_->bind(); }
void Server::listen() { impl_->listen(); }
void Server::stop() { impl_->stop(); }
void Server::wait_for_jobs() { impl_->wait_for_jobs(); }

}  // namespace aigt
