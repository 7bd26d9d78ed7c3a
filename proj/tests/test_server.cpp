#include <gtest/gtest.h>

#include <httplib.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "aigt/error.hpp"
#include "aigt/io.hpp"
#include "aigt/server.hpp"
#include "support.hpp"

using namespace aigt;
using namespace aigt::testing;
using json = nlohmann::json;

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs a server on a free port over a temporary data directory.
class Running {
 public:
  explicit Running(const std::filesystem::path& dir) {
    ServerConfig cfg;
    cfg.port = 0;
    cfg.data_dir = dir.string();
    cfg.workers = 2;
    server_ = std::make_unique<Server>(cfg);
    port_ = server_->bind();
    thread_ = std::thread([this] { server_->listen(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(60, 0);
    for (int i = 0; i < 200; ++i) {
      if (auto r = client_->Get("/api/v1/health"); r && r->status == 200) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }
  ~Running() {
    server_->wait_for_jobs();
    server_->stop();
    thread_.join();
  }

  httplib::Client& client() { return *client_; }

 private:
  std::unique_ptr<Server> server_;
  int port_ = 0;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

struct Reply {
  int status = 0;
  json body;
  std::string text;
};

Reply wrap(const httplib::Result& r) {
  Reply out;
  if (!r) return out;
  out.status = r->status;
  out.text = r->body;
  out.body = json::parse(r->body, nullptr, false);
  return out;
}

class ServerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("aigt-server-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) +
            "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir_);
    start();
  }
  void TearDown() override {
    server_.reset();
    std::filesystem::remove_all(dir_);
  }
  void start() { server_ = std::make_unique<Running>(dir_); }
  void restart() {
    server_.reset();
    start();
  }

  Reply get(const std::string& path) { return wrap(server_->client().Get(path)); }
  Reply post(const std::string& path, const json& body) {
    return wrap(server_->client().Post(path, body.dump(), "application/json"));
  }
  Reply post_raw(const std::string& path, const std::string& body) {
    return wrap(server_->client().Post(path, body, "application/json"));
  }
  Reply put(const std::string& path, const json& body) {
    return wrap(server_->client().Put(path, body.dump(), "application/json"));
  }
  Reply patch(const std::string& path, const json& body) {
    return wrap(server_->client().Patch(path, body.dump(), "application/json"));
  }
  Reply del(const std::string& path) { return wrap(server_->client().Delete(path)); }

  std::string upload_corpus() {
    const Reply r = post("/api/v1/corpora", {{"jsonl", read_text(fixture("corpus_20.jsonl"))}});
    EXPECT_EQ(r.status, 201) << r.text;
    return r.body["corpus_id"];
  }

  json wait_job(const std::string& job_id) {
    for (int i = 0; i < 3000; ++i) {
      const Reply r = get("/api/v1/jobs/" + job_id);
      const std::string status = r.body["status"];
      if (status == "DONE" || status == "FAILED") return r.body;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ADD_FAILURE() << "job " << job_id << " did not finish";
    return {};
  }

  std::string run_model(const std::string& corpus_id, int k, uint64_t seed) {
    const Reply r = post("/api/v1/jobs", {{"kind", "LDA_RUN"},
                                          {"corpus_id", corpus_id},
                                          {"params", {{"num_topics", k}, {"sweeps", 30}, {"seed", seed}}}});
    EXPECT_EQ(r.status, 202) << r.text;
    const json job = wait_job(r.body["job_id"]);
    EXPECT_EQ(job["status"], "DONE") << job.dump();
    return job["result_ref"];
  }

  std::filesystem::path dir_;
  std::unique_ptr<Running> server_;
};

}  // namespace

TEST(ServerErrors, StatusMapping) {
  EXPECT_EQ(http_status(ErrorKind::kContract), 400);
  EXPECT_EQ(http_status(ErrorKind::kNotFound), 404);
  EXPECT_EQ(http_status(ErrorKind::kStage), 409);
  EXPECT_EQ(http_status(ErrorKind::kMalformed), 422);
  EXPECT_EQ(http_status(ErrorKind::kIo), 500);
  const json body = error_body(contract_error("bad", "rating"));
  EXPECT_EQ(body["error"]["field"], "rating");
  EXPECT_EQ(body["error"]["message"], "bad");
  EXPECT_TRUE(body["error"]["code"].is_string());
}

TEST_F(ServerTest, Health) { EXPECT_EQ(get("/api/v1/health").status, 200); }

TEST_F(ServerTest, CorpusUploadAndLookup) {
  const std::string id = upload_corpus();
  const Reply c = get("/api/v1/corpora/" + id);
  EXPECT_EQ(c.status, 200);
  EXPECT_EQ(c.body["num_tokens"], 687);
  EXPECT_EQ(c.body["vocabulary_size"], 47);
  EXPECT_EQ(get("/api/v1/corpora").body.size(), 1u);
  const Reply d = get("/api/v1/corpora/" + id + "/documents/d00");
  EXPECT_EQ(d.status, 200);
  EXPECT_EQ(d.body["doc_id"], "d00");
  EXPECT_EQ(get("/api/v1/corpora/" + id + "/documents/nope").status, 404);
  EXPECT_EQ(get("/api/v1/corpora/corpus-missing").status, 404);
}

TEST_F(ServerTest, CorpusUploadFromDocuments) {
  const Reply r = post("/api/v1/corpora",
                       {{"documents",
                         {{{"doc_id", "a"}, {"raw_text", "project managers manage projects"}},
                          {{"doc_id", "b"}, {"raw_text", "project teams deliver projects"}},
                          {{"doc_id", "c"}, {"raw_text", "   "}}}},
                        {"config", {{"min_df", 1}}}});
  ASSERT_EQ(r.status, 201) << r.text;
  EXPECT_EQ(r.body["num_docs"], 2);
  EXPECT_EQ(r.body["ingest_skipped"].size(), 1u);
  const Reply dup = post("/api/v1/corpora", {{"documents",
                                              {{{"doc_id", "a"}, {"raw_text", "x y"}},
                                               {{"doc_id", "a"}, {"raw_text", "x y"}}}}});
  EXPECT_EQ(dup.status, 400);
  EXPECT_EQ(dup.body["error"]["field"], "doc_id");
}

TEST_F(ServerTest, MalformedBodiesAre422) {
  const Reply r = post_raw("/api/v1/corpora", "{ not json");
  EXPECT_EQ(r.status, 422);
  EXPECT_TRUE(r.body["error"].contains("message"));
  const Reply missing = post("/api/v1/corpora", {{"something", 1}});
  EXPECT_EQ(missing.status, 422);
}

TEST_F(ServerTest, LdaJobProducesModelAndIsReproducible) {
  const std::string corpus = upload_corpus();
  const std::string m1 = run_model(corpus, 3, 17);
  const std::string m2 = run_model(corpus, 3, 17);
  const Reply a = get("/api/v1/models/" + m1);
  const Reply b = get("/api/v1/models/" + m2);
  ASSERT_EQ(a.status, 200);
  EXPECT_EQ(a.body["phi"], b.body["phi"]);
  EXPECT_EQ(a.body["theta"], b.body["theta"]);

  const Reply topics = get("/api/v1/models/" + m1 + "/topics?words=4&docs=2");
  ASSERT_EQ(topics.status, 200);
  ASSERT_EQ(topics.body.size(), 3u);
  for (const auto& t : topics.body) {
    EXPECT_EQ(t["top_words"].size(), 4u);
    EXPECT_EQ(t["top_documents"].size(), 2u);
  }
  EXPECT_EQ(get("/api/v1/models/" + m1 + "/topics?words=x").status, 400);

  const auto csv = server_->client().Get("/api/v1/models/" + m1 + "/doc-topic.csv");
  ASSERT_TRUE(csv);
  EXPECT_EQ(csv->status, 200);
  EXPECT_EQ(parse_csv(csv->body).size(), 21u);  // header plus 20 documents

  EXPECT_GE(get("/api/v1/models").body.size(), 1u);
  EXPECT_EQ(get("/api/v1/models/model-nope").status, 404);
}

TEST_F(ServerTest, JobValidation) {
  const std::string corpus = upload_corpus();
  const Reply bad_k = post("/api/v1/jobs", {{"kind", "LDA_RUN"}, {"corpus_id", corpus}, {"params", {{"num_topics", 0}}}});
  EXPECT_EQ(bad_k.status, 400);
  EXPECT_EQ(bad_k.body["error"]["field"], "num_topics");
  EXPECT_EQ(post("/api/v1/jobs", {{"kind", "LDA_RUN"}, {"corpus_id", "corpus-none"}}).status, 404);
  EXPECT_EQ(post("/api/v1/jobs", {{"kind", "OTHER"}, {"corpus_id", corpus}}).status, 400);
  const Reply one_k = post("/api/v1/jobs", {{"kind", "GRID_COMPARE"}, {"corpus_id", corpus}, {"k_list", {3, 3}}});
  EXPECT_EQ(one_k.status, 400);
  EXPECT_EQ(one_k.body["error"]["field"], "k_list");
  EXPECT_EQ(get("/api/v1/jobs/job-none").status, 404);
}

TEST_F(ServerTest, GridJobProducesComparison) {
  const std::string corpus = upload_corpus();
  const Reply r = post("/api/v1/jobs", {{"kind", "GRID_COMPARE"},
                                        {"corpus_id", corpus},
                                        {"k_list", {2, 3, 4}},
                                        {"threshold", 3},
                                        {"params", {{"sweeps", 20}, {"seed", 3}}}});
  ASSERT_EQ(r.status, 202) << r.text;
  const json job = wait_job(r.body["job_id"]);
  ASSERT_EQ(job["status"], "DONE") << job.dump();
  const Reply cmp = get("/api/v1/comparisons/" + std::string(job["result_ref"]));
  ASSERT_EQ(cmp.status, 200);
  EXPECT_EQ(cmp.body["entries"].size(), 6u);
  EXPECT_EQ(cmp.body["model_ids"].size(), 3u);
  const int selected = cmp.body["selection"]["selected_k"];
  EXPECT_TRUE(selected == 2 || selected == 3 || selected == 4);
  for (const auto& id : cmp.body["model_ids"]) EXPECT_EQ(get("/api/v1/models/" + id.get<std::string>()).status, 200);
}

TEST_F(ServerTest, ProjectWorkflowOverHttp) {
  const std::string model = run_model(upload_corpus(), 4, 5);
  const Reply created = post("/api/v1/projects", {{"model_id", model}});
  ASSERT_EQ(created.status, 201) << created.text;
  const std::string pid = created.body["project_id"];
  const std::string base = "/api/v1/projects/" + pid;
  EXPECT_EQ(created.body["codes"].size(), 4u);

  // Stage violation.
  const Reply early = post(base + "/labels", {{"expert_id", "e"}, {"topic_id", 0}, {"label", "x"}, {"rating", 3}});
  EXPECT_EQ(early.status, 409);

  EXPECT_EQ(post(base + "/outliers", {{"topic_id", 3}, {"reason", "noise"}}).status, 200);
  EXPECT_EQ(post(base + "/advance", json::object()).body["stage"], "EXPERT_CODING");

  const Reply bad_rating = post(base + "/labels", {{"expert_id", "e"}, {"topic_id", 0}, {"label", "x"}, {"rating", 6}});
  EXPECT_EQ(bad_rating.status, 400);
  EXPECT_EQ(bad_rating.body["error"]["field"], "rating");
  EXPECT_EQ(post(base + "/labels", {{"expert_id", "e"}, {"topic_id", 99}, {"label", "x"}, {"rating", 3}}).status, 404);
  EXPECT_EQ(post_raw(base + "/labels", "{oops").status, 422);

  for (int t = 0; t < 3; ++t) {
    ASSERT_EQ(post(base + "/labels", {{"expert_id", "e1"}, {"topic_id", t}, {"label", "l"}, {"rating", t == 2 ? 1 : 4}}).status, 200);
    ASSERT_EQ(put(base + "/codes/" + std::to_string(t) + "/aggregate-label", {{"label", "Code " + std::to_string(t)}}).status, 200);
  }
  EXPECT_EQ(get(base + "/codes/1/average-rating").body["average_rating"], 4.0);
  const Reply pruned = post(base + "/prune-rated", {{"threshold", 2.0}});
  EXPECT_EQ(pruned.body["result"]["removed"], json::array({2}));
  post(base + "/advance", json::object());

  const int cat = post(base + "/categories", {{"name", "Shared"}, {"kind", "CORE"}}).body["result"]["category_id"];
  const int single = post(base + "/categories", {{"name", "Lonely"}}).body["result"]["category_id"];
  EXPECT_EQ(post(base + "/categories/" + std::to_string(cat) + "/codes", {{"topic_id", 0}}).status, 200);
  EXPECT_EQ(post(base + "/categories/" + std::to_string(cat) + "/codes", {{"topic_id", 1}}).status, 200);
  EXPECT_EQ(post(base + "/categories/" + std::to_string(single) + "/codes", {{"topic_id", 1}}).status, 200);
  EXPECT_EQ(del(base + "/categories/" + std::to_string(single) + "/codes/1").status, 200);
  EXPECT_EQ(patch(base + "/categories/" + std::to_string(cat), {{"name", "Shared work"}}).status, 200);
  EXPECT_EQ(patch(base + "/categories/" + std::to_string(cat), {{"kind", "MIDDLE"}}).status, 400);
  EXPECT_EQ(post(base + "/prune-singletons", json::object()).body["result"]["deleted"], json::array({single}));
  post(base + "/advance", json::object());

  const int dim = post(base + "/dimensions", {{"name", "Theme"}}).body["result"]["dimension_id"];
  EXPECT_EQ(post(base + "/dimensions/" + std::to_string(dim) + "/categories", {{"category_id", cat}}).status, 200);
  EXPECT_EQ(post(base + "/memos", {{"attached_to", {{"kind", "dimension"}, {"id", dim}}}, {"author", "a"}, {"text", "why"}}).status, 200);
  EXPECT_EQ(get(base + "/memos").body.size(), 1u);

  const Reply tables = get(base + "/export?format=json");
  ASSERT_EQ(tables.status, 200);
  EXPECT_EQ(tables.body["table2"].size(), 2u);
  EXPECT_EQ(tables.body["table3"][0]["category"], "Shared work");
  EXPECT_EQ(tables.body["table3"][0]["aggregate_dimension"], "Theme");
  const auto t3 = server_->client().Get(base + "/export?format=csv&table=3");
  ASSERT_TRUE(t3);
  EXPECT_EQ(parse_csv(t3->body).size(), 2u);
  EXPECT_EQ(get(base + "/export?format=csv&table=9").status, 400);

  const Reply full = get(base);
  EXPECT_EQ(full.body["stage"], "THEORY_BUILDING");
  EXPECT_EQ(get("/api/v1/projects").body.size(), 1u);
  EXPECT_EQ(get("/api/v1/projects/prj-none").status, 404);

  // Save and load through a server-side path.
  const std::string path = (dir_ / "copy.json").string();
  EXPECT_EQ(post(base + "/save", {{"path", path}}).status, 200);
  EXPECT_EQ(load_project(path), project_from_json(full.body));
  const Reply loaded = post("/api/v1/projects/load", {{"path", path}});
  EXPECT_EQ(loaded.status, 201);
  EXPECT_EQ(post("/api/v1/projects/load", {{"path", (dir_ / "absent.json").string()}}).status, 500);
}

TEST_F(ServerTest, RestartKeepsFinishedResults) {
  const std::string corpus = upload_corpus();
  const std::string model = run_model(corpus, 3, 9);
  const std::string pid = post("/api/v1/projects", {{"model_id", model}}).body["project_id"];
  post("/api/v1/projects/" + pid + "/outliers", {{"topic_id", 1}, {"reason", "r"}});
  const json before = get("/api/v1/models/" + model).body;
  const json project_before = get("/api/v1/projects/" + pid).body;
  const json jobs_before = get("/api/v1/jobs").body;

  restart();
  EXPECT_EQ(get("/api/v1/corpora/" + corpus).status, 200);
  EXPECT_EQ(get("/api/v1/models/" + model).body, before);
  EXPECT_EQ(get("/api/v1/projects/" + pid).body, project_before);
  EXPECT_EQ(get("/api/v1/jobs").body, jobs_before);
}

TEST_F(ServerTest, InterruptedJobsFailAfterRestart) {
  // A job file left RUNNING by a crashed process.
  restart();
  server_.reset();
  const json stale = {{"job_id", "job-stale"}, {"kind", "LDA_RUN"}, {"status", "RUNNING"},
                      {"params", json::object()}, {"result_ref", nullptr}, {"error", nullptr}, {"progress", 3}};
  std::ofstream(dir_ / "jobs" / "job-stale.json") << stale.dump();
  start();
  const Reply r = get("/api/v1/jobs/job-stale");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["status"], "FAILED");
  EXPECT_FALSE(r.body["error"].is_null());
}
