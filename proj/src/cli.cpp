#include "aigt/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "aigt/corpus.hpp"
#include "aigt/io.hpp"
#include "aigt/lda.hpp"
#include "aigt/server.hpp"
#include "aigt/topicsim.hpp"
#include "aigt/workflow.hpp"

namespace aigt {
namespace {

namespace fs = std::filesystem;

struct Options {
  bool csv = false;
  std::string config_path;

  // ingest
  std::string source;
  std::string out_path;
  std::string preprocess_path;
  std::vector<std::string> include_sections;
  std::vector<std::string> exclude_sections;
  int min_token_length = 2;
  int min_df = 2;
  bool no_stem = false;
  bool strip_prefixes = false;

  // model / compare
  std::string corpus_path;
  std::string grid_path;
  int topics = 40;
  std::vector<int> topic_list{40, 50, 60};
  double alpha = 0.5;
  double beta = 0.02;
  int words = 10;
  int sweeps = 1000;
  uint64_t seed = 0;
  int average_last = 0;
  int threshold = 5;
  unsigned jobs = 0;

  // project
  std::string project_path;
  std::string model_path;
  std::string topic_set_path;
  int topic = -1;
  int id = -1;
  int category = -1;
  std::string reason;
  std::string expert;
  std::string label;
  int rating = 0;
  double rating_threshold = 2.0;
  std::string name;
  std::string kind = "CORE";
  std::string author;
  std::string text;
  std::string attach = "project";
  std::string format = "json";
  int table = 0;
  std::string out_dir;

  // serve
  std::string bind_address = "127.0.0.1";
  int port = 8080;
  std::string data_dir = "aigt-data";
  unsigned workers = 2;
};

struct Context {
  Options opt;
  std::function<void()> action;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
};

void print_json(Context& ctx, const nlohmann::json& j) { *ctx.out << j.dump(2) << "\n"; }

LdaParams lda_params(const Options& o, int k) {
  LdaParams p;
  p.num_topics = k;
  p.alpha = o.alpha;
  p.beta = o.beta;
  p.sweeps = o.sweeps;
  p.seed = o.seed;
  p.top_n_words = o.words;
  p.average_last = o.average_last;
  p.validate();
  return p;
}

EncodedCorpus load_corpus(const std::string& path) {
  return encoded_corpus_from_json(parse_json(read_file(path), path));
}

// Loads the project file, applies `fn` and writes it back; prints the audit
// event the mutation appended.
void mutate_project(Context& ctx, const std::function<void(Project&)>& fn) {
  Project p = load_project(ctx.opt.project_path);
  fn(p);
  save_project(p, ctx.opt.project_path);
  print_json(ctx, to_json(p.audit_log().back()));
}

void add_lda_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--alpha", o.alpha, "Document-topic prior")->capture_default_str();
  cmd->add_option("--beta", o.beta, "Topic-word prior")->capture_default_str();
  cmd->add_option("--words", o.words, "Top words per topic")->capture_default_str();
  cmd->add_option("--sweeps", o.sweeps, "Gibbs sweeps")->capture_default_str();
  cmd->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  cmd->add_option("--average-last", o.average_last,
                  "Average phi/theta over the last N sweeps")->capture_default_str();
}

void build(CLI::App& app, Context& ctx) {
  Options& o = ctx.opt;
  app.require_subcommand(1);
  app.fallthrough();
  app.add_flag("--csv", o.csv, "Write CSV instead of JSON where a table exists");
  app.add_option("--config", o.config_path, "JSON file supplying flag values");

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "Read documents and build an encoded corpus");
  ingest_cmd->add_option("source", o.source, "Directory of .txt files or a .jsonl file")->required();
  ingest_cmd->add_option("-o,--out", o.out_path, "Write the corpus here and print a summary");
  ingest_cmd->add_option("--preprocess", o.preprocess_path, "Preprocessing config JSON");
  ingest_cmd->add_option("--include-section", o.include_sections, "Keep documents with this tag");
  ingest_cmd->add_option("--exclude-section", o.exclude_sections, "Drop documents with this tag");
  ingest_cmd->add_option("--min-token-length", o.min_token_length)->capture_default_str();
  ingest_cmd->add_option("--min-df", o.min_df, "Minimum document frequency")->capture_default_str();
  ingest_cmd->add_flag("--no-stem", o.no_stem, "Disable stemming");
  ingest_cmd->add_flag("--strip-prefixes", o.strip_prefixes, "Remove common prefixes");
  ingest_cmd->callback([&ctx] {
    ctx.action = [&ctx] {
      const Options& o = ctx.opt;
      PreprocessConfig config;
      if (!o.preprocess_path.empty()) {
        config = preprocess_config_from_json(parse_json(read_file(o.preprocess_path), o.preprocess_path));
      } else {
        config.min_token_length = o.min_token_length;
        config.min_document_frequency = o.min_df;
        config.stemming_enabled = !o.no_stem;
        config.prefix_stripping_enabled = o.strip_prefixes;
      }
      IngestManifest manifest;
      if (!o.include_sections.empty() || !o.exclude_sections.empty()) {
        SectionFilter f;
        if (!o.include_sections.empty()) {
          f.include = std::set<std::string>(o.include_sections.begin(), o.include_sections.end());
        }
        f.exclude = std::set<std::string>(o.exclude_sections.begin(), o.exclude_sections.end());
        manifest.section_filter = f;
      }
      const Corpus raw = ingest(o.source, manifest);
      const EncodedCorpus encoded = build_encoded_corpus(raw, config);
      nlohmann::json skipped = nlohmann::json::array();
      for (const auto& s : raw.skipped) skipped.push_back({{"doc_id", s.doc_id}, {"reason", s.reason}});
      if (o.out_path.empty()) {
        nlohmann::json j = to_json(encoded);
        j["ingest_skipped"] = skipped;
        print_json(ctx, j);
        return;
      }
      write_file_atomic(o.out_path, to_json(encoded).dump());
      print_json(ctx, {{"corpus", o.out_path},
                       {"fingerprint", encoded.fingerprint()},
                       {"num_docs", encoded.num_docs()},
                       {"num_tokens", encoded.num_tokens()},
                       {"vocabulary_size", encoded.vocabulary.size()},
                       {"ingest_skipped", skipped},
                       {"report", to_json(encoded.report)}});
    };
  });

  // model
  auto* model_cmd = app.add_subcommand("model", "Fit an LDA model");
  model_cmd->add_option("corpus", o.corpus_path, "Encoded corpus JSON")->required();
  model_cmd->add_option("--topics", o.topics, "Number of topics K")->capture_default_str();
  add_lda_flags(model_cmd, o);
  model_cmd->add_option("-o,--out", o.out_path, "Write the model here and print a summary");
  model_cmd->callback([&ctx] {
    ctx.action = [&ctx] {
      const Options& o = ctx.opt;
      const LdaParams params = lda_params(o, o.topics);
      const EncodedCorpus corpus = load_corpus(o.corpus_path);
      const TopicModel model = run_lda(corpus, params);
      if (!o.out_path.empty()) write_file_atomic(o.out_path, to_json(model).dump());
      if (o.csv) {
        *ctx.out << doc_topic_csv(model);
      } else if (o.out_path.empty()) {
        print_json(ctx, to_json(model));
      } else {
        nlohmann::json topics = nlohmann::json::array();
        for (size_t k = 0; k < model.num_topics; ++k) {
          topics.push_back({{"topic_id", k}, {"top_words", top_words(model, k, params.top_n_words)}});
        }
        print_json(ctx, {{"model", o.out_path},
                         {"model_id", model.model_id()},
                         {"params", to_json(params)},
                         {"final_log_likelihood", model.log_likelihood_trace.back()},
                         {"topics", topics}});
      }
    };
  });

  // compare
  auto* compare_cmd = app.add_subcommand("compare", "Compare models over several K and select one");
  compare_cmd->add_option("corpus", o.corpus_path, "Encoded corpus JSON");
  compare_cmd->add_option("--grid", o.grid_path, "Select K from an existing coverage grid JSON");
  compare_cmd->add_option("--topics", o.topic_list, "Candidate K values")
      ->delimiter(',')
      ->capture_default_str();
  compare_cmd->add_option("--threshold", o.threshold, "Shared top words needed for a match")
      ->capture_default_str();
  compare_cmd->add_option("-j,--jobs", o.jobs, "Concurrent samplers (0 = one per K)");
  compare_cmd->add_option("-o,--out-dir", o.out_dir, "Also write each model as model_K.json here");
  add_lda_flags(compare_cmd, o);
  compare_cmd->callback([&ctx] {
    ctx.action = [&ctx] {
      const Options& o = ctx.opt;
      if (o.corpus_path.empty() == o.grid_path.empty()) {
        throw contract_error("give either a corpus or --grid", "corpus");
      }
      CoverageGrid grid;
      if (!o.grid_path.empty()) {
        grid = coverage_grid_from_json(parse_json(read_file(o.grid_path), o.grid_path));
      } else {
        if (o.threshold < 1) throw contract_error("threshold must be >= 1", "threshold");
        const LdaParams params = lda_params(o, o.topic_list.empty() ? 1 : o.topic_list.front());
        GridOptions options;
        options.threshold = o.threshold;
        options.words_per_topic = static_cast<size_t>(o.words);
        options.max_parallel = o.jobs;
        std::map<int, TopicModel> models;
        grid = compare_grid(load_corpus(o.corpus_path), o.topic_list, params, options,
                            o.out_dir.empty() ? nullptr : &models);
        if (!o.out_dir.empty()) {
          fs::create_directories(o.out_dir);
          for (const auto& [k, m] : models) {
            write_file_atomic((fs::path(o.out_dir) / ("model_" + std::to_string(k) + ".json")).string(),
                              to_json(m).dump());
          }
        }
      }
      const KSelection selection = select_k(grid);
      if (o.csv) {
        *ctx.out << coverage_grid_csv(grid);
        return;
      }
      nlohmann::json j = to_json(grid);
      j["selection"] = to_json(selection);
      print_json(ctx, j);
    };
  });

  // project
  auto* project_cmd = app.add_subcommand("project", "Coding project operations");
  project_cmd->require_subcommand(1);
  auto project_sub = [&](const char* name, const char* help) {
    auto* cmd = project_cmd->add_subcommand(name, help);
    cmd->add_option("project", o.project_path, "Project file")->required();
    return cmd;
  };

  auto* create_cmd = project_sub("create", "Create a project file from a model or topic set");
  create_cmd->add_option("--model", o.model_path, "Model JSON");
  create_cmd->add_option("--topic-set", o.topic_set_path, "Topic set JSON");
  create_cmd->callback([&ctx] {
    ctx.action = [&ctx] {
      const Options& o = ctx.opt;
      if (o.model_path.empty() == o.topic_set_path.empty()) {
        throw contract_error("give exactly one of --model or --topic-set", "model");
      }
      Project p;
      if (!o.model_path.empty()) {
        p = Project::create(topic_model_from_json(parse_json(read_file(o.model_path), o.model_path)));
      } else {
        const TopicSet set = topic_set_from_json(parse_json(read_file(o.topic_set_path), o.topic_set_path));
        p = Project::create("", set.model_ref, set);
      }
      save_project(p, o.project_path);
      print_json(ctx, {{"project", o.project_path},
                       {"project_id", p.project_id()},
                       {"stage", to_string(p.stage())},
                       {"codes", p.codes().size()}});
    };
  });

  auto* show_cmd = project_sub("show", "Print the project document");
  show_cmd->callback([&ctx] {
    ctx.action = [&ctx] { print_json(ctx, to_json(load_project(ctx.opt.project_path))); };
  });

  auto* outlier_cmd = project_sub("mark-outlier", "Remove a raw code as an outlier");
  outlier_cmd->add_option("--topic", o.topic)->required();
  outlier_cmd->add_option("--reason", o.reason)->required();
  outlier_cmd->callback([&ctx] {
    ctx.action = [&ctx] {
      mutate_project(ctx, [&](Project& p) { p.mark_outlier(ctx.opt.topic, ctx.opt.reason); });
    };
  });

  auto* label_cmd = project_sub("label", "Submit an expert label and rating");
  label_cmd->add_option("--expert", o.expert)->required();
  label_cmd->add_option("--topic", o.topic)->required();
  label_cmd->add_option("--label", o.label)->required();
  label_cmd->add_option("--rating", o.rating, "Relevancy 1-5")->required();
  label_cmd->callback([&ctx] {
    ctx.action = [&ctx] {
      const Options& o = ctx.opt;
      mutate_project(ctx, [&](Project& p) { p.submit_expert_label(o.expert, o.topic, o.label, o.rating); });
    };
  });

  auto* aggregate_cmd = project_sub("aggregate-label", "Set a code's aggregate label");
  aggregate_cmd->add_option("--topic", o.topic)->required();
  aggregate_cmd->add_option("--label", o.label)->required();
  aggregate_cmd->callback([&ctx] {
    ctx.action = [&ctx] {
      mutate_project(ctx, [&](Project& p) { p.set_aggregate_label(ctx.opt.topic, ctx.opt.label); });
    };
  });

  auto* prune_rated_cmd = project_sub("prune-rated", "Remove codes rated below the threshold");
  prune_rated_cmd->add_option("--threshold", o.rating_threshold)->capture_default_str();
  prune_rated_cmd->callback([&ctx] {
    ctx.action = [&ctx] {
      mutate_project(ctx, [&](Project& p) { p.prune_low_rated(ctx.opt.rating_threshold); });
    };
  });

  auto* category_cmd = project_cmd->add_subcommand("category", "Category operations");
  category_cmd->require_subcommand(1);
  auto category_sub = [&](const char* name, const char* help) {
    auto* cmd = category_cmd->add_subcommand(name, help);
    cmd->add_option("project", o.project_path, "Project file")->required();
    return cmd;
  };
  auto* cat_create = category_sub("create", "Create a category");
  cat_create->add_option("--name", o.name)->required();
  cat_create->add_option("--kind", o.kind, "CORE or GENERIC")->capture_default_str();
  cat_create->callback([&ctx] {
    ctx.action = [&ctx] {
      mutate_project(ctx, [&](Project& p) {
        p.create_category(ctx.opt.name, category_kind_from_string(ctx.opt.kind));
      });
    };
  });
  auto* cat_rename = category_sub("rename", "Rename a category");
  cat_rename->add_option("--id", o.id)->required();
  cat_rename->add_option("--name", o.name)->required();
  cat_rename->callback([&ctx] {
    ctx.action = [&ctx] {
      mutate_project(ctx, [&](Project& p) { p.rename_category(ctx.opt.id, ctx.opt.name); });
    };
  });
  auto* cat_kind = category_sub("set-kind", "Set a category's kind");
  cat_kind->add_option("--id", o.id)->required();
  cat_kind->add_option("--kind", o.kind, "CORE or GENERIC")->required();
  cat_kind->callback([&ctx] {
    ctx.action = [&ctx] {
      mutate_project(ctx, [&](Project& p) {
        p.set_category_kind(ctx.opt.id, category_kind_from_string(ctx.opt.kind));
      });
    };
  });
  auto* cat_assign = category_sub("assign", "Add a code to a category");
  cat_assign->add_option("--id", o.id)->required();
  cat_assign->add_option("--topic", o.topic)->required();
  cat_assign->callback([&ctx] {
    ctx.action = [&ctx] {
      mutate_project(ctx, [&](Project& p) { p.assign_code(ctx.opt.id, ctx.opt.topic); });
    };
  });
  auto* cat_unassign = category_sub("unassign", "Remove a code from a category");
  cat_unassign->add_option("--id", o.id)->required();
  cat_unassign->add_option("--topic", o.topic)->required();
  cat_unassign->callback([&ctx] {
    ctx.action = [&ctx] {
      mutate_project(ctx, [&](Project& p) { p.unassign_code(ctx.opt.id, ctx.opt.topic); });
    };
  });

  auto* prune_singletons_cmd = project_sub("prune-singletons", "Delete categories with fewer than two codes");
  prune_singletons_cmd->callback([&ctx] {
    ctx.action = [&ctx] { mutate_project(ctx, [](Project& p) { p.prune_singleton_categories(); }); };
  });

  auto* dimension_cmd = project_cmd->add_subcommand("dimension", "Aggregate dimension operations");
  dimension_cmd->require_subcommand(1);
  auto dimension_sub = [&](const char* name, const char* help) {
    auto* cmd = dimension_cmd->add_subcommand(name, help);
    cmd->add_option("project", o.project_path, "Project file")->required();
    return cmd;
  };
  auto* dim_create = dimension_sub("create", "Create a dimension");
  dim_create->add_option("--name", o.name)->required();
  dim_create->callback([&ctx] {
    ctx.action = [&ctx] { mutate_project(ctx, [&](Project& p) { p.create_dimension(ctx.opt.name); }); };
  });
  auto* dim_assign = dimension_sub("assign", "Add a category to a dimension");
  dim_assign->add_option("--id", o.id)->required();
  dim_assign->add_option("--category", o.category)->required();
  dim_assign->callback([&ctx] {
    ctx.action = [&ctx] {
      mutate_project(ctx, [&](Project& p) { p.assign_category(ctx.opt.id, ctx.opt.category); });
    };
  });
  auto* dim_unassign = dimension_sub("unassign", "Remove a category from a dimension");
  dim_unassign->add_option("--id", o.id)->required();
  dim_unassign->add_option("--category", o.category)->required();
  dim_unassign->callback([&ctx] {
    ctx.action = [&ctx] {
      mutate_project(ctx, [&](Project& p) { p.unassign_category(ctx.opt.id, ctx.opt.category); });
    };
  });

  auto* memo_cmd = project_sub("memo", "Attach a memo");
  memo_cmd->add_option("--attach", o.attach, "code, category, dimension or project")->capture_default_str();
  memo_cmd->add_option("--id", o.id, "Topic, category or dimension id");
  memo_cmd->add_option("--author", o.author)->required();
  memo_cmd->add_option("--text", o.text)->required();
  memo_cmd->callback([&ctx] {
    ctx.action = [&ctx] {
      const Options& o = ctx.opt;
      Attachment a;
      a.kind = attachment_kind_from_string(o.attach);
      a.id = a.kind == AttachmentKind::kProject ? 0 : o.id;
      mutate_project(ctx, [&](Project& p) { p.add_memo(a, o.author, o.text); });
    };
  });

  auto* advance_cmd = project_sub("advance", "Move to the next coding stage");
  advance_cmd->callback([&ctx] {
    ctx.action = [&ctx] { mutate_project(ctx, [](Project& p) { p.advance_stage(); }); };
  });

  auto* export_cmd = project_sub("export", "Export the code and category tables");
  export_cmd->add_option("--format", o.format, "csv or json")->capture_default_str();
  export_cmd->add_option("--table", o.table, "With CSV output: print only table 2 or 3");
  export_cmd->add_option("--out-dir", o.out_dir, "Write the export files here");
  export_cmd->callback([&ctx] {
    ctx.action = [&ctx] {
      const Options& o = ctx.opt;
      const ExportFormat format = o.csv ? ExportFormat::kCsv : export_format_from_string(o.format);
      const ExportArtifact art = export_tables(load_project(o.project_path), format);
      if (!o.out_dir.empty()) {
        fs::create_directories(o.out_dir);
        nlohmann::json written = nlohmann::json::array();
        for (const auto& [name, body] : art.files) {
          const std::string path = (fs::path(o.out_dir) / name).string();
          write_file_atomic(path, body);
          written.push_back(path);
        }
        print_json(ctx, {{"written", written}});
        return;
      }
      if (format == ExportFormat::kJson) {
        *ctx.out << art.files.at("tables.json") << "\n";
        return;
      }
      if (o.table != 0 && o.table != 2 && o.table != 3) throw contract_error("table must be 2 or 3", "table");
      if (o.table != 3) *ctx.out << art.files.at("table2.csv");
      if (o.table == 0) *ctx.out << "\r\n";
      if (o.table != 2) *ctx.out << art.files.at("table3.csv");
    };
  });

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--bind", o.bind_address)->capture_default_str();
  serve_cmd->add_option("--port", o.port, "0 picks a free port")->capture_default_str();
  serve_cmd->add_option("--data-dir", o.data_dir)->capture_default_str();
  serve_cmd->add_option("--workers", o.workers, "Job worker threads")->capture_default_str();
  serve_cmd->callback([&ctx] {
    ctx.action = [&ctx] {
      const Options& o = ctx.opt;
      ServerConfig config;
      config.bind_address = o.bind_address;
      config.port = o.port;
      config.data_dir = o.data_dir;
      config.workers = o.workers;
      Server server(config);
      const int port = server.bind();
      *ctx.err << "listening on http://" << o.bind_address << ":" << port << "/api/v1/\n";
      print_json(ctx, {{"bind", o.bind_address}, {"port", port}});
      ctx.out->flush();
      server.listen();
    };
  });
}

// Appends "--key value" for every config entry whose flag is absent from the
// command line. Top-level scalars apply to the selected command; nested
// objects apply when their key names a command on the selected path.
std::vector<std::string> merge_config(const std::vector<std::string>& args, const nlohmann::json& config,
                                      const CLI::App* leaf, const std::vector<std::string>& path) {
  if (!config.is_object()) throw Error(ErrorKind::kCorrupt, "config must be a JSON object", "$");
  std::map<std::string, nlohmann::json> values;
  std::function<void(const nlohmann::json&, size_t)> collect = [&](const nlohmann::json& node, size_t depth) {
    for (const auto& [key, value] : node.items()) {
      if (value.is_object()) {
        if (depth < path.size() && key == path[depth]) collect(value, depth + 1);
        continue;
      }
      values[key] = value;
    }
  };
  collect(config, 0);

  std::vector<std::string> merged = args;
  for (const auto& [key, value] : values) {
    if (key == "config") continue;
    const CLI::Option* opt = nullptr;
    for (const CLI::App* app = leaf; app != nullptr && opt == nullptr; app = app->get_parent()) {
      try {
        opt = app->get_option("--" + key);
      } catch (const CLI::OptionNotFound&) {
      }
    }
    if (opt == nullptr) throw contract_error("config key does not match a flag: " + key, key);
    if (opt->count() > 0) continue;
    auto scalar = [&](const nlohmann::json& v) {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_boolean()) return std::string(v.get<bool>() ? "true" : "false");
      return v.dump();
    };
    if (value.is_boolean() && opt->get_expected_max() == 0) {
      if (value.get<bool>()) merged.push_back("--" + key);
      continue;
    }
    merged.push_back("--" + key);
    if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) joined += (joined.empty() ? "" : ",") + scalar(v);
      if (opt->get_delimiter() == ',') {
        merged.push_back(joined);
      } else {
        merged.pop_back();
        for (const auto& v : value) {
          merged.push_back("--" + key);
          merged.push_back(scalar(v));
        }
      }
    } else {
      merged.push_back(scalar(value));
    }
  }
  return merged;
}

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kIo:
    case ErrorKind::kCorrupt:
    case ErrorKind::kVersion:
      return 2;
    default:
      return 1;
  }
}

int parse(CLI::App& app, std::vector<std::string> args) {
  std::reverse(args.begin(), args.end());
  app.parse(args);
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  const std::vector<std::string> args(argv.begin() + (argv.empty() ? 0 : 1), argv.end());
  const std::string program = argv.empty() ? "aigt" : fs::path(argv.front()).filename().string();

  Context ctx;
  ctx.out = &out;
  ctx.err = &err;
  CLI::App app{"Topic modeling and grounded-theory coding workbench", program};
  build(app, ctx);

  try {
    std::optional<CLI::RequiredError> pending;
    try {
      parse(app, args);
    } catch (const CLI::RequiredError& e) {
      pending = e;
    }
    if (!ctx.opt.config_path.empty()) {
      // Find the selected command path, then parse again with config values added.
      std::vector<std::string> path;
      const CLI::App* leaf = &app;
      for (;;) {
        const auto subs = leaf->get_subcommands();
        if (subs.empty()) break;
        leaf = subs.front();
        path.push_back(leaf->get_name());
      }
      const nlohmann::json config = parse_json(read_file(ctx.opt.config_path), ctx.opt.config_path);
      const std::vector<std::string> merged = merge_config(args, config, leaf, path);

      Context fresh;
      fresh.out = &out;
      fresh.err = &err;
      CLI::App second{"Topic modeling and grounded-theory coding workbench", program};
      build(second, fresh);
      parse(second, merged);
      fresh.action();
      return 0;
    }
    if (pending) throw *pending;
    ctx.action();
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  } catch (const Error& e) {
    nlohmann::json body = {{"error",
                            {{"code", to_string(e.kind())},
                             {"message", e.what()},
                             {"field", e.field()}}}};
    err << body.dump() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    err << "{\"error\":{\"code\":\"io_error\",\"message\":" << nlohmann::json(e.what()).dump() << "}}\n";
    return 2;
  }
}

}  // namespace aigt
