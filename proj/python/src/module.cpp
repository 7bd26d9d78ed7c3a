#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "aigt/corpus.hpp"
#include "aigt/error.hpp"
#include "aigt/io.hpp"
#include "aigt/lda.hpp"
#include "aigt/text.hpp"
#include "aigt/topicsim.hpp"
#include "aigt/workflow.hpp"

namespace py = pybind11;
using nlohmann::json;

// Documents cross the boundary as JSON text; the Python side wraps them with
// json.loads/json.dumps.
namespace {

json parse(const std::string& s) { return aigt::parse_json(s, "argument"); }

std::string build_corpus(const std::string& documents, const std::string& config) {
  aigt::Corpus corpus;
  for (const auto& d : parse(documents)) corpus.documents.push_back(aigt::document_from_json(d));
  const json c = parse(config);
  const aigt::PreprocessConfig pc =
      c.is_null() ? aigt::PreprocessConfig{} : aigt::preprocess_config_from_json(c);
  return aigt::to_json(aigt::build_encoded_corpus(corpus, pc)).dump();
}

std::string ingest(const std::string& path) {
  const aigt::Corpus corpus = aigt::ingest(path);
  json docs = json::array();
  for (const auto& d : corpus.documents) docs.push_back(aigt::to_json(d));
  json skipped = json::array();
  for (const auto& s : corpus.skipped) skipped.push_back({{"doc_id", s.doc_id}, {"reason", s.reason}});
  return json{{"documents", docs}, {"skipped", skipped}}.dump();
}

std::string run_lda(const std::string& corpus, const std::string& params) {
  const auto c = aigt::encoded_corpus_from_json(parse(corpus));
  const auto p = aigt::lda_params_from_json(parse(params));
  return aigt::to_json(aigt::run_lda(c, p), true).dump();
}

std::vector<std::string> top_words(const std::string& model, size_t topic, size_t n) {
  return aigt::top_words(aigt::topic_model_from_json(parse(model)), topic, n);
}

std::string coverage(const std::string& from, const std::string& to, int threshold) {
  return aigt::to_json(aigt::coverage(aigt::topic_set_from_json(parse(from)),
                                      aigt::topic_set_from_json(parse(to)), threshold))
      .dump();
}

std::string select_k(const std::string& grid) {
  return aigt::to_json(aigt::select_k(aigt::coverage_grid_from_json(parse(grid)))).dump();
}

std::string doc_topic_csv(const std::string& model) {
  return aigt::doc_topic_csv(aigt::topic_model_from_json(parse(model)));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Topic modeling and grounded-theory coding core";

  py::register_exception<aigt::Error>(m, "Error", PyExc_ValueError);

  m.def("tokenize", &aigt::tokenize, py::arg("text"), py::arg("min_token_length") = 2);
  m.def("stem", &aigt::stem, py::arg("token"));
  m.def("default_stopwords", [] {
    const auto& s = aigt::default_stopwords();
    return std::vector<std::string>(s.begin(), s.end());
  });
  m.def("_ingest", &ingest);
  m.def("_build_corpus", &build_corpus);
  m.def("_run_lda", &run_lda, py::call_guard<py::gil_scoped_release>());
  m.def("_top_words", &top_words);
  m.def("_coverage", &coverage);
  m.def("_select_k", &select_k);
  m.def("_doc_topic_csv", &doc_topic_csv);

  py::class_<aigt::Project>(m, "_Project")
      .def_static("from_model",
                  [](const std::string& model) {
                    return aigt::Project::create(aigt::topic_model_from_json(parse(model)));
                  })
      .def_static("from_topic_set",
                  [](const std::string& set) {
                    const auto ts = aigt::topic_set_from_json(parse(set));
                    return aigt::Project::create("", ts.model_ref, ts);
                  })
      .def_static("from_json", [](const std::string& s) { return aigt::project_from_json(parse(s)); })
      .def_static("load", &aigt::load_project)
      .def("save", [](const aigt::Project& p, const std::string& path) { aigt::save_project(p, path); })
      .def("to_json", [](const aigt::Project& p) { return aigt::to_json(p).dump(); })
      .def_property_readonly("stage", [](const aigt::Project& p) { return std::string(aigt::to_string(p.stage())); })
      .def("count", [](const aigt::Project& p, const std::string& status) {
        return p.count(aigt::code_status_from_string(status));
      })
      .def("mark_outlier", &aigt::Project::mark_outlier, py::arg("topic_id"), py::arg("reason"))
      .def("advance_stage", &aigt::Project::advance_stage)
      .def("submit_expert_label", &aigt::Project::submit_expert_label, py::arg("expert_id"),
           py::arg("topic_id"), py::arg("label"), py::arg("rating"))
      .def("set_aggregate_label", &aigt::Project::set_aggregate_label)
      .def("average_rating", &aigt::Project::average_rating)
      .def("prune_low_rated", &aigt::Project::prune_low_rated, py::arg("threshold") = 2.0)
      .def("create_category",
           [](aigt::Project& p, const std::string& name, const std::string& kind) {
             return p.create_category(name, aigt::category_kind_from_string(kind));
           },
           py::arg("name"), py::arg("kind") = "CORE")
      .def("assign_code", &aigt::Project::assign_code)
      .def("unassign_code", &aigt::Project::unassign_code)
      .def("prune_singleton_categories",
           [](aigt::Project& p) {
             std::vector<int> ids;
             for (const auto& c : p.prune_singleton_categories()) ids.push_back(c.category_id);
             return ids;
           })
      .def("create_dimension", &aigt::Project::create_dimension)
      .def("assign_category", &aigt::Project::assign_category)
      .def("unassign_category", &aigt::Project::unassign_category)
      .def("add_memo",
           [](aigt::Project& p, const std::string& kind, int id, const std::string& author,
              const std::string& text) {
             return p.add_memo({aigt::attachment_kind_from_string(kind), id}, author, text);
           })
      .def("export", [](const aigt::Project& p, const std::string& format) {
        return aigt::export_tables(p, aigt::export_format_from_string(format)).files;
      })
      .def("__eq__", [](const aigt::Project& a, const aigt::Project& b) { return a == b; });
}
