#include "aigt/workflow.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <random>
#include <set>

#include "aigt/error.hpp"
#include "aigt/io.hpp"

namespace aigt {
namespace {

namespace jf = json_field;

constexpr std::string_view kStageNames[] = {"RAW_CODING", "EXPERT_CODING", "FOCUS_CODING",
                                            "THEORY_BUILDING"};

// Stage an operation belongs to. Operations without one (memos, stage
// advance, creation) are allowed everywhere and never retroactive.
std::optional<Stage> home_stage(std::string_view op) {
  if (op == "mark_outlier") return Stage::kRawCoding;
  if (op == "submit_expert_label" || op == "set_aggregate_label" || op == "prune_low_rated") {
    return Stage::kExpertCoding;
  }
  if (op == "create_category" || op == "rename_category" || op == "set_category_kind" ||
      op == "assign_code" || op == "unassign_code" || op == "prune_singleton_categories") {
    return Stage::kFocusCoding;
  }
  if (op == "create_dimension" || op == "assign_category" || op == "unassign_category") {
    return Stage::kTheoryBuilding;
  }
  return std::nullopt;
}

std::string random_project_id() {
  std::random_device rd;
  const uint64_t hi = (static_cast<uint64_t>(rd()) << 32) | rd();
  char buf[32];
  std::snprintf(buf, sizeof buf, "prj-%016llx", static_cast<unsigned long long>(hi));
  return buf;
}

void require_non_empty(const std::string& value, const char* field) {
  if (value.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw contract_error(std::string(field) + " must be non-empty", field);
  }
}

std::string topic_name(int topic_id) { return "topic_" + std::to_string(topic_id); }

void insert_sorted(std::vector<int>& v, int value) {
  v.insert(std::lower_bound(v.begin(), v.end(), value), value);
}

void erase_value(std::vector<int>& v, int value) {
  v.erase(std::remove(v.begin(), v.end(), value), v.end());
}

nlohmann::json to_json(const Category& c) {
  return {{"category_id", c.category_id},
          {"name", c.name},
          {"kind", to_string(c.kind)},
          {"member_codes", c.member_codes}};
}

nlohmann::json to_json(const Attachment& a) {
  return {{"kind", to_string(a.kind)}, {"id", a.id}};
}

Attachment attachment_from_json(const nlohmann::json& j, const std::string& path) {
  Attachment a;
  const std::string kind = jf::string(j, "kind", path);
  try {
    a.kind = attachment_kind_from_string(kind);
  } catch (const Error&) {
    throw Error(ErrorKind::kCorrupt, "unknown attachment kind " + kind, jf::join(path, "kind"));
  }
  a.id = j.contains("id") ? static_cast<int>(jf::integer(j, "id", path)) : 0;
  return a;
}

}  // namespace

std::string_view to_string(Stage stage) { return kStageNames[static_cast<int>(stage)]; }

Stage stage_from_string(std::string_view s) {
  for (int i = 0; i < 4; ++i) {
    if (kStageNames[i] == s) return static_cast<Stage>(i);
  }
  throw contract_error("unknown stage " + std::string(s), "stage");
}

std::string_view to_string(CodeStatus status) {
  switch (status) {
    case CodeStatus::kActive: return "ACTIVE";
    case CodeStatus::kOutlierRemoved: return "OUTLIER_REMOVED";
    case CodeStatus::kRatingRemoved: return "RATING_REMOVED";
  }
  return "";
}

CodeStatus code_status_from_string(std::string_view s) {
  if (s == "ACTIVE") return CodeStatus::kActive;
  if (s == "OUTLIER_REMOVED") return CodeStatus::kOutlierRemoved;
  if (s == "RATING_REMOVED") return CodeStatus::kRatingRemoved;
  throw contract_error("unknown code status " + std::string(s), "status");
}

std::string_view to_string(CategoryKind kind) {
  return kind == CategoryKind::kCore ? "CORE" : "GENERIC";
}

CategoryKind category_kind_from_string(std::string_view s) {
  if (s == "CORE") return CategoryKind::kCore;
  if (s == "GENERIC") return CategoryKind::kGeneric;
  throw contract_error("category kind must be CORE or GENERIC", "kind");
}

std::string_view to_string(AttachmentKind kind) {
  switch (kind) {
    case AttachmentKind::kCode: return "code";
    case AttachmentKind::kCategory: return "category";
    case AttachmentKind::kDimension: return "dimension";
    case AttachmentKind::kProject: return "project";
  }
  return "";
}

AttachmentKind attachment_kind_from_string(std::string_view s) {
  if (s == "code") return AttachmentKind::kCode;
  if (s == "category") return AttachmentKind::kCategory;
  if (s == "dimension") return AttachmentKind::kDimension;
  if (s == "project") return AttachmentKind::kProject;
  throw contract_error("attachment kind must be code, category, dimension or project", "kind");
}

std::string utc_timestamp_now() {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t t = system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                static_cast<int>(ms));
  return buf;
}

bool Category::has(int topic_id) const {
  return std::binary_search(member_codes.begin(), member_codes.end(), topic_id);
}

// ---------------------------------------------------------------------------
// Construction and replay

Project Project::create(const TopicModel& model, Clock clock, std::string project_id) {
  return create(model.corpus_ref, model.model_id(),
                topic_set_from_model(model, static_cast<size_t>(model.params.top_n_words)),
                std::move(clock), std::move(project_id));
}

Project Project::create(std::string corpus_ref, std::string model_ref, const TopicSet& topics,
                        Clock clock, std::string project_id) {
  if (topics.topics.empty()) throw contract_error("model has no topics", "model_ref");
  if (project_id.empty()) project_id = random_project_id();
  nlohmann::json codes = nlohmann::json::array();
  for (const auto& t : topics.topics) codes.push_back({{"topic_id", t.topic_id}, {"top_words", t.words}});
  Project p;
  p.clock_ = std::move(clock);
  p.apply("create_project", {{"project_id", project_id},
                             {"corpus_ref", std::move(corpus_ref)},
                             {"model_ref", std::move(model_ref)},
                             {"codes", codes}});
  return p;
}

Project Project::replay(const Project& initial, const std::vector<AuditEvent>& log, Clock clock) {
  Project p = initial;
  p.clock_ = std::move(clock);
  const int64_t last = p.audit_log_.empty() ? 0 : p.audit_log_.back().seq;
  for (const auto& ev : log) {
    if (ev.seq <= last) continue;
    p.apply(ev.op, ev.args, ev.timestamp);
  }
  return p;
}

Project Project::from_audit_log(const std::vector<AuditEvent>& log, Clock clock) {
  if (log.empty() || log.front().op != "create_project") {
    throw contract_error("audit log must start with create_project", "audit_log");
  }
  Project p;
  p.clock_ = clock;
  p.apply(log.front().op, log.front().args, log.front().timestamp);
  return replay(p, log, std::move(clock));
}

std::string Project::now() { return clock_ ? clock_() : utc_timestamp_now(); }

nlohmann::json Project::apply(const std::string& op, nlohmann::json args,
                              std::optional<std::string> timestamp) {
  Project next = *this;
  std::string stamp = timestamp ? *timestamp : next.now();
  if (!next.audit_log_.empty() && stamp < next.audit_log_.back().timestamp) {
    stamp = next.audit_log_.back().timestamp;
  }
  const Stage before = next.stage_;
  const auto home = home_stage(op);
  if (home && before < *home) {
    throw stage_error(op + " is not allowed before " + std::string(to_string(*home)) +
                          " (current stage " + std::string(to_string(before)) + ")",
                      "stage");
  }
  next.pending_timestamp_ = stamp;
  nlohmann::json detail = next.execute(op, args);
  next.pending_timestamp_.clear();

  AuditEvent ev;
  ev.seq = next.audit_log_.empty() ? 1 : next.audit_log_.back().seq + 1;
  ev.timestamp = std::move(stamp);
  ev.op = op;
  ev.args = std::move(args);
  ev.stage = before;
  ev.retroactive = home && before > *home;
  ev.detail = detail;
  next.audit_log_.push_back(std::move(ev));
  *this = std::move(next);
  return detail;
}

nlohmann::json Project::execute(const std::string& op, const nlohmann::json& args) {
  if (op == "create_project") return do_create(args);
  if (op == "mark_outlier") return do_mark_outlier(args);
  if (op == "advance_stage") return do_advance(args);
  if (op == "submit_expert_label") return do_submit_label(args);
  if (op == "set_aggregate_label") return do_aggregate_label(args);
  if (op == "prune_low_rated") return do_prune_rated(args);
  if (op == "create_category") return do_create_category(args);
  if (op == "rename_category") return do_rename_category(args);
  if (op == "set_category_kind") return do_set_category_kind(args);
  if (op == "assign_code") return do_assign_code(args);
  if (op == "unassign_code") return do_unassign_code(args);
  if (op == "prune_singleton_categories") return do_prune_singletons(args);
  if (op == "create_dimension") return do_create_dimension(args);
  if (op == "assign_category") return do_assign_category(args);
  if (op == "unassign_category") return do_unassign_category(args);
  if (op == "add_memo") return do_add_memo(args);
  throw Error(ErrorKind::kCorrupt, "unknown audit operation " + op, "op");
}

// ---------------------------------------------------------------------------
// Public mutations

void Project::mark_outlier(int topic_id, const std::string& reason) {
  apply("mark_outlier", {{"topic_id", topic_id}, {"reason", reason}});
}

void Project::advance_stage() { apply("advance_stage", nlohmann::json::object()); }

void Project::submit_expert_label(const std::string& expert_id, int topic_id,
                                  const std::string& label, int rating) {
  apply("submit_expert_label",
        {{"expert_id", expert_id}, {"topic_id", topic_id}, {"label", label}, {"rating", rating}});
}

void Project::set_aggregate_label(int topic_id, const std::string& label) {
  apply("set_aggregate_label", {{"topic_id", topic_id}, {"label", label}});
}

std::vector<int> Project::prune_low_rated(double threshold) {
  auto detail = apply("prune_low_rated", {{"threshold", threshold}});
  return detail["removed"].get<std::vector<int>>();
}

int Project::create_category(const std::string& name, CategoryKind kind) {
  auto detail = apply("create_category", {{"name", name}, {"kind", to_string(kind)}});
  return detail["category_id"].get<int>();
}

void Project::rename_category(int category_id, const std::string& name) {
  apply("rename_category", {{"category_id", category_id}, {"name", name}});
}

void Project::set_category_kind(int category_id, CategoryKind kind) {
  apply("set_category_kind", {{"category_id", category_id}, {"kind", to_string(kind)}});
}

void Project::assign_code(int category_id, int topic_id) {
  apply("assign_code", {{"category_id", category_id}, {"topic_id", topic_id}});
}

void Project::unassign_code(int category_id, int topic_id) {
  apply("unassign_code", {{"category_id", category_id}, {"topic_id", topic_id}});
}

std::vector<Category> Project::prune_singleton_categories() {
  const std::vector<Category> before = categories_;
  auto detail = apply("prune_singleton_categories", nlohmann::json::object());
  const auto ids = detail["deleted"].get<std::vector<int>>();
  std::vector<Category> deleted;
  for (const auto& c : before) {
    if (std::find(ids.begin(), ids.end(), c.category_id) != ids.end()) deleted.push_back(c);
  }
  return deleted;
}

int Project::create_dimension(const std::string& name) {
  auto detail = apply("create_dimension", {{"name", name}});
  return detail["dimension_id"].get<int>();
}

void Project::assign_category(int dimension_id, int category_id) {
  apply("assign_category", {{"dimension_id", dimension_id}, {"category_id", category_id}});
}

void Project::unassign_category(int dimension_id, int category_id) {
  apply("unassign_category", {{"dimension_id", dimension_id}, {"category_id", category_id}});
}

int Project::add_memo(const Attachment& attachment, const std::string& author,
                      const std::string& text) {
  auto detail = apply("add_memo", {{"attached_to", to_json(attachment)},
                                   {"author", author},
                                   {"text", text}});
  return detail["memo_id"].get<int>();
}

// ---------------------------------------------------------------------------
// Queries

const Code& Project::code(int topic_id) const {
  for (const auto& c : codes_) {
    if (c.topic_id == topic_id) return c;
  }
  throw not_found_error("unknown code " + topic_name(topic_id), "topic_id");
}

Code& Project::mutable_code(int topic_id) { return const_cast<Code&>(code(topic_id)); }

const Category& Project::category(int category_id) const {
  for (const auto& c : categories_) {
    if (c.category_id == category_id) return c;
  }
  throw not_found_error("unknown category " + std::to_string(category_id), "category_id");
}

Category& Project::mutable_category(int category_id) {
  return const_cast<Category&>(category(category_id));
}

const Dimension& Project::dimension(int dimension_id) const {
  for (const auto& d : dimensions_) {
    if (d.dimension_id == dimension_id) return d;
  }
  throw not_found_error("unknown dimension " + std::to_string(dimension_id), "dimension_id");
}

Dimension& Project::mutable_dimension(int dimension_id) {
  return const_cast<Dimension&>(dimension(dimension_id));
}

std::vector<Memo> Project::memos_for(const Attachment& attachment) const {
  std::vector<Memo> out;
  for (const auto& m : memos_) {
    const bool match = m.attached_to.kind == attachment.kind &&
                       (attachment.kind == AttachmentKind::kProject || m.attached_to.id == attachment.id);
    if (match) out.push_back(m);
  }
  return out;
}

size_t Project::count(CodeStatus status) const {
  return static_cast<size_t>(std::count_if(codes_.begin(), codes_.end(),
                                           [&](const Code& c) { return c.status == status; }));
}

std::optional<int> Project::dimension_of(int category_id) const {
  for (const auto& d : dimensions_) {
    if (std::find(d.member_categories.begin(), d.member_categories.end(), category_id) !=
        d.member_categories.end()) {
      return d.dimension_id;
    }
  }
  return std::nullopt;
}

double Project::average_rating(int topic_id) const {
  const Code& c = code(topic_id);
  if (c.expert_labels.empty()) {
    throw contract_error(topic_name(topic_id) + " has no ratings", "topic_id");
  }
  double sum = 0.0;
  for (const auto& l : c.expert_labels) sum += l.rating;
  return sum / static_cast<double>(c.expert_labels.size());
}

bool Project::operator==(const Project& o) const {
  return project_id_ == o.project_id_ && corpus_ref_ == o.corpus_ref_ &&
         model_ref_ == o.model_ref_ && stage_ == o.stage_ && codes_ == o.codes_ &&
         categories_ == o.categories_ && dimensions_ == o.dimensions_ && memos_ == o.memos_ &&
         audit_log_ == o.audit_log_ && next_category_id_ == o.next_category_id_ &&
         next_dimension_id_ == o.next_dimension_id_ && next_memo_id_ == o.next_memo_id_;
}

// ---------------------------------------------------------------------------
// Operation bodies. Each runs on a scratch copy inside apply(), so throwing
// part-way leaves the caller's project untouched.

nlohmann::json Project::drop_from_categories(int topic_id) {
  nlohmann::json dropped = nlohmann::json::array();
  for (auto& cat : categories_) {
    if (cat.has(topic_id)) {
      erase_value(cat.member_codes, topic_id);
      dropped.push_back(cat.category_id);
    }
  }
  return dropped;
}

nlohmann::json Project::do_create(const nlohmann::json& args) {
  if (!audit_log_.empty()) throw contract_error("project already created", "op");
  project_id_ = jf::string(args, "project_id", "args");
  corpus_ref_ = jf::string(args, "corpus_ref", "args");
  model_ref_ = jf::string(args, "model_ref", "args");
  const auto& codes = jf::array(args, "codes", "args");
  std::set<int> seen;
  for (size_t i = 0; i < codes.size(); ++i) {
    const std::string path = jf::index("args.codes", i);
    Code c;
    c.topic_id = static_cast<int>(jf::integer(codes[i], "topic_id", path));
    if (!seen.insert(c.topic_id).second) {
      throw contract_error("duplicate topic id " + std::to_string(c.topic_id), path);
    }
    for (const auto& w : jf::array(codes[i], "top_words", path)) c.top_words.push_back(w.get<std::string>());
    codes_.push_back(std::move(c));
  }
  std::sort(codes_.begin(), codes_.end(),
            [](const Code& a, const Code& b) { return a.topic_id < b.topic_id; });
  return {{"codes", codes_.size()}};
}

nlohmann::json Project::do_mark_outlier(const nlohmann::json& args) {
  const int topic_id = static_cast<int>(jf::integer(args, "topic_id", "args"));
  const std::string reason = jf::string(args, "reason", "args");
  Code& c = mutable_code(topic_id);
  if (!c.active()) {
    throw contract_error(topic_name(topic_id) + " is already " + std::string(to_string(c.status)),
                         "topic_id");
  }
  require_non_empty(reason, "reason");
  c.status = CodeStatus::kOutlierRemoved;
  c.removal_reason = reason;
  return {{"topic_id", topic_id}, {"removed_from_categories", drop_from_categories(topic_id)}};
}

nlohmann::json Project::do_advance(const nlohmann::json&) {
  switch (stage_) {
    case Stage::kRawCoding:
      break;
    case Stage::kExpertCoding:
      for (const auto& c : codes_) {
        if (c.active() && c.expert_labels.empty()) {
          throw stage_error("every ACTIVE code needs at least one expert label before FOCUS_CODING; " +
                                topic_name(c.topic_id) + " has none",
                            "topic_id");
        }
      }
      break;
    case Stage::kFocusCoding:
      if (categories_.empty()) {
        throw stage_error("at least one category is required before THEORY_BUILDING", "categories");
      }
      break;
    case Stage::kTheoryBuilding:
      throw stage_error("THEORY_BUILDING is the final stage", "stage");
  }
  const Stage from = stage_;
  stage_ = static_cast<Stage>(static_cast<int>(stage_) + 1);
  return {{"from", to_string(from)}, {"to", to_string(stage_)}};
}

nlohmann::json Project::do_submit_label(const nlohmann::json& args) {
  const std::string expert_id = jf::string(args, "expert_id", "args");
  const int topic_id = static_cast<int>(jf::integer(args, "topic_id", "args"));
  const std::string label = jf::string(args, "label", "args");
  const long long rating = jf::integer(args, "rating", "args");
  Code& c = mutable_code(topic_id);
  if (!c.active()) {
    throw contract_error(topic_name(topic_id) + " is " + std::string(to_string(c.status)),
                         "topic_id");
  }
  require_non_empty(expert_id, "expert_id");
  require_non_empty(label, "label");
  if (rating < 1 || rating > 5) throw contract_error("rating must be an integer in [1, 5]", "rating");

  ExpertLabel entry{expert_id, label, static_cast<int>(rating)};
  for (auto& existing : c.expert_labels) {
    if (existing.expert_id == expert_id) {
      nlohmann::json previous = {{"label", existing.label}, {"rating", existing.rating}};
      existing = entry;
      return {{"replaced", true}, {"previous", previous}};
    }
  }
  c.expert_labels.push_back(entry);
  return {{"replaced", false}};
}

nlohmann::json Project::do_aggregate_label(const nlohmann::json& args) {
  const int topic_id = static_cast<int>(jf::integer(args, "topic_id", "args"));
  const std::string label = jf::string(args, "label", "args");
  Code& c = mutable_code(topic_id);
  if (c.expert_labels.empty()) {
    throw contract_error(topic_name(topic_id) + " has no expert labels yet", "topic_id");
  }
  require_non_empty(label, "label");
  nlohmann::json previous = c.aggregate_label ? nlohmann::json(*c.aggregate_label) : nlohmann::json(nullptr);
  c.aggregate_label = label;
  return {{"previous", previous}};
}

nlohmann::json Project::do_prune_rated(const nlohmann::json& args) {
  const double threshold = jf::number(args, "threshold", "args");
  for (const auto& c : codes_) {
    if (c.active() && c.expert_labels.empty()) {
      throw contract_error(topic_name(c.topic_id) + " is ACTIVE but unrated", "topic_id");
    }
  }
  std::vector<int> removed;
  nlohmann::json averages = nlohmann::json::object();
  nlohmann::json dropped = nlohmann::json::object();
  for (auto& c : codes_) {
    if (!c.active()) continue;
    const double avg = average_rating(c.topic_id);
    if (avg < threshold) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "average rating %.4g below threshold %.4g", avg, threshold);
      c.status = CodeStatus::kRatingRemoved;
      c.removal_reason = buf;
      removed.push_back(c.topic_id);
      averages[std::to_string(c.topic_id)] = avg;
      auto from_categories = drop_from_categories(c.topic_id);
      if (!from_categories.empty()) dropped[std::to_string(c.topic_id)] = from_categories;
    }
  }
  return {{"removed", removed}, {"averages", averages}, {"removed_from_categories", dropped}};
}

nlohmann::json Project::do_create_category(const nlohmann::json& args) {
  const std::string name = jf::string(args, "name", "args");
  require_non_empty(name, "name");
  Category c;
  c.category_id = next_category_id_++;
  c.name = name;
  c.kind = category_kind_from_string(jf::string(args, "kind", "args"));
  categories_.push_back(c);
  return {{"category_id", c.category_id}};
}

nlohmann::json Project::do_rename_category(const nlohmann::json& args) {
  Category& c = mutable_category(static_cast<int>(jf::integer(args, "category_id", "args")));
  const std::string name = jf::string(args, "name", "args");
  require_non_empty(name, "name");
  nlohmann::json previous = c.name;
  c.name = name;
  return {{"previous", previous}};
}

nlohmann::json Project::do_set_category_kind(const nlohmann::json& args) {
  Category& c = mutable_category(static_cast<int>(jf::integer(args, "category_id", "args")));
  const CategoryKind kind = category_kind_from_string(jf::string(args, "kind", "args"));
  nlohmann::json previous = to_string(c.kind);
  c.kind = kind;
  return {{"previous", previous}};
}

nlohmann::json Project::do_assign_code(const nlohmann::json& args) {
  Category& cat = mutable_category(static_cast<int>(jf::integer(args, "category_id", "args")));
  const int topic_id = static_cast<int>(jf::integer(args, "topic_id", "args"));
  const Code& c = code(topic_id);
  if (!c.active()) {
    throw contract_error(topic_name(topic_id) + " is " + std::string(to_string(c.status)),
                         "topic_id");
  }
  if (cat.has(topic_id)) {
    throw contract_error(topic_name(topic_id) + " is already in category " +
                             std::to_string(cat.category_id),
                         "topic_id");
  }
  insert_sorted(cat.member_codes, topic_id);
  return {{"members", cat.member_codes.size()}};
}

nlohmann::json Project::do_unassign_code(const nlohmann::json& args) {
  Category& cat = mutable_category(static_cast<int>(jf::integer(args, "category_id", "args")));
  const int topic_id = static_cast<int>(jf::integer(args, "topic_id", "args"));
  code(topic_id);
  if (!cat.has(topic_id)) {
    throw contract_error(topic_name(topic_id) + " is not in category " +
                             std::to_string(cat.category_id),
                         "topic_id");
  }
  erase_value(cat.member_codes, topic_id);
  return {{"members", cat.member_codes.size()}};
}

nlohmann::json Project::do_prune_singletons(const nlohmann::json&) {
  std::vector<int> deleted;
  for (const auto& c : categories_) {
    if (c.member_codes.size() < 2) deleted.push_back(c.category_id);
  }
  std::erase_if(categories_, [&](const Category& c) { return c.member_codes.size() < 2; });
  for (auto& d : dimensions_) {
    for (int id : deleted) erase_value(d.member_categories, id);
  }
  return {{"deleted", deleted}};
}

nlohmann::json Project::do_create_dimension(const nlohmann::json& args) {
  const std::string name = jf::string(args, "name", "args");
  require_non_empty(name, "name");
  Dimension d;
  d.dimension_id = next_dimension_id_++;
  d.name = name;
  dimensions_.push_back(d);
  return {{"dimension_id", d.dimension_id}};
}

nlohmann::json Project::do_assign_category(const nlohmann::json& args) {
  Dimension& d = mutable_dimension(static_cast<int>(jf::integer(args, "dimension_id", "args")));
  const int category_id = static_cast<int>(jf::integer(args, "category_id", "args"));
  category(category_id);
  if (auto owner = dimension_of(category_id)) {
    throw contract_error("category " + std::to_string(category_id) +
                             " already belongs to dimension " + std::to_string(*owner),
                         "category_id");
  }
  insert_sorted(d.member_categories, category_id);
  return {{"members", d.member_categories.size()}};
}

nlohmann::json Project::do_unassign_category(const nlohmann::json& args) {
  Dimension& d = mutable_dimension(static_cast<int>(jf::integer(args, "dimension_id", "args")));
  const int category_id = static_cast<int>(jf::integer(args, "category_id", "args"));
  if (std::find(d.member_categories.begin(), d.member_categories.end(), category_id) ==
      d.member_categories.end()) {
    throw contract_error("category " + std::to_string(category_id) + " is not in dimension " +
                             std::to_string(d.dimension_id),
                         "category_id");
  }
  erase_value(d.member_categories, category_id);
  return {{"members", d.member_categories.size()}};
}

nlohmann::json Project::do_add_memo(const nlohmann::json& args) {
  const Attachment a = attachment_from_json(jf::object(args, "attached_to", "args"), "args.attached_to");
  const std::string author = jf::string(args, "author", "args");
  const std::string text = jf::string(args, "text", "args");
  switch (a.kind) {
    case AttachmentKind::kCode: code(a.id); break;
    case AttachmentKind::kCategory: category(a.id); break;
    case AttachmentKind::kDimension: dimension(a.id); break;
    case AttachmentKind::kProject: break;
  }
  require_non_empty(author, "author");
  require_non_empty(text, "text");
  Memo m;
  m.memo_id = next_memo_id_++;
  m.author = author;
  m.attached_to = a;
  m.text = text;
  m.created_at = pending_timestamp_;
  memos_.push_back(m);
  return {{"memo_id", m.memo_id}};
}

// ---------------------------------------------------------------------------
// Persistence

nlohmann::json to_json(const AuditEvent& e) {
  return {{"seq", e.seq},       {"timestamp", e.timestamp},     {"op", e.op},
          {"args", e.args},     {"stage", to_string(e.stage)}, {"retroactive", e.retroactive},
          {"detail", e.detail}};
}

AuditEvent audit_event_from_json(const nlohmann::json& j, const std::string& path) {
  AuditEvent e;
  e.seq = jf::integer(j, "seq", path);
  e.timestamp = jf::string(j, "timestamp", path);
  e.op = jf::string(j, "op", path);
  e.args = jf::require(j, "args", path);
  const std::string stage = jf::string(j, "stage", path);
  try {
    e.stage = stage_from_string(stage);
  } catch (const Error&) {
    throw Error(ErrorKind::kCorrupt, "unknown stage " + stage, jf::join(path, "stage"));
  }
  e.retroactive = jf::boolean(j, "retroactive", path);
  e.detail = jf::require(j, "detail", path);
  return e;
}

nlohmann::json to_json(const Project& p) {
  nlohmann::json codes = nlohmann::json::array();
  for (const auto& c : p.codes_) {
    nlohmann::json labels = nlohmann::json::array();
    for (const auto& l : c.expert_labels) {
      labels.push_back({{"expert_id", l.expert_id}, {"label", l.label}, {"rating", l.rating}});
    }
    codes.push_back({{"topic_id", c.topic_id},
                     {"top_words", c.top_words},
                     {"status", to_string(c.status)},
                     {"removal_reason", c.removal_reason ? nlohmann::json(*c.removal_reason) : nlohmann::json(nullptr)},
                     {"expert_labels", labels},
                     {"aggregate_label", c.aggregate_label ? nlohmann::json(*c.aggregate_label) : nlohmann::json(nullptr)}});
  }
  nlohmann::json categories = nlohmann::json::array();
  for (const auto& c : p.categories_) categories.push_back(to_json(c));
  nlohmann::json dimensions = nlohmann::json::array();
  for (const auto& d : p.dimensions_) {
    dimensions.push_back({{"dimension_id", d.dimension_id},
                          {"name", d.name},
                          {"member_categories", d.member_categories}});
  }
  nlohmann::json memos = nlohmann::json::array();
  for (const auto& m : p.memos_) {
    memos.push_back({{"memo_id", m.memo_id},
                     {"author", m.author},
                     {"attached_to", to_json(m.attached_to)},
                     {"text", m.text},
                     {"created_at", m.created_at}});
  }
  nlohmann::json log = nlohmann::json::array();
  for (const auto& e : p.audit_log_) log.push_back(to_json(e));
  return {{"format", "aigt.project"},
          {"schema_version", kProjectSchemaVersion},
          {"project_id", p.project_id_},
          {"corpus_ref", p.corpus_ref_},
          {"model_ref", p.model_ref_},
          {"stage", to_string(p.stage_)},
          {"codes", codes},
          {"categories", categories},
          {"dimensions", dimensions},
          {"memos", memos},
          {"audit_log", log},
          {"next_ids",
           {{"category", p.next_category_id_},
            {"dimension", p.next_dimension_id_},
            {"memo", p.next_memo_id_}}}};
}

namespace {

std::optional<std::string> optional_string(const nlohmann::json& j, const char* key,
                                           const std::string& path) {
  const auto& v = jf::require(j, key, path);
  if (v.is_null()) return std::nullopt;
  if (!v.is_string()) {
    throw Error(ErrorKind::kCorrupt, "field " + jf::join(path, key) + " must be a string or null",
                jf::join(path, key));
  }
  return v.get<std::string>();
}

std::vector<int> int_list(const nlohmann::json& j, const char* key, const std::string& path) {
  std::vector<int> out;
  const auto& arr = jf::array(j, key, path);
  for (size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number_integer()) {
      const std::string field = jf::index(jf::join(path, key), i);
      throw Error(ErrorKind::kCorrupt, "field " + field + " must be an integer", field);
    }
    out.push_back(arr[i].get<int>());
  }
  return out;
}

[[noreturn]] void corrupt(const std::string& field, const std::string& what) {
  throw Error(ErrorKind::kCorrupt, "field " + field + ": " + what, field);
}

}  // namespace

Project project_from_json(const nlohmann::json& j) {
  if (!j.is_object()) corrupt("$", "project document must be an object");
  if (!j.contains("schema_version")) corrupt("schema_version", "missing");
  if (!j["schema_version"].is_number_integer()) corrupt("schema_version", "must be an integer");
  const auto version = j["schema_version"].get<long long>();
  if (version != kProjectSchemaVersion) {
    throw Error(ErrorKind::kVersion,
                "unsupported project schema_version " + std::to_string(version) + " (expected " +
                    std::to_string(kProjectSchemaVersion) + ")",
                "schema_version");
  }

  Project p;
  p.project_id_ = jf::string(j, "project_id", "");
  p.corpus_ref_ = jf::string(j, "corpus_ref", "");
  p.model_ref_ = jf::string(j, "model_ref", "");
  {
    const std::string stage = jf::string(j, "stage", "");
    try {
      p.stage_ = stage_from_string(stage);
    } catch (const Error&) {
      corrupt("stage", "unknown stage " + stage);
    }
  }

  const auto& codes = jf::array(j, "codes", "");
  std::set<int> topic_ids;
  for (size_t i = 0; i < codes.size(); ++i) {
    const std::string path = jf::index("codes", i);
    Code c;
    c.topic_id = static_cast<int>(jf::integer(codes[i], "topic_id", path));
    if (!topic_ids.insert(c.topic_id).second) corrupt(path + ".topic_id", "duplicate topic id");
    const auto& words = jf::array(codes[i], "top_words", path);
    for (size_t w = 0; w < words.size(); ++w) {
      if (!words[w].is_string()) corrupt(jf::index(path + ".top_words", w), "must be a string");
      c.top_words.push_back(words[w].get<std::string>());
    }
    const std::string status = jf::string(codes[i], "status", path);
    try {
      c.status = code_status_from_string(status);
    } catch (const Error&) {
      corrupt(path + ".status", "unknown status " + status);
    }
    c.removal_reason = optional_string(codes[i], "removal_reason", path);
    if (c.status == CodeStatus::kOutlierRemoved && (!c.removal_reason || c.removal_reason->empty())) {
      corrupt(path + ".removal_reason", "required for OUTLIER_REMOVED");
    }
    const auto& labels = jf::array(codes[i], "expert_labels", path);
    std::set<std::string> experts;
    for (size_t l = 0; l < labels.size(); ++l) {
      const std::string lpath = jf::index(path + ".expert_labels", l);
      ExpertLabel e;
      e.expert_id = jf::string(labels[l], "expert_id", lpath);
      e.label = jf::string(labels[l], "label", lpath);
      const long long rating = jf::integer(labels[l], "rating", lpath);
      if (rating < 1 || rating > 5) corrupt(lpath + ".rating", "must be in [1, 5]");
      e.rating = static_cast<int>(rating);
      if (!experts.insert(e.expert_id).second) corrupt(lpath + ".expert_id", "duplicate expert");
      c.expert_labels.push_back(std::move(e));
    }
    c.aggregate_label = optional_string(codes[i], "aggregate_label", path);
    if (c.aggregate_label && c.expert_labels.empty()) {
      corrupt(path + ".aggregate_label", "set without expert labels");
    }
    p.codes_.push_back(std::move(c));
  }

  const auto& categories = jf::array(j, "categories", "");
  std::set<int> category_ids;
  for (size_t i = 0; i < categories.size(); ++i) {
    const std::string path = jf::index("categories", i);
    Category c;
    c.category_id = static_cast<int>(jf::integer(categories[i], "category_id", path));
    if (!category_ids.insert(c.category_id).second) corrupt(path + ".category_id", "duplicate id");
    c.name = jf::string(categories[i], "name", path);
    const std::string kind = jf::string(categories[i], "kind", path);
    try {
      c.kind = category_kind_from_string(kind);
    } catch (const Error&) {
      corrupt(path + ".kind", "unknown kind " + kind);
    }
    c.member_codes = int_list(categories[i], "member_codes", path);
    for (size_t m = 0; m < c.member_codes.size(); ++m) {
      const int t = c.member_codes[m];
      const std::string mpath = jf::index(path + ".member_codes", m);
      if (!topic_ids.contains(t)) corrupt(mpath, "unknown code " + std::to_string(t));
      if (m > 0 && c.member_codes[m - 1] >= t) corrupt(mpath, "members must be ascending and unique");
      if (!p.code(t).active()) corrupt(mpath, "member code is not ACTIVE");
    }
    p.categories_.push_back(std::move(c));
  }

  const auto& dimensions = jf::array(j, "dimensions", "");
  std::set<int> dimension_ids;
  std::set<int> placed;
  for (size_t i = 0; i < dimensions.size(); ++i) {
    const std::string path = jf::index("dimensions", i);
    Dimension d;
    d.dimension_id = static_cast<int>(jf::integer(dimensions[i], "dimension_id", path));
    if (!dimension_ids.insert(d.dimension_id).second) corrupt(path + ".dimension_id", "duplicate id");
    d.name = jf::string(dimensions[i], "name", path);
    d.member_categories = int_list(dimensions[i], "member_categories", path);
    for (size_t m = 0; m < d.member_categories.size(); ++m) {
      const int c = d.member_categories[m];
      const std::string mpath = jf::index(path + ".member_categories", m);
      if (!category_ids.contains(c)) corrupt(mpath, "unknown category " + std::to_string(c));
      if (!placed.insert(c).second) corrupt(mpath, "category belongs to two dimensions");
    }
    p.dimensions_.push_back(std::move(d));
  }

  const auto& memos = jf::array(j, "memos", "");
  for (size_t i = 0; i < memos.size(); ++i) {
    const std::string path = jf::index("memos", i);
    Memo m;
    m.memo_id = static_cast<int>(jf::integer(memos[i], "memo_id", path));
    m.author = jf::string(memos[i], "author", path);
    m.attached_to = attachment_from_json(jf::object(memos[i], "attached_to", path), path + ".attached_to");
    m.text = jf::string(memos[i], "text", path);
    m.created_at = jf::string(memos[i], "created_at", path);
    p.memos_.push_back(std::move(m));
  }

  const auto& log = jf::array(j, "audit_log", "");
  for (size_t i = 0; i < log.size(); ++i) {
    const std::string path = jf::index("audit_log", i);
    AuditEvent e = audit_event_from_json(log[i], path);
    if (!p.audit_log_.empty()) {
      if (e.seq <= p.audit_log_.back().seq) corrupt(path + ".seq", "must increase");
      if (e.timestamp < p.audit_log_.back().timestamp) corrupt(path + ".timestamp", "out of order");
    }
    p.audit_log_.push_back(std::move(e));
  }

  const auto& next = jf::object(j, "next_ids", "");
  p.next_category_id_ = static_cast<int>(jf::integer(next, "category", "next_ids"));
  p.next_dimension_id_ = static_cast<int>(jf::integer(next, "dimension", "next_ids"));
  p.next_memo_id_ = static_cast<int>(jf::integer(next, "memo", "next_ids"));
  return p;
}

void save_project(const Project& project, const std::string& path) {
  write_file_atomic(path, to_json(project).dump(2) + "\n");
}

Project load_project(const std::string& path) {
  return project_from_json(parse_json(read_file(path), path));
}

// ---------------------------------------------------------------------------
// Table export

std::vector<CodeTableRow> code_table(const Project& project) {
  std::vector<CodeTableRow> rows;
  for (const auto& c : project.codes()) {
    if (!c.active()) continue;
    CodeTableRow row;
    row.topic_number = topic_name(c.topic_id);
    for (size_t i = 0; i < c.top_words.size(); ++i) {
      if (i > 0) row.words += ' ';
      row.words += c.top_words[i];
    }
    row.label = c.aggregate_label.value_or("");
    std::vector<const Category*> cats;
    for (const auto& cat : project.categories()) {
      if (cat.has(c.topic_id)) cats.push_back(&cat);
    }
    std::sort(cats.begin(), cats.end(),
              [](const Category* a, const Category* b) { return a->category_id < b->category_id; });
    for (size_t i = 0; i < cats.size(); ++i) {
      if (i > 0) row.categories += "; ";
      row.categories += cats[i]->name;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<CategoryTableRow> category_table(const Project& project) {
  std::vector<const Category*> cats;
  for (const auto& c : project.categories()) cats.push_back(&c);
  std::sort(cats.begin(), cats.end(),
            [](const Category* a, const Category* b) { return a->category_id < b->category_id; });
  std::vector<CategoryTableRow> rows;
  for (const Category* c : cats) {
    CategoryTableRow row;
    for (size_t i = 0; i < c->member_codes.size(); ++i) {
      if (i > 0) row.topic_numbers += ", ";
      row.topic_numbers += topic_name(c->member_codes[i]);
    }
    row.category = c->name;
    if (auto dim = project.dimension_of(c->category_id)) {
      row.aggregate_dimension = project.dimension(*dim).name;
    } else if (c->kind == CategoryKind::kGeneric) {
      row.aggregate_dimension = "Generic Category";
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

ExportFormat export_format_from_string(std::string_view s) {
  if (s == "csv") return ExportFormat::kCsv;
  if (s == "json") return ExportFormat::kJson;
  throw contract_error("unknown export format " + std::string(s) + " (expected csv or json)",
                       "format");
}

ExportArtifact export_tables(const Project& project, ExportFormat format) {
  const auto table2 = code_table(project);
  const auto table3 = category_table(project);
  ExportArtifact out;
  if (format == ExportFormat::kCsv) {
    std::string t2 = csv_row({"topic_number", "words", "label", "categories"});
    for (const auto& r : table2) t2 += csv_row({r.topic_number, r.words, r.label, r.categories});
    std::string t3 = csv_row({"topic_numbers", "category", "aggregate_dimension"});
    for (const auto& r : table3) t3 += csv_row({r.topic_numbers, r.category, r.aggregate_dimension});
    out.files["table2.csv"] = std::move(t2);
    out.files["table3.csv"] = std::move(t3);
  } else {
    nlohmann::json j2 = nlohmann::json::array();
    for (const auto& r : table2) {
      j2.push_back({{"topic_number", r.topic_number},
                    {"words", r.words},
                    {"label", r.label},
                    {"categories", r.categories}});
    }
    nlohmann::json j3 = nlohmann::json::array();
    for (const auto& r : table3) {
      j3.push_back({{"topic_numbers", r.topic_numbers},
                    {"category", r.category},
                    {"aggregate_dimension", r.aggregate_dimension}});
    }
    out.files["tables.json"] = nlohmann::json({{"table2", j2}, {"table3", j3}}).dump(2) + "\n";
  }
  return out;
}

}  // namespace aigt
