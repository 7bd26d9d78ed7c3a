#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aigt/lda.hpp"
#include "aigt/topicsim.hpp"

namespace aigt {

// The four coding steps, in the order a project moves through them.
enum class Stage { kRawCoding = 0, kExpertCoding = 1, kFocusCoding = 2, kTheoryBuilding = 3 };
enum class CodeStatus { kActive, kOutlierRemoved, kRatingRemoved };
enum class CategoryKind { kCore, kGeneric };
enum class AttachmentKind { kCode, kCategory, kDimension, kProject };

std::string_view to_string(Stage stage);
std::string_view to_string(CodeStatus status);
std::string_view to_string(CategoryKind kind);
std::string_view to_string(AttachmentKind kind);
Stage stage_from_string(std::string_view s);
CodeStatus code_status_from_string(std::string_view s);
CategoryKind category_kind_from_string(std::string_view s);
AttachmentKind attachment_kind_from_string(std::string_view s);

struct ExpertLabel {
  std::string expert_id;
  std::string label;
  int rating = 0;  // 1..5

  bool operator==(const ExpertLabel&) const = default;
};

struct Code {
  int topic_id = 0;
  std::vector<std::string> top_words;
  CodeStatus status = CodeStatus::kActive;
  std::optional<std::string> removal_reason;
  std::vector<ExpertLabel> expert_labels;
  std::optional<std::string> aggregate_label;

  bool active() const { return status == CodeStatus::kActive; }
  bool operator==(const Code&) const = default;
};

struct Category {
  int category_id = 0;
  std::string name;
  CategoryKind kind = CategoryKind::kCore;
  std::vector<int> member_codes;  // ascending topic ids

  bool has(int topic_id) const;
  bool operator==(const Category&) const = default;
};

struct Dimension {
  int dimension_id = 0;
  std::string name;
  std::vector<int> member_categories;  // ascending category ids

  bool operator==(const Dimension&) const = default;
};

struct Attachment {
  AttachmentKind kind = AttachmentKind::kProject;
  int id = 0;  // topic id, category id or dimension id; ignored for kProject

  bool operator==(const Attachment&) const = default;
};

struct Memo {
  int memo_id = 0;
  std::string author;
  Attachment attached_to;
  std::string text;
  std::string created_at;

  bool operator==(const Memo&) const = default;
};

// One entry per mutation. `args` are the operation's inputs, enough to
// re-execute it; `detail` records what the operation changed.
struct AuditEvent {
  int64_t seq = 0;
  std::string timestamp;  // ISO 8601 UTC, non-decreasing along the log
  std::string op;
  nlohmann::json args;
  Stage stage = Stage::kRawCoding;  // stage the project was in when applied
  bool retroactive = false;         // op belongs to a stage already passed
  nlohmann::json detail;

  bool operator==(const AuditEvent&) const = default;
};

inline constexpr int kProjectSchemaVersion = 1;

// A grounded-theory coding project over one topic model. Every mutation is
// validated first and applied atomically: on error the project is unchanged.
// Not thread-safe; callers serialize writers.
class Project {
 public:
  using Clock = std::function<std::string()>;

  Project() = default;

  // One ACTIVE code per model topic, carrying its top `model.params.top_n_words` words.
  static Project create(const TopicModel& model, Clock clock = {}, std::string project_id = {});
  static Project create(std::string corpus_ref, std::string model_ref, const TopicSet& topics,
                        Clock clock = {}, std::string project_id = {});

  // Re-executes every event of `log` newer than `initial`'s last event.
  static Project replay(const Project& initial, const std::vector<AuditEvent>& log,
                        Clock clock = {});
  // Rebuilds a project from its full log, starting at the create_project event.
  static Project from_audit_log(const std::vector<AuditEvent>& log, Clock clock = {});

  void set_clock(Clock clock) { clock_ = std::move(clock); }

  // Raw coding.
  void mark_outlier(int topic_id, const std::string& reason);
  void advance_stage();

  // Expert coding.
  void submit_expert_label(const std::string& expert_id, int topic_id, const std::string& label,
                           int rating);
  void set_aggregate_label(int topic_id, const std::string& label);
  double average_rating(int topic_id) const;
  // Codes whose mean rating is strictly below `threshold` become RATING_REMOVED.
  std::vector<int> prune_low_rated(double threshold = 2.0);

  // Focus coding.
  int create_category(const std::string& name, CategoryKind kind);
  void rename_category(int category_id, const std::string& name);
  void set_category_kind(int category_id, CategoryKind kind);
  void assign_code(int category_id, int topic_id);
  void unassign_code(int category_id, int topic_id);
  // Deletes every category with fewer than two member codes.
  std::vector<Category> prune_singleton_categories();

  // Theory building.
  int create_dimension(const std::string& name);
  void assign_category(int dimension_id, int category_id);
  void unassign_category(int dimension_id, int category_id);

  int add_memo(const Attachment& attachment, const std::string& author, const std::string& text);

  const std::string& project_id() const { return project_id_; }
  const std::string& corpus_ref() const { return corpus_ref_; }
  const std::string& model_ref() const { return model_ref_; }
  Stage stage() const { return stage_; }
  const std::vector<Code>& codes() const { return codes_; }
  const Code& code(int topic_id) const;
  const std::vector<Category>& categories() const { return categories_; }
  const Category& category(int category_id) const;
  const std::vector<Dimension>& dimensions() const { return dimensions_; }
  const Dimension& dimension(int dimension_id) const;
  const std::vector<Memo>& memos() const { return memos_; }
  std::vector<Memo> memos_for(const Attachment& attachment) const;
  const std::vector<AuditEvent>& audit_log() const { return audit_log_; }
  size_t count(CodeStatus status) const;
  // Dimension holding the category, if any.
  std::optional<int> dimension_of(int category_id) const;

  bool operator==(const Project& other) const;

  friend nlohmann::json to_json(const Project& project);
  friend Project project_from_json(const nlohmann::json& j);

 private:
  nlohmann::json apply(const std::string& op, nlohmann::json args,
                       std::optional<std::string> timestamp = std::nullopt);
  nlohmann::json execute(const std::string& op, const nlohmann::json& args);
  std::string now();

  Code& mutable_code(int topic_id);
  Category& mutable_category(int category_id);
  Dimension& mutable_dimension(int dimension_id);
  nlohmann::json drop_from_categories(int topic_id);

  nlohmann::json do_create(const nlohmann::json& args);
  nlohmann::json do_mark_outlier(const nlohmann::json& args);
  nlohmann::json do_advance(const nlohmann::json& args);
  nlohmann::json do_submit_label(const nlohmann::json& args);
  nlohmann::json do_aggregate_label(const nlohmann::json& args);
  nlohmann::json do_prune_rated(const nlohmann::json& args);
  nlohmann::json do_create_category(const nlohmann::json& args);
  nlohmann::json do_rename_category(const nlohmann::json& args);
  nlohmann::json do_set_category_kind(const nlohmann::json& args);
  nlohmann::json do_assign_code(const nlohmann::json& args);
  nlohmann::json do_unassign_code(const nlohmann::json& args);
  nlohmann::json do_prune_singletons(const nlohmann::json& args);
  nlohmann::json do_create_dimension(const nlohmann::json& args);
  nlohmann::json do_assign_category(const nlohmann::json& args);
  nlohmann::json do_unassign_category(const nlohmann::json& args);
  nlohmann::json do_add_memo(const nlohmann::json& args);

  std::string project_id_;
  std::string corpus_ref_;
  std::string model_ref_;
  Stage stage_ = Stage::kRawCoding;
  std::vector<Code> codes_;
  std::vector<Category> categories_;
  std::vector<Dimension> dimensions_;
  std::vector<Memo> memos_;
  std::vector<AuditEvent> audit_log_;
  int next_category_id_ = 1;
  int next_dimension_id_ = 1;
  int next_memo_id_ = 1;
  // Timestamp of the event being applied; used for memo creation times.
  std::string pending_timestamp_;
  Clock clock_;
};

nlohmann::json to_json(const Project& project);
// Validates the whole document; errors name the first invalid field.
Project project_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AuditEvent& event);
AuditEvent audit_event_from_json(const nlohmann::json& j, const std::string& path);

void save_project(const Project& project, const std::string& path);
Project load_project(const std::string& path);

// Current UTC time as 2026-01-31T12:34:56.789Z.
std::string utc_timestamp_now();

// Table-2 rows: one per ACTIVE code. Table-3 rows: one per category.
struct CodeTableRow {
  std::string topic_number;  // "topic_<id>"
  std::string words;         // space separated
  std::string label;         // aggregate label, empty when unset
  std::string categories;    // category names in category-id order, "; " separated

  bool operator==(const CodeTableRow&) const = default;
};

struct CategoryTableRow {
  std::string topic_numbers;        // member topics ascending, ", " separated
  std::string category;
  std::string aggregate_dimension;  // dimension name, "Generic Category", or empty

  bool operator==(const CategoryTableRow&) const = default;
};

std::vector<CodeTableRow> code_table(const Project& project);
std::vector<CategoryTableRow> category_table(const Project& project);

enum class ExportFormat { kCsv, kJson };
ExportFormat export_format_from_string(std::string_view s);

struct ExportArtifact {
  // CSV: "table2.csv" and "table3.csv". JSON: "tables.json".
  std::map<std::string, std::string> files;
};

ExportArtifact export_tables(const Project& project, ExportFormat format);

}  // namespace aigt
