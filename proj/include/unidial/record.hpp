#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace unidial {

using ojson = nlohmann::ordered_json;

enum class Split : std::uint8_t { train, dev, test };

std::string_view to_string(Split s);
std::optional<Split> parse_split(std::string_view s);

// Closed task vocabulary. The first 15 are the supervised task families;
// reo/clo are the two denoising tasks synthesized by the ssl module.
enum class TaskToken : std::uint8_t {
  rew,
  nlg,
  sum,
  fill,
  intent,
  dst,
  comm,
  emo,
  docqa,
  dialqa,
  chat,
  kgdial,
  txt2sql,
  sim,
  tod,
  reo,
  clo,
};

inline constexpr std::size_t kTaskCount = 17;

// Bracketed lowercase rendering, e.g. "[rew]".
std::string_view to_string(TaskToken t);
std::optional<TaskToken> parse_task_token(std::string_view s);
bool is_supervised(TaskToken t);
const std::vector<TaskToken>& all_task_tokens();

struct Speaker {
  enum class Kind : std::uint8_t { user, system, other };

  Kind kind = Kind::user;
  std::string name;  // set only for Kind::other

  static Speaker user() { return {Kind::user, {}}; }
  static Speaker system() { return {Kind::system, {}}; }
  // Names are payload-normalized and have ':' removed so the rendered
  // "name: text" form stays parseable.
  static Speaker other(std::string_view name);
  // "user" / "system" map onto the builtin kinds, anything else to other().
  static Speaker from_label(std::string_view label);

  std::string_view label() const;

  friend bool operator==(const Speaker&, const Speaker&) = default;
};

struct Turn {
  Speaker speaker;
  std::string text;  // payload-normalized

  static Turn make(Speaker speaker, std::string_view raw_text);

  friend bool operator==(const Turn&, const Turn&) = default;
};

using DialogueHistory = std::vector<Turn>;

// Characters reserved by each knowledge serialization, replaced by spaces in
// the corresponding payload fields.
inline constexpr std::string_view kPairKillChars = ";=|";
inline constexpr std::string_view kSchemaKillChars = "()|,";
inline constexpr std::string_view kTripleKillChars = "()|";

struct KnowledgeForm {
  enum class Kind : std::uint8_t { none, text, pairs, schema, triples };

  struct Table {
    std::string name;
    std::vector<std::string> columns;
    friend bool operator==(const Table&, const Table&) = default;
  };
  struct Triple {
    std::string head, relation, tail;
    friend bool operator==(const Triple&, const Triple&) = default;
  };

  Kind kind = Kind::none;
  std::string text;                                        // kind == text
  std::vector<std::pair<std::string, std::string>> pairs;  // kind == pairs
  std::vector<Table> tables;                               // kind == schema
  std::vector<Triple> triples;                             // kind == triples

  static KnowledgeForm none() { return {}; }
  static KnowledgeForm unstructured(std::string_view text);
  static KnowledgeForm semi_structured(std::vector<std::pair<std::string, std::string>> pairs);
  static KnowledgeForm db_schema(std::vector<Table> tables);
  static KnowledgeForm kg_triples(std::vector<Triple> triples);

  bool is_structured() const { return kind == Kind::schema || kind == Kind::triples; }

  friend bool operator==(const KnowledgeForm&, const KnowledgeForm&) = default;
};

std::string_view to_string(KnowledgeForm::Kind k);
std::optional<KnowledgeForm::Kind> parse_knowledge_kind(std::string_view s);

// One text-to-text training example. All text fields are normalized at
// construction / parse time; consumers may assume normalized content.
struct UnifiedRecord {
  TaskToken task = TaskToken::chat;
  std::string dataset;
  Split split = Split::train;
  DialogueHistory dialogue;
  KnowledgeForm knowledge;
  std::string task_definition;
  std::string target;
  ojson meta = ojson::object();

  friend bool operator==(const UnifiedRecord&, const UnifiedRecord&) = default;
};

// ---------------------------------------------------------------------------
// Validation

enum class Severity : std::uint8_t { warning, error };

struct Violation {
  std::string code;
  Severity severity = Severity::error;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;

  // No error-level violations; warnings are tolerated.
  bool ok() const;
  bool clean() const { return violations.empty(); }
  std::size_t errors() const;
  std::size_t warnings() const;
};

// Checks type invariants and the task/history/knowledge compatibility matrix.
// History-arity drift and a missing (but expected) knowledge form are
// warnings; a wrong or forbidden knowledge kind, an empty history for a task
// that needs dialogue content, and structural defects are errors.
ValidationReport validate_record(const UnifiedRecord& r);

// Expected shape per task, used by the compatibility check.
enum class HistoryArity : std::uint8_t { none, single, multi, any_nonempty };
struct TaskShape {
  HistoryArity history;
  KnowledgeForm::Kind knowledge;  // Kind::schema stands for "any structured"
  bool knowledge_required;        // missing knowledge is an error, not a warning
};
const TaskShape& task_shape(TaskToken t);

// ---------------------------------------------------------------------------
// Wire format: one record per JSONL line, fields
//   task, dataset, split, dialogue, knowledge, task_definition, target, meta

struct ParseError {
  std::string code;  // "MalformedLine" | "UnknownTask"
  std::string message;
};

std::optional<UnifiedRecord> parse_record(std::string_view line, ParseError* err = nullptr);
std::string serialize_record(const UnifiedRecord& r);

// Parse + validate in one step; parse failures surface as error-level
// violations so line-oriented callers see a uniform report.
ValidationReport validate_line(std::string_view line);

}  // namespace unidial
