#include "unidial/record.hpp"

#include <algorithm>
#include <array>
#include <unordered_set>

#include "unidial/linearize.hpp"
#include "unidial/text.hpp"

namespace unidial {

namespace {

constexpr std::array<std::string_view, 3> kSplitNames = {"train", "dev", "test"};

constexpr std::array<std::string_view, kTaskCount> kTaskNames = {
    "[rew]",  "[nlg]",    "[sum]",     "[fill]", "[intent]", "[dst]",
    "[comm]", "[emo]",    "[docqa]",   "[dialqa]", "[chat]", "[kgdial]",
    "[txt2sql]", "[sim]", "[tod]",     "[reo]",  "[clo]"};

constexpr std::array<std::string_view, 5> kKnowledgeKindNames = {"none", "text", "pairs",
                                                                "schema", "triples"};

}  // namespace

std::string_view to_string(Split s) { return kSplitNames[static_cast<std::size_t>(s)]; }

std::optional<Split> parse_split(std::string_view s) {
  for (std::size_t i = 0; i < kSplitNames.size(); ++i) {
    if (s == kSplitNames[i]) return static_cast<Split>(i);
  }
  return std::nullopt;
}

std::string_view to_string(TaskToken t) { return kTaskNames[static_cast<std::size_t>(t)]; }

std::optional<TaskToken> parse_task_token(std::string_view s) {
  for (std::size_t i = 0; i < kTaskNames.size(); ++i) {
    if (s == kTaskNames[i]) return static_cast<TaskToken>(i);
  }
  return std::nullopt;
}

bool is_supervised(TaskToken t) { return t != TaskToken::reo && t != TaskToken::clo; }

const std::vector<TaskToken>& all_task_tokens() {
  static const std::vector<TaskToken> tokens = [] {
    std::vector<TaskToken> v;
    for (std::size_t i = 0; i < kTaskCount; ++i) v.push_back(static_cast<TaskToken>(i));
    return v;
  }();
  return tokens;
}

std::string_view to_string(KnowledgeForm::Kind k) {
  return kKnowledgeKindNames[static_cast<std::size_t>(k)];
}

std::optional<KnowledgeForm::Kind> parse_knowledge_kind(std::string_view s) {
  for (std::size_t i = 0; i < kKnowledgeKindNames.size(); ++i) {
    if (s == kKnowledgeKindNames[i]) return static_cast<KnowledgeForm::Kind>(i);
  }
  return std::nullopt;
}

Speaker Speaker::other(std::string_view name) {
  std::string n = normalize_payload_killing(name, ":");
  return {Kind::other, std::move(n)};
}

Speaker Speaker::from_label(std::string_view label) {
  if (label == "user") return user();
  if (label == "system") return system();
  return other(label);
}

std::string_view Speaker::label() const {
  switch (kind) {
    case Kind::user:
      return "user";
    case Kind::system:
      return "system";
    case Kind::other:
      return name;
  }
  return "user";
}

Turn Turn::make(Speaker speaker, std::string_view raw_text) {
  return {std::move(speaker), normalize_payload(raw_text)};
}

KnowledgeForm KnowledgeForm::unstructured(std::string_view text) {
  KnowledgeForm k;
  k.kind = Kind::text;
  k.text = normalize_payload(text);
  return k;
}

KnowledgeForm KnowledgeForm::semi_structured(
    std::vector<std::pair<std::string, std::string>> pairs) {
  KnowledgeForm k;
  k.kind = Kind::pairs;
  for (auto& [key, value] : pairs) {
    key = normalize_payload_killing(key, kPairKillChars);
    value = normalize_payload_killing(value, kPairKillChars);
  }
  k.pairs = std::move(pairs);
  return k;
}

KnowledgeForm KnowledgeForm::db_schema(std::vector<Table> tables) {
  KnowledgeForm k;
  k.kind = Kind::schema;
  for (auto& t : tables) {
    t.name = normalize_payload_killing(t.name, kSchemaKillChars);
    for (auto& c : t.columns) c = normalize_payload_killing(c, kSchemaKillChars);
  }
  k.tables = std::move(tables);
  return k;
}

KnowledgeForm KnowledgeForm::kg_triples(std::vector<Triple> triples) {
  KnowledgeForm k;
  k.kind = Kind::triples;
  for (auto& t : triples) {
    t.head = normalize_payload_killing(t.head, kTripleKillChars);
    t.relation = normalize_payload_killing(t.relation, kTripleKillChars);
    t.tail = normalize_payload_killing(t.tail, kTripleKillChars);
  }
  k.triples = std::move(triples);
  return k;
}

// ---------------------------------------------------------------------------
// Validation

bool ValidationReport::ok() const {
  return std::none_of(violations.begin(), violations.end(),
                      [](const Violation& v) { return v.severity == Severity::error; });
}

std::size_t ValidationReport::errors() const {
  return static_cast<std::size_t>(
      std::count_if(violations.begin(), violations.end(),
                    [](const Violation& v) { return v.severity == Severity::error; }));
}

std::size_t ValidationReport::warnings() const {
  return violations.size() - errors();
}

const TaskShape& task_shape(TaskToken t) {
  using K = KnowledgeForm::Kind;
  static const std::array<TaskShape, kTaskCount> shapes = {{
      {HistoryArity::multi, K::none, false},         // rew
      {HistoryArity::none, K::pairs, true},          // nlg: the description is the input
      {HistoryArity::multi, K::none, false},         // sum
      {HistoryArity::single, K::pairs, false},       // fill
      {HistoryArity::single, K::pairs, false},       // intent
      {HistoryArity::multi, K::pairs, false},        // dst
      {HistoryArity::single, K::text, false},        // comm
      {HistoryArity::single, K::pairs, false},       // emo
      {HistoryArity::multi, K::text, false},         // docqa
      {HistoryArity::multi, K::text, false},         // dialqa
      {HistoryArity::multi, K::text, false},         // chat
      {HistoryArity::multi, K::schema, false},       // kgdial: any structured form
      {HistoryArity::multi, K::schema, false},       // txt2sql: any structured form
      {HistoryArity::multi, K::pairs, false},        // sim
      {HistoryArity::multi, K::pairs, false},        // tod
      {HistoryArity::multi, K::none, false},         // reo
      {HistoryArity::any_nonempty, K::pairs, true},  // clo: masked entities are the input
  }};
  return shapes[static_cast<std::size_t>(t)];
}

namespace {

void add(ValidationReport& rep, std::string code, Severity sev, std::string detail) {
  rep.violations.push_back({std::move(code), sev, std::move(detail)});
}

void check_combination(const UnifiedRecord& r, ValidationReport& rep) {
  const TaskShape& shape = task_shape(r.task);
  const std::string task(to_string(r.task));
  const std::size_t turns = r.dialogue.size();

  switch (shape.history) {
    case HistoryArity::none:
      if (turns > 0) {
        add(rep, "IllegalCombination", Severity::warning,
            task + " expects an empty dialogue history but has " + std::to_string(turns) +
                " turns");
      }
      break;
    case HistoryArity::single:
      if (turns == 0) {
        add(rep, "IllegalCombination", Severity::error,
            task + " requires dialogue content but the history is empty");
      } else if (turns > 1) {
        add(rep, "IllegalCombination", Severity::warning,
            task + " expects a single turn but has " + std::to_string(turns));
      }
      break;
    case HistoryArity::multi:
      if (turns == 0) {
        add(rep, "IllegalCombination", Severity::error,
            task + " requires dialogue content but the history is empty");
      } else if (turns == 1) {
        // A permuted one-turn dialogue cannot exist; elsewhere one turn is
        // just unusually short data.
        if (r.task == TaskToken::reo) {
          add(rep, "IllegalCombination", Severity::error,
              task + " requires at least two turns");
        } else {
          add(rep, "IllegalCombination", Severity::warning,
              task + " expects multiple turns but has one");
        }
      }
      break;
    case HistoryArity::any_nonempty:
      if (turns == 0) {
        add(rep, "IllegalCombination", Severity::error,
            task + " requires dialogue content but the history is empty");
      }
      break;
  }

  using K = KnowledgeForm::Kind;
  const K actual = r.knowledge.kind;
  if (shape.knowledge == K::none) {
    if (actual != K::none) {
      add(rep, "IllegalCombination", Severity::error,
          task + " takes no external knowledge but has kind '" +
              std::string(to_string(actual)) + "'");
    }
  } else if (actual == K::none) {
    add(rep, "IllegalCombination", shape.knowledge_required ? Severity::error : Severity::warning,
        task + " expects knowledge of kind '" + std::string(to_string(shape.knowledge)) +
            "' but has none");
  } else if (shape.knowledge == K::schema) {
    if (actual != K::schema && actual != K::triples) {
      add(rep, "IllegalCombination", Severity::error,
          task + " expects structured knowledge but has kind '" +
              std::string(to_string(actual)) + "'");
    }
  } else if (actual != shape.knowledge) {
    add(rep, "IllegalCombination", Severity::error,
        task + " expects knowledge of kind '" + std::string(to_string(shape.knowledge)) +
            "' but has kind '" + std::string(to_string(actual)) + "'");
  }
}

void check_knowledge_payload(const KnowledgeForm& k, ValidationReport& rep) {
  using K = KnowledgeForm::Kind;
  switch (k.kind) {
    case K::none:
      break;
    case K::text:
      if (k.text.empty()) {
        add(rep, "EmptyKnowledgePayload", Severity::error, "unstructured knowledge text is empty");
      }
      break;
    case K::pairs:
      if (k.pairs.empty()) {
        add(rep, "EmptyKnowledgePayload", Severity::error, "semi-structured pair list is empty");
      }
      for (const auto& [key, value] : k.pairs) {
        if (key.empty()) {
          add(rep, "EmptyKnowledgeKey", Severity::error, "pair with empty key-path");
        }
      }
      break;
    case K::schema: {
      if (k.tables.empty()) {
        add(rep, "EmptyKnowledgePayload", Severity::error, "schema has no tables");
      }
      std::unordered_set<std::string> seen;
      for (const auto& t : k.tables) {
        if (t.name.empty()) {
          add(rep, "EmptyTableName", Severity::error, "schema table with empty name");
        } else if (!seen.insert(t.name).second) {
          add(rep, "DuplicateTableName", Severity::error, "duplicate table '" + t.name + "'");
        }
      }
      break;
    }
    case K::triples:
      if (k.triples.empty()) {
        add(rep, "EmptyKnowledgePayload", Severity::error, "triple list is empty");
      }
      for (const auto& t : k.triples) {
        if (t.head.empty() || t.relation.empty() || t.tail.empty()) {
          add(rep, "EmptyTripleSlot", Severity::error,
              "triple with an empty head, relation or tail");
        }
      }
      break;
  }
}

bool looks_multi_sentence(std::string_view s) {
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    if ((s[i] == '.' || s[i] == '!' || s[i] == '?') && s[i + 1] == ' ') return true;
  }
  return false;
}

}  // namespace

ValidationReport validate_record(const UnifiedRecord& r) {
  ValidationReport rep;

  if (r.target.empty()) add(rep, "EmptyTarget", Severity::error, "target must be non-empty");
  if (r.dataset.empty()) add(rep, "EmptyDataset", Severity::warning, "dataset name is empty");

  for (std::size_t i = 0; i < r.dialogue.size(); ++i) {
    const Turn& t = r.dialogue[i];
    if (t.text.empty()) {
      add(rep, "EmptyTurnText", Severity::error, "turn " + std::to_string(i) + " has empty text");
    } else if (t.text != normalize_payload(t.text)) {
      add(rep, "UnnormalizedText", Severity::error,
          "turn " + std::to_string(i) + " text is not payload-normalized");
    }
    if (t.speaker.kind == Speaker::Kind::other && t.speaker.name.empty()) {
      add(rep, "EmptySpeakerName", Severity::error,
          "turn " + std::to_string(i) + " has an unnamed speaker");
    }
  }

  if (r.task_definition.empty()) {
    add(rep, "EmptyDefinition", Severity::warning, "task definition is empty");
  } else {
    if (r.task_definition != normalize_payload(r.task_definition)) {
      add(rep, "UnnormalizedText", Severity::error, "task definition is not payload-normalized");
    }
    if (looks_multi_sentence(r.task_definition)) {
      add(rep, "MultiSentenceDefinition", Severity::warning,
          "task definition should be a single sentence");
    }
  }

  check_knowledge_payload(r.knowledge, rep);
  check_combination(r, rep);

  // Supervised targets never reproduce the whole dialogue; the denoising
  // tasks do exactly that by construction.
  if (is_supervised(r.task) && !r.dialogue.empty() && !r.target.empty() &&
      r.target == dialogue_text(r.dialogue)) {
    add(rep, "TargetEqualsDialogue", Severity::error,
        "target equals the linearized dialogue history");
  }

  return rep;
}

// ---------------------------------------------------------------------------
// Wire format

namespace {

bool fail(ParseError* err, std::string code, std::string message) {
  if (err != nullptr) *err = {std::move(code), std::move(message)};
  return false;
}

bool parse_knowledge_json(const ojson& j, KnowledgeForm& out, ParseError* err) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    return fail(err, "MalformedLine", "knowledge must be an object with a string 'kind'");
  }
  const auto kind = parse_knowledge_kind(j["kind"].get_ref<const std::string&>());
  if (!kind) {
    return fail(err, "MalformedLine",
                "unknown knowledge kind '" + j["kind"].get<std::string>() + "'");
  }
  const ojson* payload = j.contains("payload") ? &j["payload"] : nullptr;
  using K = KnowledgeForm::Kind;
  switch (*kind) {
    case K::none:
      out = KnowledgeForm::none();
      return true;
    case K::text:
      if (payload == nullptr || !payload->is_string()) {
        return fail(err, "MalformedLine", "knowledge kind 'text' needs a string payload");
      }
      out = KnowledgeForm::unstructured(payload->get_ref<const std::string&>());
      return true;
    case K::pairs: {
      if (payload == nullptr || !payload->is_array()) {
        return fail(err, "MalformedLine", "knowledge kind 'pairs' needs an array payload");
      }
      std::vector<std::pair<std::string, std::string>> pairs;
      for (const auto& e : *payload) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string()) {
          return fail(err, "MalformedLine", "each pair must be a [key, value] string array");
        }
        pairs.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
      }
      out = KnowledgeForm::semi_structured(std::move(pairs));
      return true;
    }
    case K::schema: {
      if (payload == nullptr || !payload->is_array()) {
        return fail(err, "MalformedLine", "knowledge kind 'schema' needs an array payload");
      }
      std::vector<KnowledgeForm::Table> tables;
      for (const auto& e : *payload) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_array()) {
          return fail(err, "MalformedLine", "each table must be [name, [columns...]]");
        }
        KnowledgeForm::Table t;
        t.name = e[0].get<std::string>();
        for (const auto& c : e[1]) {
          if (!c.is_string()) {
            return fail(err, "MalformedLine", "table columns must be strings");
          }
          t.columns.push_back(c.get<std::string>());
        }
        tables.push_back(std::move(t));
      }
      out = KnowledgeForm::db_schema(std::move(tables));
      return true;
    }
    case K::triples: {
      if (payload == nullptr || !payload->is_array()) {
        return fail(err, "MalformedLine", "knowledge kind 'triples' needs an array payload");
      }
      std::vector<KnowledgeForm::Triple> triples;
      for (const auto& e : *payload) {
        if (!e.is_array() || e.size() != 3 || !e[0].is_string() || !e[1].is_string() ||
            !e[2].is_string()) {
          return fail(err, "MalformedLine", "each triple must be [head, relation, tail]");
        }
        triples.push_back({e[0].get<std::string>(), e[1].get<std::string>(),
                           e[2].get<std::string>()});
      }
      out = KnowledgeForm::kg_triples(std::move(triples));
      return true;
    }
  }
  return fail(err, "MalformedLine", "unreachable knowledge kind");
}

ojson knowledge_to_json(const KnowledgeForm& k) {
  ojson j = ojson::object();
  j["kind"] = std::string(to_string(k.kind));
  using K = KnowledgeForm::Kind;
  switch (k.kind) {
    case K::none:
      j["payload"] = nullptr;
      break;
    case K::text:
      j["payload"] = k.text;
      break;
    case K::pairs: {
      ojson a = ojson::array();
      for (const auto& [key, value] : k.pairs) a.push_back(ojson::array({key, value}));
      j["payload"] = std::move(a);
      break;
    }
    case K::schema: {
      ojson a = ojson::array();
      for (const auto& t : k.tables) a.push_back(ojson::array({t.name, t.columns}));
      j["payload"] = std::move(a);
      break;
    }
    case K::triples: {
      ojson a = ojson::array();
      for (const auto& t : k.triples) a.push_back(ojson::array({t.head, t.relation, t.tail}));
      j["payload"] = std::move(a);
      break;
    }
  }
  return j;
}

}  // namespace

std::optional<UnifiedRecord> parse_record(std::string_view line, ParseError* err) {
  ojson j = ojson::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    fail(err, "MalformedLine", "line is not a JSON object");
    return std::nullopt;
  }

  for (const char* field : {"task", "dataset", "split", "task_definition", "target"}) {
    if (!j.contains(field) || !j[field].is_string()) {
      fail(err, "MalformedLine", std::string("missing or non-string field '") + field + "'");
      return std::nullopt;
    }
  }
  if (!j.contains("dialogue") || !j["dialogue"].is_array()) {
    fail(err, "MalformedLine", "missing or non-array field 'dialogue'");
    return std::nullopt;
  }
  if (!j.contains("knowledge")) {
    fail(err, "MalformedLine", "missing field 'knowledge'");
    return std::nullopt;
  }

  UnifiedRecord r;
  const auto task = parse_task_token(j["task"].get_ref<const std::string&>());
  if (!task) {
    fail(err, "UnknownTask", "unknown task token '" + j["task"].get<std::string>() + "'");
    return std::nullopt;
  }
  r.task = *task;

  const auto split = parse_split(j["split"].get_ref<const std::string&>());
  if (!split) {
    fail(err, "MalformedLine", "unknown split '" + j["split"].get<std::string>() + "'");
    return std::nullopt;
  }
  r.split = *split;

  r.dataset = normalize_text(j["dataset"].get_ref<const std::string&>());
  r.task_definition = normalize_payload(j["task_definition"].get_ref<const std::string&>());
  r.target = normalize_text(j["target"].get_ref<const std::string&>());

  for (const auto& e : j["dialogue"]) {
    if (!e.is_object() || !e.contains("speaker") || !e["speaker"].is_string() ||
        !e.contains("text") || !e["text"].is_string()) {
      fail(err, "MalformedLine", "each dialogue turn needs string 'speaker' and 'text'");
      return std::nullopt;
    }
    r.dialogue.push_back(Turn::make(Speaker::from_label(e["speaker"].get_ref<const std::string&>()),
                                    e["text"].get_ref<const std::string&>()));
  }

  if (!parse_knowledge_json(j["knowledge"], r.knowledge, err)) return std::nullopt;

  if (j.contains("meta")) {
    if (!j["meta"].is_object()) {
      fail(err, "MalformedLine", "'meta' must be an object");
      return std::nullopt;
    }
    r.meta = j["meta"];
  }

  return r;
}

std::string serialize_record(const UnifiedRecord& r) {
  ojson j = ojson::object();
  j["task"] = std::string(to_string(r.task));
  j["dataset"] = r.dataset;
  j["split"] = std::string(to_string(r.split));
  ojson dialogue = ojson::array();
  for (const Turn& t : r.dialogue) {
    ojson turn = ojson::object();
    turn["speaker"] = std::string(t.speaker.label());
    turn["text"] = t.text;
    dialogue.push_back(std::move(turn));
  }
  j["dialogue"] = std::move(dialogue);
  j["knowledge"] = knowledge_to_json(r.knowledge);
  j["task_definition"] = r.task_definition;
  j["target"] = r.target;
  j["meta"] = r.meta;
  return j.dump();
}

ValidationReport validate_line(std::string_view line) {
  ParseError err;
  const auto rec = parse_record(line, &err);
  if (!rec) {
    ValidationReport rep;
    rep.violations.push_back({err.code, Severity::error, err.message});
    return rep;
  }
  return validate_record(*rec);
}

}  // namespace unidial
