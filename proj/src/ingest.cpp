#include "unidial/ingest.hpp"

#include <array>
#include <fstream>
#include <istream>
#include <map>
#include <tuple>

#include "unidial/errors.hpp"
#include "unidial/knowledge.hpp"
#include "unidial/text.hpp"

namespace unidial {

namespace {

constexpr std::array<std::string_view, 7> kAdapterNames = {
    "intent_label",   "slot_spans",           "dst_multiwoz_like", "chitchat_turns",
    "summary_pair",   "text2sql_spider_like", "passthrough_unified"};

}  // namespace

std::string_view to_string(AdapterId a) { return kAdapterNames[static_cast<std::size_t>(a)]; }

std::optional<AdapterId> parse_adapter_id(std::string_view s) {
  for (std::size_t i = 0; i < kAdapterNames.size(); ++i) {
    if (s == kAdapterNames[i]) return static_cast<AdapterId>(i);
  }
  return std::nullopt;
}

std::optional<TaskToken> adapter_task(AdapterId a) {
  switch (a) {
    case AdapterId::intent_label:
      return TaskToken::intent;
    case AdapterId::slot_spans:
      return TaskToken::fill;
    case AdapterId::dst_multiwoz_like:
      return TaskToken::dst;
    case AdapterId::chitchat_turns:
      return TaskToken::chat;
    case AdapterId::summary_pair:
      return TaskToken::sum;
    case AdapterId::text2sql_spider_like:
      return TaskToken::txt2sql;
    case AdapterId::passthrough_unified:
      return std::nullopt;
  }
  return std::nullopt;
}

std::string_view default_task_definition(TaskToken t) {
  switch (t) {
    case TaskToken::rew:
      return "Rewrite the last user utterance into a self-contained sentence.";
    case TaskToken::nlg:
      return "Generate a natural language utterance for the given dialogue act.";
    case TaskToken::sum:
      return "Summarize the dialogue.";
    case TaskToken::fill:
      return "Extract the slot values mentioned in the utterance.";
    case TaskToken::intent:
      return "Detect the intent of the user utterance.";
    case TaskToken::dst:
      return "Track the dialogue state.";
    case TaskToken::comm:
      return "Answer the question using commonsense knowledge.";
    case TaskToken::emo:
      return "Detect the emotion of the speaker.";
    case TaskToken::docqa:
      return "Answer the question based on the document.";
    case TaskToken::dialqa:
      return "Answer the question about the dialogue.";
    case TaskToken::chat:
      return "Generate the next chitchat response.";
    case TaskToken::kgdial:
      return "Generate the next response using the knowledge graph.";
    case TaskToken::txt2sql:
      return "Translate the question into a SQL query.";
    case TaskToken::sim:
      return "Generate the next user utterance.";
    case TaskToken::tod:
      return "Generate the next system response.";
    case TaskToken::reo:
      return "Recover the original order of the shuffled dialogue turns.";
    case TaskToken::clo:
      return "Recover the complete dialogue content by restoring each masked entity.";
  }
  return "";
}

namespace {

std::string pairs_or_none(std::vector<std::pair<std::string, std::string>> pairs) {
  if (pairs.empty()) return "none";
  const std::string text = serialize_knowledge(KnowledgeForm::semi_structured(std::move(pairs)));
  return text.empty() ? "none" : text;
}

void stamp_common(UnifiedRecord& r, TaskToken task, const IngestOptions& opts) {
  r.task = task;
  r.dataset = normalize_text(opts.dataset);
  r.split = opts.split;
  r.task_definition = normalize_payload(
      opts.task_definition.empty() ? default_task_definition(task) : opts.task_definition);
}

bool parse_turns_field(const ojson& j, DialogueHistory& out, std::string& err) {
  if (!j.is_array()) {
    err = "'dialogue' must be an array of {speaker, text} objects";
    return false;
  }
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("speaker") || !e["speaker"].is_string() ||
        !e.contains("text") || !e["text"].is_string()) {
      err = "each dialogue turn needs string 'speaker' and 'text'";
      return false;
    }
    out.push_back(Turn::make(Speaker::from_label(e["speaker"].get_ref<const std::string&>()),
                             e["text"].get_ref<const std::string&>()));
  }
  return true;
}

// Bare utterance list; speakers alternate starting with the user.
bool parse_alternating_turns(const ojson& j, DialogueHistory& out, std::string& err) {
  if (!j.is_array()) {
    err = "'turns' must be an array of strings";
    return false;
  }
  std::size_t i = 0;
  for (const auto& e : j) {
    if (!e.is_string()) {
      err = "'turns' must be an array of strings";
      return false;
    }
    out.push_back(Turn::make(i % 2 == 0 ? Speaker::user() : Speaker::system(),
                             e.get_ref<const std::string&>()));
    ++i;
  }
  return true;
}

bool adapt_intent_label(const ojson& j, const IngestOptions& opts, UnifiedRecord& r,
                        std::string& err) {
  if (!j.contains("text") || !j["text"].is_string() || !j.contains("label") ||
      !j["label"].is_string()) {
    err = "expected {\"text\", \"label\"}";
    return false;
  }
  stamp_common(r, TaskToken::intent, opts);
  r.dialogue.push_back(Turn::make(Speaker::user(), j["text"].get_ref<const std::string&>()));
  r.knowledge = opts.shared_knowledge.value_or(KnowledgeForm::none());
  r.target = normalize_text(j["label"].get_ref<const std::string&>());
  return true;
}

bool adapt_slot_spans(const ojson& j, const IngestOptions& opts, UnifiedRecord& r,
                      std::string& err) {
  if (!j.contains("text") || !j["text"].is_string() || !j.contains("slots") ||
      !j["slots"].is_array()) {
    err = "expected {\"text\", \"slots\"}";
    return false;
  }
  const std::string& text = j["text"].get_ref<const std::string&>();
  std::vector<std::pair<std::string, std::string>> filled;
  for (const auto& s : j["slots"]) {
    if (!s.is_object() || !s.contains("slot") || !s["slot"].is_string()) {
      err = "each slot needs a string 'slot' name";
      return false;
    }
    std::string value;
    if (s.contains("value") && s["value"].is_string()) {
      value = s["value"].get<std::string>();
    } else if (s.contains("start") && s["start"].is_number_unsigned() && s.contains("end") &&
               s["end"].is_number_unsigned()) {
      const auto start = s["start"].get<std::uint64_t>();
      const auto end = s["end"].get<std::uint64_t>();
      if (start >= end || end > text.size()) {
        err = "slot span [" + std::to_string(start) + ", " + std::to_string(end) +
              ") out of bounds";
        return false;
      }
      value = text.substr(start, end - start);
    } else {
      err = "each slot needs either 'value' or a 'start'/'end' span";
      return false;
    }
    filled.emplace_back(s["slot"].get<std::string>(), std::move(value));
  }
  stamp_common(r, TaskToken::fill, opts);
  r.dialogue.push_back(Turn::make(Speaker::user(), text));
  r.knowledge = opts.shared_knowledge.value_or(KnowledgeForm::none());
  r.target = pairs_or_none(std::move(filled));
  return true;
}

bool adapt_dst(const ojson& j, const IngestOptions& opts, UnifiedRecord& r, std::string& err) {
  if (!j.contains("dialogue")) {
    err = "expected {\"dialogue\", \"state\"}";
    return false;
  }
  stamp_common(r, TaskToken::dst, opts);
  if (!parse_turns_field(j["dialogue"], r.dialogue, err)) return false;
  std::vector<std::pair<std::string, std::string>> state;
  if (j.contains("state")) {
    const ojson& st = j["state"];
    if (st.is_object()) {
      for (const auto& [key, value] : st.items()) {
        if (!value.is_string()) {
          err = "'state' values must be strings";
          return false;
        }
        state.emplace_back(key, value.get<std::string>());
      }
    } else if (st.is_array()) {
      for (const auto& e : st) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string()) {
          err = "'state' entries must be [slot, value] pairs";
          return false;
        }
        state.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
      }
    } else {
      err = "'state' must be an object or pair array";
      return false;
    }
  }
  r.knowledge = opts.shared_knowledge.value_or(KnowledgeForm::none());
  r.target = pairs_or_none(std::move(state));
  return true;
}

bool adapt_chitchat(const ojson& j, const IngestOptions& opts, UnifiedRecord& r,
                    std::string& err) {
  if (!j.contains("turns") || !j["turns"].is_array() || j["turns"].size() < 2) {
    err = "expected {\"turns\"} with at least two utterances";
    return false;
  }
  stamp_common(r, TaskToken::chat, opts);
  DialogueHistory all;
  if (!parse_alternating_turns(j["turns"], all, err)) return false;
  r.target = all.back().text;
  all.pop_back();
  r.dialogue = std::move(all);
  if (j.contains("knowledge") && j["knowledge"].is_string()) {
    r.knowledge = KnowledgeForm::unstructured(j["knowledge"].get_ref<const std::string&>());
  } else {
    r.knowledge = opts.shared_knowledge.value_or(KnowledgeForm::none());
  }
  return true;
}

bool adapt_summary(const ojson& j, const IngestOptions& opts, UnifiedRecord& r,
                   std::string& err) {
  if (!j.contains("summary") || !j["summary"].is_string()) {
    err = "expected {\"dialogue\" or \"turns\", \"summary\"}";
    return false;
  }
  stamp_common(r, TaskToken::sum, opts);
  if (j.contains("dialogue")) {
    if (!parse_turns_field(j["dialogue"], r.dialogue, err)) return false;
  } else if (j.contains("turns")) {
    if (!parse_alternating_turns(j["turns"], r.dialogue, err)) return false;
  } else {
    err = "expected {\"dialogue\" or \"turns\", \"summary\"}";
    return false;
  }
  r.knowledge = KnowledgeForm::none();  // the task takes no external knowledge
  r.target = normalize_text(j["summary"].get_ref<const std::string&>());
  return true;
}

bool parse_schema_field(const ojson& j, KnowledgeForm& out, std::string& err) {
  const ojson* tables = nullptr;
  if (j.is_object() && j.contains("tables") && j["tables"].is_array()) {
    tables = &j["tables"];
  } else if (j.is_array()) {
    tables = &j;
  } else {
    err = "'schema' must be {\"tables\": [...]} or a table array";
    return false;
  }
  std::vector<KnowledgeForm::Table> parsed;
  for (const auto& t : *tables) {
    KnowledgeForm::Table table;
    if (t.is_object() && t.contains("name") && t["name"].is_string() && t.contains("columns") &&
        t["columns"].is_array()) {
      table.name = t["name"].get<std::string>();
      for (const auto& c : t["columns"]) {
        if (!c.is_string()) {
          err = "schema columns must be strings";
          return false;
        }
        table.columns.push_back(c.get<std::string>());
      }
    } else if (t.is_array() && t.size() == 2 && t[0].is_string() && t[1].is_array()) {
      table.name = t[0].get<std::string>();
      for (const auto& c : t[1]) {
        if (!c.is_string()) {
          err = "schema columns must be strings";
          return false;
        }
        table.columns.push_back(c.get<std::string>());
      }
    } else {
      err = "each table must be {\"name\", \"columns\"} or [name, [columns...]]";
      return false;
    }
    parsed.push_back(std::move(table));
  }
  out = KnowledgeForm::db_schema(std::move(parsed));
  return true;
}

bool adapt_text2sql(const ojson& j, const IngestOptions& opts, UnifiedRecord& r,
                    std::string& err) {
  if (!j.contains("query") || !j["query"].is_string()) {
    err = "expected {\"question\" or \"interaction\", \"query\", \"schema\"}";
    return false;
  }
  stamp_common(r, TaskToken::txt2sql, opts);
  if (j.contains("interaction") && j["interaction"].is_array()) {
    for (const auto& q : j["interaction"]) {
      if (!q.is_string()) {
        err = "'interaction' must be an array of question strings";
        return false;
      }
      r.dialogue.push_back(Turn::make(Speaker::user(), q.get_ref<const std::string&>()));
    }
  } else if (j.contains("question") && j["question"].is_string()) {
    r.dialogue.push_back(Turn::make(Speaker::user(), j["question"].get_ref<const std::string&>()));
  } else {
    err = "expected 'question' or 'interaction'";
    return false;
  }
  if (j.contains("schema")) {
    if (!parse_schema_field(j["schema"], r.knowledge, err)) return false;
  } else {
    r.knowledge = opts.shared_knowledge.value_or(KnowledgeForm::none());
  }
  r.target = normalize_text(j["query"].get_ref<const std::string&>());
  return true;
}

}  // namespace

IngestReport ingest(AdapterId adapter, std::istream& source, const IngestOptions& opts,
                    const RecordSink& sink) {
  IngestReport report;
  std::string line;
  std::uint64_t line_no = 0;

  auto reject = [&](const std::string& reason) {
    report.rejected += 1;
    report.issues.push_back({line_no, reason});
    if (opts.strict) report.aborted = true;
  };

  while (std::getline(source, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;  // blank, not counted
    report.read += 1;

    UnifiedRecord rec;
    bool built = false;
    std::string reason;

    if (adapter == AdapterId::passthrough_unified) {
      ParseError perr;
      auto parsed = parse_record(line, &perr);
      if (parsed) {
        rec = std::move(*parsed);
        built = true;
      } else {
        reason = perr.code + ": " + perr.message;
      }
    } else {
      ojson j = ojson::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object()) {
        reason = "MalformedLine: line is not a JSON object";
      } else {
        std::string aerr;
        switch (adapter) {
          case AdapterId::intent_label:
            built = adapt_intent_label(j, opts, rec, aerr);
            break;
          case AdapterId::slot_spans:
            built = adapt_slot_spans(j, opts, rec, aerr);
            break;
          case AdapterId::dst_multiwoz_like:
            built = adapt_dst(j, opts, rec, aerr);
            break;
          case AdapterId::chitchat_turns:
            built = adapt_chitchat(j, opts, rec, aerr);
            break;
          case AdapterId::summary_pair:
            built = adapt_summary(j, opts, rec, aerr);
            break;
          case AdapterId::text2sql_spider_like:
            built = adapt_text2sql(j, opts, rec, aerr);
            break;
          case AdapterId::passthrough_unified:
            break;
        }
        if (!built) reason = "AdapterMismatch: " + aerr;
      }
    }

    if (built) {
      const ValidationReport vrep = validate_record(rec);
      if (!vrep.ok()) {
        const Violation* first = nullptr;
        for (const auto& v : vrep.violations) {
          if (v.severity == Severity::error) {
            first = &v;
            break;
          }
        }
        reason = first ? first->code + ": " + first->detail : "invalid record";
        built = false;
      }
    }

    if (built) {
      report.emitted += 1;
      sink(rec, serialize_record(rec));
    } else {
      reject(reason);
      if (report.aborted) break;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Manifests

std::uint64_t CorpusManifest::total() const {
  std::uint64_t sum = 0;
  for (const auto& e : entries) sum += e.count;
  return sum;
}

CorpusManifest build_manifest(const std::vector<std::string>& paths) {
  using Key = std::tuple<std::uint8_t, std::string, std::uint8_t>;
  std::map<Key, ManifestEntry> grouped;

  for (const std::string& path : paths) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string line;
    std::uint64_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      ParseError perr;
      const auto rec = parse_record(line, &perr);
      if (!rec) {
        throw DataError(path + ":" + std::to_string(line_no) + ": " + perr.code + ": " +
                        perr.message);
      }
      const ValidationReport vrep = validate_record(*rec);
      if (!vrep.ok()) {
        std::string detail = "invalid record";
        for (const auto& v : vrep.violations) {
          if (v.severity == Severity::error) {
            detail = v.code + ": " + v.detail;
            break;
          }
        }
        throw DataError(path + ":" + std::to_string(line_no) + ": " + detail);
      }
      const Key key{static_cast<std::uint8_t>(rec->task), rec->dataset,
                    static_cast<std::uint8_t>(rec->split)};
      ManifestEntry& entry = grouped[key];
      if (entry.count == 0) {
        entry.task = rec->task;
        entry.dataset = rec->dataset;
        entry.split = rec->split;
      }
      entry.count += 1;
      if (entry.paths.empty() || entry.paths.back() != path) {
        bool known = false;
        for (const auto& p : entry.paths) known = known || p == path;
        if (!known) entry.paths.push_back(path);
      }
    }
  }

  CorpusManifest m;
  for (auto& [key, entry] : grouped) m.entries.push_back(std::move(entry));
  return m;
}

CorpusManifest merge_manifests(const std::vector<CorpusManifest>& parts) {
  using Key = std::tuple<std::uint8_t, std::string, std::uint8_t>;
  std::map<Key, ManifestEntry> grouped;
  for (const CorpusManifest& part : parts) {
    for (const ManifestEntry& e : part.entries) {
      const Key key{static_cast<std::uint8_t>(e.task), e.dataset,
                    static_cast<std::uint8_t>(e.split)};
      auto [it, fresh] = grouped.emplace(key, e);
      if (fresh) continue;
      it->second.count += e.count;
      for (const std::string& p : e.paths) {
        bool known = false;
        for (const auto& q : it->second.paths) known = known || q == p;
        if (!known) it->second.paths.push_back(p);
      }
    }
  }
  CorpusManifest out;
  for (auto& [key, entry] : grouped) out.entries.push_back(std::move(entry));
  return out;
}

std::string serialize_manifest(const CorpusManifest& m) {
  ojson j = ojson::object();
  ojson entries = ojson::array();
  for (const auto& e : m.entries) {
    ojson je = ojson::object();
    je["task"] = std::string(to_string(e.task));
    je["dataset"] = e.dataset;
    je["split"] = std::string(to_string(e.split));
    je["count"] = e.count;
    std::string joined;
    for (std::size_t i = 0; i < e.paths.size(); ++i) {
      if (i > 0) joined += ";";
      joined += e.paths[i];
    }
    je["path"] = joined;
    entries.push_back(std::move(je));
  }
  j["entries"] = std::move(entries);
  return j.dump(2);
}

CorpusManifest parse_manifest(std::string_view json_text) {
  ojson j = ojson::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("entries") || !j["entries"].is_array()) {
    throw DataError("manifest must be a JSON object with an 'entries' array");
  }
  CorpusManifest m;
  for (const auto& je : j["entries"]) {
    if (!je.is_object() || !je.contains("task") || !je["task"].is_string() ||
        !je.contains("dataset") || !je["dataset"].is_string() || !je.contains("split") ||
        !je["split"].is_string() || !je.contains("count") || !je["count"].is_number_unsigned() ||
        !je.contains("path") || !je["path"].is_string()) {
      throw DataError("manifest entry needs task, dataset, split, count, path");
    }
    ManifestEntry e;
    const auto task = parse_task_token(je["task"].get_ref<const std::string&>());
    if (!task) throw DataError("manifest entry has unknown task '" + je["task"].get<std::string>() + "'");
    e.task = *task;
    e.dataset = je["dataset"].get<std::string>();
    const auto split = parse_split(je["split"].get_ref<const std::string&>());
    if (!split) throw DataError("manifest entry has unknown split '" + je["split"].get<std::string>() + "'");
    e.split = *split;
    e.count = je["count"].get<std::uint64_t>();
    const std::string& joined = je["path"].get_ref<const std::string&>();
    std::size_t pos = 0;
    while (pos <= joined.size() && !joined.empty()) {
      const std::size_t sep = joined.find(';', pos);
      if (sep == std::string::npos) {
        e.paths.push_back(joined.substr(pos));
        break;
      }
      e.paths.push_back(joined.substr(pos, sep - pos));
      pos = sep + 1;
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

CorpusManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_manifest(text);
}

void save_manifest(const CorpusManifest& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << serialize_manifest(m) << "\n";
}

}  // namespace unidial
