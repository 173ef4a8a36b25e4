#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "unidial/record.hpp"

namespace unidial {

// One adapter per input geometry; the remaining corpora are expected to
// arrive pre-unified and go through passthrough_unified.
enum class AdapterId : std::uint8_t {
  intent_label,
  slot_spans,
  dst_multiwoz_like,
  chitchat_turns,
  summary_pair,
  text2sql_spider_like,
  passthrough_unified,
};

std::string_view to_string(AdapterId a);
std::optional<AdapterId> parse_adapter_id(std::string_view s);

// Task family a typed adapter emits; nullopt for passthrough, which keeps
// whatever task the line already carries.
std::optional<TaskToken> adapter_task(AdapterId a);

// Stock one-sentence task definition used when the caller supplies none.
std::string_view default_task_definition(TaskToken t);

struct IngestOptions {
  std::string dataset;         // stamped on typed-adapter records
  Split split = Split::train;
  std::string task_definition; // empty -> default_task_definition(task)
  // Applied to every record emitted by a typed adapter (label inventories,
  // slot ontologies). Input-embedded knowledge (text2sql schemas) wins.
  std::optional<KnowledgeForm> shared_knowledge;
  bool strict = false;         // abort on the first rejected line
};

struct LineIssue {
  std::uint64_t line_no = 0;  // 1-based
  std::string reason;
};

struct IngestReport {
  std::uint64_t read = 0;
  std::uint64_t emitted = 0;
  std::uint64_t rejected = 0;
  bool aborted = false;  // strict mode stopped the stream
  std::vector<LineIssue> issues;
};

// Receives each emitted record together with its canonical serialization.
using RecordSink = std::function<void(const UnifiedRecord&, const std::string& line)>;

// Streams `source` line by line through the adapter. Every emitted record
// validates ok; rejected lines are counted and reported with their line
// number. Blank lines are skipped without counting. read == emitted +
// rejected always holds.
IngestReport ingest(AdapterId adapter, std::istream& source, const IngestOptions& opts,
                    const RecordSink& sink);

// ---------------------------------------------------------------------------
// Corpus manifests

struct ManifestEntry {
  TaskToken task = TaskToken::chat;
  std::string dataset;
  Split split = Split::train;
  std::uint64_t count = 0;
  // Files holding this entry's records; multiple contributing files are
  // serialized as a single ';'-joined path string.
  std::vector<std::string> paths;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct CorpusManifest {
  // Sorted by (task, dataset, split); (task, dataset, split) is unique.
  std::vector<ManifestEntry> entries;

  std::uint64_t total() const;

  friend bool operator==(const CorpusManifest&, const CorpusManifest&) = default;
};

// Counts valid records per (task, dataset, split) across unified JSONL files.
// Throws DataError naming file and line on the first invalid record, IoError
// on unreadable files. An empty path list yields an empty manifest.
CorpusManifest build_manifest(const std::vector<std::string>& paths);

// Union of several manifests: counts of matching (task, dataset, split)
// entries add up, path lists concatenate (first occurrence wins on
// duplicates), result is canonically sorted.
CorpusManifest merge_manifests(const std::vector<CorpusManifest>& parts);

std::string serialize_manifest(const CorpusManifest& m);
CorpusManifest parse_manifest(std::string_view json_text);  // throws DataError
CorpusManifest load_manifest(const std::string& path);      // throws IoError/DataError
void save_manifest(const CorpusManifest& m, const std::string& path);

}  // namespace unidial
