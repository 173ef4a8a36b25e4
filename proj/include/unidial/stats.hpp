#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unidial/ingest.hpp"
#include "unidial/record.hpp"

namespace unidial {

struct TaskStat {
  TaskToken task = TaskToken::chat;
  std::uint64_t count = 0;
  double proportion = 0.0;  // count / total
};

struct CorpusStats {
  std::vector<TaskStat> tasks;  // descending by count, ties by token order
  std::uint64_t total = 0;
};

// Per-task accounting over a manifest. include_ssl=false drops the reo/clo
// denoising tasks before computing proportions. Throws DataError
// ("EmptyManifest") when nothing remains to count.
CorpusStats corpus_stats(const CorpusManifest& m, bool include_ssl = true);

struct TotalCheck {
  bool ok = false;
  std::uint64_t actual = 0;
  std::uint64_t expected = 0;
};

// Compares the manifest grand total (all tasks, SSL included) to an expected
// count. A mismatch is a result, not an error.
TotalCheck check_total(const CorpusManifest& m, std::uint64_t expected);

ojson stats_to_json(const CorpusStats& s);
std::string stats_table(const CorpusStats& s);  // aligned, human-oriented

}  // namespace unidial
