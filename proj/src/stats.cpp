#include "unidial/stats.hpp"

#include <algorithm>
#include <array>
#include <cstdio>

#include "unidial/errors.hpp"

namespace unidial {

CorpusStats corpus_stats(const CorpusManifest& m, bool include_ssl) {
  std::array<std::uint64_t, kTaskCount> counts{};
  for (const ManifestEntry& e : m.entries) {
    if (!include_ssl && (e.task == TaskToken::reo || e.task == TaskToken::clo)) continue;
    counts[static_cast<std::size_t>(e.task)] += e.count;
  }

  CorpusStats out;
  for (std::size_t i = 0; i < kTaskCount; ++i) {
    if (counts[i] == 0) continue;
    out.tasks.push_back({static_cast<TaskToken>(i), counts[i], 0.0});
    out.total += counts[i];
  }
  if (out.total == 0) throw DataError("EmptyManifest: no records to account for");

  for (TaskStat& t : out.tasks) {
    t.proportion = static_cast<double>(t.count) / static_cast<double>(out.total);
  }
  // Descending by count; the initial scan left ties in token order, which
  // stable_sort preserves.
  std::stable_sort(out.tasks.begin(), out.tasks.end(),
                   [](const TaskStat& a, const TaskStat& b) { return a.count > b.count; });
  return out;
}

TotalCheck check_total(const CorpusManifest& m, std::uint64_t expected) {
  const std::uint64_t actual = m.total();
  return {actual == expected, actual, expected};
}

ojson stats_to_json(const CorpusStats& s) {
  ojson j = ojson::object();
  ojson tasks = ojson::array();
  for (const TaskStat& t : s.tasks) {
    ojson jt = ojson::object();
    jt["task"] = std::string(to_string(t.task));
    jt["count"] = t.count;
    jt["proportion"] = t.proportion;
    tasks.push_back(std::move(jt));
  }
  j["tasks"] = std::move(tasks);
  j["total"] = s.total;
  return j;
}

std::string stats_table(const CorpusStats& s) {
  std::size_t task_w = 5;  // "task" header, "total" footer
  std::size_t count_w = 5;
  for (const TaskStat& t : s.tasks) {
    task_w = std::max(task_w, to_string(t.task).size());
    count_w = std::max(count_w, std::to_string(t.count).size());
  }
  count_w = std::max(count_w, std::to_string(s.total).size());

  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-*s  %*s  %10s\n", static_cast<int>(task_w), "task",
                static_cast<int>(count_w), "count", "proportion");
  out += line;
  for (const TaskStat& t : s.tasks) {
    std::snprintf(line, sizeof(line), "%-*s  %*llu  %10.6f\n", static_cast<int>(task_w),
                  std::string(to_string(t.task)).c_str(), static_cast<int>(count_w),
                  static_cast<unsigned long long>(t.count), t.proportion);
    out += line;
  }
  std::snprintf(line, sizeof(line), "%-*s  %*llu  %10.6f\n", static_cast<int>(task_w), "total",
                static_cast<int>(count_w), static_cast<unsigned long long>(s.total), 1.0);
  out += line;
  return out;
}

}  // namespace unidial
