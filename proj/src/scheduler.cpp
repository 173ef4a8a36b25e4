#include "unidial/scheduler.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <utility>

#include "unidial/errors.hpp"
#include "unidial/rng.hpp"

namespace unidial {

std::uint64_t cycle_seed(std::uint64_t seed, std::uint64_t epoch_index, TaskToken task,
                         std::uint64_t cycle) {
  return Fnv1a{}.u64(seed).str("sched").u64(epoch_index).str(to_string(task)).u64(cycle).value();
}

namespace {

std::vector<const TaskDescriptor*> resolve_order(const std::vector<TaskDescriptor>& tasks,
                                                 const SchedulerConfig& cfg) {
  std::vector<const TaskDescriptor*> order;
  order.reserve(tasks.size());
  if (cfg.task_order.empty()) {
    for (const auto& t : tasks) order.push_back(&t);
    return order;
  }
  if (cfg.task_order.size() != tasks.size()) {
    throw ConfigError("task_order must cover every task exactly once");
  }
  for (TaskToken tok : cfg.task_order) {
    const auto it = std::find_if(tasks.begin(), tasks.end(),
                                 [&](const TaskDescriptor& t) { return t.token == tok; });
    if (it == tasks.end()) {
      throw ConfigError("task_order names unknown task '" + std::string(to_string(tok)) + "'");
    }
    if (std::find(order.begin(), order.end(), &*it) != order.end()) {
      throw ConfigError("task_order repeats task '" + std::string(to_string(tok)) + "'");
    }
    order.push_back(&*it);
  }
  return order;
}

// Cycling shuffled draw state for one task within one epoch.
struct CycleState {
  std::uint64_t cycle = 0;
  std::size_t cursor = 0;
  std::vector<std::uint64_t> perm;
};

}  // namespace

EpochSchedule plan_epoch(const std::vector<TaskDescriptor>& tasks, const SchedulerConfig& cfg,
                         std::uint64_t epoch_index) {
  if (tasks.empty()) throw ConfigError("EmptyTaskSet: no tasks to schedule");
  if (cfg.step == 0) throw ConfigError("step must be positive");
  for (const auto& t : tasks) {
    if (t.count == 0) {
      throw ConfigError("task '" + std::string(to_string(t.token)) + "' has zero samples");
    }
  }
  const std::vector<const TaskDescriptor*> order = resolve_order(tasks, cfg);

  std::uint64_t c_max = 0;
  for (const auto& t : tasks) c_max = std::max(c_max, t.count);
  const std::uint64_t rounds = (c_max + cfg.step - 1) / cfg.step;

  std::vector<CycleState> state(order.size());
  auto refill = [&](CycleState& st, const TaskDescriptor& td) {
    st.perm.resize(td.count);
    std::iota(st.perm.begin(), st.perm.end(), std::uint64_t{0});
    Rng rng(cycle_seed(cfg.seed, epoch_index, td.token, st.cycle));
    rng.shuffle(st.perm);
    st.cursor = 0;
    st.cycle += 1;
  };

  EpochSchedule sched;
  sched.rounds = rounds;
  sched.blocks.reserve(rounds * order.size());
  for (std::uint64_t r = 0; r < rounds; ++r) {
    for (std::size_t i = 0; i < order.size(); ++i) {
      Block block;
      block.task = order[i]->token;
      block.ordinals.reserve(cfg.step);
      CycleState& st = state[i];
      std::uint64_t need = cfg.step;
      while (need > 0) {
        if (st.cursor == st.perm.size()) refill(st, *order[i]);
        const std::uint64_t take =
            std::min<std::uint64_t>(need, st.perm.size() - st.cursor);
        block.ordinals.insert(block.ordinals.end(), st.perm.begin() + st.cursor,
                              st.perm.begin() + st.cursor + take);
        st.cursor += take;
        need -= take;
      }
      sched.blocks.push_back(std::move(block));
    }
  }
  return sched;
}

std::vector<TaskDescriptor> descriptors_from_manifest(const CorpusManifest& manifest,
                                                      Split split) {
  std::map<TaskToken, TaskDescriptor> grouped;
  for (const ManifestEntry& e : manifest.entries) {
    if (e.split != split || e.count == 0) continue;
    TaskDescriptor& d = grouped[e.task];
    d.token = e.task;
    d.count += e.count;
    d.sources.push_back(e);
  }
  std::vector<TaskDescriptor> out;
  out.reserve(grouped.size());
  for (auto& [tok, d] : grouped) out.push_back(std::move(d));
  return out;
}

std::uint64_t stream_config_hash(const SchedulerConfig& cfg, Split split,
                                 const std::vector<TaskDescriptor>& tasks) {
  Fnv1a h;
  h.u64(cfg.step).u64(cfg.seed).u64(cfg.epochs);
  h.u64(cfg.task_order.size());
  for (TaskToken t : cfg.task_order) h.str(to_string(t));
  h.str(to_string(split));
  for (const TaskDescriptor& d : tasks) {
    for (const ManifestEntry& e : d.sources) {
      h.str(to_string(e.task)).str(e.dataset).str(to_string(e.split)).u64(e.count);
    }
  }
  return h.value();
}

std::vector<UnifiedRecord> MiniBatch::parse_records() const {
  std::vector<UnifiedRecord> out;
  out.reserve(lines.size());
  for (const std::string& line : lines) {
    ParseError perr;
    auto rec = parse_record(line, &perr);
    if (!rec) throw DataError("batch record unparseable: " + perr.message);
    out.push_back(std::move(*rec));
  }
  return out;
}

void write_frame(std::ostream& out, const MiniBatch& batch) {
  out << "{\"epoch\":" << batch.epoch << ",\"block\":" << batch.block << ",\"task\":\""
      << to_string(batch.task) << "\",\"records\":[";
  for (std::size_t i = 0; i < batch.lines.size(); ++i) {
    if (i > 0) out << ',';
    out << batch.lines[i];
  }
  out << "]}\n";
}

std::string serialize_checkpoint(const Checkpoint& c) {
  ojson j = ojson::object();
  j["epoch"] = c.next.epoch;
  j["block"] = c.next.block;
  j["seed"] = c.seed;
  j["config_hash"] = c.config_hash;
  return j.dump();
}

Checkpoint parse_checkpoint(std::string_view json_text) {
  ojson j = ojson::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("epoch") ||
      !j["epoch"].is_number_unsigned() || !j.contains("block") ||
      !j["block"].is_number_unsigned() || !j.contains("seed") ||
      !j["seed"].is_number_unsigned() || !j.contains("config_hash") ||
      !j["config_hash"].is_number_unsigned()) {
    throw DataError("checkpoint needs unsigned epoch, block, seed, config_hash");
  }
  Checkpoint c;
  c.next.epoch = j["epoch"].get<std::uint64_t>();
  c.next.block = j["block"].get<std::uint64_t>();
  c.seed = j["seed"].get<std::uint64_t>();
  c.config_hash = j["config_hash"].get<std::uint64_t>();
  return c;
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(text);
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << serialize_checkpoint(c) << "\n";
}

// ---------------------------------------------------------------------------
// BatchStream

BatchStream::BatchStream(const CorpusManifest& manifest, const SchedulerConfig& cfg, Split split)
    : cfg_(cfg), split_(split) {
  if (cfg_.step == 0) throw ConfigError("step must be positive");
  if (cfg_.epochs == 0) throw ConfigError("epochs must be positive");
  tasks_ = descriptors_from_manifest(manifest, split);
  if (tasks_.empty()) {
    throw ConfigError("EmptyTaskSet: manifest has no records for split '" +
                      std::string(to_string(split)) + "'");
  }
  resolve_order(tasks_, cfg_);  // fail fast on a bad task_order
  std::uint64_t c_max = 0;
  for (const auto& t : tasks_) c_max = std::max(c_max, t.count);
  rounds_ = (c_max + cfg_.step - 1) / cfg_.step;
  config_hash_ = stream_config_hash(cfg_, split_, tasks_);
  index_files(manifest, split);
}

void BatchStream::index_files(const CorpusManifest& manifest, Split split) {
  // Buckets follow manifest entry order; a file may feed several entries.
  using EntryKey = std::pair<TaskToken, std::string>;  // (task, dataset)
  std::vector<const ManifestEntry*> entries;
  for (const ManifestEntry& e : manifest.entries) {
    if (e.split == split && e.count > 0) entries.push_back(&e);
  }

  std::map<std::string, std::uint32_t> file_ids;
  auto file_id = [&](const std::string& path) {
    const auto it = file_ids.find(path);
    if (it != file_ids.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(files_.size());
    files_.push_back(path);
    file_ids.emplace(path, id);
    return id;
  };

  std::vector<std::vector<LineRef>> buckets(entries.size());
  // Per file: which entries may claim its lines, keyed by (task, dataset).
  std::map<std::uint32_t, std::map<EntryKey, std::size_t>> claims;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    for (const std::string& path : entries[i]->paths) {
      claims[file_id(path)].emplace(EntryKey{entries[i]->task, entries[i]->dataset}, i);
    }
  }

  for (std::uint32_t fid = 0; fid < files_.size(); ++fid) {
    std::ifstream in(files_[fid], std::ios::binary);
    if (!in) throw IoError("cannot open '" + files_[fid] + "'");
    const auto& file_claims = claims[fid];
    std::string line;
    std::uint64_t offset = 0;
    std::uint64_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::uint64_t next_offset = offset + line.size() + (in.eof() ? 0 : 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) {
        ojson j = ojson::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("task") ||
            !j["task"].is_string() || !j.contains("dataset") || !j["dataset"].is_string() ||
            !j.contains("split") || !j["split"].is_string()) {
          throw DataError("ManifestMismatch: " + files_[fid] + ":" + std::to_string(line_no) +
                          ": not a unified record");
        }
        const auto task = parse_task_token(j["task"].get_ref<const std::string&>());
        const auto lsplit = parse_split(j["split"].get_ref<const std::string&>());
        if (!task || !lsplit) {
          throw DataError("ManifestMismatch: " + files_[fid] + ":" + std::to_string(line_no) +
                          ": unknown task or split");
        }
        if (*lsplit == split) {
          const auto it =
              file_claims.find(EntryKey{*task, j["dataset"].get<std::string>()});
          if (it != file_claims.end()) {
            buckets[it->second].push_back(
                {fid, static_cast<std::uint32_t>(line.size()), offset});
          }
        }
      }
      offset = next_offset;
    }
  }

  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (buckets[i].size() != entries[i]->count) {
      throw DataError("ManifestMismatch: entry (" + std::string(to_string(entries[i]->task)) +
                      ", " + entries[i]->dataset + ", " +
                      std::string(to_string(entries[i]->split)) + ") lists " +
                      std::to_string(entries[i]->count) + " records but files hold " +
                      std::to_string(buckets[i].size()));
    }
  }

  // Task sample space: entries in manifest order, lines in file order.
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& dst = task_lines_[entries[i]->task];
    dst.insert(dst.end(), buckets[i].begin(), buckets[i].end());
  }
  handles_.resize(files_.size());
}

std::string BatchStream::read_line(const LineRef& ref) {
  auto& handle = handles_[ref.file];
  if (!handle) {
    handle = std::make_unique<std::ifstream>(files_[ref.file], std::ios::binary);
    if (!*handle) throw IoError("cannot open '" + files_[ref.file] + "'");
  }
  handle->clear();
  handle->seekg(static_cast<std::streamoff>(ref.offset));
  std::string line(ref.length, '\0');
  handle->read(line.data(), static_cast<std::streamsize>(ref.length));
  if (handle->gcount() != static_cast<std::streamsize>(ref.length)) {
    throw IoError("short read from '" + files_[ref.file] + "'");
  }
  return line;
}

void BatchStream::ensure_epoch_planned() {
  if (planned_epoch_ && *planned_epoch_ == pos_.epoch) return;
  schedule_ = plan_epoch(tasks_, cfg_, pos_.epoch);
  planned_epoch_ = pos_.epoch;
}

std::optional<MiniBatch> BatchStream::next() {
  if (pos_.epoch >= cfg_.epochs) return std::nullopt;
  ensure_epoch_planned();
  const Block& block = schedule_.blocks[pos_.block];
  MiniBatch mb;
  mb.epoch = pos_.epoch;
  mb.block = pos_.block;
  mb.task = block.task;
  mb.lines.reserve(block.ordinals.size());
  const auto& lines = task_lines_.at(block.task);
  for (const std::uint64_t o : block.ordinals) mb.lines.push_back(read_line(lines[o]));
  pos_.block += 1;
  if (pos_.block == schedule_.blocks.size()) {
    pos_.block = 0;
    pos_.epoch += 1;
  }
  return mb;
}

void BatchStream::seek(const StreamPos& pos) {
  const bool at_end = pos.epoch == cfg_.epochs && pos.block == 0;
  if (!at_end && (pos.epoch >= cfg_.epochs || pos.block >= blocks_per_epoch())) {
    throw ConfigError("seek position out of range");
  }
  pos_ = pos;
}

Checkpoint BatchStream::checkpoint() const { return {pos_, cfg_.seed, config_hash_}; }

void BatchStream::restore(const Checkpoint& c) {
  if (c.seed != cfg_.seed || c.config_hash != config_hash_) {
    throw ConfigError("CheckpointMismatch: checkpoint was written by a different configuration");
  }
  seek(c.next);
}

}  // namespace unidial
