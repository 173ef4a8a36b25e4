#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "unidial/ingest.hpp"
#include "unidial/record.hpp"

namespace unidial {

struct TaskDescriptor {
  TaskToken token = TaskToken::chat;
  std::uint64_t count = 0;  // c_i, always > 0
  std::vector<ManifestEntry> sources;
};

struct SchedulerConfig {
  std::uint64_t step = 512;  // samples per task block
  std::uint64_t seed = 0;
  std::uint64_t epochs = 1;
  std::vector<TaskToken> task_order;  // empty: descriptor order
};

struct Block {
  TaskToken task = TaskToken::chat;
  std::vector<std::uint64_t> ordinals;  // indices into the task's sample space
};

struct EpochSchedule {
  std::uint64_t rounds = 0;  // R = ceil(c_max / step)
  std::vector<Block> blocks;  // R rounds x N tasks, round-major
};

// Seed for one task's cycle-c reshuffle within one epoch.
std::uint64_t cycle_seed(std::uint64_t seed, std::uint64_t epoch_index, TaskToken task,
                         std::uint64_t cycle);

// Plans one epoch: R rounds of one `step`-sized block per task, in task order.
// Each task draws from a seeded shuffle of its ordinals and reshuffles
// independently whenever exhausted, so every block is full even when counts do
// not divide. Pure in (tasks, cfg, epoch_index). Throws ConfigError.
EpochSchedule plan_epoch(const std::vector<TaskDescriptor>& tasks, const SchedulerConfig& cfg,
                         std::uint64_t epoch_index);

// Groups manifest entries of one split into per-task descriptors, task enum
// order, zero-count tasks dropped.
std::vector<TaskDescriptor> descriptors_from_manifest(const CorpusManifest& manifest,
                                                      Split split);

// Fingerprint of everything that shapes the stream: config, split and the
// manifest's logical content (paths excluded so corpora may be relocated).
std::uint64_t stream_config_hash(const SchedulerConfig& cfg, Split split,
                                 const std::vector<TaskDescriptor>& tasks);

struct MiniBatch {
  std::uint64_t epoch = 0;
  std::uint64_t block = 0;  // block index within the epoch
  TaskToken task = TaskToken::chat;
  std::vector<std::string> lines;  // raw JSONL, one record each

  std::vector<UnifiedRecord> parse_records() const;  // throws DataError
};

// One frame per batch; records are spliced in as raw JSON.
void write_frame(std::ostream& out, const MiniBatch& batch);

struct StreamPos {
  std::uint64_t epoch = 0;
  std::uint64_t block = 0;

  friend bool operator==(const StreamPos&, const StreamPos&) = default;
};

struct Checkpoint {
  StreamPos next;  // first batch not yet emitted
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

std::string serialize_checkpoint(const Checkpoint& c);
Checkpoint parse_checkpoint(std::string_view json_text);  // throws DataError
Checkpoint load_checkpoint(const std::string& path);
void save_checkpoint(const Checkpoint& c, const std::string& path);

// Deterministic resumable batch stream over a manifest-described corpus.
// Construction indexes every referenced file by byte offset and checks line
// counts against the manifest (DataError "ManifestMismatch" on drift); batches
// are then served by seek+read so memory stays proportional to the index, not
// the corpus.
class BatchStream {
 public:
  BatchStream(const CorpusManifest& manifest, const SchedulerConfig& cfg, Split split);

  // Next batch in plan order, or nullopt when all epochs are exhausted.
  std::optional<MiniBatch> next();

  // Reposition to an (epoch, block) boundary. Throws ConfigError if out of
  // range. seek(end) is allowed and yields an exhausted stream.
  void seek(const StreamPos& pos);

  StreamPos position() const { return pos_; }
  std::uint64_t config_hash() const { return config_hash_; }
  std::uint64_t rounds() const { return rounds_; }
  std::uint64_t blocks_per_epoch() const { return rounds_ * tasks_.size(); }
  const std::vector<TaskDescriptor>& tasks() const { return tasks_; }

  Checkpoint checkpoint() const;  // resume point = current position
  // Validates seed/config_hash before repositioning; ConfigError on mismatch.
  void restore(const Checkpoint& c);

 private:
  struct LineRef {
    std::uint32_t file = 0;
    std::uint32_t length = 0;
    std::uint64_t offset = 0;
  };

  void index_files(const CorpusManifest& manifest, Split split);
  void ensure_epoch_planned();
  std::string read_line(const LineRef& ref);

  SchedulerConfig cfg_;
  Split split_;
  std::vector<TaskDescriptor> tasks_;
  std::uint64_t rounds_ = 0;
  std::uint64_t config_hash_ = 0;

  std::vector<std::string> files_;  // unique paths, index = LineRef::file
  std::vector<std::unique_ptr<std::ifstream>> handles_;
  std::map<TaskToken, std::vector<LineRef>> task_lines_;

  StreamPos pos_;
  std::optional<std::uint64_t> planned_epoch_;
  EpochSchedule schedule_;
};

}  // namespace unidial
