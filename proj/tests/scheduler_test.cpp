#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "unidial/errors.hpp"
#include "unidial/scheduler.hpp"

#include "support/synthetic.hpp"
#include "support/tempdir.hpp"

using namespace unidial;

namespace {

TaskDescriptor task(TaskToken token, std::uint64_t count) {
  TaskDescriptor d;
  d.token = token;
  d.count = count;
  return d;
}

std::vector<std::uint64_t> draws_of(const EpochSchedule& s, TaskToken t) {
  std::vector<std::uint64_t> out;
  for (const Block& b : s.blocks) {
    if (b.task == t) out.insert(out.end(), b.ordinals.begin(), b.ordinals.end());
  }
  return out;
}

// Every count-sized window of a task's draw sequence is a permutation of its
// ordinal space; a trailing partial window has no repeats.
void check_cycle_fairness(const EpochSchedule& s, TaskToken t, std::uint64_t count) {
  const auto draws = draws_of(s, t);
  for (std::size_t at = 0; at < draws.size(); at += count) {
    const std::size_t len = std::min<std::size_t>(count, draws.size() - at);
    const std::set<std::uint64_t> seen(draws.begin() + at, draws.begin() + at + len);
    CHECK(seen.size() == len);
    if (!seen.empty()) CHECK(*seen.rbegin() < count);
  }
}

std::string frame_of(const MiniBatch& b) {
  std::ostringstream out;
  write_frame(out, b);
  return out.str();
}

}  // namespace

TEST_CASE("two tasks interleave round-major") {
  const std::vector<TaskDescriptor> tasks = {task(TaskToken::chat, 4), task(TaskToken::dst, 2)};
  SchedulerConfig cfg;
  cfg.step = 2;
  cfg.seed = 5;
  const EpochSchedule s = plan_epoch(tasks, cfg, 0);
  CHECK(s.rounds == 2);
  REQUIRE(s.blocks.size() == 4);
  CHECK(s.blocks[0].task == TaskToken::chat);
  CHECK(s.blocks[1].task == TaskToken::dst);
  CHECK(s.blocks[2].task == TaskToken::chat);
  CHECK(s.blocks[3].task == TaskToken::dst);
  for (const Block& b : s.blocks) CHECK(b.ordinals.size() == 2);

  // chat's four draws are a permutation of its ordinals.
  const auto chat_draws = draws_of(s, TaskToken::chat);
  CHECK(std::set<std::uint64_t>(chat_draws.begin(), chat_draws.end()) ==
        std::set<std::uint64_t>{0, 1, 2, 3});
  check_cycle_fairness(s, TaskToken::dst, 2);
}

TEST_CASE("one task filling one block is a bare permutation") {
  SchedulerConfig cfg;
  cfg.step = 3;
  const EpochSchedule s = plan_epoch({task(TaskToken::sum, 3)}, cfg, 0);
  CHECK(s.rounds == 1);
  REQUIRE(s.blocks.size() == 1);
  const auto& o = s.blocks[0].ordinals;
  CHECK(std::set<std::uint64_t>(o.begin(), o.end()) == std::set<std::uint64_t>{0, 1, 2});
}

TEST_CASE("the largest task bounds the epoch and small tasks recycle") {
  const std::vector<TaskDescriptor> tasks = {task(TaskToken::chat, 5), task(TaskToken::dst, 9)};
  SchedulerConfig cfg;
  cfg.step = 4;
  cfg.seed = 1;
  const EpochSchedule s = plan_epoch(tasks, cfg, 0);
  CHECK(s.rounds == 3);
  REQUIRE(s.blocks.size() == 6);
  for (const Block& b : s.blocks) CHECK(b.ordinals.size() == 4);  // equal steps

  // The bounding task sweeps its whole ordinal space within the epoch.
  const auto big = draws_of(s, TaskToken::dst);
  REQUIRE(big.size() == 12);
  const std::set<std::uint64_t> first_nine(big.begin(), big.begin() + 9);
  CHECK(first_nine == std::set<std::uint64_t>{0, 1, 2, 3, 4, 5, 6, 7, 8});
  check_cycle_fairness(s, TaskToken::dst, 9);
  check_cycle_fairness(s, TaskToken::chat, 5);
}

TEST_CASE("a step larger than the task count recycles within one block") {
  SchedulerConfig cfg;
  cfg.step = 5;
  const EpochSchedule s = plan_epoch({task(TaskToken::emo, 3)}, cfg, 0);
  REQUIRE(s.blocks.size() == 1);
  const auto& o = s.blocks[0].ordinals;
  REQUIRE(o.size() == 5);
  CHECK(std::set<std::uint64_t>(o.begin(), o.begin() + 3) == std::set<std::uint64_t>{0, 1, 2});
  CHECK(o[3] != o[4]);  // the next cycle starts fresh and stays fair
}

TEST_CASE("cycle fairness holds across random shapes") {
  synth::Rng rng(77);
  const std::vector<TaskToken> pool = {TaskToken::rew, TaskToken::sum, TaskToken::intent,
                                       TaskToken::docqa, TaskToken::tod};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<TaskDescriptor> tasks;
    const std::size_t n = 1 + rng.below(pool.size());
    for (std::size_t i = 0; i < n; ++i) tasks.push_back(task(pool[i], 1 + rng.below(40)));
    SchedulerConfig cfg;
    cfg.step = 1 + rng.below(16);
    cfg.seed = rng.next();
    const EpochSchedule s = plan_epoch(tasks, cfg, rng.below(3));

    std::uint64_t c_max = 0;
    for (const auto& t : tasks) c_max = std::max(c_max, t.count);
    CHECK(s.rounds == (c_max + cfg.step - 1) / cfg.step);
    REQUIRE(s.blocks.size() == s.rounds * tasks.size());
    for (std::size_t b = 0; b < s.blocks.size(); ++b) {
      CHECK(s.blocks[b].task == tasks[b % tasks.size()].token);
      CHECK(s.blocks[b].ordinals.size() == cfg.step);
    }
    for (const auto& t : tasks) check_cycle_fairness(s, t.token, t.count);
  }
}

TEST_CASE("plans are pure in config and epoch index") {
  const std::vector<TaskDescriptor> tasks = {task(TaskToken::chat, 100), task(TaskToken::dst, 40)};
  SchedulerConfig cfg;
  cfg.step = 16;
  cfg.seed = 12;
  const EpochSchedule a = plan_epoch(tasks, cfg, 0);
  const EpochSchedule b = plan_epoch(tasks, cfg, 0);
  REQUIRE(a.blocks.size() == b.blocks.size());
  for (std::size_t i = 0; i < a.blocks.size(); ++i) {
    CHECK(a.blocks[i].ordinals == b.blocks[i].ordinals);
  }

  const EpochSchedule c = plan_epoch(tasks, cfg, 1);
  CHECK(draws_of(a, TaskToken::chat) != draws_of(c, TaskToken::chat));
  SchedulerConfig other = cfg;
  other.seed = 13;
  const EpochSchedule d = plan_epoch(tasks, other, 0);
  CHECK(draws_of(a, TaskToken::chat) != draws_of(d, TaskToken::chat));
}

TEST_CASE("cycle seeds separate all their inputs") {
  const std::uint64_t base = cycle_seed(1, 0, TaskToken::chat, 0);
  CHECK(base == cycle_seed(1, 0, TaskToken::chat, 0));
  CHECK(base != cycle_seed(2, 0, TaskToken::chat, 0));
  CHECK(base != cycle_seed(1, 1, TaskToken::chat, 0));
  CHECK(base != cycle_seed(1, 0, TaskToken::dst, 0));
  CHECK(base != cycle_seed(1, 0, TaskToken::chat, 1));
}

TEST_CASE("task_order reorders blocks and is validated") {
  const std::vector<TaskDescriptor> tasks = {task(TaskToken::chat, 4), task(TaskToken::dst, 2)};
  SchedulerConfig cfg;
  cfg.step = 2;
  cfg.task_order = {TaskToken::dst, TaskToken::chat};
  const EpochSchedule s = plan_epoch(tasks, cfg, 0);
  CHECK(s.blocks[0].task == TaskToken::dst);
  CHECK(s.blocks[1].task == TaskToken::chat);

  cfg.task_order = {TaskToken::dst};
  CHECK_THROWS_AS(plan_epoch(tasks, cfg, 0), ConfigError);
  cfg.task_order = {TaskToken::dst, TaskToken::sum};
  CHECK_THROWS_AS(plan_epoch(tasks, cfg, 0), ConfigError);
  cfg.task_order = {TaskToken::dst, TaskToken::dst};
  CHECK_THROWS_AS(plan_epoch(tasks, cfg, 0), ConfigError);
}

TEST_CASE("degenerate plans are rejected") {
  SchedulerConfig cfg;
  CHECK_THROWS_WITH_AS(plan_epoch({}, cfg, 0), doctest::Contains("EmptyTaskSet"), ConfigError);
  cfg.step = 0;
  CHECK_THROWS_AS(plan_epoch({task(TaskToken::chat, 1)}, cfg, 0), ConfigError);
  cfg.step = 4;
  CHECK_THROWS_AS(plan_epoch({task(TaskToken::chat, 0)}, cfg, 0), ConfigError);
}

TEST_CASE("descriptors group manifest entries per task and split") {
  CorpusManifest m;
  m.entries.push_back({TaskToken::dst, "mw", Split::train, 3, {"a.jsonl"}});
  m.entries.push_back({TaskToken::chat, "daily", Split::train, 4, {"b.jsonl"}});
  m.entries.push_back({TaskToken::chat, "persona", Split::train, 6, {"c.jsonl"}});
  m.entries.push_back({TaskToken::chat, "daily", Split::dev, 9, {"d.jsonl"}});
  m.entries.push_back({TaskToken::sum, "samsum", Split::train, 0, {"e.jsonl"}});

  const auto tasks = descriptors_from_manifest(m, Split::train);
  REQUIRE(tasks.size() == 2);
  CHECK(tasks[0].token == TaskToken::dst);
  CHECK(tasks[0].count == 3);
  REQUIRE(tasks[1].token == TaskToken::chat);
  CHECK(tasks[1].count == 10);
  REQUIRE(tasks[1].sources.size() == 2);
  CHECK(tasks[1].sources[0].dataset == "daily");
  CHECK(tasks[1].sources[1].dataset == "persona");

  CHECK(descriptors_from_manifest(m, Split::test).empty());
}

TEST_CASE("the stream fingerprint tracks logic, not file locations") {
  CorpusManifest m;
  m.entries.push_back({TaskToken::chat, "daily", Split::train, 4, {"x.jsonl"}});
  m.entries.push_back({TaskToken::dst, "mw", Split::train, 2, {"y.jsonl"}});
  SchedulerConfig cfg;
  cfg.step = 2;
  const auto tasks = descriptors_from_manifest(m, Split::train);
  const std::uint64_t base = stream_config_hash(cfg, Split::train, tasks);

  CorpusManifest moved = m;
  moved.entries[0].paths = {"/elsewhere/x.jsonl"};
  moved.entries[1].paths = {"/elsewhere/y.jsonl"};
  CHECK(stream_config_hash(cfg, Split::train, descriptors_from_manifest(moved, Split::train)) ==
        base);

  CorpusManifest grown = m;
  grown.entries[0].count = 5;
  CHECK(stream_config_hash(cfg, Split::train, descriptors_from_manifest(grown, Split::train)) !=
        base);

  SchedulerConfig changed = cfg;
  changed.step = 3;
  CHECK(stream_config_hash(changed, Split::train, tasks) != base);
  changed = cfg;
  changed.seed = 1;
  CHECK(stream_config_hash(changed, Split::train, tasks) != base);
  changed = cfg;
  changed.epochs = 2;
  CHECK(stream_config_hash(changed, Split::train, tasks) != base);
  changed = cfg;
  changed.task_order = {TaskToken::dst, TaskToken::chat};
  CHECK(stream_config_hash(changed, Split::train, tasks) != base);
  CHECK(stream_config_hash(cfg, Split::dev, tasks) != base);
}

TEST_CASE("frames splice raw records verbatim") {
  synth::Rng rng(3);
  MiniBatch b;
  b.epoch = 1;
  b.block = 4;
  b.task = TaskToken::dst;
  const auto r1 = synth::record_for(rng, TaskToken::dst, "mw");
  const auto r2 = synth::record_for(rng, TaskToken::dst, "mw");
  b.lines = {serialize_record(r1), serialize_record(r2)};

  const std::string frame = frame_of(b);
  CHECK(frame ==
        "{\"epoch\":1,\"block\":4,\"task\":\"[dst]\",\"records\":[" + b.lines[0] + "," +
            b.lines[1] + "]}\n");
  const ojson j = ojson::parse(frame);
  CHECK(j["task"] == "[dst]");
  REQUIRE(j["records"].is_array());
  CHECK(j["records"].size() == 2);
  CHECK(j["records"][0] == ojson::parse(b.lines[0]));

  const auto parsed = b.parse_records();
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[0] == r1);
  CHECK(parsed[1] == r2);

  MiniBatch bad = b;
  bad.lines.push_back("not json");
  CHECK_THROWS_AS(bad.parse_records(), DataError);
}

TEST_CASE("checkpoints round-trip") {
  const Checkpoint c{{2, 7}, 42, 0xdeadbeefULL};
  const Checkpoint back = parse_checkpoint(serialize_checkpoint(c));
  CHECK(back.next == c.next);
  CHECK(back.seed == c.seed);
  CHECK(back.config_hash == c.config_hash);

  CHECK_THROWS_AS(parse_checkpoint("{}"), DataError);
  CHECK_THROWS_AS(parse_checkpoint("nope"), DataError);
  CHECK_THROWS_AS(parse_checkpoint(R"({"epoch": -1, "block": 0, "seed": 0, "config_hash": 0})"),
                  DataError);

  synth::TempDir dir;
  const std::string path = dir.file("ckpt.json");
  save_checkpoint(c, path);
  const Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.next == c.next);
  CHECK_THROWS_AS(load_checkpoint(dir.file("absent.json")), IoError);
}

// ---------------------------------------------------------------------------
// BatchStream over real files

namespace {

struct Corpus {
  synth::TempDir dir;
  std::vector<std::string> chat_lines;  // 7 records, dataset daily
  std::vector<std::string> dst_lines;   // 3 records, dataset mw
  CorpusManifest manifest;

  Corpus() {
    synth::Rng rng(55);
    for (int i = 0; i < 7; ++i) {
      chat_lines.push_back(serialize_record(synth::record_for(rng, TaskToken::chat, "daily")));
    }
    for (int i = 0; i < 3; ++i) {
      dst_lines.push_back(serialize_record(synth::record_for(rng, TaskToken::dst, "mw")));
    }
    const std::string dev_line =
        serialize_record(synth::record_for(rng, TaskToken::chat, "daily", Split::dev));
    // Interleaved across two files; one line uses CRLF, one is a blank line,
    // one belongs to another split. None of that may disturb the stream.
    dir.write("f1.jsonl", chat_lines[0] + "\n" + chat_lines[1] + "\r\n" + dst_lines[0] + "\n" +
                              "\n" + chat_lines[2] + "\n" + chat_lines[3] + "\n");
    dir.write("f2.jsonl", dst_lines[1] + "\n" + chat_lines[4] + "\n" + dev_line + "\n" +
                              chat_lines[5] + "\n" + chat_lines[6] + "\n" + dst_lines[2] + "\n");
    manifest = build_manifest({dir.file("f1.jsonl"), dir.file("f2.jsonl")});
  }
};

SchedulerConfig stream_cfg() {
  SchedulerConfig cfg;
  cfg.step = 2;
  cfg.seed = 9;
  cfg.epochs = 2;
  return cfg;
}

std::vector<std::string> drain(BatchStream& s) {
  std::vector<std::string> frames;
  while (auto mb = s.next()) frames.push_back(frame_of(*mb));
  return frames;
}

}  // namespace

TEST_CASE("the batch stream serves full blocks from disk") {
  Corpus c;
  BatchStream stream(c.manifest, stream_cfg(), Split::train);
  CHECK(stream.rounds() == 4);  // ceil(7 / 2)
  CHECK(stream.blocks_per_epoch() == 8);
  REQUIRE(stream.tasks().size() == 2);
  CHECK(stream.tasks()[0].token == TaskToken::dst);
  CHECK(stream.tasks()[1].token == TaskToken::chat);

  const std::set<std::string> chat_set(c.chat_lines.begin(), c.chat_lines.end());
  const std::set<std::string> dst_set(c.dst_lines.begin(), c.dst_lines.end());

  std::size_t batches = 0;
  std::map<std::uint64_t, std::set<std::string>> chat_seen;  // epoch -> distinct lines
  while (auto mb = stream.next()) {
    CHECK(mb->lines.size() == 2);
    CHECK(mb->task == (batches % 2 == 0 ? TaskToken::dst : TaskToken::chat));
    CHECK(mb->epoch == batches / 8);
    CHECK(mb->block == batches % 8);
    for (const std::string& line : mb->lines) {
      const auto& expected = mb->task == TaskToken::chat ? chat_set : dst_set;
      CHECK(expected.count(line) == 1);
      if (mb->task == TaskToken::chat) chat_seen[mb->epoch].insert(line);
    }
    ++batches;
  }
  CHECK(batches == 16);
  CHECK(stream.next() == std::nullopt);  // stays exhausted
  // Within each epoch the bounding task sweeps all seven records.
  CHECK(chat_seen[0].size() == 7);
  CHECK(chat_seen[1].size() == 7);
}

TEST_CASE("replays are byte-identical") {
  Corpus c;
  BatchStream a(c.manifest, stream_cfg(), Split::train);
  BatchStream b(c.manifest, stream_cfg(), Split::train);
  CHECK(a.config_hash() == b.config_hash());
  CHECK(drain(a) == drain(b));
}

TEST_CASE("checkpoints resume the stream mid-epoch") {
  Corpus c;
  BatchStream full(c.manifest, stream_cfg(), Split::train);
  const std::vector<std::string> everything = drain(full);

  BatchStream first(c.manifest, stream_cfg(), Split::train);
  std::vector<std::string> head;
  for (int i = 0; i < 5; ++i) head.push_back(frame_of(*first.next()));
  const Checkpoint ckpt = first.checkpoint();
  CHECK(ckpt.next == StreamPos{0, 5});

  BatchStream resumed(c.manifest, stream_cfg(), Split::train);
  resumed.restore(ckpt);
  std::vector<std::string> tail = drain(resumed);
  head.insert(head.end(), tail.begin(), tail.end());
  CHECK(head == everything);
}

TEST_CASE("checkpoints from another configuration are refused") {
  Corpus c;
  BatchStream stream(c.manifest, stream_cfg(), Split::train);
  Checkpoint ckpt = stream.checkpoint();
  ckpt.seed += 1;
  CHECK_THROWS_WITH_AS(stream.restore(ckpt), doctest::Contains("CheckpointMismatch"),
                       ConfigError);

  SchedulerConfig other = stream_cfg();
  other.step = 3;
  BatchStream reshaped(c.manifest, other, Split::train);
  CHECK_THROWS_AS(reshaped.restore(stream.checkpoint()), ConfigError);
}

TEST_CASE("seeking validates its target") {
  Corpus c;
  BatchStream stream(c.manifest, stream_cfg(), Split::train);
  stream.seek({1, 7});
  CHECK(stream.next().has_value());
  CHECK(stream.next() == std::nullopt);
  stream.seek({2, 0});  // the end position is a valid stationary target
  CHECK(stream.next() == std::nullopt);
  CHECK_THROWS_AS(stream.seek({2, 1}), ConfigError);
  CHECK_THROWS_AS(stream.seek({0, 8}), ConfigError);
  CHECK_THROWS_AS(stream.seek({3, 0}), ConfigError);
}

TEST_CASE("manifest drift is caught before streaming") {
  Corpus c;
  CorpusManifest lying = c.manifest;
  for (auto& e : lying.entries) {
    if (e.task == TaskToken::chat && e.split == Split::train) e.count += 1;
  }
  CHECK_THROWS_WITH_AS(BatchStream(lying, stream_cfg(), Split::train),
                       doctest::Contains("ManifestMismatch"), DataError);

  CorpusManifest missing = c.manifest;
  for (auto& e : missing.entries) e.paths = {c.dir.file("gone.jsonl")};
  CHECK_THROWS_AS(BatchStream(missing, stream_cfg(), Split::train), IoError);

  const std::string broken = c.dir.write("broken.jsonl", "{\"task\": 3}\n");
  CorpusManifest junk;
  junk.entries.push_back({TaskToken::chat, "daily", Split::train, 1, {broken}});
  CHECK_THROWS_WITH_AS(BatchStream(junk, stream_cfg(), Split::train),
                       doctest::Contains("ManifestMismatch"), DataError);
}

TEST_CASE("degenerate stream configurations are rejected") {
  Corpus c;
  SchedulerConfig cfg = stream_cfg();
  cfg.step = 0;
  CHECK_THROWS_AS(BatchStream(c.manifest, cfg, Split::train), ConfigError);
  cfg = stream_cfg();
  cfg.epochs = 0;
  CHECK_THROWS_AS(BatchStream(c.manifest, cfg, Split::train), ConfigError);
  cfg = stream_cfg();
  CHECK_THROWS_WITH_AS(BatchStream(c.manifest, cfg, Split::test),
                       doctest::Contains("EmptyTaskSet"), ConfigError);
  cfg.task_order = {TaskToken::chat};
  CHECK_THROWS_AS(BatchStream(c.manifest, cfg, Split::train), ConfigError);
}

TEST_CASE("single-task streams reproduce their records byte for byte") {
  synth::TempDir dir;
  synth::Rng rng(66);
  std::vector<std::string> lines;
  std::string content;
  for (int i = 0; i < 4; ++i) {
    lines.push_back(serialize_record(synth::record_for(rng, TaskToken::sum, "samsum")));
    content += lines.back() + "\n";
  }
  const std::string path = dir.write("sum.jsonl", content);
  const CorpusManifest m = build_manifest({path});

  SchedulerConfig cfg;
  cfg.step = 4;
  cfg.seed = 2;
  BatchStream stream(m, cfg, Split::train);
  const auto mb = stream.next();
  REQUIRE(mb.has_value());
  REQUIRE(mb->lines.size() == 4);
  auto served = mb->lines;
  std::sort(served.begin(), served.end());
  std::sort(lines.begin(), lines.end());
  CHECK(served == lines);
  CHECK(stream.next() == std::nullopt);
}
