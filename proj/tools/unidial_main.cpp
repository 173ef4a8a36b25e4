// unidial: compiles heterogeneous dialogue corpora into one text-to-text
// JSONL format, synthesizes denoising corpora, schedules training batches and
// scores predictions. One subcommand per pipeline stage; diagnostics go to
// stderr, data to stdout or files. Exit codes: 0 ok, 1 data error, 2 usage.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "unidial/errors.hpp"
#include "unidial/ingest.hpp"
#include "unidial/metrics.hpp"
#include "unidial/record.hpp"
#include "unidial/scheduler.hpp"
#include "unidial/ssl.hpp"
#include "unidial/stats.hpp"

namespace {

using namespace unidial;

constexpr int kExitOk = 0;
constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

// "-" selects the standard stream.
class Input {
 public:
  explicit Input(const std::string& path) {
    if (path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw IoError("cannot open '" + path + "'");
    }
  }
  std::istream& stream() { return file_.is_open() ? file_ : std::cin; }

 private:
  std::ifstream file_;
};

class Output {
 public:
  explicit Output(const std::string& path) {
    if (path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw IoError("cannot write '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

Split parse_split_or_throw(const std::string& s) {
  const auto split = parse_split(s);
  if (!split) throw ConfigError("unknown split '" + s + "'");
  return *split;
}

TaskToken parse_task_or_throw(const std::string& s) {
  // Accept both "[tod]" and bare "tod".
  const std::string wrapped = s.empty() || s.front() == '[' ? s : "[" + s + "]";
  const auto tok = parse_task_token(wrapped);
  if (!tok) throw ConfigError("unknown task token '" + s + "'");
  return *tok;
}

// ---------------------------------------------------------------------------
// validate

struct ValidateArgs {
  std::vector<std::string> inputs;
  std::uint64_t max_messages = 50;
};

int cmd_validate(const ValidateArgs& args) {
  std::uint64_t records = 0, error_lines = 0, warn_lines = 0, printed = 0;
  for (const std::string& path : args.inputs) {
    Input in(path);
    std::string line;
    std::uint64_t line_no = 0;
    while (std::getline(in.stream(), line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      ++records;
      const ValidationReport rep = validate_line(line);
      if (rep.clean()) continue;
      if (rep.errors() > 0) ++error_lines;
      if (rep.warnings() > 0) ++warn_lines;
      for (const Violation& v : rep.violations) {
        if (printed < args.max_messages) {
          std::cerr << path << ":" << line_no << ": "
                    << (v.severity == Severity::error ? "error" : "warning") << ": " << v.code
                    << ": " << v.detail << "\n";
          ++printed;
        } else if (printed == args.max_messages) {
          std::cerr << "... further messages suppressed (--max-messages)\n";
          ++printed;
        }
      }
    }
  }
  std::cerr << "checked " << records << " records: " << error_lines << " with errors, "
            << warn_lines << " with warnings\n";
  return error_lines == 0 ? kExitOk : kExitData;
}

// ---------------------------------------------------------------------------
// manifest assembly shared by ingest / ssl-gen / stats / stream

class ManifestCollector {
 public:
  explicit ManifestCollector(std::string path) : path_(std::move(path)) {}

  void add(const UnifiedRecord& r) {
    counts_[{static_cast<std::uint8_t>(r.task), r.dataset, static_cast<std::uint8_t>(r.split)}] +=
        1;
  }

  CorpusManifest manifest() const {
    CorpusManifest m;
    for (const auto& [key, count] : counts_) {
      ManifestEntry e;
      e.task = static_cast<TaskToken>(std::get<0>(key));
      e.dataset = std::get<1>(key);
      e.split = static_cast<Split>(std::get<2>(key));
      e.count = count;
      e.paths = {path_};
      m.entries.push_back(std::move(e));
    }
    return m;
  }

 private:
  using Key = std::tuple<std::uint8_t, std::string, std::uint8_t>;
  std::string path_;
  std::map<Key, std::uint64_t> counts_;
};

CorpusManifest gather_manifest(const std::vector<std::string>& manifest_paths,
                               const std::vector<std::string>& input_paths) {
  std::vector<CorpusManifest> parts;
  for (const std::string& p : manifest_paths) parts.push_back(load_manifest(p));
  if (!input_paths.empty()) parts.push_back(build_manifest(input_paths));
  if (parts.empty()) throw ConfigError("need --manifest or --inputs");
  return merge_manifests(parts);
}

// ---------------------------------------------------------------------------
// ingest

struct IngestArgs {
  std::string adapter;
  std::string input = "-";
  std::string output = "-";
  std::string dataset;
  std::string split = "train";
  std::string task_definition;
  std::string knowledge_text;
  std::string manifest_out;
  bool strict = false;
  std::uint64_t max_messages = 20;
};

int cmd_ingest(const IngestArgs& args) {
  const auto adapter = parse_adapter_id(args.adapter);
  if (!adapter) throw ConfigError("unknown adapter '" + args.adapter + "'");
  if (*adapter != AdapterId::passthrough_unified && args.dataset.empty()) {
    throw ConfigError("--dataset is required for adapter '" + args.adapter + "'");
  }
  if (!args.manifest_out.empty() && args.output == "-") {
    throw ConfigError("--manifest needs a file --output, not stdout");
  }

  IngestOptions opts;
  opts.dataset = args.dataset;
  opts.split = parse_split_or_throw(args.split);
  opts.task_definition = args.task_definition;
  if (!args.knowledge_text.empty()) {
    opts.shared_knowledge = KnowledgeForm::unstructured(args.knowledge_text);
  }
  opts.strict = args.strict;

  Input in(args.input);
  Output out(args.output);
  ManifestCollector collector(args.output);
  const IngestReport report =
      ingest(*adapter, in.stream(), opts, [&](const UnifiedRecord& r, const std::string& line) {
        out.stream() << line << "\n";
        collector.add(r);
      });

  std::uint64_t printed = 0;
  for (const LineIssue& issue : report.issues) {
    if (printed < args.max_messages) {
      std::cerr << args.input << ":" << issue.line_no << ": rejected: " << issue.reason << "\n";
    } else if (printed == args.max_messages) {
      std::cerr << "... further rejections suppressed\n";
    }
    ++printed;
  }
  std::cerr << "ingest: read " << report.read << ", emitted " << report.emitted << ", rejected "
            << report.rejected << (report.aborted ? " (aborted by --strict)" : "") << "\n";

  if (!args.manifest_out.empty()) save_manifest(collector.manifest(), args.manifest_out);
  return report.aborted ? kExitData : kExitOk;
}

// ---------------------------------------------------------------------------
// ssl-gen

struct SslGenArgs {
  std::string kind;
  std::string input = "-";
  std::string output = "-";
  std::string sidecar;
  std::string manifest_out;
  std::uint64_t seed = 0;
};

int cmd_ssl_gen(const SslGenArgs& args) {
  const auto kind = parse_ssl_kind(args.kind);
  if (!kind) throw ConfigError("--kind must be 'reo' or 'clo'");
  if (!args.manifest_out.empty() && args.output == "-") {
    throw ConfigError("--manifest needs a file --output, not stdout");
  }

  Input in(args.input);
  Output out(args.output);
  std::optional<Output> sidecar;
  if (!args.sidecar.empty()) sidecar.emplace(args.sidecar);
  ManifestCollector collector(args.output);

  const SslGenStats stats = generate_ssl(
      in.stream(), *kind, args.seed,
      [&](const UnifiedRecord& rec, const SslProvenance& prov, std::string_view dataset,
          std::uint64_t ordinal) {
        out.stream() << serialize_record(rec) << "\n";
        if (sidecar) {
          sidecar->stream() << provenance_to_json(dataset, ordinal, prov).dump() << "\n";
        }
        collector.add(rec);
      });

  std::cerr << "ssl-gen " << to_string(*kind) << ": read " << stats.read << ", emitted "
            << stats.emitted << ", skipped " << stats.skipped_total() << "\n";
  for (std::size_t i = 1; i < kSslSkipCount; ++i) {
    if (stats.skipped[i] > 0) {
      std::cerr << "  skip " << to_string(static_cast<SslSkip>(i)) << ": " << stats.skipped[i]
                << "\n";
    }
  }

  if (!args.manifest_out.empty()) save_manifest(collector.manifest(), args.manifest_out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// stats

struct StatsArgs {
  std::vector<std::string> manifests;
  std::vector<std::string> inputs;
  std::string write_manifest;
  bool no_ssl = false;
  std::optional<std::uint64_t> expect_total;
};

int cmd_stats(const StatsArgs& args) {
  const CorpusManifest m = gather_manifest(args.manifests, args.inputs);
  if (!args.write_manifest.empty()) save_manifest(m, args.write_manifest);

  const CorpusStats stats = corpus_stats(m, /*include_ssl=*/!args.no_ssl);
  std::cout << stats_to_json(stats).dump(2) << "\n";
  std::cerr << stats_table(stats);

  if (args.expect_total) {
    const TotalCheck check = check_total(m, *args.expect_total);
    if (!check.ok) {
      std::cerr << "total mismatch: manifest holds " << check.actual << ", expected "
                << check.expected << "\n";
      return kExitData;
    }
    std::cerr << "total check passed: " << check.actual << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// stream

struct StreamArgs {
  std::vector<std::string> manifests;
  std::vector<std::string> inputs;
  std::string output = "-";
  std::string split = "train";
  std::string checkpoint;
  std::uint64_t step = 512;
  std::uint64_t seed = 0;
  std::uint64_t epochs = 1;
  std::vector<std::string> task_order;
  std::uint64_t max_blocks = 0;  // 0: no cap
};

int cmd_stream(const StreamArgs& args) {
  const CorpusManifest manifest = gather_manifest(args.manifests, args.inputs);
  SchedulerConfig cfg;
  cfg.step = args.step;
  cfg.seed = args.seed;
  cfg.epochs = args.epochs;
  for (const std::string& t : args.task_order) cfg.task_order.push_back(parse_task_or_throw(t));

  BatchStream stream(manifest, cfg, parse_split_or_throw(args.split));
  if (!args.checkpoint.empty() && std::ifstream(args.checkpoint).good()) {
    stream.restore(load_checkpoint(args.checkpoint));
    std::cerr << "resumed at epoch " << stream.position().epoch << ", block "
              << stream.position().block << "\n";
  }

  Output out(args.output);
  std::uint64_t emitted = 0;
  while (args.max_blocks == 0 || emitted < args.max_blocks) {
    const auto batch = stream.next();
    if (!batch) break;
    write_frame(out.stream(), *batch);
    ++emitted;
    if (!args.checkpoint.empty()) save_checkpoint(stream.checkpoint(), args.checkpoint);
  }
  std::cerr << "stream: wrote " << emitted << " blocks ("
            << stream.blocks_per_epoch() * cfg.epochs << " total in plan)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string metric;
  std::string pred;
  std::string gold;
  double inform = std::nan("");
  double success = std::nan("");
  double bleu = std::nan("");
};

ojson parse_eval_line(const std::string& path, std::uint64_t line_no, const std::string& line) {
  ojson j = ojson::parse(line, nullptr, false);
  if (j.is_discarded()) {
    throw DataError(path + ":" + std::to_string(line_no) + ": not valid JSON");
  }
  return j;
}

std::vector<std::string> read_texts(const std::string& path) {
  Input in(path);
  std::vector<std::string> out;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in.stream(), line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const ojson j = parse_eval_line(path, line_no, line);
    if (j.is_string()) {
      out.push_back(j.get<std::string>());
    } else if (j.is_object() && j.contains("text") && j["text"].is_string()) {
      out.push_back(j["text"].get<std::string>());
    } else {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected a JSON string or {\"text\": ...}");
    }
  }
  return out;
}

SlotPairs pairs_from_json(const std::string& path, std::uint64_t line_no, const ojson& field) {
  SlotPairs pairs;
  if (field.is_object()) {
    for (const auto& [k, v] : field.items()) {
      if (!v.is_string()) {
        throw DataError(path + ":" + std::to_string(line_no) + ": pair values must be strings");
      }
      pairs.emplace_back(k, v.get<std::string>());
    }
    return pairs;
  }
  if (!field.is_array()) {
    throw DataError(path + ":" + std::to_string(line_no) + ": expected pair array or object");
  }
  for (const auto& e : field) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": pairs must be [slot, value]");
    }
    pairs.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
  }
  return pairs;
}

std::vector<SlotPairs> read_pair_lists(const std::string& path, const char* field) {
  Input in(path);
  std::vector<SlotPairs> out;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in.stream(), line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const ojson j = parse_eval_line(path, line_no, line);
    if (!j.is_object() || !j.contains(field)) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected {\"" + field +
                      "\": ...}");
    }
    out.push_back(pairs_from_json(path, line_no, j[field]));
  }
  return out;
}

int cmd_eval(const EvalArgs& args) {
  ScoreReport report;
  report.metric = args.metric;
  report.params["normalizer"] = "lower+ws";

  const auto need_files = [&] {
    if (args.pred.empty() || args.gold.empty()) {
      throw ConfigError("--metric " + args.metric + " needs --pred and --gold");
    }
  };

  if (args.metric == "acc" || args.metric == "em") {
    need_files();
    const auto preds = read_texts(args.pred);
    const auto golds = read_texts(args.gold);
    report.value = args.metric == "acc" ? accuracy(preds, golds)
                                        : exact_match_corpus(preds, golds);
    report.support = preds.size();
  } else if (args.metric == "f1") {
    need_files();
    const auto preds = read_pair_lists(args.pred, "pairs");
    const auto golds = read_pair_lists(args.gold, "pairs");
    const PrF1 f1 = slot_f1(preds, golds);
    report.value = f1.f1;
    report.support = preds.size();
    report.params["precision"] = f1.precision;
    report.params["recall"] = f1.recall;
    report.params["averaging"] = "micro";
  } else if (args.metric == "jga") {
    need_files();
    const auto pred_pairs = read_pair_lists(args.pred, "state");
    const auto gold_pairs = read_pair_lists(args.gold, "state");
    std::vector<BeliefState> preds, golds;
    for (const auto& p : pred_pairs) preds.push_back(make_belief_state(p));
    for (const auto& g : gold_pairs) golds.push_back(make_belief_state(g));
    report.value = joint_goal_accuracy(preds, golds);
    report.support = preds.size();
  } else if (args.metric == "rouge_l") {
    need_files();
    const auto preds = read_texts(args.pred);
    const auto golds = read_texts(args.gold);
    report.value = rouge_l_corpus(preds, golds);
    report.support = preds.size();
    report.params["beta"] = kRougeBeta;
    report.params["variant"] = "F";
  } else if (args.metric == "bleu4") {
    need_files();
    const auto preds = read_texts(args.pred);
    const auto golds = read_texts(args.gold);
    report.value = bleu4(preds, golds);
    report.support = preds.size();
    report.params["max_order"] = 4;
    report.params["smoothing"] = "add-epsilon";
    report.params["epsilon"] = kBleuEpsilon;
  } else if (args.metric == "combined") {
    if (std::isnan(args.inform) || std::isnan(args.success) || std::isnan(args.bleu)) {
      throw ConfigError("--metric combined needs --inform, --success and --bleu");
    }
    report.value = combined_score(args.inform, args.success, args.bleu);
    report.support = 1;
    report.params = ojson::object();
    report.params["formula"] = "0.5*(inform+success)+bleu";
    report.params["inform"] = args.inform;
    report.params["success"] = args.success;
    report.params["bleu"] = args.bleu;
  } else {
    throw ConfigError("unknown metric '" + args.metric + "'");
  }

  std::cout << report.to_json().dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unified dialogue corpus compiler and batch scheduler"};
  app.require_subcommand(0, 1);
  app.set_config("--config", "",
                 "key=value config file; command options live in a [command] section");
  bool print_config = false;
  app.add_flag("--print-config", print_config, "print the resolved configuration and exit");

  ValidateArgs validate_args;
  CLI::App* validate = app.add_subcommand("validate", "check unified JSONL records");
  validate->add_option("inputs", validate_args.inputs, "unified JSONL files ('-' for stdin)")
      ->required();
  validate->add_option("--max-messages", validate_args.max_messages,
                       "cap on printed diagnostics");

  IngestArgs ingest_args;
  CLI::App* ingest = app.add_subcommand("ingest", "convert a source corpus to unified JSONL");
  ingest
      ->add_option("--adapter", ingest_args.adapter,
                   "intent_label | slot_spans | dst_multiwoz_like | chitchat_turns | "
                   "summary_pair | text2sql_spider_like | passthrough_unified")
      ->required();
  ingest->add_option("--input", ingest_args.input, "source JSONL ('-' for stdin)");
  ingest->add_option("--output", ingest_args.output, "unified JSONL out ('-' for stdout)");
  ingest->add_option("--dataset", ingest_args.dataset, "dataset name stamped on records");
  ingest->add_option("--split", ingest_args.split, "train | dev | test");
  ingest->add_option("--task-definition", ingest_args.task_definition,
                     "override the adapter's default task definition");
  ingest->add_option("--knowledge-text", ingest_args.knowledge_text,
                     "unstructured knowledge attached to every record");
  ingest->add_option("--manifest", ingest_args.manifest_out,
                     "write a manifest covering the output file");
  ingest->add_flag("--strict", ingest_args.strict, "abort on the first rejected line");
  ingest->add_option("--max-messages", ingest_args.max_messages, "cap on printed rejections");

  SslGenArgs ssl_args;
  CLI::App* ssl_gen = app.add_subcommand("ssl-gen", "synthesize a denoising corpus");
  ssl_gen->add_option("--kind", ssl_args.kind, "reo | clo")->required();
  ssl_gen->add_option("--input", ssl_args.input, "unified JSONL ('-' for stdin)");
  ssl_gen->add_option("--output", ssl_args.output, "unified JSONL out ('-' for stdout)");
  ssl_gen->add_option("--sidecar", ssl_args.sidecar, "provenance JSONL out");
  ssl_gen->add_option("--manifest", ssl_args.manifest_out,
                      "write a manifest covering the output file");
  ssl_gen->add_option("--seed", ssl_args.seed, "global generation seed");

  StatsArgs stats_args;
  CLI::App* stats = app.add_subcommand("stats", "per-task corpus accounting");
  stats->add_option("--manifest", stats_args.manifests, "manifest JSON (repeatable)");
  stats->add_option("--inputs", stats_args.inputs, "unified JSONL files to count");
  stats->add_option("--write-manifest", stats_args.write_manifest,
                    "save the merged manifest");
  stats->add_flag("--no-ssl", stats_args.no_ssl, "exclude the reo/clo denoising tasks");
  stats->add_option("--expect-total", stats_args.expect_total,
                    "fail unless the manifest total matches");

  StreamArgs stream_args;
  CLI::App* stream = app.add_subcommand("stream", "emit deterministic training batches");
  stream->add_option("--manifest", stream_args.manifests, "manifest JSON (repeatable)");
  stream->add_option("--inputs", stream_args.inputs, "unified JSONL files (manifest built)");
  stream->add_option("--output", stream_args.output, "framed JSONL out ('-' for stdout)");
  stream->add_option("--split", stream_args.split, "train | dev | test");
  stream->add_option("--checkpoint", stream_args.checkpoint,
                     "resume from and continuously update this checkpoint file");
  stream->add_option("--step", stream_args.step, "records per task block");
  stream->add_option("--seed", stream_args.seed, "shuffle seed");
  stream->add_option("--epochs", stream_args.epochs, "number of epochs");
  stream->add_option("--task-order", stream_args.task_order,
                     "explicit task order, e.g. tod,dst (default: token order)")
      ->delimiter(',');
  stream->add_option("--max-blocks", stream_args.max_blocks,
                     "stop after this many blocks (0: run to completion)");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "score predictions against references");
  eval->add_option("--metric", eval_args.metric,
                   "acc | f1 | em | jga | rouge_l | bleu4 | combined")
      ->required();
  eval->add_option("--pred", eval_args.pred, "predictions JSONL");
  eval->add_option("--gold", eval_args.gold, "references JSONL");
  eval->add_option("--inform", eval_args.inform, "inform rate (combined)");
  eval->add_option("--success", eval_args.success, "success rate (combined)");
  eval->add_option("--bleu", eval_args.bleu, "BLEU points (combined)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (print_config) {
    std::cout << app.config_to_str(/*default_also=*/true, /*write_description=*/false);
    return kExitOk;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return kExitUsage;
  }

  try {
    if (validate->parsed()) return cmd_validate(validate_args);
    if (ingest->parsed()) return cmd_ingest(ingest_args);
    if (ssl_gen->parsed()) return cmd_ssl_gen(ssl_args);
    if (stats->parsed()) return cmd_stats(stats_args);
    if (stream->parsed()) return cmd_stream(stream_args);
    if (eval->parsed()) return cmd_eval(eval_args);
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitData;
  }
  std::cerr << app.help();
  return kExitUsage;
}
