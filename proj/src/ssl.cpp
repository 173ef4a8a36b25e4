#include "unidial/ssl.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <map>
#include <numeric>

#include "unidial/errors.hpp"
#include "unidial/linearize.hpp"
#include "unidial/text.hpp"

namespace unidial {

namespace {

constexpr std::array<std::string_view, 19> kDateLexicon = {
    "monday", "tuesday",  "wednesday", "thursday", "friday",   "saturday", "sunday",
    "january", "february", "march",    "april",    "may",      "june",     "july",
    "august",  "september", "october", "november", "december"};

bool is_ascii_alnum(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

// Core = token minus surrounding ASCII punctuation; non-ASCII bytes count as
// word content.
struct TokenView {
  std::size_t raw_begin = 0, raw_end = 0;
  std::size_t core_begin = 0, core_end = 0;

  bool has_core() const { return core_begin < core_end; }
};

std::vector<TokenView> tokenize(std::string_view text) {
  std::vector<TokenView> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    if (i >= text.size()) break;
    TokenView t;
    t.raw_begin = i;
    while (i < text.size() && text[i] != ' ') ++i;
    t.raw_end = i;
    std::size_t b = t.raw_begin, e = t.raw_end;
    auto is_word = [&](std::size_t k) {
      return is_ascii_alnum(text[k]) || static_cast<unsigned char>(text[k]) >= 0x80;
    };
    while (b < e && !is_word(b)) ++b;
    while (e > b && !is_word(e - 1)) --e;
    t.core_begin = b;
    t.core_end = e;
    tokens.push_back(t);
  }
  return tokens;
}

bool core_is_numeric(std::string_view core) {
  if (core.empty()) return false;
  return std::all_of(core.begin(), core.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool core_is_capitalized(std::string_view core) {
  return !core.empty() && core.front() >= 'A' && core.front() <= 'Z';
}

bool core_in_lexicon(std::string_view core) {
  if (core.empty()) return false;
  std::string lower = to_lower_ascii(core);
  return std::find(kDateLexicon.begin(), kDateLexicon.end(), lower) != kDateLexicon.end();
}

}  // namespace

std::vector<EntitySpan> extract_entities(std::string_view text) {
  const std::vector<TokenView> toks = tokenize(text);
  // Sentence starts: the first token, and any token after one ending in .!?.
  std::vector<bool> at_sentence_start(toks.size(), false);
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i == 0) {
      at_sentence_start[i] = true;
      continue;
    }
    const char last = text[toks[i - 1].raw_end - 1];
    at_sentence_start[i] = last == '.' || last == '!' || last == '?';
  }

  auto core_of = [&](std::size_t i) {
    return text.substr(toks[i].core_begin, toks[i].core_end - toks[i].core_begin);
  };

  std::vector<EntitySpan> spans;
  auto emit = [&](std::size_t begin, std::size_t end) {
    spans.push_back({begin, end, std::string(text.substr(begin, end - begin))});
  };

  std::size_t i = 0;
  while (i < toks.size()) {
    if (toks[i].has_core() && core_is_capitalized(core_of(i))) {
      std::size_t j = i + 1;
      // Runs never cross a sentence boundary; a sentence-start token can only
      // open a new run.
      while (j < toks.size() && !at_sentence_start[j] && toks[j].has_core() &&
             core_is_capitalized(core_of(j))) {
        ++j;
      }
      const std::size_t run_len = j - i;
      if (!at_sentence_start[i] || run_len >= 2) {
        emit(toks[i].core_begin, toks[j - 1].core_end);
        i = j;
        continue;
      }
      // Excluded sentence-initial single capital: fall through to the
      // token-local rules before giving up on it.
    }
    if (toks[i].has_core() &&
        (core_is_numeric(core_of(i)) || core_in_lexicon(core_of(i)))) {
      emit(toks[i].core_begin, toks[i].core_end);
    }
    ++i;
  }
  return spans;
}

std::string_view to_string(SslKind k) { return k == SslKind::reo ? "reo" : "clo"; }

std::optional<SslKind> parse_ssl_kind(std::string_view s) {
  if (s == "reo") return SslKind::reo;
  if (s == "clo") return SslKind::clo;
  return std::nullopt;
}

std::string_view to_string(SslSkip s) {
  switch (s) {
    case SslSkip::none:
      return "none";
    case SslSkip::too_few_turns:
      return "too_few_turns";
    case SslSkip::no_entities:
      return "no_entities";
    case SslSkip::not_train:
      return "not_train";
    case SslSkip::unsupported_source:
      return "unsupported_source";
    case SslSkip::preexisting_mask:
      return "preexisting_mask";
  }
  return "none";
}

namespace {

SslOutcome skip(SslSkip reason) {
  SslOutcome out;
  out.skip = reason;
  return out;
}

std::optional<SslSkip> common_gate(const UnifiedRecord& r) {
  if (r.split != Split::train) return SslSkip::not_train;
  if (r.task == TaskToken::reo || r.task == TaskToken::clo) return SslSkip::unsupported_source;
  return std::nullopt;
}

void stamp_ssl(UnifiedRecord& out, const UnifiedRecord& src, TaskToken task,
               std::string_view definition) {
  out.task = task;
  out.dataset = src.dataset;
  out.split = src.split;
  out.task_definition = std::string(definition);
  out.meta = ojson::object();
  out.meta["source_task"] = std::string(to_string(src.task));
}

constexpr std::string_view kReoDefinition =
    "Recover the original order of the shuffled dialogue turns.";
constexpr std::string_view kCloDefinition =
    "Recover the complete dialogue content by restoring each masked entity.";

}  // namespace

SslOutcome make_reo(const UnifiedRecord& r, Rng& rng) {
  if (const auto gate = common_gate(r)) return skip(*gate);
  const std::size_t n = r.dialogue.size();
  if (n < 2) return skip(SslSkip::too_few_turns);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  const auto is_identity = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      if (perm[i] != i) return false;
    }
    return true;
  };
  do {
    rng.shuffle(perm);
  } while (is_identity());

  SslOutcome out;
  out.provenance.kind = SslKind::reo;
  out.provenance.permutation = perm;

  UnifiedRecord rec;
  stamp_ssl(rec, r, TaskToken::reo, kReoDefinition);
  rec.dialogue.reserve(n);
  for (std::size_t i = 0; i < n; ++i) rec.dialogue.push_back(r.dialogue[perm[i]]);
  rec.knowledge = KnowledgeForm::none();
  rec.target = dialogue_text(r.dialogue);
  out.record = std::move(rec);
  return out;
}

SslOutcome make_clo(const UnifiedRecord& r, Rng& rng,
                    const std::vector<std::vector<EntitySpan>>* entities) {
  if (const auto gate = common_gate(r)) return skip(*gate);
  if (r.dialogue.empty()) return skip(SslSkip::too_few_turns);
  for (const Turn& t : r.dialogue) {
    if (t.text.find(kMaskToken) != std::string::npos) return skip(SslSkip::preexisting_mask);
  }
  if (entities && entities->size() != r.dialogue.size()) {
    throw DataError("pre-annotated entity spans must supply one list per turn");
  }

  // Collect (turn, span) in dialogue order; index k names the k-th mask.
  std::vector<CloAlignment> aligns;
  for (std::size_t ti = 0; ti < r.dialogue.size(); ++ti) {
    const std::string& text = r.dialogue[ti].text;
    std::vector<EntitySpan> spans;
    if (entities) {
      spans = (*entities)[ti];
      std::size_t prev_end = 0;
      for (EntitySpan& s : spans) {
        if (s.start >= s.end || s.end > text.size() || s.start < prev_end) {
          throw DataError("pre-annotated span out of bounds or out of order");
        }
        const std::string actual(text.substr(s.start, s.end - s.start));
        if (s.surface.empty()) {
          s.surface = actual;
        } else if (s.surface != actual) {
          throw DataError("pre-annotated span surface does not match the text");
        }
        prev_end = s.end;
      }
    } else {
      spans = extract_entities(text);
    }
    for (const EntitySpan& s : spans) aligns.push_back({ti, s, 0});
  }
  if (aligns.empty()) return skip(SslSkip::no_entities);

  // Permute the entity list; knowledge position p holds entity order_of[p].
  std::vector<std::size_t> order_of(aligns.size());
  std::iota(order_of.begin(), order_of.end(), std::size_t{0});
  rng.shuffle(order_of);
  std::vector<std::pair<std::string, std::string>> pairs(aligns.size());
  for (std::size_t p = 0; p < order_of.size(); ++p) {
    const std::size_t k = order_of[p];
    pairs[p] = {"entity", aligns[k].span.surface};
    aligns[k].knowledge_position = p;
  }

  UnifiedRecord rec;
  stamp_ssl(rec, r, TaskToken::clo, kCloDefinition);
  rec.dialogue.reserve(r.dialogue.size());
  std::size_t k = 0;
  for (std::size_t ti = 0; ti < r.dialogue.size(); ++ti) {
    const std::string& text = r.dialogue[ti].text;
    std::string masked;
    std::size_t cursor = 0;
    while (k < aligns.size() && aligns[k].turn_index == ti) {
      masked.append(text, cursor, aligns[k].span.start - cursor);
      masked.append(kMaskToken);
      cursor = aligns[k].span.end;
      ++k;
    }
    masked.append(text, cursor, text.size() - cursor);
    rec.dialogue.push_back({r.dialogue[ti].speaker, std::move(masked)});
  }
  rec.knowledge = KnowledgeForm::semi_structured(std::move(pairs));
  rec.target = dialogue_text(r.dialogue);

  SslOutcome out;
  out.provenance.kind = SslKind::clo;
  out.provenance.alignments = std::move(aligns);
  out.record = std::move(rec);
  return out;
}

namespace {

bool verify_reo(const UnifiedRecord& rec, const SslProvenance& prov) {
  const std::size_t n = rec.dialogue.size();
  if (prov.permutation.size() != n) return false;
  std::vector<bool> seen(n, false);
  for (std::size_t idx : prov.permutation) {
    if (idx >= n || seen[idx]) return false;
    seen[idx] = true;
  }
  DialogueHistory original(n);
  for (std::size_t i = 0; i < n; ++i) original[prov.permutation[i]] = rec.dialogue[i];
  return dialogue_text(original) == rec.target;
}

bool verify_clo(const UnifiedRecord& rec, const SslProvenance& prov) {
  std::size_t k = 0;
  DialogueHistory original;
  original.reserve(rec.dialogue.size());
  for (std::size_t ti = 0; ti < rec.dialogue.size(); ++ti) {
    const std::string& masked = rec.dialogue[ti].text;
    std::string rebuilt;
    std::size_t cursor = 0;
    for (;;) {
      const std::size_t at = masked.find(kMaskToken, cursor);
      if (at == std::string::npos) break;
      if (k >= prov.alignments.size()) return false;  // more masks than alignments
      const CloAlignment& a = prov.alignments[k];
      if (a.turn_index != ti) return false;
      rebuilt.append(masked, cursor, at - cursor);
      // The span must land where the surface goes in the rebuilt text.
      if (a.span.start != rebuilt.size()) return false;
      rebuilt.append(a.span.surface);
      if (a.span.end != rebuilt.size()) return false;
      cursor = at + kMaskToken.size();
      ++k;
    }
    rebuilt.append(masked, cursor, masked.size() - cursor);
    original.push_back({rec.dialogue[ti].speaker, std::move(rebuilt)});
  }
  if (k != prov.alignments.size()) return false;  // unmatched alignments
  return dialogue_text(original) == rec.target;
}

}  // namespace

bool verify_ssl(const UnifiedRecord& record, const SslProvenance& prov) {
  switch (prov.kind) {
    case SslKind::reo:
      return record.task == TaskToken::reo && verify_reo(record, prov);
    case SslKind::clo:
      return record.task == TaskToken::clo && verify_clo(record, prov);
  }
  return false;
}

ojson provenance_to_json(std::string_view dataset, std::uint64_t ordinal,
                         const SslProvenance& prov) {
  ojson j = ojson::object();
  j["dataset"] = std::string(dataset);
  j["ordinal"] = ordinal;
  j["kind"] = std::string(to_string(prov.kind));
  if (prov.kind == SslKind::reo) {
    j["permutation"] = prov.permutation;
  } else {
    ojson arr = ojson::array();
    for (const CloAlignment& a : prov.alignments) {
      ojson ja = ojson::object();
      ja["turn"] = a.turn_index;
      ja["start"] = a.span.start;
      ja["end"] = a.span.end;
      ja["surface"] = a.span.surface;
      ja["knowledge_position"] = a.knowledge_position;
      arr.push_back(std::move(ja));
    }
    j["alignments"] = std::move(arr);
  }
  return j;
}

std::optional<ProvenanceEntry> provenance_from_json(const ojson& j) {
  if (!j.is_object() || !j.contains("dataset") || !j["dataset"].is_string() ||
      !j.contains("ordinal") || !j["ordinal"].is_number_unsigned() || !j.contains("kind") ||
      !j["kind"].is_string()) {
    return std::nullopt;
  }
  const auto kind = parse_ssl_kind(j["kind"].get_ref<const std::string&>());
  if (!kind) return std::nullopt;
  ProvenanceEntry e;
  e.dataset = j["dataset"].get<std::string>();
  e.ordinal = j["ordinal"].get<std::uint64_t>();
  e.provenance.kind = *kind;
  if (*kind == SslKind::reo) {
    if (!j.contains("permutation") || !j["permutation"].is_array()) return std::nullopt;
    for (const auto& v : j["permutation"]) {
      if (!v.is_number_unsigned()) return std::nullopt;
      e.provenance.permutation.push_back(v.get<std::size_t>());
    }
  } else {
    if (!j.contains("alignments") || !j["alignments"].is_array()) return std::nullopt;
    for (const auto& ja : j["alignments"]) {
      if (!ja.is_object() || !ja.contains("turn") || !ja["turn"].is_number_unsigned() ||
          !ja.contains("start") || !ja["start"].is_number_unsigned() || !ja.contains("end") ||
          !ja["end"].is_number_unsigned() || !ja.contains("surface") ||
          !ja["surface"].is_string() || !ja.contains("knowledge_position") ||
          !ja["knowledge_position"].is_number_unsigned()) {
        return std::nullopt;
      }
      CloAlignment a;
      a.turn_index = ja["turn"].get<std::size_t>();
      a.span.start = ja["start"].get<std::size_t>();
      a.span.end = ja["end"].get<std::size_t>();
      a.span.surface = ja["surface"].get<std::string>();
      a.knowledge_position = ja["knowledge_position"].get<std::size_t>();
      e.provenance.alignments.push_back(std::move(a));
    }
  }
  return e;
}

std::uint64_t SslGenStats::skipped_total() const {
  std::uint64_t sum = 0;
  for (const auto v : skipped) sum += v;
  return sum;
}

SslGenStats generate_ssl(std::istream& in, SslKind kind, std::uint64_t global_seed,
                         const SslSink& sink) {
  SslGenStats stats;
  std::map<std::string, std::uint64_t> next_ordinal;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ParseError perr;
    const auto rec = parse_record(line, &perr);
    if (!rec) {
      throw DataError("line " + std::to_string(line_no) + ": " + perr.code + ": " + perr.message);
    }
    stats.read += 1;
    const std::uint64_t ordinal = next_ordinal[rec->dataset]++;
    Rng rng(record_seed(global_seed, rec->dataset, ordinal, kind));
    SslOutcome out =
        kind == SslKind::reo ? make_reo(*rec, rng) : make_clo(*rec, rng, nullptr);
    if (out.skip != SslSkip::none) {
      stats.skipped[static_cast<std::size_t>(out.skip)] += 1;
      continue;
    }
    stats.emitted += 1;
    sink(*out.record, out.provenance, rec->dataset, ordinal);
  }
  return stats;
}

}  // namespace unidial
