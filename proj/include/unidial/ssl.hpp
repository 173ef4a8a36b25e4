#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "unidial/record.hpp"
#include "unidial/rng.hpp"

namespace unidial {

// Byte offsets into one turn's (normalized) text, end exclusive.
struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string surface;

  friend bool operator==(const EntitySpan&, const EntitySpan&) = default;
};

// Deterministic stand-in for a learned extractor. Matches, longest first and
// left to right: capitalized token runs (sentence-initial runs only when at
// least two tokens long; runs never cross a sentence boundary), all-digit
// tokens, and weekday / month names in any case. Returned spans are
// non-overlapping and sorted by start.
std::vector<EntitySpan> extract_entities(std::string_view text);

enum class SslKind : std::uint8_t { reo, clo };

std::string_view to_string(SslKind k);
std::optional<SslKind> parse_ssl_kind(std::string_view s);

// One mask occurrence: masks are numbered in dialogue order; span locates the
// original surface inside turn `turn_index`; knowledge_position is where the
// surface landed in the permuted entity list.
struct CloAlignment {
  std::size_t turn_index = 0;
  EntitySpan span;
  std::size_t knowledge_position = 0;

  friend bool operator==(const CloAlignment&, const CloAlignment&) = default;
};

struct SslProvenance {
  SslKind kind = SslKind::reo;
  std::vector<std::size_t> permutation;  // reo: output position -> original index
  std::vector<CloAlignment> alignments;  // clo: one entry per mask token

  friend bool operator==(const SslProvenance&, const SslProvenance&) = default;
};

enum class SslSkip : std::uint8_t {
  none,
  too_few_turns,      // reo needs >= 2 turns, clo >= 1
  no_entities,        // clo found nothing to mask
  not_train,          // denoising corpora are built from train splits only
  unsupported_source, // refuses to re-noise reo/clo records
  preexisting_mask,   // clo input already contains the mask token
};

inline constexpr std::size_t kSslSkipCount = 6;
std::string_view to_string(SslSkip s);

struct SslOutcome {
  std::optional<UnifiedRecord> record;  // set iff skip == none
  SslProvenance provenance;
  SslSkip skip = SslSkip::none;
};

// Both generators are pure in (record, rng seed). The source record's split
// and dataset are preserved; its task token is kept in meta["source_task"].
SslOutcome make_reo(const UnifiedRecord& r, Rng& rng);

// `entities` bypasses the extractor with pre-annotated spans, one vector per
// turn (must match the turn count). Spans must be in bounds, sorted and
// non-overlapping; surfaces, if set, must match the text.
SslOutcome make_clo(const UnifiedRecord& r, Rng& rng,
                    const std::vector<std::vector<EntitySpan>>* entities = nullptr);

// True iff the provenance reconstructs the record's target from its corrupted
// dialogue: inverse permutation for reo, mask substitution for clo. For clo
// the alignment spans, not the knowledge list order, drive reconstruction.
bool verify_ssl(const UnifiedRecord& record, const SslProvenance& prov);

// Seed for one source record, stable under input reordering as long as the
// (dataset, ordinal) identity is preserved.
inline std::uint64_t record_seed(std::uint64_t global_seed, std::string_view dataset,
                                 std::uint64_t ordinal, SslKind kind) {
  return derive_seed(global_seed, dataset, ordinal, to_string(kind));
}

// Sidecar line: {"dataset", "ordinal", "kind", "permutation" | "alignments"}.
ojson provenance_to_json(std::string_view dataset, std::uint64_t ordinal,
                         const SslProvenance& prov);
struct ProvenanceEntry {
  std::string dataset;
  std::uint64_t ordinal = 0;
  SslProvenance provenance;
};
std::optional<ProvenanceEntry> provenance_from_json(const ojson& j);

struct SslGenStats {
  std::uint64_t read = 0;
  std::uint64_t emitted = 0;
  std::array<std::uint64_t, kSslSkipCount> skipped{};  // indexed by SslSkip

  std::uint64_t skipped_total() const;
};

using SslSink = std::function<void(const UnifiedRecord& out, const SslProvenance& prov,
                                   std::string_view dataset, std::uint64_t ordinal)>;

// Streams a unified JSONL corpus and emits one denoising record per eligible
// source record. Ordinals count input records per dataset in file order and
// seed each generator via record_seed(). Throws DataError on malformed lines.
SslGenStats generate_ssl(std::istream& in, SslKind kind, std::uint64_t global_seed,
                         const SslSink& sink);

}  // namespace unidial
