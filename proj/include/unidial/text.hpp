#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace unidial {

// Markers reserved by the linearized input template. normalize_payload strips
// them from payload text so segment parsing stays unambiguous. The mask token
// is deliberately not stripped: masked dialogue turns must survive
// re-serialization and re-ingestion.
inline constexpr std::string_view kKnowMarker = "[know]";
inline constexpr std::string_view kDialMarker = "[dial]";
inline constexpr std::string_view kSepMarker = "[sep]";
inline constexpr std::string_view kMaskToken = "[mask]";

// Unicode NFC. Pure-ASCII input is returned unchanged without touching ICU.
std::string nfc(std::string_view in);

// NFC, then ASCII whitespace runs (including newlines) collapsed to single
// spaces, leading/trailing whitespace removed.
std::string normalize_text(std::string_view in);

// normalize_text plus removal of the reserved segment markers. Removal is run
// to a fixpoint ("[se[sep]p]" collapses fully) and whitespace is re-collapsed.
std::string normalize_payload(std::string_view in);

// normalize_payload with the characters in `kill` additionally replaced by
// spaces before the final collapse. Used for knowledge payload fields whose
// serialization reserves separator characters.
std::string normalize_payload_killing(std::string_view in, std::string_view kill);

bool is_ascii_space(char c);
std::string collapse_ws_ascii(std::string_view in);
std::string to_lower_ascii(std::string_view in);

// Whitespace tokenization over an already normalized string.
std::vector<std::string_view> split_ws(std::string_view in);

}  // namespace unidial
