#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "unidial/record.hpp"

namespace unidial {

// Canonical text rendering of a knowledge form:
//   none    -> ""
//   text    -> the normalized text
//   pairs   -> "key = value ; key = value"
//   schema  -> "table(col1, col2) | table(col1)"
//   triples -> "( head | relation | tail ) | ( head | relation | tail )"
// Ordering is caller-supplied and preserved. Payload normalization removes the
// reserved separator characters, so for valid inputs the rendering is
// reversible within each kind.
std::string serialize_knowledge(const KnowledgeForm& k);

// Reference parser for the canonical rendering. The kind must be supplied;
// the flat text does not carry it. Returns nullopt on text that serialization
// cannot produce for that kind.
std::optional<KnowledgeForm> parse_knowledge(std::string_view text, KnowledgeForm::Kind kind);

}  // namespace unidial
