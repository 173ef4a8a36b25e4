#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "unidial/record.hpp"
#include "unidial/text.hpp"

namespace unidial {

// Marker tokens of the linearized input template. The defaults are the
// reserved markers that payload normalization strips; overriding them is
// meant for experiments only and voids the reversibility guarantee.
struct TemplateConfig {
  std::string know_marker = std::string(kKnowMarker);
  std::string dial_marker = std::string(kDialMarker);
  std::string sep_marker = std::string(kSepMarker);
  std::string mask_token = std::string(kMaskToken);
};

// "speaker: text" turns joined by the separator marker:
//   "user: cheap place please [sep] system: which area?"
std::string dialogue_text(const DialogueHistory& turns, const TemplateConfig& tpl = {});

// Full model input:
//   <task> <definition> [know] <knowledge> [dial] <dialogue>
// The [know] segment is omitted when knowledge is none, the [dial] segment
// when the history is empty. Callers must pass a record that validates ok.
std::string linearize_input(const UnifiedRecord& r, const TemplateConfig& tpl = {});

// Reference de-linearizer. Recovers the task token, segment boundaries and
// the per-turn structure from a linearized string; payload normalization
// guarantees markers cannot occur inside payload text.
struct LinearizedView {
  std::string task_token;
  std::string task_definition;
  std::optional<std::string> knowledge_text;  // present iff a [know] segment exists
  std::optional<std::string> dialogue;        // present iff a [dial] segment exists
  std::vector<std::pair<std::string, std::string>> turns;  // (speaker label, text)

  std::size_t turn_count() const { return turns.size(); }
};

std::optional<LinearizedView> delinearize(std::string_view input, const TemplateConfig& tpl = {});

}  // namespace unidial
