#include "unidial/linearize.hpp"

#include "unidial/knowledge.hpp"

namespace unidial {

namespace {

void append_part(std::string& out, std::string_view part) {
  if (part.empty()) return;
  if (!out.empty()) out.push_back(' ');
  out.append(part);
}

// First occurrence of `marker` delimited by spaces (or the string ends).
// Payloads cannot contain markers, so the first hit is the segment boundary.
std::size_t find_marker(std::string_view s, std::string_view marker) {
  std::size_t pos = 0;
  while ((pos = s.find(marker, pos)) != std::string_view::npos) {
    const bool left_ok = pos == 0 || s[pos - 1] == ' ';
    const std::size_t end = pos + marker.size();
    const bool right_ok = end == s.size() || s[end] == ' ';
    if (left_ok && right_ok) return pos;
    pos += 1;
  }
  return std::string_view::npos;
}

std::string_view trim_spaces(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  return s;
}

}  // namespace

std::string dialogue_text(const DialogueHistory& turns, const TemplateConfig& tpl) {
  std::string out;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (i > 0) {
      out.push_back(' ');
      out.append(tpl.sep_marker);
      out.push_back(' ');
    }
    out.append(turns[i].speaker.label());
    out.append(": ");
    out.append(turns[i].text);
  }
  return out;
}

std::string linearize_input(const UnifiedRecord& r, const TemplateConfig& tpl) {
  std::string out;
  append_part(out, to_string(r.task));
  append_part(out, r.task_definition);
  if (r.knowledge.kind != KnowledgeForm::Kind::none) {
    append_part(out, tpl.know_marker);
    append_part(out, serialize_knowledge(r.knowledge));
  }
  if (!r.dialogue.empty()) {
    append_part(out, tpl.dial_marker);
    append_part(out, dialogue_text(r.dialogue, tpl));
  }
  return out;
}

std::optional<LinearizedView> delinearize(std::string_view input, const TemplateConfig& tpl) {
  input = trim_spaces(input);
  if (input.empty() || input.front() != '[') return std::nullopt;
  const std::size_t tok_end = input.find(']');
  if (tok_end == std::string_view::npos) return std::nullopt;

  LinearizedView view;
  view.task_token = std::string(input.substr(0, tok_end + 1));
  if (!parse_task_token(view.task_token)) return std::nullopt;

  std::string_view rest = input.substr(tok_end + 1);
  const std::size_t know_pos = find_marker(rest, tpl.know_marker);
  const std::size_t dial_pos = find_marker(rest, tpl.dial_marker);
  if (know_pos != std::string_view::npos && dial_pos != std::string_view::npos &&
      dial_pos < know_pos) {
    return std::nullopt;  // segments out of template order
  }

  const std::size_t def_end = std::min(know_pos, dial_pos);
  view.task_definition = std::string(trim_spaces(rest.substr(0, std::min(def_end, rest.size()))));

  if (know_pos != std::string_view::npos) {
    const std::size_t begin = know_pos + tpl.know_marker.size();
    const std::size_t end = dial_pos == std::string_view::npos ? rest.size() : dial_pos;
    view.knowledge_text = std::string(trim_spaces(rest.substr(begin, end - begin)));
  }
  if (dial_pos != std::string_view::npos) {
    const std::size_t begin = dial_pos + tpl.dial_marker.size();
    view.dialogue = std::string(trim_spaces(rest.substr(begin)));

    std::string_view d = *view.dialogue;
    const std::string sep = " " + tpl.sep_marker + " ";
    std::size_t pos = 0;
    while (true) {
      const std::size_t hit = d.find(sep, pos);
      const std::string_view turn =
          hit == std::string_view::npos ? d.substr(pos) : d.substr(pos, hit - pos);
      const std::size_t colon = turn.find(": ");
      if (colon == std::string_view::npos) {
        view.turns.emplace_back("", std::string(turn));
      } else {
        view.turns.emplace_back(std::string(turn.substr(0, colon)),
                                std::string(turn.substr(colon + 2)));
      }
      if (hit == std::string_view::npos) break;
      pos = hit + sep.size();
    }
  }
  return view;
}

}  // namespace unidial
