#include "unidial/knowledge.hpp"

#include <vector>

namespace unidial {

namespace {

std::vector<std::string> split_on(std::string_view s, std::string_view sep) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (true) {
    const std::size_t hit = s.find(sep, pos);
    if (hit == std::string_view::npos) {
      parts.emplace_back(s.substr(pos));
      return parts;
    }
    parts.emplace_back(s.substr(pos, hit - pos));
    pos = hit + sep.size();
  }
}

}  // namespace

std::string serialize_knowledge(const KnowledgeForm& k) {
  using K = KnowledgeForm::Kind;
  switch (k.kind) {
    case K::none:
      return "";
    case K::text:
      return k.text;
    case K::pairs: {
      std::string out;
      for (std::size_t i = 0; i < k.pairs.size(); ++i) {
        if (i > 0) out += " ; ";
        out += k.pairs[i].first;
        out += " = ";
        out += k.pairs[i].second;
      }
      return out;
    }
    case K::schema: {
      std::string out;
      for (std::size_t i = 0; i < k.tables.size(); ++i) {
        if (i > 0) out += " | ";
        out += k.tables[i].name;
        out += "(";
        for (std::size_t c = 0; c < k.tables[i].columns.size(); ++c) {
          if (c > 0) out += ", ";
          out += k.tables[i].columns[c];
        }
        out += ")";
      }
      return out;
    }
    case K::triples: {
      std::string out;
      for (std::size_t i = 0; i < k.triples.size(); ++i) {
        if (i > 0) out += " | ";
        out += "( ";
        out += k.triples[i].head;
        out += " | ";
        out += k.triples[i].relation;
        out += " | ";
        out += k.triples[i].tail;
        out += " )";
      }
      return out;
    }
  }
  return "";
}

std::optional<KnowledgeForm> parse_knowledge(std::string_view text, KnowledgeForm::Kind kind) {
  using K = KnowledgeForm::Kind;
  switch (kind) {
    case K::none:
      if (!text.empty()) return std::nullopt;
      return KnowledgeForm::none();
    case K::text:
      if (text.empty()) return std::nullopt;
      return KnowledgeForm::unstructured(text);
    case K::pairs: {
      if (text.empty()) return std::nullopt;
      std::vector<std::pair<std::string, std::string>> pairs;
      for (const std::string& part : split_on(text, " ; ")) {
        const std::size_t eq = part.find(" = ");
        if (eq == std::string::npos) return std::nullopt;
        pairs.emplace_back(part.substr(0, eq), part.substr(eq + 3));
      }
      return KnowledgeForm::semi_structured(std::move(pairs));
    }
    case K::schema: {
      if (text.empty()) return std::nullopt;
      std::vector<KnowledgeForm::Table> tables;
      for (const std::string& part : split_on(text, " | ")) {
        const std::size_t open = part.find('(');
        if (open == std::string::npos || part.empty() || part.back() != ')') return std::nullopt;
        KnowledgeForm::Table t;
        t.name = part.substr(0, open);
        const std::string inner = part.substr(open + 1, part.size() - open - 2);
        if (!inner.empty()) {
          for (std::string& col : split_on(inner, ", ")) t.columns.push_back(std::move(col));
        }
        tables.push_back(std::move(t));
      }
      return KnowledgeForm::db_schema(std::move(tables));
    }
    case K::triples: {
      if (text.empty()) return std::nullopt;
      std::vector<KnowledgeForm::Triple> triples;
      // Triples are "( h | r | t )" joined by " | "; slots contain neither
      // parentheses nor pipes, so groups can be scanned directly.
      std::size_t pos = 0;
      while (pos < text.size()) {
        if (text.compare(pos, 2, "( ") != 0) return std::nullopt;
        const std::size_t close = text.find(" )", pos);
        if (close == std::string_view::npos) return std::nullopt;
        const std::string inner(text.substr(pos + 2, close - pos - 2));
        const std::vector<std::string> slots = split_on(inner, " | ");
        if (slots.size() != 3) return std::nullopt;
        triples.push_back({slots[0], slots[1], slots[2]});
        pos = close + 2;
        if (pos == text.size()) break;
        if (text.compare(pos, 3, " | ") != 0) return std::nullopt;
        pos += 3;
      }
      if (triples.empty()) return std::nullopt;
      return KnowledgeForm::kg_triples(std::move(triples));
    }
  }
  return std::nullopt;
}

}  // namespace unidial
