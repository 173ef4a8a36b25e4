#include "unidial/text.hpp"

#include <unicode/errorcode.h>
#include <unicode/normalizer2.h>
#include <unicode/stringpiece.h>
#include <unicode/bytestream.h>

#include <algorithm>
#include <array>

namespace unidial {

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string nfc(std::string_view in) {
  const bool ascii = std::all_of(in.begin(), in.end(),
                                 [](char c) { return static_cast<unsigned char>(c) < 0x80; });
  if (ascii) return std::string(in);

  icu::ErrorCode status;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (status.isFailure() || norm == nullptr) return std::string(in);

  std::string out;
  icu::StringByteSink<std::string> sink(&out);
  norm->normalizeUTF8(0, icu::StringPiece(in.data(), static_cast<int32_t>(in.size())), sink,
                      nullptr, status);
  if (status.isFailure()) return std::string(in);
  return out;
}

std::string collapse_ws_ascii(std::string_view in) {
  std::string out;
  out.reserve(in.size());
  bool pending_space = false;
  for (char c : in) {
    if (is_ascii_space(c)) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

std::string normalize_text(std::string_view in) {
  return collapse_ws_ascii(nfc(in));
}

namespace {

constexpr std::array<std::string_view, 3> kReservedMarkers = {kKnowMarker, kDialMarker,
                                                              kSepMarker};

// Erases reserved markers until none remain; erasure can splice new ones.
std::string strip_markers(std::string s) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::string_view m : kReservedMarkers) {
      std::size_t pos;
      while ((pos = s.find(m)) != std::string::npos) {
        s.erase(pos, m.size());
        changed = true;
      }
    }
  }
  return s;
}

}  // namespace

std::string normalize_payload(std::string_view in) {
  return collapse_ws_ascii(strip_markers(normalize_text(in)));
}

std::string normalize_payload_killing(std::string_view in, std::string_view kill) {
  std::string s = strip_markers(normalize_text(in));
  for (char& c : s) {
    if (kill.find(c) != std::string_view::npos) c = ' ';
  }
  return collapse_ws_ascii(s);
}

std::string to_lower_ascii(std::string_view in) {
  std::string out(in);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::vector<std::string_view> split_ws(std::string_view in) {
  std::vector<std::string_view> toks;
  std::size_t i = 0;
  while (i < in.size()) {
    while (i < in.size() && is_ascii_space(in[i])) ++i;
    std::size_t j = i;
    while (j < in.size() && !is_ascii_space(in[j])) ++j;
    if (j > i) toks.push_back(in.substr(i, j - i));
    i = j;
  }
  return toks;
}

}  // namespace unidial
