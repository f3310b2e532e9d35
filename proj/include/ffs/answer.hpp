#pragma once

#include <cctype>
#include <string>
#include <string_view>

namespace firstfinish {

// Sentinel for "no parseable answer". Parsers never throw; every failure
// collapses to this value.
inline constexpr std::string_view kNoAnswer = "NO_ANSWER";

enum class TaskKind { AimeNumeric, McOption };

struct ParsedAnswer {
  TaskKind kind;
  std::string value;  // "000".."999" | "A".."D" | kNoAnswer

  bool has_answer() const { return value != kNoAnswer; }
};

/// Content of the last "\boxed{...}" in `text`, scanning forward from the
/// last occurrence with a brace-depth counter. Returns kNoAnswer when no box
/// exists or the braces never balance before end of text.
inline std::string extract_last_boxed(std::string_view text) {
  constexpr std::string_view kBox = "\\boxed{";
  const auto last = text.rfind(kBox);
  if (last == std::string_view::npos) return std::string(kNoAnswer);
  int depth = 0;
  const std::size_t start = last + kBox.size();
  std::size_t curr = start;
  while (depth >= 0 && curr < text.size()) {
    if (text[curr] == '{') {
      ++depth;
    } else if (text[curr] == '}') {
      --depth;
    }
    ++curr;
  }
  if (depth >= 0) return std::string(kNoAnswer);
  return std::string(text.substr(start, curr - 1 - start));
}

/// AIME normalization: boxed content must be 0-3 ASCII digits; left-padded
/// with zeros to exactly 3. Anything else is kNoAnswer.
inline ParsedAnswer normalize_aime(std::string_view text) {
  std::string ans = extract_last_boxed(text);
  if (ans == kNoAnswer) return {TaskKind::AimeNumeric, std::string(kNoAnswer)};
  bool all_digits = true;
  for (char c : ans) {
    if (c < '0' || c > '9') all_digits = false;
  }
  if (!all_digits || ans.size() > 3) {
    return {TaskKind::AimeNumeric, std::string(kNoAnswer)};
  }
  return {TaskKind::AimeNumeric, std::string(3 - ans.size(), '0') + ans};
}

/// Multiple-choice normalization: last non-greedy "\boxed{...}" match (the
/// content may not span a newline or contain '}'), stripped of surrounding
/// whitespace and parentheses, uppercased; accepts exactly one of A-D.
inline ParsedAnswer normalize_mc(std::string_view text) {
  constexpr std::string_view kBox = "\\boxed{";
  std::string_view content;
  bool found = false;
  std::size_t pos = 0;
  while (true) {
    const auto at = text.find(kBox, pos);
    if (at == std::string_view::npos) break;
    const std::size_t inner = at + kBox.size();
    std::size_t close = std::string_view::npos;
    for (std::size_t i = inner; i < text.size(); ++i) {
      if (text[i] == '\n') break;
      if (text[i] == '}') {
        close = i;
        break;
      }
    }
    if (close == std::string_view::npos) {
      pos = at + 1;  // failed match; the scan resumes past this occurrence
      continue;
    }
    content = text.substr(inner, close - inner);
    found = true;
    pos = close + 1;  // non-overlapping matches
  }
  if (!found) return {TaskKind::McOption, std::string(kNoAnswer)};

  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  content = trim(content);
  if (content.size() >= 2 && content.front() == '(' && content.back() == ')') {
    content = trim(content.substr(1, content.size() - 2));
  }
  if (content.size() != 1) return {TaskKind::McOption, std::string(kNoAnswer)};
  const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(content[0])));
  if (c < 'A' || c > 'D') return {TaskKind::McOption, std::string(kNoAnswer)};
  return {TaskKind::McOption, std::string(1, c)};
}

inline ParsedAnswer parse_answer(TaskKind kind, std::string_view text) {
  return kind == TaskKind::AimeNumeric ? normalize_aime(text) : normalize_mc(text);
}

/// Exact string match; kNoAnswer never scores.
inline bool score(const ParsedAnswer& parsed, std::string_view truth) {
  return parsed.has_answer() && parsed.value == truth;
}

}  // namespace firstfinish
