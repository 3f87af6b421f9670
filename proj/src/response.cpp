#include "conceptseg/response.hpp"

#include <array>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

namespace conceptseg {

namespace {

constexpr int kTagCount = 5;
const std::array<const char*, kTagCount> kOpenTags = {"<think>", "<rule>", "<check>", "<bbox>",
                                                      "<answer>"};
const std::array<const char*, kTagCount> kCloseTags = {"</think>", "</rule>", "</check>",
                                                       "</bbox>", "</answer>"};

std::string format_box(const BoxN& b) {
  char buf[80];
  std::snprintf(buf, sizeof(buf), "[%.4f, %.4f, %.4f, %.4f]", b.x1, b.y1, b.x2, b.y2);
  return buf;
}

bool whitespace_only(const std::string& s, std::size_t from, std::size_t to) {
  for (std::size_t i = from; i < to; ++i)
    if (!std::isspace(static_cast<unsigned char>(s[i]))) return false;
  return true;
}

std::size_t count_occurrences(const std::string& s, const std::string& token,
                              std::size_t* first = nullptr) {
  std::size_t count = 0;
  std::size_t pos = s.find(token);
  if (first) *first = pos;
  while (pos != std::string::npos) {
    ++count;
    pos = s.find(token, pos + token.size());
  }
  return count;
}

bool parse_box_content(const std::string& s, BoxN& out) {
  // Expected: [x1, y1, x2, y2] with optional whitespace.
  std::size_t i = 0;
  auto skip_ws = [&] {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  };
  skip_ws();
  if (i >= s.size() || s[i] != '[') return false;
  ++i;
  double vals[4];
  for (int v = 0; v < 4; ++v) {
    skip_ws();
    const char* start = s.c_str() + i;
    char* end = nullptr;
    vals[v] = std::strtod(start, &end);
    if (end == start) return false;
    i += static_cast<std::size_t>(end - start);
    skip_ws();
    if (v < 3) {
      if (i >= s.size() || s[i] != ',') return false;
      ++i;
    }
  }
  if (i >= s.size() || s[i] != ']') return false;
  ++i;
  skip_ws();
  if (i != s.size()) return false;
  out = BoxN{vals[0], vals[1], vals[2], vals[3]};
  return out.valid();
}

int word_count(const std::string& s) {
  int n = 0;
  bool in_word = false;
  for (char c : s) {
    const bool ws = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!ws && !in_word) ++n;
    in_word = !ws;
  }
  return n;
}

ParseOutcome fail(ParseError e) {
  ParseOutcome o;
  o.ok = false;
  o.error = e;
  return o;
}

}  // namespace

const char* parse_error_name(ParseError e) {
  switch (e) {
    case ParseError::MissingTag: return "MissingTag";
    case ParseError::DuplicateTag: return "DuplicateTag";
    case ParseError::BadOrder: return "BadOrder";
    case ParseError::BadBox: return "BadBox";
    case ParseError::BadAnswer: return "BadAnswer";
    case ParseError::TrailingGarbage: return "TrailingGarbage";
  }
  return "?";
}

std::string serialize_response(const StructuredResponse& r) {
  std::ostringstream out;
  out << "<think>" << r.think << "</think> <rule>" << r.rule << "</rule> <check>"
      << format_box(r.check) << "</check> <bbox>" << format_box(r.bbox) << "</bbox> <answer>"
      << r.answer << "</answer>";
  return out.str();
}

ParseOutcome parse_response(const std::string& text) {
  // Structural pass: every tag exactly once, in the canonical order.
  std::array<std::size_t, kTagCount> open_pos{}, close_pos{};
  for (int t = 0; t < kTagCount; ++t) {
    const std::size_t n_open = count_occurrences(text, kOpenTags[t], &open_pos[t]);
    const std::size_t n_close = count_occurrences(text, kCloseTags[t], &close_pos[t]);
    if (n_open == 0 || n_close == 0) return fail(ParseError::MissingTag);
    if (n_open > 1 || n_close > 1) return fail(ParseError::DuplicateTag);
  }
  std::vector<std::pair<std::size_t, std::size_t>> spans;  // token start, token end
  for (int t = 0; t < kTagCount; ++t) {
    spans.emplace_back(open_pos[t], open_pos[t] + std::string(kOpenTags[t]).size());
    spans.emplace_back(close_pos[t], close_pos[t] + std::string(kCloseTags[t]).size());
  }
  for (std::size_t i = 1; i < spans.size(); ++i)
    if (spans[i].first < spans[i - 1].second) return fail(ParseError::BadOrder);

  // Between a close tag and the next open tag only whitespace is allowed;
  // the same holds before the first tag and after the last.
  if (!whitespace_only(text, 0, spans.front().first)) return fail(ParseError::TrailingGarbage);
  for (int t = 0; t + 1 < kTagCount; ++t)
    if (!whitespace_only(text, spans[static_cast<std::size_t>(2 * t + 1)].second,
                         spans[static_cast<std::size_t>(2 * t + 2)].first))
      return fail(ParseError::TrailingGarbage);
  if (!whitespace_only(text, spans.back().second, text.size()))
    return fail(ParseError::TrailingGarbage);

  auto body = [&](int t) {
    const std::size_t from = spans[static_cast<std::size_t>(2 * t)].second;
    const std::size_t to = spans[static_cast<std::size_t>(2 * t + 1)].first;
    return text.substr(from, to - from);
  };

  ParseOutcome o;
  o.response.think = body(0);
  o.response.rule = body(1);
  if (!parse_box_content(body(2), o.response.check)) return fail(ParseError::BadBox);
  if (!parse_box_content(body(3), o.response.bbox)) return fail(ParseError::BadBox);
  o.response.answer = body(4);
  const int words = word_count(o.response.answer);
  if (words < 1 || words > 3) return fail(ParseError::BadAnswer);
  o.ok = true;
  return o;
}

int format_reward(const std::string& text) { return parse_response(text).ok ? 1 : 0; }

std::string load_prompt_template(const std::string& fixtures_dir) {
  const std::string path = fixtures_dir + "/prompt_template.txt";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open prompt template: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace conceptseg
