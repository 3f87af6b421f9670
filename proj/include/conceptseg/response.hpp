#ifndef CONCEPTSEG_RESPONSE_HPP
#define CONCEPTSEG_RESPONSE_HPP

#include <string>

#include "conceptseg/geometry.hpp"

namespace conceptseg {

// Structured chain-of-thought response. Canonical tag order:
// <think> <rule> <check> <bbox> <answer>. Think and rule are opaque byte
// strings that must not contain the literal tag tokens; the answer is a
// 1-3 word phrase.
struct StructuredResponse {
  std::string think;
  std::string rule;
  BoxN check;
  BoxN bbox;
  std::string answer;
};

enum class ParseError {
  MissingTag,
  DuplicateTag,
  BadOrder,
  BadBox,
  BadAnswer,
  TrailingGarbage,
};

const char* parse_error_name(ParseError e);

struct ParseOutcome {
  bool ok = false;
  StructuredResponse response;
  ParseError error = ParseError::MissingTag;
};

// Canonical serialization; coordinates are printed with 4 decimals.
std::string serialize_response(const StructuredResponse& r);

// Accepts exactly the canonical tag order with optional whitespace between
// tags; anything else yields the most specific error code. Never throws.
ParseOutcome parse_response(const std::string& text);

// 1 iff the text parses to a structured response.
int format_reward(const std::string& text);

// Loads the canonical instruction template shipped under fixtures/.
std::string load_prompt_template(const std::string& fixtures_dir);

}  // namespace conceptseg

#endif
