#pragma once

#include "agcam/eval/question_set.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace agcam::eval {

enum class NumberPick { kFirst, kLast };

struct ParseOptions {
    NumberPick pick = NumberPick::kFirst;
};

struct ParsedAnswer {
    AnswerKind kind = AnswerKind::kNumeric;
    std::optional<double> number;       // numeric keys
    std::string normalized;             // lowercased, punctuation stripped
    std::optional<std::string> matched; // accepted string found, if any
    bool unparseable = false;           // numeric key, no number in the response
};

// Numeric keys take the first (or last) number token, with thousands
// separators removed and unit text ignored; a percentage response stays on the
// percent scale. Categorical and boolean keys look for a whole-word occurrence
// of an accepted string in the normalized response.
ParsedAnswer parse_answer(std::string_view raw_response, const AnswerKey &key, const ParseOptions &options = {});

// Numeric: |parsed - value| <= tolerance (closed). Otherwise: a match was found.
bool grade(const ParsedAnswer &parsed, const AnswerKey &key);

// Lowercase, punctuation replaced by spaces, whitespace collapsed.
std::string normalize_text(std::string_view text);

} // namespace agcam::eval
