#include "agcam/eval/grading.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>
#include <vector>

namespace agcam::eval {

namespace {

bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// All number tokens in reading order: optional sign, digits with optional
// comma-grouped thousands, optional decimal part.
std::vector<double> number_tokens(std::string_view text) {
    std::vector<double> out;
    std::size_t i = 0;
    while (i < text.size()) {
        const bool starts_digit = is_digit(text[i]);
        const bool starts_decimal = text[i] == '.' && i + 1 < text.size() && is_digit(text[i + 1]) &&
                                    (i == 0 || !is_digit(text[i - 1]));
        if (!starts_digit && !starts_decimal) {
            ++i;
            continue;
        }
        if (i > 0 && is_alnum(text[i - 1]) && !is_digit(text[i - 1])) {
            // Digits glued to a word ("Q1", "mp3") are not answers.
            while (i < text.size() && (is_alnum(text[i]))) ++i;
            continue;
        }
        const bool negative = i > 0 && text[i - 1] == '-' && (i < 2 || !is_alnum(text[i - 2]));
        std::string digits;
        std::size_t j = i;
        while (j < text.size()) {
            if (is_digit(text[j])) {
                digits += text[j++];
            } else if (text[j] == ',' && !digits.empty() && j + 3 < text.size() && is_digit(text[j + 1]) &&
                       is_digit(text[j + 2]) && is_digit(text[j + 3]) &&
                       (j + 4 == text.size() || !is_digit(text[j + 4]))) {
                j += 1; // thousands separator
            } else {
                break;
            }
        }
        if (j + 1 < text.size() && text[j] == '.' && is_digit(text[j + 1])) {
            digits += text[j++];
            while (j < text.size() && is_digit(text[j])) digits += text[j++];
        }
        if (!digits.empty()) {
            const double value = std::stod(digits.front() == '.' ? "0" + digits : digits);
            out.push_back(negative ? -value : value);
        }
        i = std::max(j, i + 1);
    }
    return out;
}

bool contains_whole_words(const std::string &haystack, const std::string &needle) {
    if (needle.empty()) return false;
    std::size_t pos = 0;
    while ((pos = haystack.find(needle, pos)) != std::string::npos) {
        const bool left = pos == 0 || haystack[pos - 1] == ' ';
        const std::size_t end = pos + needle.size();
        const bool right = end == haystack.size() || haystack[end] == ' ';
        if (left && right) return true;
        ++pos;
    }
    return false;
}

} // namespace

std::string normalize_text(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (char raw : text) {
        const auto c = static_cast<unsigned char>(raw);
        if (std::isalnum(c) || c >= 0x80) {
            if (pending_space && !out.empty()) out += ' ';
            pending_space = false;
            out += static_cast<char>(std::tolower(c));
        } else {
            pending_space = true;
        }
    }
    return out;
}

ParsedAnswer parse_answer(std::string_view raw_response, const AnswerKey &key, const ParseOptions &options) {
    ParsedAnswer parsed;
    parsed.kind = key.kind;
    parsed.normalized = normalize_text(raw_response);
    if (key.kind == AnswerKind::kNumeric) {
        const auto numbers = number_tokens(raw_response);
        if (numbers.empty()) {
            parsed.unparseable = true;
        } else {
            parsed.number = options.pick == NumberPick::kFirst ? numbers.front() : numbers.back();
        }
        return parsed;
    }
    for (const auto &accepted : key.accepted_strings) {
        const std::string needle = normalize_text(accepted);
        if (contains_whole_words(parsed.normalized, needle)) {
            parsed.matched = needle;
            break;
        }
    }
    return parsed;
}

bool grade(const ParsedAnswer &parsed, const AnswerKey &key) {
    if (key.kind == AnswerKind::kNumeric) {
        if (parsed.unparseable || !parsed.number) return false;
        // Closed interval; the slack only absorbs binary rounding of decimal keys.
        const double slack = 1e-9 * std::max({1.0, std::abs(key.numeric_value), key.tolerance});
        return std::abs(*parsed.number - key.numeric_value) <= key.tolerance + slack;
    }
    return parsed.matched.has_value();
}

} // namespace agcam::eval
