#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace agcam::eval {

enum class AnswerKind { kNumeric, kCategorical, kBoolean };

std::string_view to_string(AnswerKind kind);

struct AnswerKey {
    AnswerKind kind = AnswerKind::kNumeric;
    double numeric_value = 0.0;
    std::string unit;
    double tolerance = 2.0;
    std::vector<std::string> accepted_strings;
};

enum class QuestionSource { kMiniVlat, kVlat, kCustom };

struct ChartQAInstance {
    std::string id;
    QuestionSource source = QuestionSource::kCustom;
    std::string chart_type;
    std::string task_type;
    std::filesystem::path image_path; // absolute after loading
    std::string question;
    AnswerKey answer_key;
    // Kept for provenance only; never put into a prompt.
    std::vector<std::string> options;
};

struct QuestionSet {
    int schema_version = 1;
    std::string set_id;
    std::filesystem::path source_path;
    std::vector<ChartQAInstance> items;

    const ChartQAInstance *find(std::string_view id) const;
};

// Parses and validates a question-set document. Relative image paths resolve
// against `base_dir`. Throws SchemaError (field = JSON path) or MissingImage.
QuestionSet parse_question_set(const nlohmann::json &doc, const std::filesystem::path &base_dir);
QuestionSet load_question_set(const std::filesystem::path &path);

// "mini-vlat" and "vlat" name the bundled sets; anything else is a path.
QuestionSet resolve_question_set(std::string_view name_or_path);

// Bundled set ids and their file paths.
std::vector<std::pair<std::string, std::filesystem::path>> bundled_question_sets();

nlohmann::json to_json(const ChartQAInstance &item);

} // namespace agcam::eval
