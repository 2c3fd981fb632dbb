#pragma once

#include "agcam/adapter/model_handle.hpp"
#include "agcam/core/saliency.hpp"

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace agcam::promptlab {

using TermMap = std::vector<std::pair<std::string, std::string>>; // jargon -> plain

struct TermMatch {
    std::string original;    // text as it appeared in the question
    std::string replacement; // capitalization-adjusted replacement
    std::size_t position;    // byte offset in the input
};

struct Substitution {
    std::string text;
    std::vector<TermMatch> matches;
};

// Whole-word, case-insensitive replacement. Longer terms win when they
// overlap. A capitalized or all-caps source word keeps that shape.
Substitution substitute_terms(std::string_view question, const TermMap &terms);

// question + " Steps: " + steps, each ending in a period, space separated.
// Throws EmptySteps.
std::string add_steps(std::string_view question, const std::vector<std::string> &steps);

enum class VariantKind { kTerminology, kSteps, kCustom };

std::string_view to_string(VariantKind kind);

struct PromptVariant {
    std::string variant_id;
    std::string question_id;
    VariantKind kind = VariantKind::kCustom;
    std::string base_text;
    std::string text;
    std::vector<TermMatch> matches; // terminology only
};

// [{"id"?, "base_question_id", "transform": {"kind": "terminology", "terms": {...}}
//   | {"kind": "steps", "steps": [...]} | {"kind": "custom", "text": "..."}}]
// An object with a "variants" array is accepted too.
struct VariantSpec {
    std::string variant_id;
    std::string question_id;
    VariantKind kind = VariantKind::kCustom;
    TermMap terms;
    std::vector<std::string> steps;
    std::string text;
};

std::vector<VariantSpec> parse_variant_manifest(const nlohmann::json &doc);
std::vector<VariantSpec> load_variant_manifest(const std::filesystem::path &path);

PromptVariant apply_variant(const VariantSpec &spec, std::string_view base_question);

struct SideOutcome {
    std::string prompt;
    std::vector<core::SaliencyResult> results;
    std::optional<std::string> answer;
    std::string error; // non-empty when this side failed
};

struct Comparison {
    SideOutcome base;
    SideOutcome variant;
    // variant - base per result pair over the normalized grid; present only
    // when both sides succeeded with the same number of selected tokens.
    std::optional<std::vector<std::vector<double>>> heat_delta;
};

// Runs saliency (and, if `generation` is given, an answer) for both prompts.
// A failure on one side is recorded there and does not stop the other.
Comparison compare_variants(ModelHandle &handle, const Image &image, std::string_view base_prompt,
                            std::string_view variant_prompt, const core::SaliencyRequest &request,
                            const std::optional<GenerationConfig> &generation = std::nullopt);

nlohmann::json to_json(const Comparison &comparison);

} // namespace agcam::promptlab
