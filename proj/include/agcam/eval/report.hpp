#pragma once

#include "agcam/adapter/model_handle.hpp"
#include "agcam/eval/client.hpp"
#include "agcam/eval/grading.hpp"
#include "agcam/eval/question_set.hpp"

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace agcam::eval {

struct ResponseRecord {
    int run_index = 0;
    std::string raw_response;
    std::optional<double> parsed_number;
    std::string parsed_text;
    bool correct = false;
    bool unparseable = false;
    std::string error; // set when generation failed for this run
};

struct QuestionResult {
    std::string question_id;
    std::vector<ResponseRecord> runs;
    double mean = 0.0; // correct runs / n_runs
};

struct EvalReport {
    int schema_version = 1;
    std::string model_id;
    std::string params = "?";
    std::string set_id;
    int n_runs = 0;
    GenerationConfig decoding;
    std::vector<QuestionResult> questions;
    double overall_mean = 0.0;
};

struct EvalOptions {
    int workers = 4; // only used for clients that are concurrent_safe()
    ParseOptions parse;
    std::string params = "?";
};

// n_runs generations per question; run r uses seed + r when a seed is set.
// Failures are recorded per run and never abort the sweep.
EvalReport run_eval(AnswerClient &client, const QuestionSet &set, int n_runs, const GenerationConfig &decoding,
                    const EvalOptions &options = {});

enum class ReportFormat { kJson, kCsv, kMarkdownTable };

nlohmann::json to_json(const EvalReport &report);
EvalReport report_from_json(const nlohmann::json &doc);
std::string to_csv(const EvalReport &report);
// | Model | #Params | Q1 | ... | Qn |, one data row per report.
std::string to_markdown_table(const EvalReport &report);

std::string render_report(const EvalReport &report, ReportFormat format);
void export_report(const EvalReport &report, ReportFormat format, const std::filesystem::path &path);
// report.json, report.csv and report.md under `dir`.
void write_report_files(const EvalReport &report, const std::filesystem::path &dir);
EvalReport load_report(const std::filesystem::path &path);

nlohmann::json to_json(const GenerationConfig &config);
GenerationConfig generation_config_from_json(const nlohmann::json &doc);

} // namespace agcam::eval
