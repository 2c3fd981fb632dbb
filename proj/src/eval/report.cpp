#include "agcam/eval/report.hpp"

#include "agcam/error.hpp"

#include <atomic>
#include <fmt/format.h>
#include <fstream>
#include <sstream>
#include <thread>

namespace agcam::eval {

namespace fs = std::filesystem;

nlohmann::json to_json(const GenerationConfig &config) {
    return {{"max_new_tokens", config.max_new_tokens},
            {"temperature", config.temperature},
            {"top_p", config.top_p},
            {"seed", config.seed ? nlohmann::json(*config.seed) : nlohmann::json(nullptr)},
            {"timeout_ms", config.timeout.count()}};
}

GenerationConfig generation_config_from_json(const nlohmann::json &doc) {
    GenerationConfig c;
    c.max_new_tokens = doc.value("max_new_tokens", c.max_new_tokens);
    c.temperature = doc.value("temperature", c.temperature);
    c.top_p = doc.value("top_p", c.top_p);
    if (doc.contains("seed") && !doc.at("seed").is_null()) c.seed = doc.at("seed").get<std::uint64_t>();
    c.timeout = std::chrono::milliseconds(doc.value("timeout_ms", static_cast<long>(c.timeout.count())));
    return c;
}

namespace {

QuestionResult evaluate_question(AnswerClient &client, const ChartQAInstance &item, int n_runs,
                                 const GenerationConfig &decoding, const ParseOptions &parse) {
    QuestionResult result;
    result.question_id = item.id;
    std::optional<Image> image;
    std::string load_error;
    try {
        image = load_image(item.image_path);
    } catch (const std::exception &e) {
        load_error = e.what();
    }

    int correct = 0;
    for (int r = 0; r < n_runs; ++r) {
        ResponseRecord rec;
        rec.run_index = r;
        if (!image) {
            rec.error = load_error;
            result.runs.push_back(std::move(rec));
            continue;
        }
        GenerationConfig run_config = decoding;
        if (decoding.seed) run_config.seed = *decoding.seed + static_cast<std::uint64_t>(r);
        try {
            rec.raw_response = client.generate(*image, item.question, run_config);
            const auto parsed = parse_answer(rec.raw_response, item.answer_key, parse);
            rec.parsed_number = parsed.number;
            rec.parsed_text = parsed.matched.value_or(parsed.normalized);
            rec.unparseable = parsed.unparseable;
            rec.correct = grade(parsed, item.answer_key);
        } catch (const std::exception &e) {
            rec.error = e.what();
        }
        correct += rec.correct ? 1 : 0;
        result.runs.push_back(std::move(rec));
    }
    result.mean = n_runs > 0 ? static_cast<double>(correct) / n_runs : 0.0;
    return result;
}

std::string csv_field(std::string_view text) {
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string format_mean(double mean) {
    auto s = fmt::format("{:.2f}", mean);
    if (s.back() == '0') s.pop_back();
    return s;
}

} // namespace

EvalReport run_eval(AnswerClient &client, const QuestionSet &set, int n_runs, const GenerationConfig &decoding,
                    const EvalOptions &options) {
    if (n_runs < 1) throw Error(ErrorCode::kPreconditionViolation, "runs must be at least 1", "runs");
    decoding.validate();

    EvalReport report;
    report.model_id = client.client_id();
    report.params = options.params;
    report.set_id = set.set_id;
    report.n_runs = n_runs;
    report.decoding = decoding;
    report.questions.resize(set.items.size());

    const auto work = [&](std::size_t i) {
        report.questions[i] = evaluate_question(client, set.items[i], n_runs, decoding, options.parse);
    };
    const int workers = client.concurrent_safe()
                            ? std::clamp(options.workers, 1, std::max<int>(1, static_cast<int>(set.items.size())))
                            : 1;
    if (workers == 1) {
        for (std::size_t i = 0; i < set.items.size(); ++i) work(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < set.items.size(); i = next++) work(i);
            });
        }
    }

    double total = 0.0;
    for (const auto &q : report.questions) total += q.mean;
    report.overall_mean = report.questions.empty() ? 0.0 : total / static_cast<double>(report.questions.size());
    return report;
}

nlohmann::json to_json(const EvalReport &report) {
    nlohmann::json questions = nlohmann::json::array();
    for (const auto &q : report.questions) {
        nlohmann::json runs = nlohmann::json::array();
        for (const auto &r : q.runs) {
            runs.push_back({{"run_index", r.run_index},
                            {"raw_response", r.raw_response},
                            {"parsed_number", r.parsed_number ? nlohmann::json(*r.parsed_number) : nlohmann::json(nullptr)},
                            {"parsed_text", r.parsed_text},
                            {"correct", r.correct},
                            {"unparseable", r.unparseable},
                            {"error", r.error}});
        }
        questions.push_back({{"question_id", q.question_id}, {"mean", q.mean}, {"runs", runs}});
    }
    return {{"schema_version", report.schema_version},
            {"model_id", report.model_id},
            {"params", report.params},
            {"set_id", report.set_id},
            {"n_runs", report.n_runs},
            {"decoding", to_json(report.decoding)},
            {"overall_mean", report.overall_mean},
            {"questions", questions}};
}

EvalReport report_from_json(const nlohmann::json &doc) {
    EvalReport report;
    try {
        report.schema_version = doc.at("schema_version").get<int>();
        if (report.schema_version != 1) {
            throw Error(ErrorCode::kSchemaError, "unsupported report schema_version", "$.schema_version");
        }
        report.model_id = doc.at("model_id").get<std::string>();
        report.params = doc.at("params").get<std::string>();
        report.set_id = doc.at("set_id").get<std::string>();
        report.n_runs = doc.at("n_runs").get<int>();
        report.decoding = generation_config_from_json(doc.at("decoding"));
        report.overall_mean = doc.at("overall_mean").get<double>();
        for (const auto &qj : doc.at("questions")) {
            QuestionResult q;
            q.question_id = qj.at("question_id").get<std::string>();
            q.mean = qj.at("mean").get<double>();
            for (const auto &rj : qj.at("runs")) {
                ResponseRecord r;
                r.run_index = rj.at("run_index").get<int>();
                r.raw_response = rj.at("raw_response").get<std::string>();
                if (!rj.at("parsed_number").is_null()) r.parsed_number = rj.at("parsed_number").get<double>();
                r.parsed_text = rj.at("parsed_text").get<std::string>();
                r.correct = rj.at("correct").get<bool>();
                r.unparseable = rj.at("unparseable").get<bool>();
                r.error = rj.at("error").get<std::string>();
                q.runs.push_back(std::move(r));
            }
            report.questions.push_back(std::move(q));
        }
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorCode::kSchemaError, std::string("malformed report: ") + e.what(), "$");
    }
    return report;
}

std::string to_csv(const EvalReport &report) {
    std::string out = "model_id,set_id,question_id,run_index,correct,unparseable,parsed_number,parsed_text,raw_response,error\n";
    for (const auto &q : report.questions) {
        for (const auto &r : q.runs) {
            out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", csv_field(report.model_id), csv_field(report.set_id),
                               csv_field(q.question_id), r.run_index, r.correct ? 1 : 0, r.unparseable ? 1 : 0,
                               r.parsed_number ? fmt::format("{}", *r.parsed_number) : std::string(),
                               csv_field(r.parsed_text), csv_field(r.raw_response), csv_field(r.error));
        }
    }
    return out;
}

std::string to_markdown_table(const EvalReport &report) {
    std::string header = "| Model | #Params |";
    std::string rule = "|---|---|";
    for (std::size_t i = 0; i < report.questions.size(); ++i) {
        header += fmt::format(" Q{} |", i + 1);
        rule += "---|";
    }
    std::string out = header + "\n" + rule + "\n";
    if (report.questions.empty()) return out;
    out += fmt::format("| {} | {} |", report.model_id, report.params);
    for (const auto &q : report.questions) out += " " + format_mean(q.mean) + " |";
    return out + "\n";
}

std::string render_report(const EvalReport &report, ReportFormat format) {
    switch (format) {
    case ReportFormat::kJson: return to_json(report).dump(2) + "\n";
    case ReportFormat::kCsv: return to_csv(report);
    case ReportFormat::kMarkdownTable: return to_markdown_table(report);
    }
    return {};
}

void export_report(const EvalReport &report, ReportFormat format, const fs::path &path) {
    const auto text = render_report(report, format);
    write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t *>(text.data()), text.size()));
}

void write_report_files(const EvalReport &report, const fs::path &dir) {
    export_report(report, ReportFormat::kJson, dir / "report.json");
    export_report(report, ReportFormat::kCsv, dir / "report.csv");
    export_report(report, ReportFormat::kMarkdownTable, dir / "report.md");
}

EvalReport load_report(const fs::path &path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorCode::kSchemaError, std::string("report is not JSON: ") + e.what(), "$");
    }
    return report_from_json(doc);
}

} // namespace agcam::eval
