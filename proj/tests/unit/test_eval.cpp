#include "agcam/error.hpp"
#include "agcam/eval/grading.hpp"
#include "agcam/eval/question_set.hpp"
#include "agcam/eval/report.hpp"
#include "agcam/micro/micro_model.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <map>
#include <sstream>

using namespace agcam;
using namespace agcam::eval;

namespace {

template <typename F>
ErrorCode code_of(F &&fn) {
    try {
        fn();
    } catch (const Error &e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an agcam::Error";
    return ErrorCode::kIoError;
}

AnswerKey numeric(double value, double tol = 2.0) {
    AnswerKey k;
    k.numeric_value = value;
    k.tolerance = tol;
    return k;
}

AnswerKey categorical(std::vector<std::string> accepted) {
    AnswerKey k;
    k.kind = AnswerKind::kCategorical;
    k.accepted_strings = std::move(accepted);
    return k;
}

bool graded(std::string_view response, const AnswerKey &key) { return grade(parse_answer(response, key), key); }

// Answers every question with the text of its key.
class KeyClient final : public AnswerClient {
  public:
    explicit KeyClient(const QuestionSet &set, std::string fail_on = {}) : fail_on_(std::move(fail_on)) {
        for (const auto &item : set.items) {
            const auto &k = item.answer_key;
            answers_[item.question] = k.kind == AnswerKind::kNumeric ? std::to_string(k.numeric_value) + " " + k.unit
                                                                      : k.accepted_strings.front();
        }
    }
    std::string client_id() const override { return "key-stub"; }
    std::string generate(const Image &, std::string_view question, const GenerationConfig &) override {
        ++calls;
        if (question == fail_on_) throw Error(ErrorCode::kProviderError, "stub failure");
        return answers_.at(std::string(question));
    }
    bool concurrent_safe() const override { return true; }
    std::atomic<int> calls{0};

  private:
    std::map<std::string, std::string> answers_;
    std::string fail_on_;
};

QuestionSet first_n(QuestionSet set, std::size_t n) {
    set.items.resize(n);
    return set;
}

nlohmann::json minimal_set(nlohmann::json answer_key) {
    return {{"schema_version", 1},
            {"set_id", "t"},
            {"items",
             {{{"id", "A"},
               {"source", "custom"},
               {"chart_type", "bar"},
               {"task_type", "retrieve_value"},
               {"image_path", (agcam::testing::source_dir() / "data/charts/bar.png").string()},
               {"question", "q?"},
               {"answer_key", std::move(answer_key)}}}}};
}

} // namespace

TEST(QuestionSet, BundledSizes) {
    const auto mini = resolve_question_set("mini-vlat");
    EXPECT_EQ(mini.set_id, "mini-vlat");
    EXPECT_EQ(mini.items.size(), 12u);
    EXPECT_EQ(resolve_question_set("vlat").items.size(), 53u);
    for (const auto &item : mini.items) EXPECT_TRUE(std::filesystem::exists(item.image_path)) << item.id;
}

TEST(QuestionSet, MiniVlatCoversEveryChartType) {
    std::set<std::string> types;
    for (const auto &item : resolve_question_set("mini-vlat").items) types.insert(item.chart_type);
    EXPECT_EQ(types.size(), 12u);
}

TEST(QuestionSet, NegativeToleranceRejected) {
    const auto doc = minimal_set({{"kind", "numeric"}, {"value", 3}, {"tolerance", -1}});
    try {
        parse_question_set(doc, ".");
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::kSchemaError);
        EXPECT_EQ(e.field(), "$.items[0].answer_key.tolerance");
    }
}

TEST(QuestionSet, EmptyAcceptedListRejected) {
    const auto doc = minimal_set({{"kind", "categorical"}, {"accepted", nlohmann::json::array()}});
    EXPECT_EQ(code_of([&] { parse_question_set(doc, "."); }), ErrorCode::kSchemaError);
}

TEST(QuestionSet, MissingImageReported) {
    auto doc = minimal_set({{"kind", "numeric"}, {"value", 3}});
    doc["items"][0]["image_path"] = "no/such/chart.png";
    EXPECT_EQ(code_of([&] { parse_question_set(doc, "/nonexistent"); }), ErrorCode::kMissingImage);
}

TEST(QuestionSet, DefaultToleranceIsTwo) {
    const auto set = parse_question_set(minimal_set({{"kind", "numeric"}, {"value", 3}}), ".");
    EXPECT_EQ(set.items.at(0).answer_key.tolerance, 2.0);
}

TEST(Grading, NumericGoldens) {
    const auto key = numeric(40);
    EXPECT_EQ(parse_answer("41 Mbps", key).number, 41.0);
    EXPECT_TRUE(graded("41 Mbps", key));
    EXPECT_TRUE(graded("42 Mbps", key));
    EXPECT_TRUE(graded("38", key));
    EXPECT_FALSE(graded("43", key));
    EXPECT_FALSE(graded("37.5", key));
}

TEST(Grading, ThousandsSeparators) {
    EXPECT_EQ(parse_answer("approximately 1,200 stations", numeric(1200)).number, 1200.0);
}

TEST(Grading, PercentStaysOnPercentScale) {
    EXPECT_EQ(parse_answer("Samsung holds 23%.", numeric(23)).number, 23.0);
}

TEST(Grading, FirstOrLastNumber) {
    const auto key = numeric(25.7);
    EXPECT_EQ(parse_answer("from 20 to 45.7, a rise of 25.7", key).number, 20.0);
    EXPECT_EQ(parse_answer("from 20 to 45.7, a rise of 25.7", key, {NumberPick::kLast}).number, 25.7);
}

TEST(Grading, NoNumberIsUnparseable) {
    const auto p = parse_answer("I cannot tell.", numeric(5));
    EXPECT_TRUE(p.unparseable);
    EXPECT_FALSE(grade(p, numeric(5)));
}

TEST(Grading, CategoricalWrongCity) {
    const auto key = categorical({"Shanghai"});
    const auto p = parse_answer("The answer is Beijing.", key);
    EXPECT_EQ(p.normalized, "the answer is beijing");
    EXPECT_FALSE(p.matched);
    EXPECT_FALSE(grade(p, key));
    EXPECT_TRUE(graded("It is Shanghai.", key));
}

TEST(Grading, CategoricalIsWholeWord) {
    const auto key = categorical({"no"});
    EXPECT_FALSE(graded("Nothing to see", key));
    EXPECT_TRUE(graded("No.", key));
}

TEST(Grading, MultiWordAccepted) {
    EXPECT_TRUE(graded("great britain won the most", categorical({"Great Britain"})));
}

TEST(Report, CountsRecords) {
    auto model = micro::build_micro_model();
    LocalModelClient client(*model);
    GenerationConfig g;
    g.max_new_tokens = 4;
    const auto report = run_eval(client, first_n(resolve_question_set("mini-vlat"), 3), 2, g);
    ASSERT_EQ(report.questions.size(), 3u);
    std::size_t records = 0;
    for (const auto &q : report.questions) records += q.runs.size();
    EXPECT_EQ(records, 6u);
    EXPECT_EQ(report.model_id, "micro-2x2");
}

TEST(Report, PerfectStubScoresOne) {
    const auto set = resolve_question_set("mini-vlat");
    KeyClient client(set);
    const auto report = run_eval(client, set, 3, {});
    EXPECT_EQ(report.overall_mean, 1.0);
    EXPECT_EQ(client.calls.load(), 36);
}

TEST(Report, FailureOnOneQuestionDoesNotAbort) {
    const auto set = resolve_question_set("mini-vlat");
    KeyClient client(set, set.items.at(4).question);
    const auto report = run_eval(client, set, 2, {});
    ASSERT_EQ(report.questions.size(), 12u);
    for (std::size_t i = 0; i < 12; ++i) {
        const auto &q = report.questions[i];
        ASSERT_EQ(q.runs.size(), 2u);
        if (i == 4) {
            EXPECT_EQ(q.mean, 0.0);
            for (const auto &r : q.runs) EXPECT_FALSE(r.error.empty());
        } else {
            EXPECT_EQ(q.mean, 1.0) << q.question_id;
        }
    }
    EXPECT_NEAR(report.overall_mean, 11.0 / 12.0, 1e-12);
}

TEST(Report, MeansAreRunFractions) {
    auto model = micro::build_micro_model();
    LocalModelClient client(*model);
    GenerationConfig g;
    g.temperature = 1.0;
    g.seed = 5;
    g.max_new_tokens = 3;
    const int n = 3;
    const auto report = run_eval(client, resolve_question_set("mini-vlat"), n, g);
    for (const auto &q : report.questions) {
        const double k = q.mean * n;
        EXPECT_NEAR(k, std::round(k), 1e-12);
        EXPECT_GE(q.mean, 0.0);
        EXPECT_LE(q.mean, 1.0);
    }
}

TEST(Report, SeededRunsReproducible) {
    auto model = micro::build_micro_model();
    LocalModelClient client(*model);
    GenerationConfig g;
    g.temperature = 1.0;
    g.seed = 11;
    g.max_new_tokens = 3;
    const auto set = first_n(resolve_question_set("mini-vlat"), 2);
    EXPECT_EQ(to_json(run_eval(client, set, 2, g)), to_json(run_eval(client, set, 2, g)));
}

TEST(Report, ZeroRunsRejected) {
    auto model = micro::build_micro_model();
    LocalModelClient client(*model);
    EXPECT_EQ(code_of([&] { run_eval(client, resolve_question_set("mini-vlat"), 0, {}); }),
              ErrorCode::kPreconditionViolation);
}

TEST(Report, EmptyReportHasNoDataRows) {
    EvalReport empty;
    empty.model_id = "none";
    const auto dir = agcam::testing::scratch_dir("empty-report");
    EXPECT_NO_THROW(write_report_files(empty, dir));
    std::ifstream md(dir / "report.md");
    std::string line;
    int lines = 0;
    while (std::getline(md, line)) ++lines;
    EXPECT_EQ(lines, 2); // header and rule only
    std::ifstream csv(dir / "report.csv");
    lines = 0;
    while (std::getline(csv, line)) ++lines;
    EXPECT_EQ(lines, 1);
}

TEST(Report, MarkdownHasTwelveQuestionColumns) {
    const auto set = resolve_question_set("mini-vlat");
    KeyClient client(set);
    auto report = run_eval(client, set, 1, {}, {.workers = 2, .parse = {}, .params = "3B"});
    const auto md = to_markdown_table(report);
    const auto header = md.substr(0, md.find('\n'));
    EXPECT_EQ(header, "| Model | #Params | Q1 | Q2 | Q3 | Q4 | Q5 | Q6 | Q7 | Q8 | Q9 | Q10 | Q11 | Q12 |");
    EXPECT_NE(md.find("| key-stub | 3B | 1.0 |"), std::string::npos) << md;
}

TEST(Report, JsonRoundTripIsByteIdentical) {
    auto model = micro::build_micro_model();
    LocalModelClient client(*model);
    GenerationConfig g;
    g.max_new_tokens = 5;
    g.seed = 3;
    const auto report = run_eval(client, first_n(resolve_question_set("mini-vlat"), 4), 2, g);
    const auto dir = agcam::testing::scratch_dir("roundtrip");
    write_report_files(report, dir);
    const auto loaded = load_report(dir / "report.json");
    std::ifstream in(dir / "report.json");
    std::stringstream original;
    original << in.rdbuf();
    EXPECT_EQ(render_report(loaded, ReportFormat::kJson), original.str());
}

TEST(Report, MalformedJsonRejected) {
    EXPECT_EQ(code_of([] { report_from_json({{"schema_version", 1}}); }), ErrorCode::kSchemaError);
}

TEST(Report, GenerationConfigJson) {
    GenerationConfig g;
    g.temperature = 0.7;
    g.seed = 9;
    const auto back = generation_config_from_json(to_json(g));
    EXPECT_EQ(back.temperature, 0.7);
    EXPECT_EQ(back.seed, 9u);
    EXPECT_EQ(back.max_new_tokens, g.max_new_tokens);
}
