#include "agcam/error.hpp"
#include "agcam/service/server.hpp"
#include "test_support.hpp"

#include <httplib.h>

#include <gtest/gtest.h>

#include <atomic>
#include <thread>

using namespace agcam;
using namespace agcam::service;
using nlohmann::json;
using namespace std::chrono_literals;

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

std::vector<std::uint8_t> png_bytes(unsigned salt = 0) { return encode_png(agcam::testing::patterned_image(12, 10, salt)); }

std::string as_string(const std::vector<std::uint8_t> &b) { return {b.begin(), b.end()}; }

class ServiceTest : public ::testing::Test {
  protected:
    void SetUp() override {
        ServiceConfig cfg;
        cfg.registry = ModelRegistry::bundled();
        cfg.results_dir = agcam::testing::scratch_dir("service") / "results";
        cfg.eval_workers = 1;
        service_ = std::make_unique<Service>(std::move(cfg));
        service_->bind("127.0.0.1", 0);
        service_->start_background();
        client_ = std::make_unique<httplib::Client>("127.0.0.1", service_->port());
        client_->set_read_timeout(60, 0);
    }
    void TearDown() override {
        client_.reset();
        service_->stop();
    }

    json get_json(const std::string &path, int expect = 200) {
        auto res = client_->Get(path);
        EXPECT_TRUE(res) << path;
        if (!res) return {};
        EXPECT_EQ(res->status, expect) << path << " " << res->body;
        return json::parse(res->body);
    }
    json post_json(const std::string &path, const json &body, int expect = 200) {
        auto res = client_->Post(path, body.dump(), "application/json");
        EXPECT_TRUE(res) << path;
        if (!res) return {};
        EXPECT_EQ(res->status, expect) << path << " " << res->body;
        return json::parse(res->body);
    }
    json wait_job(const std::string &job_id) {
        EXPECT_TRUE(service_->jobs().wait(job_id, 120s));
        return get_json("/jobs/" + job_id);
    }

    std::unique_ptr<Service> service_;
    std::unique_ptr<httplib::Client> client_;
};

} // namespace

TEST(Store, ContentAddressedImages) {
    ResultsStore store(agcam::testing::scratch_dir("store-images"));
    const auto a = store.put_image(png_bytes(1));
    EXPECT_EQ(store.put_image(png_bytes(1)), a);
    EXPECT_NE(store.put_image(png_bytes(2)), a);
    EXPECT_EQ(a.rfind("img-", 0), 0u);
    EXPECT_TRUE(store.has_image(a));
    EXPECT_EQ(store.load_image(a), agcam::testing::patterned_image(12, 10, 1));
    const std::vector<std::uint8_t> junk = {1, 2, 3, 4};
    EXPECT_EQ(code_of([&] { store.put_image(junk); }), ErrorCode::kImageDecodeError);
    EXPECT_EQ(code_of([&] { store.load_image("img-missing"); }), ErrorCode::kNotFound);
}

TEST(Store, Sha256KnownVector) {
    const std::string abc = "abc";
    EXPECT_EQ(sha256_hex(std::span(reinterpret_cast<const std::uint8_t *>(abc.data()), abc.size())),
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Store, ResultsPersistAcrossReopen) {
    const auto root = agcam::testing::scratch_dir("store-reopen");
    std::string first;
    {
        ResultsStore store(root);
        first = store.put_result({{"kind", "saliency"}, {"x", 1}}, agcam::testing::patterned_image(4, 4));
        EXPECT_EQ(store.get_result(first).at("error_tags"), json::array());
    }
    ResultsStore reopened(root);
    EXPECT_EQ(reopened.get_result(first).at("x"), 1);
    EXPECT_FALSE(reopened.get_overlay_png(first).empty());
    const auto second = reopened.put_result({{"kind", "eval"}});
    EXPECT_NE(second, first);
    EXPECT_TRUE(reopened.index().contains(first));
    EXPECT_TRUE(reopened.index().contains(second));
    EXPECT_EQ(code_of([&] { reopened.get_overlay_png(second); }), ErrorCode::kNotFound);
}

TEST(Store, PatchOnlyAcceptsVocabularyTags) {
    ResultsStore store(agcam::testing::scratch_dir("store-patch"));
    const auto id = store.put_result({{"kind", "saliency"}});
    const auto patched = store.patch_result(id, {{"error_tags", {"reasoning/multi-step", "data/lookup"}}});
    EXPECT_EQ(patched.at("error_tags").size(), 2u);
    EXPECT_EQ(store.get_result(id).at("error_tags"), patched.at("error_tags"));
    EXPECT_EQ(code_of([&] { store.patch_result(id, {{"error_tags", {"made/up"}}}); }), ErrorCode::kSchemaError);
    EXPECT_EQ(code_of([&] { store.patch_result(id, {{"kind", "eval"}}); }), ErrorCode::kSchemaError);
    EXPECT_EQ(code_of([&] { store.patch_result("r-999999", {{"error_tags", json::array()}}); }),
              ErrorCode::kNotFound);
}

TEST(Jobs, TransitionTable) {
    using S = JobStatus;
    EXPECT_TRUE(transition_allowed(S::kQueued, S::kRunning));
    EXPECT_TRUE(transition_allowed(S::kRunning, S::kDone));
    EXPECT_TRUE(transition_allowed(S::kRunning, S::kFailed));
    EXPECT_FALSE(transition_allowed(S::kQueued, S::kDone));
    EXPECT_FALSE(transition_allowed(S::kDone, S::kRunning));
    EXPECT_FALSE(transition_allowed(S::kFailed, S::kQueued));
}

TEST(Jobs, OutcomesAndErrors) {
    JobManager jobs;
    const auto ok = jobs.submit(JobKind::kSaliency, "m", json::object(), [] { return std::vector<std::string>{"r-1"}; });
    const auto empty = jobs.submit(JobKind::kSaliency, "m", json::object(), [] { return std::vector<std::string>{}; });
    const auto bad = jobs.submit(JobKind::kEval, "m", json::object(), []() -> std::vector<std::string> {
        throw Error(ErrorCode::kSequenceTooLong, "too long");
    });
    for (const auto &id : {ok, empty, bad}) ASSERT_TRUE(jobs.wait(id, 10s));
    EXPECT_EQ(jobs.get(ok)->status, JobStatus::kDone);
    EXPECT_EQ(jobs.get(ok)->result_ids, std::vector<std::string>{"r-1"});
    EXPECT_EQ(jobs.get(empty)->status, JobStatus::kFailed);
    EXPECT_EQ(jobs.get(bad)->status, JobStatus::kFailed);
    EXPECT_EQ(jobs.get(bad)->error_code, "SequenceTooLong");
    EXPECT_FALSE(jobs.get("job-nope"));
    EXPECT_FALSE(jobs.wait("job-nope", 1ms));
}

TEST(Jobs, SameKeyNeverOverlaps) {
    JobManager jobs;
    std::atomic<int> active{0}, peak{0};
    std::vector<std::string> ids;
    std::vector<std::thread> submitters;
    std::mutex ids_mutex;
    for (int t = 0; t < 20; ++t) {
        submitters.emplace_back([&, t] {
            const auto key = t % 2 ? "a" : "b";
            auto id = jobs.submit(JobKind::kSaliency, key, json::object(), [&] {
                const int now = ++active;
                int seen = peak.load();
                while (now > seen && !peak.compare_exchange_weak(seen, now)) {
                }
                std::this_thread::sleep_for(2ms);
                --active;
                return std::vector<std::string>{"r"};
            });
            std::lock_guard lock(ids_mutex);
            ids.push_back(id);
        });
    }
    for (auto &s : submitters) s.join();
    for (const auto &id : ids) ASSERT_TRUE(jobs.wait(id, 30s));
    EXPECT_EQ(jobs.max_running_observed("a"), 1);
    EXPECT_EQ(jobs.max_running_observed("b"), 1);
    EXPECT_LE(peak.load(), 2);
}

TEST(HttpStatus, Mapping) {
    EXPECT_EQ(http_status_for(ErrorCode::kNotFound), 404);
    EXPECT_EQ(http_status_for(ErrorCode::kUnknownModel), 404);
    EXPECT_EQ(http_status_for(ErrorCode::kEmptyRange), 400);
    EXPECT_EQ(http_status_for(ErrorCode::kArchitectureUnsupported), 422);
    EXPECT_EQ(http_status_for(ErrorCode::kWeightsUnavailable), 409);
    const auto body = error_body(Error(ErrorCode::kEmptyRange, "bad", "layer_start"));
    EXPECT_EQ(body.at("field"), "layer_start");
    EXPECT_EQ(body.at("code"), "EmptyRange");
}

TEST(ServiceStartup, PortInUse) {
    ServiceConfig cfg;
    cfg.registry = ModelRegistry::bundled();
    cfg.results_dir = agcam::testing::scratch_dir("port") / "a";
    Service first(cfg);
    const int port = first.bind("127.0.0.1", 0);
    cfg.results_dir = agcam::testing::scratch_dir("port") / "b";
    Service second(cfg);
    EXPECT_EQ(code_of([&] { second.bind("127.0.0.1", port); }), ErrorCode::kPortInUse);
}

TEST(ServiceStartup, BadRenderConfigFailsBeforeBinding) {
    ServiceConfig cfg;
    cfg.registry = ModelRegistry::bundled();
    cfg.results_dir = agcam::testing::scratch_dir("badcfg");
    cfg.render.alpha = 2.0;
    EXPECT_EQ(code_of([&] { Service s(cfg); }), ErrorCode::kPreconditionViolation);
}

TEST_F(ServiceTest, ListsModels) {
    const auto models = get_json("/models");
    ASSERT_TRUE(models.is_array());
    bool found = false;
    for (const auto &m : models) {
        EXPECT_EQ(m.at("schema_version"), 1);
        found = found || m.at("model_id") == "micro-2x2";
    }
    EXPECT_TRUE(found);
}

TEST_F(ServiceTest, LoadModel) {
    const auto doc = post_json("/models/micro-2x2/load", json::object());
    EXPECT_EQ(doc.at("num_layers"), 2);
    EXPECT_EQ(doc.at("supports_capture"), true);
    const auto unknown = post_json("/models/nope/load", json::object(), 404);
    EXPECT_EQ(unknown.at("code"), "UnknownModel");
    const auto deep = post_json("/models/janus-deep-fusion-hypothetical/load", json::object(), 422);
    EXPECT_FALSE(deep.at("message").get<std::string>().empty());
}

TEST_F(ServiceTest, QuestionSets) {
    const auto sets = get_json("/question-sets");
    ASSERT_TRUE(sets.is_array());
    EXPECT_EQ(sets.size(), 2u);
    const auto mini = get_json("/question-sets/mini-vlat");
    ASSERT_EQ(mini.at("items").size(), 12u);
    const auto url = mini.at("items").at(0).at("image_url").get<std::string>();
    auto res = client_->Get(url);
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(res->get_header_value("Content-Type"), "image/png");
    get_json("/question-sets/unknown", 404);
}

TEST_F(ServiceTest, ImageUploadIsContentAddressed) {
    httplib::MultipartFormDataItems items = {{"image", as_string(png_bytes(3)), "chart.png", "image/png"}};
    auto res = client_->Post("/images", items);
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200) << res->body;
    const auto id = json::parse(res->body).at("image_id");
    auto raw = client_->Post("/images", as_string(png_bytes(3)), "image/png");
    ASSERT_TRUE(raw);
    EXPECT_EQ(json::parse(raw->body).at("image_id"), id);
    auto junk = client_->Post("/images", "not an image", "image/png");
    ASSERT_TRUE(junk);
    EXPECT_EQ(junk->status, 400);
}

TEST_F(ServiceTest, SaliencyHappyPath) {
    const auto sub = post_json("/saliency", {{"model_id", "micro-2x2"}, {"question_id", "Q1"}, {"set_id", "mini-vlat"},
                                             {"token_selector", "all"}, {"layer_start", 1}, {"layer_end", 2}});
    EXPECT_EQ(sub.at("status"), "queued");
    const auto job = wait_job(sub.at("job_id"));
    ASSERT_EQ(job.at("status"), "done") << job.dump();
    const auto ids = job.at("result_ids");
    ASSERT_FALSE(ids.empty());
    const auto result = get_json("/results/" + ids.at(0).get<std::string>());
    EXPECT_EQ(result.at("schema_version"), 1);
    EXPECT_EQ(result.at("model_id"), "micro-2x2");
    EXPECT_EQ(result.at("question_id"), "Q1");
    EXPECT_EQ(result.at("heat").size(), 4u);
    auto png = client_->Get("/results/" + ids.at(0).get<std::string>() + "/overlay.png");
    ASSERT_TRUE(png);
    EXPECT_EQ(png->status, 200);
    EXPECT_EQ(png->body.substr(1, 3), "PNG");
}

TEST_F(ServiceTest, SaliencyOnUploadedImageWithSelector) {
    auto up = client_->Post("/images", as_string(png_bytes(4)), "image/png");
    const auto image_id = json::parse(up->body).at("image_id");
    const auto sub = post_json("/saliency", {{"model_id", "micro-2x2"}, {"image_id", image_id}, {"prompt", "speed?"},
                                             {"token_selector", "bos"}, {"norm", "sigmoid"}, {"agg", "rollout"}});
    const auto job = wait_job(sub.at("job_id"));
    ASSERT_EQ(job.at("status"), "done");
    ASSERT_EQ(job.at("result_ids").size(), 1u);
    const auto result = get_json("/results/" + job.at("result_ids").at(0).get<std::string>());
    EXPECT_EQ(result.at("token_index"), 0);
    EXPECT_EQ(result.at("norm"), "sigmoid");
    EXPECT_EQ(result.at("aggregation"), "rollout");
}

TEST_F(ServiceTest, SaliencyValidationErrors) {
    const json base = {{"model_id", "micro-2x2"}, {"question_id", "Q1"}, {"set_id", "mini-vlat"}};
    auto body = base;
    body["layer_start"] = 2;
    body["layer_end"] = 1;
    auto err = post_json("/saliency", body, 400);
    EXPECT_EQ(err.at("field"), "layer_start");
    EXPECT_FALSE(err.at("message").get<std::string>().empty());

    body = base;
    body["layer_end"] = 3;
    EXPECT_EQ(post_json("/saliency", body, 400).at("field"), "layer_end");

    body = base;
    body["token_selector"] = "first";
    EXPECT_EQ(post_json("/saliency", body, 400).at("field"), "token_selector");

    body = base;
    body["norm"] = "relu";
    EXPECT_EQ(post_json("/saliency", body, 400).at("field"), "norm");

    body = base;
    body["model_id"] = "nope";
    EXPECT_EQ(post_json("/saliency", body, 404).at("field"), "model_id");

    EXPECT_EQ(post_json("/saliency", {{"model_id", "micro-2x2"}}, 400).at("field"), "image_id");

    auto res = client_->Post("/saliency", "{not json", "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 400);
}

TEST_F(ServiceTest, UnknownRoutesAndIds) {
    EXPECT_EQ(get_json("/jobs/job-999999", 404).at("field"), "job_id");
    get_json("/results/r-999999", 404);
    get_json("/nowhere", 404);
}

TEST_F(ServiceTest, PatchErrorTags) {
    const auto sub = post_json("/saliency", {{"model_id", "micro-2x2"}, {"question_id", "Q2"}, {"token_selector", 0}});
    const auto job = wait_job(sub.at("job_id"));
    ASSERT_EQ(job.at("status"), "done");
    const auto path = "/results/" + job.at("result_ids").at(0).get<std::string>();
    auto res = client_->Patch(path, json{{"error_tags", {"encoding/hierarchy"}}}.dump(), "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(get_json(path).at("error_tags"), json::array({"encoding/hierarchy"}));
    res = client_->Patch(path, json{{"error_tags", {"vibes"}}}.dump(), "application/json");
    EXPECT_EQ(res->status, 400);
}

TEST_F(ServiceTest, EvaluateStoresReport) {
    const auto sub = post_json("/evaluate", {{"model_id", "micro-2x2"}, {"set_id", "mini-vlat"}, {"n_runs", 2},
                                             {"decoding", {{"max_new_tokens", 3}}}});
    const auto job = wait_job(sub.at("job_id"));
    ASSERT_EQ(job.at("status"), "done") << job.dump();
    const auto report = get_json("/results/" + job.at("result_ids").at(0).get<std::string>());
    EXPECT_EQ(report.at("kind"), "eval");
    EXPECT_EQ(report.at("n_runs"), 2);
    EXPECT_EQ(report.at("questions").size(), 12u);
    EXPECT_EQ(report.at("markdown").get<std::string>().rfind("| Model | #Params |", 0), 0u);
    EXPECT_EQ(post_json("/evaluate", {{"model_id", "micro-2x2"}, {"n_runs", 0}}, 400).at("field"), "n_runs");
}

TEST_F(ServiceTest, CompareInlineManifest) {
    const json body = {
        {"model_id", "micro-2x2"},
        {"set_id", "vlat"},
        {"variants",
         {{{"id", "trend"},
           {"base_question_id", "V4"},
           {"transform", {{"kind", "terminology"}, {"terms", {{"increasing", "rising"}, {"decreasing", "falling"}}}}}},
          {{"id", "same"}, {"base_question_id", "V5"}, {"transform", {{"kind", "custom"}, {"text", ""}}}}}}};
    // An empty custom text is a schema error caught before queueing.
    post_json("/compare", body, 400);

    json ok = body;
    ok["variants"].erase(1);
    const auto job = wait_job(post_json("/compare", ok).at("job_id"));
    ASSERT_EQ(job.at("status"), "done") << job.dump();
    const auto doc = get_json("/results/" + job.at("result_ids").at(0).get<std::string>());
    EXPECT_EQ(doc.at("kind"), "compare");
    ASSERT_EQ(doc.at("comparisons").size(), 1u);
    EXPECT_EQ(doc.at("comparisons").at(0).at("matches").size(), 2u);
}

TEST_F(ServiceTest, ConcurrentSubmissionsSerializePerModel) {
    std::vector<std::string> job_ids(20), errors(20);
    std::vector<std::thread> threads;
    for (int i = 0; i < 20; ++i) {
        threads.emplace_back([&, i] {
            httplib::Client c("127.0.0.1", service_->port());
            c.set_read_timeout(60, 0);
            const json body = {{"model_id", "micro-2x2"},
                               {"question_id", "Q" + std::to_string(1 + i % 12)},
                               {"token_selector", "all"}};
            auto res = c.Post("/saliency", body.dump(), "application/json");
            if (res && res->status == 200) job_ids[i] = json::parse(res->body).at("job_id");
            else errors[i] = res ? "status " + std::to_string(res->status) : httplib::to_string(res.error());
        });
    }
    for (auto &t : threads) t.join();
    for (const auto &id : job_ids) {
        ASSERT_FALSE(id.empty()) << errors[&id - job_ids.data()];
        EXPECT_EQ(wait_job(id).at("status"), "done");
    }
    EXPECT_EQ(service_->jobs().max_running_observed("micro-2x2"), 1);
}
