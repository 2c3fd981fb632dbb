// agcam: command-line front end for saliency, evaluation, prompt comparison and the HTTP service.

#include "agcam/adapter/registry.hpp"
#include "agcam/core/saliency.hpp"
#include "agcam/error.hpp"
#include "agcam/eval/client.hpp"
#include "agcam/eval/report.hpp"
#include "agcam/promptlab/promptlab.hpp"
#include "agcam/render/render.hpp"
#include "agcam/service/server.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <csignal>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace agcam;

namespace {

constexpr int kOk = 0;
constexpr int kJobFailed = 1;
constexpr int kUsage = 2;

// Thrown for bad flag values found after CLI11 parsing succeeded.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SaliencyFlags {
    std::string model = "micro-2x2";
    std::string layers;
    std::string tokens = "all";
    std::string norm = "softmax";
    std::string agg = "sum";
};

void add_saliency_flags(CLI::App *cmd, SaliencyFlags &f) {
    cmd->add_option("--model", f.model, "Registered model id")->capture_default_str();
    cmd->add_option("--layers", f.layers, "Layer range A:B, 1-based inclusive (default: all layers)");
    cmd->add_option("--tokens", f.tokens, "all | INDEX | bos | separator")->capture_default_str();
    cmd->add_option("--norm", f.norm, "Attention normalization")
        ->check(CLI::IsMember({"softmax", "sigmoid"}))
        ->capture_default_str();
    cmd->add_option("--agg", f.agg, "Layer aggregation")->check(CLI::IsMember({"sum", "rollout"}))->capture_default_str();
}

core::LayerRange parse_layers(const std::string &text, int num_layers) {
    if (text.empty()) return {1, num_layers};
    const auto colon = text.find(':');
    core::LayerRange range;
    try {
        if (colon == std::string::npos) throw std::invalid_argument(text);
        std::size_t used = 0;
        range.start = std::stoi(text.substr(0, colon), &used);
        if (used != colon) throw std::invalid_argument(text);
        const auto rest = text.substr(colon + 1);
        range.end = std::stoi(rest, &used);
        if (used != rest.size()) throw std::invalid_argument(text);
    } catch (const std::logic_error &) {
        throw UsageError("--layers expects A:B, got '" + text + "'");
    }
    try {
        range.validate(num_layers);
    } catch (const Error &e) {
        throw UsageError(fmt::format("--layers {}: {} (model has {} layers)", text, e.what(), num_layers));
    }
    return range;
}

core::SaliencyRequest build_request(const SaliencyFlags &f, const ModelHandle &handle) {
    core::SaliencyRequest request;
    request.layers = parse_layers(f.layers, handle.descriptor().num_layers);
    try {
        request.tokens = core::TokenSelector::parse(f.tokens);
    } catch (const Error &e) {
        throw UsageError(std::string("--tokens: ") + e.what());
    }
    request.norm = norm_mode_from_string(f.norm);
    request.aggregation = core::aggregation_from_string(f.agg);
    return request;
}

std::unique_ptr<ModelHandle> open_model(const std::string &model_id) {
    try {
        return load_model(model_id, ModelRegistry::bundled());
    } catch (const Error &e) {
        if (e.code() == ErrorCode::kUnknownModel) throw UsageError(std::string("--model: ") + e.what());
        throw;
    }
}

void write_text(const fs::path &path, const std::string &text) {
    write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t *>(text.data()), text.size()));
}

int run_compute(const SaliencyFlags &f, const std::string &image_path, std::string question, const std::string &set,
                std::string question_id, double alpha, const fs::path &out) {
    std::optional<fs::path> chart_path;
    if (!question_id.empty()) {
        const auto qs = eval::resolve_question_set(set);
        const auto *item = qs.find(question_id);
        if (!item) throw UsageError("--question-id: no " + question_id + " in " + set);
        chart_path = item->image_path;
        if (question.empty()) question = item->question;
    }
    if (!image_path.empty()) chart_path = image_path;
    if (!chart_path) throw UsageError("one of --image or --question-id is required");
    if (question.empty()) throw UsageError("--question is required with --image");

    auto handle = open_model(f.model);
    const auto request = build_request(f, *handle);
    render::RenderConfig render_config;
    render_config.alpha = alpha;
    try {
        render_config.validate();
    } catch (const Error &e) {
        throw UsageError(std::string("--alpha: ") + e.what());
    }

    const Image chart = load_image(*chart_path);
    const std::optional<std::string> qid = question_id.empty() ? std::nullopt : std::optional(question_id);
    const auto results = core::compute_saliency(*handle, chart, question, request, qid);
    const std::string prefix = qid ? *qid : core::prompt_hash(question);

    fs::create_directories(out);
    for (const auto &r : results) {
        const auto stem = fmt::format("{}_{}_{}_t{:03d}", prefix, f.model, request.layers.label(), r.token_index);
        write_png(out / (stem + ".png"), render::render_overlay(r, chart, render_config));
        auto doc = core::to_export_json(r);
        doc["prompt_id"] = r.provenance.prompt_id;
        doc["timestamp"] = r.provenance.timestamp;
        doc["colormap"] = render::colormap_json();
        write_text(out / (stem + ".json"), doc.dump(2) + "\n");
        std::cout << fmt::format("token {:>3} {:<12} -> {}.png\n", r.token_index, fmt::format("'{}'", r.token_text), stem);
    }
    const auto sheet = render::build_token_layer_sheet({results}, chart, render_config);
    const auto sheet_name = render::contact_sheet_name(prefix, f.model, request.layers);
    write_png(out / sheet_name, sheet.image);
    std::cout << "contact sheet -> " << sheet_name << "\n";
    return kOk;
}

int run_eval(const std::string &model, const std::string &provider_config, const std::string &set, int runs,
             const GenerationConfig &decoding, int workers, const fs::path &out) {
    if (runs < 1) throw UsageError("--runs must be at least 1");
    if (model.empty() == provider_config.empty()) throw UsageError("give exactly one of --model or --provider-config");
    const auto qs = eval::resolve_question_set(set);

    std::unique_ptr<ModelHandle> handle;
    std::unique_ptr<eval::AnswerClient> client;
    eval::EvalOptions options;
    options.workers = workers;
    if (!model.empty()) {
        handle = open_model(model);
        client = std::make_unique<eval::LocalModelClient>(*handle);
        if (const auto *entry = ModelRegistry::bundled().find(model)) options.params = entry->params;
    } else {
        std::ifstream in(provider_config);
        if (!in) throw UsageError("--provider-config: cannot open " + provider_config);
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error &e) {
            throw UsageError(std::string("--provider-config: ") + e.what());
        }
        client = eval::remote_model_client(eval::ProviderConfig::from_json(doc));
    }

    const auto report = eval::run_eval(*client, qs, runs, decoding, options);
    eval::write_report_files(report, out);
    std::cout << eval::to_markdown_table(report);
    std::cout << fmt::format("overall mean {:.3f} over {} questions x {} runs -> {}\n", report.overall_mean,
                             report.questions.size(), runs, out.string());
    int failed = 0;
    for (const auto &q : report.questions) {
        for (const auto &r : q.runs) failed += r.error.empty() ? 0 : 1;
    }
    if (failed > 0) {
        std::cerr << failed << " generation(s) failed; see report.json\n";
        return kJobFailed;
    }
    return kOk;
}

int run_compare(const SaliencyFlags &f, const std::string &manifest, const std::string &set, const fs::path &out) {
    const auto specs = promptlab::load_variant_manifest(manifest);
    const auto qs = eval::resolve_question_set(set);
    auto handle = open_model(f.model);
    const auto request = build_request(f, *handle);

    nlohmann::json comparisons = nlohmann::json::array();
    int failed = 0;
    for (const auto &spec : specs) {
        const auto *item = qs.find(spec.question_id);
        if (!item) throw UsageError("variant " + spec.variant_id + ": no question " + spec.question_id);
        const auto variant = promptlab::apply_variant(spec, item->question);
        const auto cmp = promptlab::compare_variants(*handle, load_image(item->image_path), variant.base_text,
                                                     variant.text, request, GenerationConfig{});
        failed += cmp.base.error.empty() ? 0 : 1;
        failed += cmp.variant.error.empty() ? 0 : 1;
        comparisons.push_back({{"variant_id", variant.variant_id},
                               {"question_id", variant.question_id},
                               {"kind", promptlab::to_string(variant.kind)},
                               {"comparison", promptlab::to_json(cmp)}});
        std::cout << fmt::format("{} [{}]\n  base:    {}\n  variant: {}\n", variant.variant_id,
                                 promptlab::to_string(variant.kind), variant.base_text, variant.text);
    }
    fs::create_directories(out);
    write_text(out / "compare.json",
               nlohmann::json{{"schema_version", 1}, {"model_id", f.model}, {"comparisons", comparisons}}.dump(2) + "\n");
    return failed > 0 ? kJobFailed : kOk;
}

service::Service *g_service = nullptr;

int run_serve(const std::string &host, int port, const fs::path &results_dir) {
    service::ServiceConfig config;
    config.registry = ModelRegistry::bundled();
    config.results_dir = results_dir;
    service::Service svc(std::move(config));
    const int bound = svc.bind(host, port);
    g_service = &svc;
    std::signal(SIGINT, [](int) {
        if (g_service) g_service->stop();
    });
    std::cout << fmt::format("listening on http://{}:{}\n", host, bound) << std::flush;
    svc.listen();
    g_service = nullptr;
    return kOk;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Attention-guided saliency for chart question answering"};
    app.require_subcommand(1);

    SaliencyFlags compute_flags;
    std::string image, question, question_id, set = "mini-vlat";
    double alpha = 0.5;
    fs::path out;
    auto *compute = app.add_subcommand("compute", "Saliency overlays for one chart and question");
    add_saliency_flags(compute, compute_flags);
    compute->add_option("--image", image, "Chart image file");
    compute->add_option("--question", question, "Question text (defaults to the question set's text)");
    compute->add_option("--question-id", question_id, "Question id in --set");
    compute->add_option("--set", set, "mini-vlat | vlat | PATH")->capture_default_str();
    compute->add_option("--alpha", alpha, "Overlay opacity")->capture_default_str();
    compute->add_option("--out", out, "Output directory")->required();

    std::string eval_model, provider_config, eval_set = "mini-vlat";
    int runs = 10, workers = 4;
    GenerationConfig decoding;
    std::uint64_t seed = 0;
    fs::path eval_out;
    auto *evalc = app.add_subcommand("eval", "Score a model on a question set");
    evalc->add_option("--model", eval_model, "Registered model id");
    evalc->add_option("--provider-config", provider_config, "JSON config of a hosted answer-only model");
    evalc->add_option("--set", eval_set, "mini-vlat | vlat | PATH")->capture_default_str();
    evalc->add_option("--runs", runs, "Generations per question")->capture_default_str();
    evalc->add_option("--temperature", decoding.temperature, "Sampling temperature, 0 = greedy")->capture_default_str();
    evalc->add_option("--top-p", decoding.top_p, "Nucleus sampling mass")->capture_default_str();
    evalc->add_option("--max-new-tokens", decoding.max_new_tokens, "Answer length cap")->capture_default_str();
    auto *seed_opt = evalc->add_option("--seed", seed, "Base seed; run r uses seed + r");
    evalc->add_option("--workers", workers, "Concurrent requests for hosted models")->capture_default_str();
    evalc->add_option("--out", eval_out, "Output directory")->required();

    SaliencyFlags compare_flags;
    std::string manifest, compare_set = "mini-vlat";
    fs::path compare_out = "compare-out";
    auto *compare = app.add_subcommand("compare", "Saliency for base and variant prompts");
    add_saliency_flags(compare, compare_flags);
    compare->add_option("--variant-manifest", manifest, "Variant manifest JSON")->required()->check(CLI::ExistingFile);
    compare->add_option("--set", compare_set, "mini-vlat | vlat | PATH")->capture_default_str();
    compare->add_option("--out", compare_out, "Output directory")->capture_default_str();

    std::string host = "127.0.0.1";
    int port = 0;
    fs::path results_dir = "agcam-results";
    auto *serve = app.add_subcommand("serve", "Run the HTTP service");
    auto *port_opt = serve->add_option("--port", port, "Port (default: AGCAM_PORT or 8080)");
    serve->add_option("--host", host, "Bind address")->capture_default_str();
    serve->add_option("--results-dir", results_dir, "Results store root")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*compute) return run_compute(compute_flags, image, question, set, question_id, alpha, out);
        if (*evalc) {
            if (*seed_opt) decoding.seed = seed;
            return run_eval(eval_model, provider_config, eval_set, runs, decoding, workers, eval_out);
        }
        if (*compare) return run_compare(compare_flags, manifest, compare_set, compare_out);
        if (*serve) return run_serve(host, *port_opt ? port : service::default_port(), results_dir);
    } catch (const UsageError &e) {
        std::cerr << "usage error: " << e.what() << "\n\n" << app.help() << std::flush;
        return kUsage;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kJobFailed;
    }
    return kUsage;
}
