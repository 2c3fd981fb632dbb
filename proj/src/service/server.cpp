#include "agcam/service/server.hpp"

#include "agcam/core/saliency.hpp"
#include "agcam/error.hpp"
#include "agcam/eval/report.hpp"
#include "agcam/promptlab/promptlab.hpp"

#include <httplib.h>

#include <cstdlib>

namespace agcam::service {

namespace {

using nlohmann::json;

void send_json(httplib::Response &res, const json &body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request &req) {
    try {
        auto doc = json::parse(req.body);
        if (!doc.is_object()) throw Error(ErrorCode::kSchemaError, "request body must be a JSON object", "$");
        if (doc.contains("schema_version") && doc.at("schema_version") != 1) {
            throw Error(ErrorCode::kSchemaError, "unsupported schema_version", "schema_version");
        }
        return doc;
    } catch (const json::parse_error &e) {
        throw Error(ErrorCode::kSchemaError, std::string("malformed JSON: ") + e.what(), "$");
    }
}

template <typename T>
T field(const json &body, const char *name, T fallback) {
    auto it = body.find(name);
    if (it == body.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception &) {
        throw Error(ErrorCode::kSchemaError, std::string(name) + " has the wrong type", name);
    }
}

template <typename T>
T required(const json &body, const char *name) {
    if (!body.contains(name) || body.at(name).is_null()) {
        throw Error(ErrorCode::kSchemaError, std::string(name) + " is required", name);
    }
    return field<T>(body, name, T{});
}

core::TokenSelector selector_from(const json &body) {
    auto it = body.find("token_selector");
    if (it == body.end() || it->is_null()) return core::TokenSelector::all_query_tokens();
    try {
        if (it->is_number_integer()) return core::TokenSelector::at(it->get<int>());
        if (it->is_string()) return core::TokenSelector::parse(it->get<std::string>());
    } catch (const Error &e) {
        throw Error(e.code(), e.what(), "token_selector");
    }
    throw Error(ErrorCode::kInvalidTokenSelector, "token_selector must be an index or a name", "token_selector");
}

// Wraps a handler so library errors become {field, message} responses.
template <typename F>
httplib::Server::Handler guarded(F fn) {
    return [fn](const httplib::Request &req, httplib::Response &res) {
        try {
            fn(req, res);
        } catch (const Error &e) {
            send_json(res, error_body(e), http_status_for(e.code()));
        } catch (const std::exception &e) {
            send_json(res, {{"schema_version", 1}, {"field", nullptr}, {"message", e.what()}, {"code", "Internal"}},
                      500);
        }
    };
}

} // namespace

int http_status_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::kNotFound:
    case ErrorCode::kUnknownModel: return 404;
    case ErrorCode::kWeightsUnavailable: return 409;
    case ErrorCode::kArchitectureUnsupported:
    case ErrorCode::kCaptureUnsupported: return 422;
    case ErrorCode::kRuntimeUnavailable: return 501;
    case ErrorCode::kPreconditionViolation:
    case ErrorCode::kEmptyRange:
    case ErrorCode::kInvalidTokenSelector:
    case ErrorCode::kSchemaError:
    case ErrorCode::kInvalidConfig:
    case ErrorCode::kImageDecodeError:
    case ErrorCode::kIndexOutOfRange:
    case ErrorCode::kEmptySteps:
    case ErrorCode::kSequenceTooLong:
    case ErrorCode::kShapeMismatch:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kEmptyInput: return 400;
    default: return 500;
    }
}

json error_body(const Error &error) {
    return {{"schema_version", 1},
            {"field", error.field().empty() ? json(nullptr) : json(error.field())},
            {"message", error.what()},
            {"code", to_string(error.code())}};
}

int default_port() {
    if (const char *p = std::getenv("AGCAM_PORT"); p != nullptr && *p != '\0') {
        try {
            return std::stoi(p);
        } catch (const std::exception &) {
            throw Error(ErrorCode::kInvalidConfig, std::string("AGCAM_PORT is not a port: ") + p, "AGCAM_PORT");
        }
    }
    return 8080;
}

Service::Service(ServiceConfig config)
    : config_(std::move(config)), store_(config_.results_dir), server_(std::make_unique<httplib::Server>()) {
    config_.render.validate();
    if (!config_.registry.find("micro-2x2")) {
        throw Error(ErrorCode::kInvalidConfig, "registry must include micro-2x2", "registry");
    }
    auto sets = config_.question_sets.empty() ? eval::bundled_question_sets() : config_.question_sets;
    for (const auto &[id, path] : sets) sets_.emplace(id, eval::load_question_set(path));
    install_routes();
}

Service::~Service() {
    stop();
    jobs_.shutdown();
}

int Service::bind(const std::string &host, int port) {
    // httplib also sets SO_REUSEPORT by default, which would let a second
    // server share a port that is already taken.
    server_->set_socket_options([](socket_t sock) {
        int yes = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char *>(&yes), sizeof(yes));
    });
    if (port == 0) {
        port_ = server_->bind_to_any_port(host);
    } else {
        port_ = server_->bind_to_port(host, port) ? port : -1;
    }
    if (port_ < 0) {
        throw Error(ErrorCode::kPortInUse, "cannot bind " + host + ":" + std::to_string(port), "port");
    }
    return port_;
}

void Service::listen() { server_->listen_after_bind(); }

void Service::start_background() {
    listener_ = std::thread([this] { listen(); });
    server_->wait_until_ready();
}

void Service::stop() {
    if (server_) server_->stop();
    if (listener_.joinable()) listener_.join();
}

std::shared_ptr<ModelHandle> Service::handle(const std::string &model_id) {
    std::lock_guard lock(handles_mutex_);
    auto it = handles_.find(model_id);
    if (it != handles_.end()) return it->second;
    std::shared_ptr<ModelHandle> h = load_model(model_id, config_.registry, config_.cache_dir);
    handles_.emplace(model_id, h);
    return h;
}

const eval::QuestionSet &Service::question_set(const std::string &set_id) const {
    auto it = sets_.find(set_id);
    if (it == sets_.end()) throw Error(ErrorCode::kNotFound, "unknown question set " + set_id, "set_id");
    return it->second;
}

void Service::install_routes() {
    auto &srv = *server_;

    srv.Get("/models", guarded([this](const httplib::Request &, httplib::Response &res) {
        json out = json::array();
        std::lock_guard lock(handles_mutex_);
        for (const auto &e : config_.registry.entries()) {
            json item = {{"schema_version", 1},   {"model_id", e.model_id},       {"params", e.params},
                         {"architecture", e.architecture}, {"source", e.source_uri}, {"loaded", false}};
            if (auto it = handles_.find(e.model_id); it != handles_.end()) {
                const auto &d = it->second->descriptor();
                item["loaded"] = true;
                item["supports_capture"] = it->second->supports_capture();
                item["num_layers"] = d.num_layers;
                item["num_heads"] = d.num_heads;
                item["grid_rows"] = d.grid_rows;
                item["grid_cols"] = d.grid_cols;
            }
            out.push_back(std::move(item));
        }
        send_json(res, out);
    }));

    srv.Post(R"(/models/([^/]+)/load)", guarded([this](const httplib::Request &req, httplib::Response &res) {
        const std::string id = req.matches[1];
        auto h = handle(id);
        const auto &d = h->descriptor();
        send_json(res, {{"schema_version", 1},
                        {"model_id", id},
                        {"loaded", true},
                        {"supports_capture", h->supports_capture()},
                        {"weight_checksum", h->weight_checksum()},
                        {"num_layers", d.num_layers},
                        {"num_heads", d.num_heads},
                        {"grid_rows", d.grid_rows},
                        {"grid_cols", d.grid_cols}});
    }));

    srv.Get("/question-sets", guarded([this](const httplib::Request &, httplib::Response &res) {
        json out = json::array();
        for (const auto &[id, set] : sets_) {
            out.push_back({{"schema_version", 1}, {"set_id", id}, {"count", set.items.size()}});
        }
        send_json(res, out);
    }));

    srv.Get(R"(/question-sets/([^/]+))", guarded([this](const httplib::Request &req, httplib::Response &res) {
        const auto &set = question_set(req.matches[1]);
        json items = json::array();
        for (const auto &item : set.items) {
            auto j = eval::to_json(item);
            j["image_url"] = "/question-sets/" + set.set_id + "/images/" + item.id;
            items.push_back(std::move(j));
        }
        send_json(res, {{"schema_version", 1}, {"set_id", set.set_id}, {"items", items}});
    }));

    srv.Get(R"(/question-sets/([^/]+)/images/([^/]+))",
            guarded([this](const httplib::Request &req, httplib::Response &res) {
                const auto &set = question_set(req.matches[1]);
                const auto *item = set.find(std::string(req.matches[2]));
                if (!item) throw Error(ErrorCode::kNotFound, "unknown question " + std::string(req.matches[2]), "question_id");
                const auto bytes = read_file_bytes(item->image_path);
                res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
            }));

    srv.Post("/images", guarded([this](const httplib::Request &req, httplib::Response &res) {
        std::string bytes;
        if (req.is_multipart_form_data()) {
            if (!req.has_file("image")) throw Error(ErrorCode::kSchemaError, "multipart part 'image' is required", "image");
            bytes = req.get_file_value("image").content;
        } else {
            bytes = req.body;
        }
        if (bytes.empty()) throw Error(ErrorCode::kImageDecodeError, "empty upload", "image");
        const auto id = store_.put_image(std::span(reinterpret_cast<const std::uint8_t *>(bytes.data()), bytes.size()));
        send_json(res, {{"schema_version", 1}, {"image_id", id}});
    }));

    srv.Post("/saliency", guarded([this](const httplib::Request &req, httplib::Response &res) {
        const auto body = parse_body(req);
        const auto model_id = required<std::string>(body, "model_id");
        auto h = handle(model_id);
        if (!h->supports_capture()) {
            throw Error(ErrorCode::kCaptureUnsupported, model_id + " cannot capture attention", "model_id");
        }
        core::SaliencyRequest request;
        request.layers = {field<int>(body, "layer_start", 1), field<int>(body, "layer_end", h->descriptor().num_layers)};
        request.layers.validate(h->descriptor().num_layers);
        request.tokens = selector_from(body);
        try {
            request.norm = norm_mode_from_string(field<std::string>(body, "norm", "softmax"));
            request.aggregation = core::aggregation_from_string(field<std::string>(body, "agg", "sum"));
        } catch (const Error &e) {
            throw Error(e.code(), e.what(), e.field() == "agg" ? "agg" : "norm");
        }

        Image image;
        std::string prompt = field<std::string>(body, "prompt", "");
        std::optional<std::string> question_id;
        if (body.contains("image_id") && !body.at("image_id").is_null()) {
            image = store_.load_image(required<std::string>(body, "image_id"));
        } else if (body.contains("question_id") && !body.at("question_id").is_null()) {
            const auto &set = question_set(field<std::string>(body, "set_id", "mini-vlat"));
            const auto *item = set.find(required<std::string>(body, "question_id"));
            if (!item) throw Error(ErrorCode::kNotFound, "unknown question", "question_id");
            image = load_image(item->image_path);
            if (prompt.empty()) prompt = item->question;
            question_id = item->id;
        } else {
            throw Error(ErrorCode::kSchemaError, "one of image_id or question_id is required", "image_id");
        }
        if (prompt.empty()) throw Error(ErrorCode::kSchemaError, "prompt is required with image_id", "prompt");

        auto job = jobs_.submit(JobKind::kSaliency, model_id, body, [this, h, image, prompt, question_id, request, body] {
            auto results = core::compute_saliency(*h, image, prompt, request, question_id);
            std::vector<std::string> ids;
            for (const auto &r : results) {
                auto doc = core::to_export_json(r);
                doc["kind"] = "saliency";
                doc["prompt_id"] = r.provenance.prompt_id;
                doc["timestamp"] = r.provenance.timestamp;
                doc["image_id"] = body.value("image_id", json(nullptr));
                doc["question_id"] = question_id ? json(*question_id) : json(nullptr);
                doc["colormap"] = render::colormap_json();
                doc["alpha"] = config_.render.alpha;
                ids.push_back(store_.put_result(doc, render::render_overlay(r, image, config_.render)));
            }
            return ids;
        });
        send_json(res, {{"schema_version", 1}, {"job_id", job}, {"status", "queued"}});
    }));

    srv.Get(R"(/jobs/([^/]+))", guarded([this](const httplib::Request &req, httplib::Response &res) {
        auto rec = jobs_.get(req.matches[1]);
        if (!rec) throw Error(ErrorCode::kNotFound, "unknown job " + std::string(req.matches[1]), "job_id");
        send_json(res, rec->to_json());
    }));

    srv.Get(R"(/results/([^/]+)/overlay\.png)", guarded([this](const httplib::Request &req, httplib::Response &res) {
        const auto png = store_.get_overlay_png(req.matches[1]);
        res.set_content(std::string(png.begin(), png.end()), "image/png");
    }));

    srv.Get(R"(/results/([^/]+))", guarded([this](const httplib::Request &req, httplib::Response &res) {
        send_json(res, store_.get_result(req.matches[1]));
    }));

    srv.Patch(R"(/results/([^/]+))", guarded([this](const httplib::Request &req, httplib::Response &res) {
        send_json(res, store_.patch_result(req.matches[1], parse_body(req)));
    }));

    srv.Post("/evaluate", guarded([this](const httplib::Request &req, httplib::Response &res) {
        const auto body = parse_body(req);
        const auto model_id = required<std::string>(body, "model_id");
        const auto &set = question_set(field<std::string>(body, "set_id", "mini-vlat"));
        const int n_runs = field<int>(body, "n_runs", 10);
        if (n_runs < 1) throw Error(ErrorCode::kPreconditionViolation, "n_runs must be at least 1", "n_runs");
        GenerationConfig decoding;
        try {
            decoding = eval::generation_config_from_json(field<json>(body, "decoding", json::object()));
            decoding.validate();
        } catch (const json::exception &e) {
            throw Error(ErrorCode::kSchemaError, e.what(), "decoding");
        } catch (const Error &e) {
            throw Error(e.code(), e.what(), "decoding");
        }
        auto h = handle(model_id);
        const auto *entry = config_.registry.find(model_id);
        const std::string params = entry ? entry->params : "?";
        auto job = jobs_.submit(JobKind::kEval, model_id, body, [this, h, &set, n_runs, decoding, params] {
            eval::LocalModelClient client(*h);
            eval::EvalOptions options;
            options.params = params;
            options.workers = config_.eval_workers;
            auto doc = eval::to_json(eval::run_eval(client, set, n_runs, decoding, options));
            doc["kind"] = "eval";
            doc["markdown"] = eval::to_markdown_table(eval::report_from_json(doc));
            return std::vector<std::string>{store_.put_result(doc)};
        });
        send_json(res, {{"schema_version", 1}, {"job_id", job}, {"status", "queued"}});
    }));

    srv.Post("/compare", guarded([this](const httplib::Request &req, httplib::Response &res) {
        const auto body = parse_body(req);
        const auto model_id = required<std::string>(body, "model_id");
        const auto &set = question_set(field<std::string>(body, "set_id", "mini-vlat"));
        const auto specs = promptlab::parse_variant_manifest(body);
        auto h = handle(model_id);
        if (!h->supports_capture()) {
            throw Error(ErrorCode::kCaptureUnsupported, model_id + " cannot capture attention", "model_id");
        }
        core::SaliencyRequest request;
        request.layers = {field<int>(body, "layer_start", 1), field<int>(body, "layer_end", h->descriptor().num_layers)};
        request.layers.validate(h->descriptor().num_layers);
        request.tokens = selector_from(body);
        request.norm = norm_mode_from_string(field<std::string>(body, "norm", "softmax"));
        request.aggregation = core::aggregation_from_string(field<std::string>(body, "agg", "sum"));
        std::vector<std::pair<promptlab::PromptVariant, const eval::ChartQAInstance *>> variants;
        for (std::size_t i = 0; i < specs.size(); ++i) {
            const auto *item = set.find(specs[i].question_id);
            if (!item) {
                throw Error(ErrorCode::kNotFound, "unknown question " + specs[i].question_id,
                            "variants[" + std::to_string(i) + "].question_id");
            }
            variants.emplace_back(promptlab::apply_variant(specs[i], item->question), item);
        }
        std::optional<GenerationConfig> generation;
        if (body.contains("decoding")) generation = eval::generation_config_from_json(body.at("decoding"));

        auto job = jobs_.submit(JobKind::kCompare, model_id, body, [this, h, variants, request, generation] {
            json comparisons = json::array();
            for (const auto &[variant, item] : variants) {
                const auto image = load_image(item->image_path);
                auto cmp = promptlab::compare_variants(*h, image, variant.base_text, variant.text, request, generation);
                json matches = json::array();
                for (const auto &m : variant.matches) {
                    matches.push_back({{"original", m.original}, {"replacement", m.replacement}, {"position", m.position}});
                }
                comparisons.push_back({{"variant_id", variant.variant_id},
                                       {"question_id", variant.question_id},
                                       {"kind", promptlab::to_string(variant.kind)},
                                       {"matches", matches},
                                       {"comparison", promptlab::to_json(cmp)}});
            }
            json doc = {{"schema_version", 1}, {"kind", "compare"}, {"comparisons", comparisons}};
            return std::vector<std::string>{store_.put_result(doc)};
        });
        send_json(res, {{"schema_version", 1}, {"job_id", job}, {"status", "queued"}});
    }));

    srv.set_error_handler([](const httplib::Request &, httplib::Response &res) {
        if (res.body.empty()) {
            send_json(res, {{"schema_version", 1}, {"field", nullptr}, {"message", "no such endpoint"}, {"code", "NotFound"}},
                      res.status);
        }
    });
}

} // namespace agcam::service
