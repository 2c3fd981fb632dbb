#include "agcam/eval/client.hpp"

#include "agcam/error.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <openssl/evp.h>
#include <thread>

namespace agcam::eval {

ModelHandle &AnswerClient::capture_handle() {
    throw Error(ErrorCode::kArchitectureUnsupported, client_id() + " is answer-only; attention capture is unavailable");
}

namespace {

WireFormat wire_format_from_string(const std::string &name) {
    if (name == "openai_chat") return WireFormat::kOpenAiChat;
    if (name == "gemini") return WireFormat::kGemini;
    if (name == "recorded") return WireFormat::kRecorded;
    throw Error(ErrorCode::kInvalidConfig, "unknown wire_format '" + name + "'", "wire_format");
}

struct SplitUrl {
    std::string origin; // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string &url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorCode::kInvalidConfig, "endpoint must be a URL", "endpoint");
    const auto path_begin = url.find('/', scheme_end + 3);
    if (path_begin == std::string::npos) return {url, "/"};
    return {url.substr(0, path_begin), url.substr(path_begin)};
}

bool transient_status(int status) { return status == 429 || status >= 500; }

} // namespace

std::string ProviderConfig::key_env() const {
    if (!api_key_env.empty()) return api_key_env;
    std::string upper = name;
    for (auto &c : upper) c = std::isalnum(static_cast<unsigned char>(c)) ? std::toupper(static_cast<unsigned char>(c)) : '_';
    return "REMOTE_API_KEY_" + upper;
}

ProviderConfig ProviderConfig::from_json(const nlohmann::json &doc) {
    if (!doc.is_object()) throw Error(ErrorCode::kInvalidConfig, "provider config must be an object");
    ProviderConfig c;
    try {
        c.name = doc.at("name").get<std::string>();
        c.format = wire_format_from_string(doc.value("wire_format", std::string("openai_chat")));
        c.endpoint = doc.value("endpoint", std::string());
        c.model = doc.value("model", std::string());
        c.api_key_env = doc.value("api_key_env", std::string());
        c.recorded_path = doc.value("recorded_path", std::string());
        c.timeout = std::chrono::seconds(doc.value("timeout_s", 60));
        if (doc.contains("backoff_ms")) {
            c.backoff.clear();
            for (const auto &ms : doc.at("backoff_ms")) c.backoff.emplace_back(ms.get<long>());
        }
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorCode::kInvalidConfig, std::string("bad provider config: ") + e.what());
    }
    if (c.format != WireFormat::kRecorded && c.endpoint.empty()) {
        throw Error(ErrorCode::kInvalidConfig, "endpoint is required", "endpoint");
    }
    if (c.format == WireFormat::kRecorded && c.recorded_path.empty()) {
        throw Error(ErrorCode::kInvalidConfig, "recorded_path is required", "recorded_path");
    }
    return c;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char *>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

nlohmann::json build_request_body(const ProviderConfig &config, std::string_view question,
                                  std::string_view image_png_base64, const GenerationConfig &generation) {
    using nlohmann::json;
    if (config.format == WireFormat::kGemini) {
        json gen = {{"temperature", generation.temperature},
                    {"topP", generation.top_p},
                    {"maxOutputTokens", generation.max_new_tokens}};
        if (generation.seed) gen["seed"] = *generation.seed;
        return {{"contents",
                 json::array({{{"role", "user"},
                               {"parts", json::array({{{"inline_data",
                                                        {{"mime_type", "image/png"},
                                                         {"data", std::string(image_png_base64)}}}},
                                                      {{"text", std::string(question)}}})}}})},
                {"generationConfig", gen}};
    }
    json body = {
        {"model", config.model},
        {"temperature", generation.temperature},
        {"top_p", generation.top_p},
        {"max_tokens", generation.max_new_tokens},
        {"messages",
         json::array({{{"role", "user"},
                       {"content", json::array({{{"type", "image_url"},
                                                 {"image_url",
                                                  {{"url", "data:image/png;base64," + std::string(image_png_base64)}}}},
                                                {{"type", "text"}, {"text", std::string(question)}}})}}})},
    };
    if (generation.seed) body["seed"] = *generation.seed;
    return body;
}

std::string extract_response_text(WireFormat format, const nlohmann::json &payload) {
    try {
        if (format == WireFormat::kGemini) {
            std::string text;
            for (const auto &part : payload.at("candidates").at(0).at("content").at("parts")) {
                if (part.contains("text")) text += part.at("text").get<std::string>();
            }
            return text;
        }
        if (format == WireFormat::kOpenAiChat) {
            return payload.at("choices").at(0).at("message").at("content").get<std::string>();
        }
    } catch (const nlohmann::json::exception &) {
    }
    throw Error(ErrorCode::kProviderError, "unexpected provider payload: " + payload.dump());
}

RemoteModelClient::RemoteModelClient(ProviderConfig config, std::string api_key)
    : config_(std::move(config)), api_key_(std::move(api_key)),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
    if (config_.format == WireFormat::kRecorded) {
        std::ifstream in(config_.recorded_path);
        if (!in) throw Error(ErrorCode::kIoError, "cannot open " + config_.recorded_path.string(), "recorded_path");
        try {
            recorded_ = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception &e) {
            throw Error(ErrorCode::kInvalidConfig, std::string("bad recorded answers: ") + e.what(), "recorded_path");
        }
    }
}

AttentionTrace RemoteModelClient::forward_backward_capture(const FusedInputs &, NormMode) {
    throw Error(ErrorCode::kArchitectureUnsupported, client_id() + " is answer-only; attention capture is unavailable");
}

std::string RemoteModelClient::generate(const Image &image, std::string_view question,
                                        const GenerationConfig &config) {
    config.validate();
    if (image.empty()) throw Error(ErrorCode::kImageDecodeError, "empty image");

    if (config_.format == WireFormat::kRecorded) {
        const auto answers = recorded_.value("answers", nlohmann::json::object());
        auto it = answers.find(std::string(question));
        if (it != answers.end()) return it->get<std::string>();
        if (recorded_.contains("default")) return recorded_.at("default").get<std::string>();
        throw Error(ErrorCode::kProviderError, "no recorded answer for '" + std::string(question) + "'");
    }

    const auto png = encode_png(image);
    const auto body = build_request_body(config_, question, base64_encode(png), config).dump();
    const auto url = split_url(config_.endpoint);
    httplib::Headers headers;
    if (config_.format == WireFormat::kGemini) {
        headers.emplace("x-goog-api-key", api_key_);
    } else {
        headers.emplace("Authorization", "Bearer " + api_key_);
    }

    std::string last_failure;
    bool rate_limited = false;
    for (std::size_t attempt = 0;; ++attempt) {
        httplib::Client client(url.origin);
        client.set_connection_timeout(config_.timeout);
        client.set_read_timeout(config_.timeout);
        client.set_write_timeout(config_.timeout);
        auto res = client.Post(url.path, headers, body, "application/json");
        if (res) {
            if (res->status == 200) {
                nlohmann::json payload;
                try {
                    payload = nlohmann::json::parse(res->body);
                } catch (const nlohmann::json::exception &) {
                    throw Error(ErrorCode::kProviderError, "provider returned non-JSON body: " + res->body);
                }
                return extract_response_text(config_.format, payload);
            }
            if (res->status == 401 || res->status == 403) {
                throw Error(ErrorCode::kAuthError, "provider rejected credentials (HTTP " +
                                                       std::to_string(res->status) + ")");
            }
            if (!transient_status(res->status)) {
                throw Error(ErrorCode::kProviderError,
                            "HTTP " + std::to_string(res->status) + ": " + res->body);
            }
            rate_limited = res->status == 429;
            last_failure = "HTTP " + std::to_string(res->status) + ": " + res->body;
        } else {
            rate_limited = false;
            last_failure = "transport error: " + httplib::to_string(res.error());
        }
        if (attempt >= config_.backoff.size()) break;
        sleeper_(config_.backoff[attempt]);
    }
    throw Error(rate_limited ? ErrorCode::kRateLimited : ErrorCode::kProviderError,
                "giving up after " + std::to_string(config_.backoff.size() + 1) + " attempts: " + last_failure);
}

std::unique_ptr<RemoteModelClient> remote_model_client(const ProviderConfig &config) {
    std::string key;
    if (config.format != WireFormat::kRecorded) {
        const char *value = std::getenv(config.key_env().c_str());
        if (value == nullptr || *value == '\0') {
            throw Error(ErrorCode::kAuthError, "credential variable " + config.key_env() + " is not set",
                        config.key_env());
        }
        key = value;
    }
    return std::make_unique<RemoteModelClient>(config, std::move(key));
}

} // namespace agcam::eval
