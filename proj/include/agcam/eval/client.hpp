#pragma once

#include "agcam/adapter/model_handle.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

namespace agcam::eval {

// Anything that can answer a chart question with free text.
class AnswerClient {
  public:
    virtual ~AnswerClient() = default;

    virtual std::string client_id() const = 0;
    virtual std::string generate(const Image &image, std::string_view question, const GenerationConfig &config) = 0;

    // True when generate() may be called from several threads at once.
    virtual bool concurrent_safe() const { return false; }

    // Handle for attention capture. Answer-only clients throw ArchitectureUnsupported.
    virtual ModelHandle &capture_handle();
};

class LocalModelClient final : public AnswerClient {
  public:
    explicit LocalModelClient(ModelHandle &handle) : handle_(handle) {}

    std::string client_id() const override { return handle_.descriptor().model_id; }
    std::string generate(const Image &image, std::string_view question, const GenerationConfig &config) override {
        return handle_.generate_answer(image, question, config);
    }
    ModelHandle &capture_handle() override { return handle_; }

  private:
    ModelHandle &handle_;
};

enum class WireFormat { kOpenAiChat, kGemini, kRecorded };

struct ProviderConfig {
    std::string name;     // e.g. "openai"; selects REMOTE_API_KEY_{NAME}
    WireFormat format = WireFormat::kOpenAiChat;
    std::string endpoint; // full URL of the generate call
    std::string model;
    std::string api_key_env; // defaults to REMOTE_API_KEY_{NAME upper-cased}
    std::filesystem::path recorded_path; // kRecorded: {"answers": {question: text}, "default": text}
    std::chrono::seconds timeout{60};
    std::vector<std::chrono::milliseconds> backoff{std::chrono::milliseconds(1000), std::chrono::milliseconds(2000),
                                                   std::chrono::milliseconds(4000)};

    static ProviderConfig from_json(const nlohmann::json &doc);
    std::string key_env() const;
};

// Answer-only client for a hosted model. Transient failures (connection
// errors, 429, 5xx) are retried after each backoff delay in turn.
class RemoteModelClient final : public AnswerClient {
  public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    RemoteModelClient(ProviderConfig config, std::string api_key);

    std::string client_id() const override { return config_.name + ":" + config_.model; }
    std::string generate(const Image &image, std::string_view question, const GenerationConfig &config) override;
    bool concurrent_safe() const override { return true; }

    // Hosted models expose no attention internals.
    AttentionTrace forward_backward_capture(const FusedInputs &inputs, NormMode norm_mode);

    void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }
    const ProviderConfig &config() const { return config_; }

  private:
    ProviderConfig config_;
    std::string api_key_;
    Sleeper sleeper_;
    nlohmann::json recorded_;
};

// Reads the credential from the environment first; throws AuthError before
// any network traffic when it is missing.
std::unique_ptr<RemoteModelClient> remote_model_client(const ProviderConfig &config);

nlohmann::json build_request_body(const ProviderConfig &config, std::string_view question,
                                  std::string_view image_png_base64, const GenerationConfig &generation);
// Throws ProviderError (with the raw payload) when the shape is unexpected.
std::string extract_response_text(WireFormat format, const nlohmann::json &payload);

std::string base64_encode(std::span<const std::uint8_t> bytes);

} // namespace agcam::eval
