#pragma once

#include "agcam/adapter/attention_trace.hpp"
#include "agcam/image.hpp"

#include <chrono>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace agcam {

struct GenerationConfig {
    int max_new_tokens = 64;
    double temperature = 0.0;
    double top_p = 1.0;
    std::optional<std::uint64_t> seed;
    std::chrono::milliseconds timeout{120000};

    void validate() const;
};

// Output of encode_inputs: the fused embedding sequence plus its layout.
struct FusedInputs {
    std::string model_id;
    std::string prompt;
    TokenLayout layout;
    std::vector<int> token_ids; // -1 at image positions
    Matrix embeddings;          // S x adapted_embed_dim
};

// Uniform contract over early-fusion runtimes. Public calls are serialized
// per handle: at most one capture or generation runs on a handle at a time.
class ModelHandle {
  public:
    virtual ~ModelHandle() = default;

    virtual const ModelDescriptor &descriptor() const = 0;
    virtual bool supports_capture() const = 0;
    virtual std::string weight_checksum() const = 0;

    FusedInputs encode_inputs(const Image &image, std::string_view question);
    AttentionTrace forward_backward_capture(const FusedInputs &inputs, NormMode norm_mode);
    std::string generate_answer(const Image &image, std::string_view question, const GenerationConfig &config);

  protected:
    virtual FusedInputs do_encode_inputs(const Image &image, std::string_view question) = 0;
    virtual AttentionTrace do_capture(const FusedInputs &inputs, NormMode norm_mode) = 0;
    virtual std::string do_generate(const Image &image, std::string_view question,
                                    const GenerationConfig &config) = 0;

    std::mutex session_mutex_;
};

} // namespace agcam
