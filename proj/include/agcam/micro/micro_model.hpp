#pragma once

#include "agcam/adapter/model_handle.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace agcam::micro {

struct MicroModelConfig {
    std::string model_id = "micro-2x2";
    int num_layers = 2;
    int num_heads = 2;
    int model_dim = 8;
    int vocab_size = 16;
    int grid_rows = 2;
    int grid_cols = 2;
    std::uint64_t seed = 0;
    int patch_size = 4;
    int max_sequence_len = 256;
    // Masks attention to j <= i; masked feature-map entries are multiplied
    // out after normalization, so their gradient is exactly zero.
    bool causal = false;

    // Throws InvalidConfig.
    void validate() const;
};

// Tiny early-fusion transformer with seeded fixed weights:
//   [bos] [image patches, row-major] [sep] [one token per question byte]
// Each block is multi-head self-attention plus a tanh MLP, both residual.
// The attention nonlinearity follows the requested NormMode, so the captured
// feature map is always the tensor the forward pass actually consumed.
class MicroModel final : public ModelHandle {
  public:
    static constexpr int kPadId = 0;
    static constexpr int kBosId = 1;
    static constexpr int kSepId = 2;
    static constexpr int kEosId = 3;
    static constexpr int kFirstCharId = 4;

    explicit MicroModel(MicroModelConfig config);

    const ModelDescriptor &descriptor() const override { return descriptor_; }
    bool supports_capture() const override { return true; }
    std::string weight_checksum() const override;

    const MicroModelConfig &config() const { return config_; }

    // y recomputed with the feature map of (layer, head) replaced by
    // `feature_map`; everything upstream of that layer is unchanged.
    double objective_with_feature_override(const FusedInputs &inputs, NormMode norm_mode, int layer, int head,
                                           const Matrix &feature_map) const;

    std::vector<int> generate_token_ids(const Image &image, std::string_view question,
                                        const GenerationConfig &config);

    int token_id_for(char c) const;
    std::string token_text(int id) const;

  protected:
    FusedInputs do_encode_inputs(const Image &image, std::string_view question) override;
    AttentionTrace do_capture(const FusedInputs &inputs, NormMode norm_mode) override;
    std::string do_generate(const Image &image, std::string_view question, const GenerationConfig &config) override;

  private:
    struct Layer {
        Matrix wq, wk, wv, wo, w1, w2;
    };
    struct Override {
        int layer; // 0-based
        int head;
        const Matrix *feature_map;
    };
    struct LayerCache {
        Matrix x, q, k, v, y, hidden;
        std::vector<Matrix> scores, features;
    };
    struct ForwardState {
        std::vector<LayerCache> layers;
        Matrix final_hidden;
        Matrix logits;
    };

    ForwardState forward(const Matrix &embeddings, NormMode norm_mode, std::optional<Override> override) const;
    Matrix embed_image(const Image &image) const;
    Matrix embed_tokens(const std::vector<int> &ids, int first_position) const;
    Matrix causal_mask(int s) const;
    std::vector<int> generate_ids_unlocked(const Image &image, std::string_view question,
                                           const GenerationConfig &config);

    MicroModelConfig config_;
    ModelDescriptor descriptor_;
    Matrix patch_proj_;  // (3 p^2) x d
    Matrix adapter_;     // d x d
    Matrix adapter_bias_; // 1 x d
    Matrix token_embed_; // v x d
    Matrix pos_embed_;   // max_len x d
    std::vector<Layer> layers_;
    Matrix unembed_;     // d x v
};

// Throws InvalidConfig for an invalid config.
std::unique_ptr<MicroModel> build_micro_model(const MicroModelConfig &config = {});

} // namespace agcam::micro
