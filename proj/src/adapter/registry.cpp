#include "agcam/adapter/registry.hpp"

#include "agcam/error.hpp"
#include "agcam/micro/micro_model.hpp"

#include <cstdlib>
#include <fstream>

#ifndef AGCAM_DEFAULT_DATA_DIR
#define AGCAM_DEFAULT_DATA_DIR "data"
#endif

namespace agcam {

namespace fs = std::filesystem;

namespace {

// Descriptor-only handle for a pretrained checkpoint. Running the checkpoint
// needs an external transformer runtime, which this build does not embed.
class PretrainedHandle final : public ModelHandle {
  public:
    PretrainedHandle(ModelDescriptor descriptor, fs::path weights_dir)
        : descriptor_(std::move(descriptor)), weights_dir_(std::move(weights_dir)) {}

    const ModelDescriptor &descriptor() const override { return descriptor_; }
    bool supports_capture() const override { return false; }
    std::string weight_checksum() const override { return weights_dir_.string(); }

  protected:
    FusedInputs do_encode_inputs(const Image &, std::string_view) override { throw unavailable(); }
    AttentionTrace do_capture(const FusedInputs &, NormMode) override { throw unavailable(); }
    std::string do_generate(const Image &, std::string_view, const GenerationConfig &) override {
        throw unavailable();
    }

  private:
    Error unavailable() const {
        return Error(ErrorCode::kRuntimeUnavailable,
                     "no transformer runtime is linked for " + descriptor_.model_id + " (weights at " +
                         weights_dir_.string() + ")");
    }

    ModelDescriptor descriptor_;
    fs::path weights_dir_;
};

const nlohmann::json *find_key(const nlohmann::json &config, std::initializer_list<const char *> sections,
                               const char *key) {
    for (const char *section : sections) {
        const nlohmann::json *scope = &config;
        if (*section != '\0') {
            auto it = config.find(section);
            if (it == config.end() || !it->is_object()) continue;
            scope = &*it;
        }
        if (auto it = scope->find(key); it != scope->end() && it->is_number_integer()) return &*it;
    }
    return nullptr;
}

int config_int(const nlohmann::json &config, std::initializer_list<const char *> sections, const char *key,
               int fallback = 0) {
    const auto *value = find_key(config, sections, key);
    return value ? value->get<int>() : fallback;
}

micro::MicroModelConfig micro_config(const RegistryEntry &entry) {
    micro::MicroModelConfig cfg;
    cfg.model_id = entry.model_id;
    const auto &o = entry.overrides;
    cfg.num_layers = o.value("num_layers", cfg.num_layers);
    cfg.num_heads = o.value("num_heads", cfg.num_heads);
    cfg.model_dim = o.value("model_dim", cfg.model_dim);
    cfg.vocab_size = o.value("vocab_size", cfg.vocab_size);
    cfg.grid_rows = o.value("grid_rows", cfg.grid_rows);
    cfg.grid_cols = o.value("grid_cols", cfg.grid_cols);
    cfg.seed = o.value("seed", cfg.seed);
    cfg.patch_size = o.value("patch_size", cfg.patch_size);
    cfg.max_sequence_len = o.value("max_sequence_len", cfg.max_sequence_len);
    cfg.causal = o.value("causal", cfg.causal);
    return cfg;
}

} // namespace

ModelRegistry::ModelRegistry(std::vector<RegistryEntry> entries) : entries_(std::move(entries)) {}

ModelRegistry ModelRegistry::from_json(const nlohmann::json &doc) {
    if (!doc.is_array()) throw Error(ErrorCode::kSchemaError, "models.json must be an array", "$");
    std::vector<RegistryEntry> entries;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto &item = doc[i];
        const std::string path = "$[" + std::to_string(i) + "]";
        try {
            RegistryEntry e;
            e.model_id = item.at("model_id").get<std::string>();
            e.source_uri = item.at("source_uri").get<std::string>();
            e.architecture = item.at("architecture").get<std::string>();
            e.params = item.value("params", std::string("?"));
            if (auto it = item.find("overrides"); it != item.end()) e.overrides = *it;
            entries.push_back(std::move(e));
        } catch (const nlohmann::json::exception &ex) {
            throw Error(ErrorCode::kSchemaError, ex.what(), path);
        }
    }
    return ModelRegistry(std::move(entries));
}

ModelRegistry ModelRegistry::load(const fs::path &path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error &e) {
        throw Error(ErrorCode::kSchemaError, e.what(), path.string());
    }
}

ModelRegistry ModelRegistry::bundled() { return load(data_dir() / "models.json"); }

const RegistryEntry *ModelRegistry::find(std::string_view model_id) const {
    for (const auto &e : entries_) {
        if (e.model_id == model_id) return &e;
    }
    return nullptr;
}

fs::path data_dir() {
    if (const char *env = std::getenv("AGCAM_DATA_DIR"); env != nullptr && *env != '\0') return env;
    return AGCAM_DEFAULT_DATA_DIR;
}

ModelDescriptor descriptor_from_config(std::string_view model_id, const nlohmann::json &config,
                                       const nlohmann::json &overrides) {
    ModelDescriptor d;
    d.model_id = std::string(model_id);
    d.num_layers = config_int(config, {"text_config", "language_config", ""}, "num_hidden_layers");
    d.num_heads = config_int(config, {"text_config", "language_config", ""}, "num_attention_heads");
    d.vocab_size = config_int(config, {"", "text_config", "language_config"}, "vocab_size");
    d.patch_size = config_int(config, {"vision_config"}, "patch_size");
    const int image_size = config_int(config, {"vision_config"}, "image_size");
    if (d.patch_size > 0 && image_size > 0) {
        d.grid_rows = d.grid_cols = image_size / d.patch_size;
    }
    d.image_embed_dim = config_int(config, {"vision_config"}, "hidden_size");
    d.adapted_embed_dim = config_int(config, {"text_config", "language_config", ""}, "hidden_size");
    d.max_sequence_len = config_int(config, {"text_config", "language_config", ""}, "max_position_embeddings");
    for (const auto &[key, role] : {std::pair{"bos_token_id", SpecialRole::kBos},
                                    std::pair{"eos_token_id", SpecialRole::kEos},
                                    std::pair{"pad_token_id", SpecialRole::kPad}}) {
        if (const auto *v = find_key(config, {"", "text_config", "language_config"}, key)) {
            d.special_token_ids[role] = v->get<int>();
        }
    }

    // Overrides fill gaps; they must agree with what the checkpoint declares.
    const auto apply = [&](const char *key, int &field) {
        auto it = overrides.find(key);
        if (it == overrides.end()) return;
        const int value = it->get<int>();
        if (field != 0 && field != value) {
            throw Error(ErrorCode::kInvalidConfig,
                        std::string(key) + " override " + std::to_string(value) + " disagrees with config value " +
                            std::to_string(field),
                        key);
        }
        field = value;
    };
    apply("num_layers", d.num_layers);
    apply("num_heads", d.num_heads);
    apply("patch_size", d.patch_size);
    apply("grid_rows", d.grid_rows);
    apply("grid_cols", d.grid_cols);
    apply("image_embed_dim", d.image_embed_dim);
    apply("adapted_embed_dim", d.adapted_embed_dim);
    apply("vocab_size", d.vocab_size);
    apply("max_sequence_len", d.max_sequence_len);
    d.validate();
    return d;
}

std::unique_ptr<ModelHandle> load_model(std::string_view model_id, const ModelRegistry &registry,
                                        std::optional<fs::path> cache_dir) {
    const RegistryEntry *entry = registry.find(model_id);
    if (entry == nullptr) throw Error(ErrorCode::kUnknownModel, std::string(model_id), "model_id");
    if (entry->architecture != "early_fusion") {
        throw Error(ErrorCode::kArchitectureUnsupported,
                    entry->model_id + " is " + entry->architecture + "; only early_fusion models can be probed");
    }
    if (entry->source_uri == "builtin:micro") {
        return micro::build_micro_model(micro_config(*entry));
    }

    if (!cache_dir) {
        const char *env = std::getenv("MODEL_CACHE_DIR");
        if (env == nullptr || *env == '\0') {
            throw Error(ErrorCode::kWeightsUnavailable, "MODEL_CACHE_DIR is not set for " + entry->model_id);
        }
        cache_dir = env;
    }
    const fs::path weights_dir = *cache_dir / entry->model_id;
    const fs::path config_path = weights_dir / "config.json";
    std::ifstream in(config_path);
    if (!in) throw Error(ErrorCode::kWeightsUnavailable, "no config.json under " + weights_dir.string());
    nlohmann::json config;
    try {
        config = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error &e) {
        throw Error(ErrorCode::kWeightsUnavailable, "unreadable config.json: " + std::string(e.what()));
    }
    return std::make_unique<PretrainedHandle>(descriptor_from_config(entry->model_id, config, entry->overrides),
                                              weights_dir);
}

} // namespace agcam
