#pragma once

#include "agcam/adapter/model_handle.hpp"

#include <filesystem>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace agcam {

struct RegistryEntry {
    std::string model_id;
    std::string source_uri;   // "builtin:micro" or a hub/local reference
    std::string architecture; // only "early_fusion" supports capture
    std::string params;       // display label, e.g. "3B"
    nlohmann::json overrides = nlohmann::json::object();
};

// Contents of a models.json file.
class ModelRegistry {
  public:
    ModelRegistry() = default;
    explicit ModelRegistry(std::vector<RegistryEntry> entries);

    static ModelRegistry from_json(const nlohmann::json &doc);
    static ModelRegistry load(const std::filesystem::path &path);
    // data/models.json shipped with the project (AGCAM_DATA_DIR overrides).
    static ModelRegistry bundled();

    const RegistryEntry *find(std::string_view model_id) const;
    const std::vector<RegistryEntry> &entries() const { return entries_; }

  private:
    std::vector<RegistryEntry> entries_;
};

// Root directory for data files shipped with the project.
std::filesystem::path data_dir();

// Resolves `model_id` through the registry. Pretrained weights are looked up
// under `cache_dir` (MODEL_CACHE_DIR when not given).
// Throws UnknownModel, WeightsUnavailable or ArchitectureUnsupported.
std::unique_ptr<ModelHandle> load_model(std::string_view model_id, const ModelRegistry &registry,
                                        std::optional<std::filesystem::path> cache_dir = std::nullopt);

// Builds a descriptor from a Hugging Face style config.json, applying the
// registry overrides on top. Throws InvalidConfig on inconsistency.
ModelDescriptor descriptor_from_config(std::string_view model_id, const nlohmann::json &config,
                                       const nlohmann::json &overrides);

} // namespace agcam
