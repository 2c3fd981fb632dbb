#pragma once

#include "agcam/image.hpp"

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

namespace agcam::service {

// Annotation vocabulary accepted in a result's error_tags.
const std::vector<std::string> &error_tag_vocabulary();

// Directory-backed store:
//   images/<image_id>.bin      uploaded bytes, id derived from their SHA-256
//   results/<result_id>.json   result documents
//   results/<result_id>.png    overlay, when the result has one
//   index.jsonl                one {result_id, kind, created_at} per line
// Readers run concurrently; index updates take the writer lock.
class ResultsStore {
  public:
    explicit ResultsStore(std::filesystem::path root);

    // Validates that the bytes decode as an image. Same bytes, same id.
    std::string put_image(std::span<const std::uint8_t> bytes);
    bool has_image(const std::string &image_id) const;
    Image load_image(const std::string &image_id) const; // NotFound

    // Assigns result_id, stores the document (with result_id filled in).
    std::string put_result(nlohmann::json document, const std::optional<Image> &overlay = std::nullopt);
    nlohmann::json get_result(const std::string &result_id) const;                  // NotFound
    std::vector<std::uint8_t> get_overlay_png(const std::string &result_id) const; // NotFound
    // Only "error_tags" may be changed; tags must come from the vocabulary.
    nlohmann::json patch_result(const std::string &result_id, const nlohmann::json &patch);

    nlohmann::json index() const;
    const std::filesystem::path &root() const { return root_; }

  private:
    std::filesystem::path result_path(const std::string &result_id, const char *ext) const;
    void append_index_locked(const std::string &result_id) const;

    std::filesystem::path root_;
    mutable std::shared_mutex mutex_;
    nlohmann::json index_;
    std::uint64_t next_result_ = 1;
};

std::string sha256_hex(std::span<const std::uint8_t> bytes);

} // namespace agcam::service
