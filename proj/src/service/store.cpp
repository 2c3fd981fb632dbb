#include "agcam/service/store.hpp"

#include "agcam/error.hpp"

#include <algorithm>
#include <chrono>
#include <fmt/format.h>
#include <fstream>
#include <mutex>
#include <openssl/sha.h>

namespace agcam::service {

namespace fs = std::filesystem;

const std::vector<std::string> &error_tag_vocabulary() {
    static const std::vector<std::string> tags = {
        "data/lookup",          "data/extraction",       "encoding/interpretation",
        "encoding/hierarchy", "reasoning/multi-step", "reasoning/prompt-sensitivity",
    };
    return tags;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char digest[SHA256_DIGEST_LENGTH];
    SHA256(bytes.data(), bytes.size(), digest);
    std::string out;
    for (unsigned char b : digest) out += fmt::format("{:02x}", b);
    return out;
}

namespace {

bool safe_id(const std::string &id) {
    return !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
    });
}

nlohmann::json read_json(const fs::path &path) {
    std::ifstream in(path);
    return nlohmann::json::parse(in);
}

void write_text(const fs::path &path, const std::string &text) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::kIoError, "cannot write " + tmp);
        out << text;
    }
    fs::rename(tmp, path);
}

} // namespace

ResultsStore::ResultsStore(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_ / "images");
    fs::create_directories(root_ / "results");
    index_ = nlohmann::json::object();
    // One JSON object per line, appended as results arrive. A torn last line
    // from an interrupted write is ignored.
    std::ifstream in(root_ / "index.jsonl");
    std::string line;
    while (std::getline(in, line)) {
        nlohmann::json entry = nlohmann::json::parse(line, nullptr, false);
        if (entry.is_discarded() || !entry.contains("result_id")) continue;
        const auto id = entry.at("result_id").get<std::string>();
        entry.erase("result_id");
        index_[id] = entry;
        unsigned long long n = 0;
        if (std::sscanf(id.c_str(), "r-%llu", &n) == 1) next_result_ = std::max<std::uint64_t>(next_result_, n + 1);
    }
}

std::string ResultsStore::put_image(std::span<const std::uint8_t> bytes) {
    decode_image(bytes); // rejects garbage before it is stored
    const auto id = "img-" + sha256_hex(bytes).substr(0, 32);
    std::unique_lock lock(mutex_);
    const auto path = root_ / "images" / (id + ".bin");
    if (!fs::exists(path)) write_file_bytes(path, bytes);
    return id;
}

bool ResultsStore::has_image(const std::string &image_id) const {
    std::shared_lock lock(mutex_);
    return safe_id(image_id) && fs::exists(root_ / "images" / (image_id + ".bin"));
}

Image ResultsStore::load_image(const std::string &image_id) const {
    if (!has_image(image_id)) throw Error(ErrorCode::kNotFound, "unknown image " + image_id, "image_id");
    std::shared_lock lock(mutex_);
    return agcam::load_image(root_ / "images" / (image_id + ".bin"));
}

fs::path ResultsStore::result_path(const std::string &result_id, const char *ext) const {
    return root_ / "results" / (result_id + ext);
}

void ResultsStore::append_index_locked(const std::string &result_id) const {
    // Appending avoids rewriting the whole index (and the flush a
    // replace-by-rename costs on ext4) for every stored result.
    std::ofstream out(root_ / "index.jsonl", std::ios::app | std::ios::binary);
    if (!out) throw Error(ErrorCode::kIoError, "cannot append to the results index");
    nlohmann::json entry = index_.at(result_id);
    entry["result_id"] = result_id;
    out << entry.dump() << '\n';
}

std::string ResultsStore::put_result(nlohmann::json document, const std::optional<Image> &overlay) {
    std::unique_lock lock(mutex_);
    const auto id = fmt::format("r-{:06d}", next_result_++);
    document["result_id"] = id;
    if (!document.contains("error_tags")) document["error_tags"] = nlohmann::json::array();
    if (overlay) {
        const auto png = encode_png(*overlay);
        write_file_bytes(result_path(id, ".png"), png);
        document["overlay_url"] = "/results/" + id + "/overlay.png";
    }
    write_text(result_path(id, ".json"), document.dump(2));
    const auto now = std::chrono::duration_cast<std::chrono::seconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
    index_[id] = {{"kind", document.value("kind", std::string("saliency"))}, {"created_at", now}};
    append_index_locked(id);
    return id;
}

nlohmann::json ResultsStore::get_result(const std::string &result_id) const {
    std::shared_lock lock(mutex_);
    if (!safe_id(result_id) || !index_.contains(result_id)) {
        throw Error(ErrorCode::kNotFound, "unknown result " + result_id, "result_id");
    }
    return read_json(result_path(result_id, ".json"));
}

std::vector<std::uint8_t> ResultsStore::get_overlay_png(const std::string &result_id) const {
    std::shared_lock lock(mutex_);
    if (!safe_id(result_id) || !index_.contains(result_id) || !fs::exists(result_path(result_id, ".png"))) {
        throw Error(ErrorCode::kNotFound, "no overlay for result " + result_id, "result_id");
    }
    return read_file_bytes(result_path(result_id, ".png"));
}

nlohmann::json ResultsStore::patch_result(const std::string &result_id, const nlohmann::json &patch) {
    if (!patch.is_object()) throw Error(ErrorCode::kSchemaError, "patch must be an object", "$");
    for (const auto &[key, _] : patch.items()) {
        if (key != "error_tags" && key != "schema_version") {
            throw Error(ErrorCode::kSchemaError, "only error_tags can be patched", key);
        }
    }
    std::vector<std::string> tags;
    if (patch.contains("error_tags")) {
        const auto &t = patch.at("error_tags");
        if (!t.is_array()) throw Error(ErrorCode::kSchemaError, "error_tags must be an array", "error_tags");
        const auto &vocab = error_tag_vocabulary();
        for (const auto &tag : t) {
            if (!tag.is_string() || std::find(vocab.begin(), vocab.end(), tag.get<std::string>()) == vocab.end()) {
                throw Error(ErrorCode::kSchemaError, "unknown error tag " + tag.dump(), "error_tags");
            }
            tags.push_back(tag.get<std::string>());
        }
    }
    std::unique_lock lock(mutex_);
    if (!safe_id(result_id) || !index_.contains(result_id)) {
        throw Error(ErrorCode::kNotFound, "unknown result " + result_id, "result_id");
    }
    auto doc = read_json(result_path(result_id, ".json"));
    if (patch.contains("error_tags")) doc["error_tags"] = tags;
    write_text(result_path(result_id, ".json"), doc.dump(2));
    return doc;
}

nlohmann::json ResultsStore::index() const {
    std::shared_lock lock(mutex_);
    return index_;
}

} // namespace agcam::service
