#include "agcam/eval/question_set.hpp"

#include "agcam/adapter/registry.hpp"
#include "agcam/error.hpp"

#include <cmath>
#include <fstream>

namespace agcam::eval {

namespace fs = std::filesystem;

std::string_view to_string(AnswerKind kind) {
    switch (kind) {
    case AnswerKind::kNumeric: return "numeric";
    case AnswerKind::kCategorical: return "categorical";
    case AnswerKind::kBoolean: return "boolean";
    }
    return "numeric";
}

namespace {

std::string_view to_string(QuestionSource source) {
    switch (source) {
    case QuestionSource::kMiniVlat: return "mini_vlat";
    case QuestionSource::kVlat: return "vlat";
    case QuestionSource::kCustom: return "custom";
    }
    return "custom";
}

[[noreturn]] void schema_error(const std::string &path, const std::string &message) {
    throw Error(ErrorCode::kSchemaError, path + ": " + message, path);
}

const nlohmann::json &require(const nlohmann::json &obj, const char *key, const std::string &path) {
    auto it = obj.find(key);
    if (it == obj.end()) schema_error(path + "." + key, "missing field");
    return *it;
}

std::string require_string(const nlohmann::json &obj, const char *key, const std::string &path) {
    const auto &v = require(obj, key, path);
    if (!v.is_string()) schema_error(path + "." + key, "expected a string");
    return v.get<std::string>();
}

std::vector<std::string> string_list(const nlohmann::json &obj, const char *key, const std::string &path) {
    std::vector<std::string> out;
    auto it = obj.find(key);
    if (it == obj.end()) return out;
    if (!it->is_array()) schema_error(path + "." + key, "expected an array of strings");
    for (std::size_t i = 0; i < it->size(); ++i) {
        if (!(*it)[i].is_string()) schema_error(path + "." + key + "[" + std::to_string(i) + "]", "expected a string");
        out.push_back((*it)[i].get<std::string>());
    }
    return out;
}

AnswerKey parse_key(const nlohmann::json &doc, const std::string &path) {
    if (!doc.is_object()) schema_error(path, "expected an object");
    AnswerKey key;
    const std::string kind = require_string(doc, "kind", path);
    if (kind == "numeric") {
        key.kind = AnswerKind::kNumeric;
        const auto &value = require(doc, "value", path);
        if (!value.is_number() || !std::isfinite(value.get<double>())) {
            schema_error(path + ".value", "numeric keys need a finite value");
        }
        key.numeric_value = value.get<double>();
        key.unit = doc.value("unit", std::string());
        if (auto it = doc.find("tolerance"); it != doc.end()) {
            if (!it->is_number() || !std::isfinite(it->get<double>()) || it->get<double>() < 0.0) {
                schema_error(path + ".tolerance", "tolerance must be a finite number >= 0");
            }
            key.tolerance = it->get<double>();
        }
    } else if (kind == "categorical" || kind == "boolean") {
        key.kind = kind == "categorical" ? AnswerKind::kCategorical : AnswerKind::kBoolean;
        key.accepted_strings = string_list(doc, "accepted", path);
        if (key.accepted_strings.empty()) schema_error(path + ".accepted", "needs at least one accepted string");
    } else {
        schema_error(path + ".kind", "must be numeric, categorical or boolean");
    }
    return key;
}

nlohmann::json key_to_json(const AnswerKey &key) {
    nlohmann::json out = {{"kind", to_string(key.kind)}};
    if (key.kind == AnswerKind::kNumeric) {
        out["value"] = key.numeric_value;
        out["unit"] = key.unit;
        out["tolerance"] = key.tolerance;
    } else {
        out["accepted"] = key.accepted_strings;
    }
    return out;
}

} // namespace

const ChartQAInstance *QuestionSet::find(std::string_view id) const {
    for (const auto &item : items) {
        if (item.id == id) return &item;
    }
    return nullptr;
}

QuestionSet parse_question_set(const nlohmann::json &doc, const fs::path &base_dir) {
    if (!doc.is_object()) schema_error("$", "expected an object");
    QuestionSet set;
    const auto &version = require(doc, "schema_version", "$");
    if (!version.is_number_integer() || version.get<int>() != 1) schema_error("$.schema_version", "must be 1");
    set.schema_version = 1;
    set.set_id = require_string(doc, "set_id", "$");
    const auto &items = require(doc, "items", "$");
    if (!items.is_array()) schema_error("$.items", "expected an array");

    for (std::size_t i = 0; i < items.size(); ++i) {
        const std::string path = "$.items[" + std::to_string(i) + "]";
        const auto &item = items[i];
        if (!item.is_object()) schema_error(path, "expected an object");
        ChartQAInstance q;
        q.id = require_string(item, "id", path);
        const std::string source = require_string(item, "source", path);
        if (source == "mini_vlat") {
            q.source = QuestionSource::kMiniVlat;
        } else if (source == "vlat") {
            q.source = QuestionSource::kVlat;
        } else if (source == "custom") {
            q.source = QuestionSource::kCustom;
        } else {
            schema_error(path + ".source", "must be mini_vlat, vlat or custom");
        }
        q.chart_type = require_string(item, "chart_type", path);
        q.task_type = require_string(item, "task_type", path);
        q.question = require_string(item, "question", path);
        if (q.question.empty()) schema_error(path + ".question", "must be non-empty");
        q.answer_key = parse_key(require(item, "answer_key", path), path + ".answer_key");
        q.options = string_list(item, "options", path);

        fs::path image = require_string(item, "image_path", path);
        if (image.is_relative()) image = base_dir / image;
        if (!fs::exists(image)) {
            throw Error(ErrorCode::kMissingImage, path + ".image_path: " + image.string(), path + ".image_path");
        }
        q.image_path = fs::weakly_canonical(image);
        if (set.find(q.id) != nullptr) schema_error(path + ".id", "duplicate id " + q.id);
        set.items.push_back(std::move(q));
    }
    return set;
}

QuestionSet load_question_set(const fs::path &path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open question set " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error &e) {
        throw Error(ErrorCode::kSchemaError, e.what(), "$");
    }
    auto set = parse_question_set(doc, path.parent_path());
    set.source_path = path;
    return set;
}

std::vector<std::pair<std::string, fs::path>> bundled_question_sets() {
    const fs::path dir = data_dir() / "question_sets";
    return {{"mini-vlat", dir / "mini_vlat.json"}, {"vlat", dir / "vlat.json"}};
}

QuestionSet resolve_question_set(std::string_view name_or_path) {
    for (const auto &[id, path] : bundled_question_sets()) {
        if (id == name_or_path) return load_question_set(path);
    }
    return load_question_set(fs::path(name_or_path));
}

nlohmann::json to_json(const ChartQAInstance &item) {
    return {
        {"id", item.id},
        {"source", to_string(item.source)},
        {"chart_type", item.chart_type},
        {"task_type", item.task_type},
        {"image_path", item.image_path.string()},
        {"question", item.question},
        {"answer_key", key_to_json(item.answer_key)},
        {"options", item.options},
    };
}

} // namespace agcam::eval
