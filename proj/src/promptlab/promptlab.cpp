#include "agcam/promptlab/promptlab.hpp"

#include "agcam/error.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

namespace agcam::promptlab {

namespace {

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

bool iequal_at(std::string_view text, std::size_t pos, std::string_view term) {
    if (pos + term.size() > text.size()) return false;
    for (std::size_t i = 0; i < term.size(); ++i) {
        if (lower(text[pos + i]) != lower(term[i])) return false;
    }
    return true;
}

std::string match_case(std::string_view source, const std::string &replacement) {
    bool has_alpha = false, all_upper = true;
    for (char c : source) {
        if (std::isalpha(static_cast<unsigned char>(c))) {
            has_alpha = true;
            if (!std::isupper(static_cast<unsigned char>(c))) all_upper = false;
        }
    }
    std::string out = replacement;
    if (has_alpha && all_upper && source.size() > 1) {
        for (auto &c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    } else if (!source.empty() && std::isupper(static_cast<unsigned char>(source[0])) && !out.empty()) {
        out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    }
    return out;
}

VariantKind kind_from_string(const std::string &name, const std::string &path) {
    if (name == "terminology") return VariantKind::kTerminology;
    if (name == "steps") return VariantKind::kSteps;
    if (name == "custom") return VariantKind::kCustom;
    throw Error(ErrorCode::kSchemaError, path + ": unknown variant kind '" + name + "'", path);
}

SideOutcome run_side(ModelHandle &handle, const Image &image, std::string_view prompt,
                     const core::SaliencyRequest &request, const std::optional<GenerationConfig> &generation) {
    SideOutcome side;
    side.prompt = std::string(prompt);
    try {
        side.results = core::compute_saliency(handle, image, prompt, request);
        if (generation) side.answer = handle.generate_answer(image, prompt, *generation);
    } catch (const std::exception &e) {
        side.results.clear();
        side.error = e.what();
    }
    return side;
}

nlohmann::json side_json(const SideOutcome &side) {
    nlohmann::json results = nlohmann::json::array();
    for (const auto &r : side.results) results.push_back(core::to_export_json(r));
    nlohmann::json out = {{"prompt", side.prompt}, {"results", results}};
    out["answer"] = side.answer ? nlohmann::json(*side.answer) : nlohmann::json(nullptr);
    out["error"] = side.error.empty() ? nlohmann::json(nullptr) : nlohmann::json(side.error);
    return out;
}

} // namespace

Substitution substitute_terms(std::string_view question, const TermMap &terms) {
    std::vector<std::size_t> order(terms.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return terms[a].first.size() > terms[b].first.size(); });

    Substitution out;
    std::size_t pos = 0;
    while (pos < question.size()) {
        const bool at_boundary = pos == 0 || !word_char(question[pos - 1]);
        bool replaced = false;
        if (at_boundary) {
            for (std::size_t idx : order) {
                const auto &[term, plain] = terms[idx];
                if (term.empty() || !iequal_at(question, pos, term)) continue;
                const std::size_t end = pos + term.size();
                if (end < question.size() && word_char(question[end])) continue;
                const auto source = question.substr(pos, term.size());
                const auto repl = match_case(source, plain);
                out.matches.push_back({std::string(source), repl, pos});
                out.text += repl;
                pos = end;
                replaced = true;
                break;
            }
        }
        if (!replaced) out.text += question[pos++];
    }
    return out;
}

std::string add_steps(std::string_view question, const std::vector<std::string> &steps) {
    if (steps.empty()) throw Error(ErrorCode::kEmptySteps, "at least one step is required", "steps");
    std::string out(question);
    out += " Steps:";
    for (const auto &step : steps) {
        auto first = step.find_first_not_of(" \t\n");
        auto last = step.find_last_not_of(" \t\n");
        if (first == std::string::npos) throw Error(ErrorCode::kEmptySteps, "steps must not be blank", "steps");
        std::string s = step.substr(first, last - first + 1);
        if (s.back() != '.') s += '.';
        out += " " + s;
    }
    return out;
}

std::string_view to_string(VariantKind kind) {
    switch (kind) {
    case VariantKind::kTerminology: return "terminology";
    case VariantKind::kSteps: return "steps";
    case VariantKind::kCustom: return "custom";
    }
    return "custom";
}

std::vector<VariantSpec> parse_variant_manifest(const nlohmann::json &doc) {
    const bool wrapped = doc.is_object() && doc.contains("variants");
    const auto &variants = wrapped ? doc.at("variants") : doc;
    const std::string root = wrapped ? "$.variants" : "$";
    if (!variants.is_array()) throw Error(ErrorCode::kSchemaError, root + ": expected an array", root);
    std::vector<VariantSpec> out;
    for (std::size_t i = 0; i < variants.size(); ++i) {
        const auto path = root + "[" + std::to_string(i) + "]";
        const auto &v = variants[i];
        try {
            VariantSpec spec;
            spec.variant_id = v.value("id", "v" + std::to_string(i + 1));
            spec.question_id = v.at("base_question_id").get<std::string>();
            const auto &t = v.at("transform");
            spec.kind = kind_from_string(t.at("kind").get<std::string>(), path + ".transform.kind");
            switch (spec.kind) {
            case VariantKind::kTerminology:
                for (const auto &[k, val] : t.at("terms").items()) spec.terms.emplace_back(k, val.get<std::string>());
                break;
            case VariantKind::kSteps: spec.steps = t.at("steps").get<std::vector<std::string>>(); break;
            case VariantKind::kCustom:
                spec.text = t.at("text").get<std::string>();
                if (spec.text.find_first_not_of(" \t\n") == std::string::npos) {
                    throw Error(ErrorCode::kSchemaError, path + ": custom text must be non-empty", path + ".transform.text");
                }
                break;
            }
            out.push_back(std::move(spec));
        } catch (const nlohmann::json::exception &e) {
            throw Error(ErrorCode::kSchemaError, path + ": " + e.what(), path);
        }
    }
    return out;
}

std::vector<VariantSpec> load_variant_manifest(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
    try {
        return parse_variant_manifest(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error &e) {
        throw Error(ErrorCode::kSchemaError, std::string("manifest is not JSON: ") + e.what(), "$");
    }
}

PromptVariant apply_variant(const VariantSpec &spec, std::string_view base_question) {
    PromptVariant v{spec.variant_id, spec.question_id, spec.kind, std::string(base_question), {}, {}};
    switch (spec.kind) {
    case VariantKind::kTerminology: {
        auto sub = substitute_terms(base_question, spec.terms);
        v.text = std::move(sub.text);
        v.matches = std::move(sub.matches);
        break;
    }
    case VariantKind::kSteps: v.text = add_steps(base_question, spec.steps); break;
    case VariantKind::kCustom: v.text = spec.text; break;
    }
    return v;
}

Comparison compare_variants(ModelHandle &handle, const Image &image, std::string_view base_prompt,
                            std::string_view variant_prompt, const core::SaliencyRequest &request,
                            const std::optional<GenerationConfig> &generation) {
    Comparison out;
    out.base = run_side(handle, image, base_prompt, request, generation);
    out.variant = run_side(handle, image, variant_prompt, request, generation);
    const auto &a = out.base.results;
    const auto &b = out.variant.results;
    if (out.base.error.empty() && out.variant.error.empty() && !a.empty() && a.size() == b.size()) {
        std::vector<std::vector<double>> delta;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const auto &ga = a[i].normalized_grid.values;
            const auto &gb = b[i].normalized_grid.values;
            if (ga.size() != gb.size()) return out;
            std::vector<double> d(ga.size());
            for (std::size_t j = 0; j < d.size(); ++j) d[j] = gb[j] - ga[j];
            delta.push_back(std::move(d));
        }
        out.heat_delta = std::move(delta);
    }
    return out;
}

nlohmann::json to_json(const Comparison &comparison) {
    nlohmann::json out = {{"base", side_json(comparison.base)}, {"variant", side_json(comparison.variant)}};
    out["heat_delta"] = comparison.heat_delta ? nlohmann::json(*comparison.heat_delta) : nlohmann::json(nullptr);
    return out;
}

} // namespace agcam::promptlab
