#include "agcam/micro/micro_model.hpp"

#include "agcam/core/objective.hpp"
#include "agcam/error.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace agcam::micro {

namespace {

// Portable standard normal stream: mt19937_64 is fully specified by the
// standard, std::normal_distribution is not.
class GaussianStream {
  public:
    explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

    double next() {
        if (cached_) {
            cached_ = false;
            return spare_;
        }
        const double u1 = uniform_open();
        const double u2 = uniform_open();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        cached_ = true;
        return radius * std::cos(angle);
    }

  private:
    double uniform_open() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool cached_ = false;
};

Matrix random_matrix(GaussianStream &rng, int rows, int cols, double scale) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.next();
    return m;
}

void fnv1a(std::uint64_t &hash, const Matrix &m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        auto bits = std::bit_cast<std::uint64_t>(m.data()[i]);
        for (int b = 0; b < 8; ++b) {
            hash ^= (bits >> (8 * b)) & 0xffu;
            hash *= 0x100000001b3ULL;
        }
    }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr std::string_view kDecodeAlphabet = "0123456789abcdefghijklmnopqrstuvwxyz .,?";

} // namespace

void MicroModelConfig::validate() const {
    const auto bad = [](const std::string &msg, const std::string &field) {
        throw Error(ErrorCode::kInvalidConfig, msg, field);
    };
    if (num_layers < 1) bad("num_layers must be >= 1", "num_layers");
    if (num_heads < 1) bad("num_heads must be >= 1", "num_heads");
    if (model_dim < 1) bad("model_dim must be >= 1", "model_dim");
    if (model_dim % num_heads != 0) bad("model_dim must be divisible by num_heads", "model_dim");
    if (vocab_size <= MicroModel::kFirstCharId) {
        bad("vocab_size too small for the character tokenizer", "vocab_size");
    }
    if (grid_rows < 1 || grid_cols < 1) bad("grid dimensions must be >= 1", "grid_rows");
    if (patch_size < 1) bad("patch_size must be >= 1", "patch_size");
    if (max_sequence_len < grid_rows * grid_cols + 3) bad("max_sequence_len too small", "max_sequence_len");
}

MicroModel::MicroModel(MicroModelConfig config) : config_(std::move(config)) {
    config_.validate();
    const int d = config_.model_dim;
    const int patch_dim = 3 * config_.patch_size * config_.patch_size;

    descriptor_.model_id = config_.model_id;
    descriptor_.num_layers = config_.num_layers;
    descriptor_.num_heads = config_.num_heads;
    descriptor_.patch_size = config_.patch_size;
    descriptor_.grid_rows = config_.grid_rows;
    descriptor_.grid_cols = config_.grid_cols;
    descriptor_.image_embed_dim = patch_dim;
    descriptor_.adapted_embed_dim = d;
    descriptor_.vocab_size = config_.vocab_size;
    descriptor_.special_token_ids = {{SpecialRole::kPad, kPadId},
                                     {SpecialRole::kBos, kBosId},
                                     {SpecialRole::kSeparator, kSepId},
                                     {SpecialRole::kEos, kEosId}};
    descriptor_.max_sequence_len = config_.max_sequence_len;
    descriptor_.validate();

    GaussianStream rng(config_.seed);
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    patch_proj_ = random_matrix(rng, patch_dim, d, 1.0 / std::sqrt(static_cast<double>(patch_dim)));
    adapter_ = random_matrix(rng, d, d, inv_sqrt_d);
    adapter_bias_ = random_matrix(rng, 1, d, 0.1);
    token_embed_ = random_matrix(rng, config_.vocab_size, d, 1.0);
    const int mlp_dim = 2 * d;
    for (int l = 0; l < config_.num_layers; ++l) {
        Layer layer;
        layer.wq = random_matrix(rng, d, d, 0.5 * inv_sqrt_d);
        layer.wk = random_matrix(rng, d, d, 0.5 * inv_sqrt_d);
        layer.wv = random_matrix(rng, d, d, inv_sqrt_d);
        layer.wo = random_matrix(rng, d, d, inv_sqrt_d);
        layer.w1 = random_matrix(rng, d, mlp_dim, inv_sqrt_d);
        layer.w2 = random_matrix(rng, mlp_dim, d, 1.0 / std::sqrt(static_cast<double>(mlp_dim)));
        layers_.push_back(std::move(layer));
    }
    unembed_ = random_matrix(rng, d, config_.vocab_size, inv_sqrt_d);
    // Last, so the length limit does not shift any other weight.
    pos_embed_ = random_matrix(rng, config_.max_sequence_len, d, 0.5);
}

std::string MicroModel::weight_checksum() const {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (const Matrix *m : {&patch_proj_, &adapter_, &adapter_bias_, &token_embed_, &pos_embed_}) fnv1a(hash, *m);
    for (const auto &layer : layers_) {
        for (const Matrix *m : {&layer.wq, &layer.wk, &layer.wv, &layer.wo, &layer.w1, &layer.w2}) fnv1a(hash, *m);
    }
    fnv1a(hash, unembed_);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, hash >>= 4) out[i] = kHex[hash & 0xf];
    return out;
}

int MicroModel::token_id_for(char c) const {
    const int buckets = config_.vocab_size - kFirstCharId;
    return kFirstCharId + static_cast<unsigned char>(c) % buckets;
}

std::string MicroModel::token_text(int id) const {
    switch (id) {
    case kPadId: return "<pad>";
    case kBosId: return "<bos>";
    case kSepId: return "<sep>";
    case kEosId: return "<eos>";
    default: break;
    }
    for (char c : kDecodeAlphabet) {
        if (token_id_for(c) == id) return std::string(1, c);
    }
    return "?";
}

Matrix MicroModel::embed_image(const Image &image) const {
    const int p = config_.patch_size;
    const Image resized = resize_area(image, config_.grid_cols * p, config_.grid_rows * p);
    Matrix patches(config_.grid_rows * config_.grid_cols, 3 * p * p);
    for (int r = 0; r < config_.grid_rows; ++r) {
        for (int c = 0; c < config_.grid_cols; ++c) {
            const int row = r * config_.grid_cols + c;
            int col = 0;
            for (int py = 0; py < p; ++py) {
                for (int px = 0; px < p; ++px) {
                    for (int ch = 0; ch < 3; ++ch) {
                        patches(row, col++) = resized.at(c * p + px, r * p + py, ch) / 255.0;
                    }
                }
            }
        }
    }
    const Matrix vision = (patches * patch_proj_).array().tanh().matrix();
    Matrix adapted = vision * adapter_;
    adapted.rowwise() += adapter_bias_.row(0);
    return adapted;
}

Matrix MicroModel::embed_tokens(const std::vector<int> &ids, int first_position) const {
    Matrix out(static_cast<Eigen::Index>(ids.size()), config_.model_dim);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) =
            token_embed_.row(ids[i]) + pos_embed_.row(first_position + static_cast<int>(i));
    }
    return out;
}

FusedInputs MicroModel::do_encode_inputs(const Image &image, std::string_view question) {
    const int n_image = config_.grid_rows * config_.grid_cols;
    const int total = 2 + n_image + static_cast<int>(question.size());
    if (total > config_.max_sequence_len) {
        throw Error(ErrorCode::kSequenceTooLong,
                    "sequence of " + std::to_string(total) + " exceeds " + std::to_string(config_.max_sequence_len));
    }

    FusedInputs in;
    in.model_id = descriptor_.model_id;
    in.prompt = std::string(question);
    auto &layout = in.layout;
    layout.total_len = total;
    layout.special_positions[SpecialRole::kBos] = 0;
    layout.image_span = {1, 1 + n_image};
    layout.special_positions[SpecialRole::kSeparator] = 1 + n_image;
    layout.query_span = {2 + n_image, total};
    layout.grid_rows = config_.grid_rows;
    layout.grid_cols = config_.grid_cols;
    layout.token_texts.assign(static_cast<std::size_t>(total), std::string());
    layout.token_texts[0] = "<bos>";
    layout.token_texts[1 + n_image] = "<sep>";

    in.token_ids.assign(static_cast<std::size_t>(total), -1);
    in.token_ids[0] = kBosId;
    in.token_ids[1 + n_image] = kSepId;
    for (std::size_t i = 0; i < question.size(); ++i) {
        const int pos = layout.query_span.begin + static_cast<int>(i);
        in.token_ids[pos] = token_id_for(question[i]);
        layout.token_texts[pos] = std::string(1, question[i]);
    }

    in.embeddings.resize(total, config_.model_dim);
    in.embeddings.row(0) = embed_tokens({kBosId}, 0).row(0);
    const Matrix image_rows = embed_image(image);
    for (int i = 0; i < n_image; ++i) {
        in.embeddings.row(1 + i) = image_rows.row(i) + pos_embed_.row(1 + i);
    }
    std::vector<int> tail(in.token_ids.begin() + (1 + n_image), in.token_ids.end());
    in.embeddings.bottomRows(static_cast<Eigen::Index>(tail.size())) = embed_tokens(tail, 1 + n_image);
    return in;
}

Matrix MicroModel::causal_mask(int s) const {
    Matrix mask = Matrix::Ones(s, s);
    if (config_.causal) {
        for (int i = 0; i < s; ++i) {
            for (int j = i + 1; j < s; ++j) mask(i, j) = 0.0;
        }
    }
    return mask;
}

MicroModel::ForwardState MicroModel::forward(const Matrix &embeddings, NormMode norm_mode,
                                             std::optional<Override> override) const {
    const int s = static_cast<int>(embeddings.rows());
    const int heads = config_.num_heads;
    const int dh = config_.model_dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const Matrix mask = causal_mask(s);

    ForwardState state;
    Matrix x = embeddings;
    for (int l = 0; l < config_.num_layers; ++l) {
        const Layer &w = layers_[l];
        LayerCache cache;
        cache.x = x;
        cache.q = x * w.wq;
        cache.k = x * w.wk;
        cache.v = x * w.wv;
        Matrix attended(s, config_.model_dim);
        for (int h = 0; h < heads; ++h) {
            const auto qh = cache.q.middleCols(h * dh, dh);
            const auto kh = cache.k.middleCols(h * dh, dh);
            const auto vh = cache.v.middleCols(h * dh, dh);
            Matrix scores = (qh * kh.transpose()) * scale;
            Matrix features(s, s);
            if (norm_mode == NormMode::kSoftmax) {
                for (int i = 0; i < s; ++i) {
                    double row_max = -std::numeric_limits<double>::infinity();
                    for (int j = 0; j < s; ++j) {
                        if (mask(i, j) != 0.0) row_max = std::max(row_max, scores(i, j));
                    }
                    double total = 0.0;
                    for (int j = 0; j < s; ++j) {
                        features(i, j) = mask(i, j) != 0.0 ? std::exp(scores(i, j) - row_max) : 0.0;
                        total += features(i, j);
                    }
                    features.row(i) /= total;
                }
            } else {
                features = scores.unaryExpr([](double a) { return sigmoid(a); });
            }
            if (override && override->layer == l && override->head == h) {
                features = *override->feature_map;
            }
            const Matrix effective = features.cwiseProduct(mask);
            attended.middleCols(h * dh, dh) = effective * vh;
            cache.scores.push_back(std::move(scores));
            cache.features.push_back(std::move(features));
        }
        cache.y = x + attended * w.wo;
        cache.hidden = (cache.y * w.w1).array().tanh().matrix();
        x = cache.y + cache.hidden * w.w2;
        state.layers.push_back(std::move(cache));
    }
    state.final_hidden = x;
    state.logits = x * unembed_;
    return state;
}

AttentionTrace MicroModel::do_capture(const FusedInputs &inputs, NormMode norm_mode) {
    const ForwardState state = forward(inputs.embeddings, norm_mode, std::nullopt);
    const int s = static_cast<int>(inputs.embeddings.rows());
    const int heads = config_.num_heads;
    const int dh = config_.model_dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const Matrix mask = causal_mask(s);

    AttentionTrace trace;
    trace.descriptor = descriptor_;
    trace.layout = inputs.layout;
    trace.norm_mode = norm_mode;
    trace.logits = state.logits;
    trace.objective = core::scalar_objective(state.logits);
    trace.feature_maps.resize(config_.num_layers);
    trace.raw_scores.resize(config_.num_layers);
    trace.gradients.assign(config_.num_layers, std::vector<Matrix>(heads));

    // dy/dlogits selects the (first) argmax of every row.
    Matrix d_logits = Matrix::Zero(s, config_.vocab_size);
    for (int i = 0; i < s; ++i) {
        Eigen::Index arg = 0;
        state.logits.row(i).maxCoeff(&arg);
        d_logits(i, arg) = 1.0;
    }
    Matrix dx = d_logits * unembed_.transpose();

    for (int l = config_.num_layers - 1; l >= 0; --l) {
        const Layer &w = layers_[l];
        const LayerCache &cache = state.layers[l];
        trace.feature_maps[l] = cache.features;
        trace.raw_scores[l] = cache.scores;

        const Matrix d_hidden = dx * w.w2.transpose();
        const Matrix d_pre = d_hidden.cwiseProduct((1.0 - cache.hidden.array().square()).matrix());
        const Matrix dy = dx + d_pre * w.w1.transpose();
        const Matrix d_attended = dy * w.wo.transpose();

        Matrix dq(s, config_.model_dim), dk(s, config_.model_dim), dv(s, config_.model_dim);
        for (int h = 0; h < heads; ++h) {
            const Matrix &features = cache.features[h];
            const Matrix effective = features.cwiseProduct(mask);
            const auto d_out = d_attended.middleCols(h * dh, dh);
            const Matrix d_features = (d_out * cache.v.middleCols(h * dh, dh).transpose()).cwiseProduct(mask);
            trace.gradients[l][h] = d_features;

            dv.middleCols(h * dh, dh) = effective.transpose() * d_out;
            Matrix d_scores(s, s);
            if (norm_mode == NormMode::kSoftmax) {
                const Eigen::VectorXd dots = d_features.cwiseProduct(features).rowwise().sum();
                d_scores = features.cwiseProduct(d_features - dots.replicate(1, s));
            } else {
                d_scores = d_features.cwiseProduct(features.cwiseProduct((1.0 - features.array()).matrix()));
            }
            dq.middleCols(h * dh, dh) = (d_scores * cache.k.middleCols(h * dh, dh)) * scale;
            dk.middleCols(h * dh, dh) = (d_scores.transpose() * cache.q.middleCols(h * dh, dh)) * scale;
        }
        dx = dy + dq * w.wq.transpose() + dk * w.wk.transpose() + dv * w.wv.transpose();
    }

    for (const auto &layer : trace.gradients) {
        for (const auto &g : layer) {
            if (!g.allFinite()) throw Error(ErrorCode::kNonFiniteGradient, "captured gradient is not finite");
        }
    }
    return trace;
}

double MicroModel::objective_with_feature_override(const FusedInputs &inputs, NormMode norm_mode, int layer,
                                                   int head, const Matrix &feature_map) const {
    if (layer < 1 || layer > config_.num_layers || head < 0 || head >= config_.num_heads) {
        throw Error(ErrorCode::kIndexOutOfRange, "override layer/head out of range");
    }
    if (feature_map.rows() != inputs.embeddings.rows() || feature_map.cols() != inputs.embeddings.rows()) {
        throw Error(ErrorCode::kShapeMismatch, "override feature map must be S x S");
    }
    const auto state = forward(inputs.embeddings, norm_mode, Override{layer - 1, head, &feature_map});
    return core::scalar_objective(state.logits);
}

std::vector<int> MicroModel::generate_ids_unlocked(const Image &image, std::string_view question,
                                                   const GenerationConfig &config) {
    const auto started = std::chrono::steady_clock::now();
    const FusedInputs inputs = do_encode_inputs(image, question);
    Matrix sequence = inputs.embeddings;
    std::mt19937_64 engine(config.seed ? *config.seed : std::random_device{}());
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<int> generated;
    while (static_cast<int>(generated.size()) < config.max_new_tokens) {
        if (std::chrono::steady_clock::now() - started > config.timeout) {
            throw Error(ErrorCode::kGenerationTimeout, "generation exceeded its wall-clock bound");
        }
        const int s = static_cast<int>(sequence.rows());
        if (s >= config_.max_sequence_len) break;
        const auto state = forward(sequence, NormMode::kSoftmax, std::nullopt);
        const Eigen::RowVectorXd logits = state.logits.row(s - 1);

        int next = 0;
        if (config.temperature == 0.0) {
            Eigen::Index arg = 0;
            logits.maxCoeff(&arg);
            next = static_cast<int>(arg);
        } else {
            std::vector<std::pair<double, int>> probs;
            const double top = logits.maxCoeff();
            double total = 0.0;
            for (int v = 0; v < logits.size(); ++v) {
                const double p = std::exp((logits[v] - top) / config.temperature);
                probs.emplace_back(p, v);
                total += p;
            }
            std::stable_sort(probs.begin(), probs.end(), [](auto a, auto b) { return a.first > b.first; });
            double kept = 0.0;
            std::size_t n_keep = 0;
            while (n_keep < probs.size() && (n_keep == 0 || kept / total < config.top_p)) {
                kept += probs[n_keep++].first;
            }
            double draw = unit(engine) * kept;
            next = probs[n_keep - 1].second;
            for (std::size_t i = 0; i < n_keep; ++i) {
                draw -= probs[i].first;
                if (draw <= 0.0) {
                    next = probs[i].second;
                    break;
                }
            }
        }
        generated.push_back(next);
        if (next == kEosId) break;
        Matrix grown(s + 1, config_.model_dim);
        grown.topRows(s) = sequence;
        grown.row(s) = token_embed_.row(next) + pos_embed_.row(s);
        sequence = std::move(grown);
    }
    return generated;
}

std::vector<int> MicroModel::generate_token_ids(const Image &image, std::string_view question,
                                                const GenerationConfig &config) {
    if (question.empty()) throw Error(ErrorCode::kPreconditionViolation, "question must be non-empty", "question");
    config.validate();
    std::lock_guard lock(session_mutex_);
    return generate_ids_unlocked(image, question, config);
}

std::string MicroModel::do_generate(const Image &image, std::string_view question, const GenerationConfig &config) {
    std::string text;
    for (int id : generate_ids_unlocked(image, question, config)) {
        if (id == kEosId) break;
        if (id >= kFirstCharId) text += token_text(id);
    }
    return text;
}

std::unique_ptr<MicroModel> build_micro_model(const MicroModelConfig &config) {
    config.validate();
    return std::make_unique<MicroModel>(config);
}

} // namespace agcam::micro
