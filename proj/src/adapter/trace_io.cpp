#include "agcam/adapter/trace_io.hpp"

#include "agcam/error.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>

namespace agcam {

namespace {

constexpr std::array<char, 4> kMagic = {'A', 'G', 'T', 'R'};
constexpr std::uint32_t kVersion = 1;

class Writer {
  public:
    explicit Writer(std::ostream &out) : out_(out) {}

    void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string &s) {
        u32(static_cast<std::uint32_t>(s.size()));
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    void matrix(const Matrix &m) {
        i32(static_cast<std::int32_t>(m.rows()));
        i32(static_cast<std::int32_t>(m.cols()));
        for (Eigen::Index i = 0; i < m.size(); ++i) f64(m.data()[i]);
    }
    void roles(const std::map<SpecialRole, int> &roles) {
        u32(static_cast<std::uint32_t>(roles.size()));
        for (const auto &[role, id] : roles) {
            u8(static_cast<std::uint8_t>(role));
            i32(id);
        }
    }

  private:
    std::ostream &out_;
};

class Reader {
  public:
    explicit Reader(std::istream &in) : in_(in) {}

    std::uint8_t u8() {
        const int c = in_.get();
        if (c == std::char_traits<char>::eof()) throw Error(ErrorCode::kIoError, "truncated trace file");
        return static_cast<std::uint8_t>(c);
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const auto n = u32();
        std::string s(n, '\0');
        in_.read(s.data(), n);
        if (static_cast<std::uint32_t>(in_.gcount()) != n) throw Error(ErrorCode::kIoError, "truncated trace file");
        return s;
    }
    Matrix matrix() {
        const auto rows = i32();
        const auto cols = i32();
        if (rows < 0 || cols < 0) throw Error(ErrorCode::kIoError, "corrupt matrix header");
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = f64();
        return m;
    }
    std::map<SpecialRole, int> roles() {
        std::map<SpecialRole, int> out;
        const auto n = u32();
        for (std::uint32_t i = 0; i < n; ++i) {
            const auto role = static_cast<SpecialRole>(u8());
            out[role] = i32();
        }
        return out;
    }

  private:
    std::istream &in_;
};

} // namespace

void write_trace(std::ostream &out, const AttentionTrace &trace) {
    Writer w(out);
    for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
    w.u32(kVersion);

    const auto &d = trace.descriptor;
    w.str(d.model_id);
    for (int v : {d.num_layers, d.num_heads, d.patch_size, d.grid_rows, d.grid_cols, d.image_embed_dim,
                  d.adapted_embed_dim, d.vocab_size, d.max_sequence_len}) {
        w.i32(v);
    }
    w.roles(d.special_token_ids);

    const auto &l = trace.layout;
    w.i32(l.total_len);
    w.i32(l.image_span.begin);
    w.i32(l.image_span.end);
    w.i32(l.query_span.begin);
    w.i32(l.query_span.end);
    w.roles(l.special_positions);
    w.u8(static_cast<std::uint8_t>(l.patch_order));
    w.i32(l.grid_rows);
    w.i32(l.grid_cols);
    w.u32(static_cast<std::uint32_t>(l.token_texts.size()));
    for (const auto &t : l.token_texts) w.str(t);

    w.u8(static_cast<std::uint8_t>(trace.norm_mode));
    w.f64(trace.objective);
    w.matrix(trace.logits);
    w.u32(static_cast<std::uint32_t>(trace.feature_maps.size()));
    w.u32(static_cast<std::uint32_t>(trace.num_heads()));
    for (std::size_t k = 0; k < trace.feature_maps.size(); ++k) {
        for (std::size_t h = 0; h < trace.feature_maps[k].size(); ++h) {
            w.matrix(trace.feature_maps[k][h]);
            w.matrix(trace.raw_scores[k][h]);
            w.matrix(trace.gradients[k][h]);
        }
    }
    if (!out) throw Error(ErrorCode::kIoError, "failed writing trace");
}

AttentionTrace read_trace(std::istream &in) {
    Reader r(in);
    for (char c : kMagic) {
        if (r.u8() != static_cast<std::uint8_t>(c)) throw Error(ErrorCode::kIoError, "not an AGTR trace file");
    }
    if (const auto version = r.u32(); version != kVersion) {
        throw Error(ErrorCode::kIoError, "unsupported trace version " + std::to_string(version));
    }

    AttentionTrace t;
    auto &d = t.descriptor;
    d.model_id = r.str();
    for (int *v : {&d.num_layers, &d.num_heads, &d.patch_size, &d.grid_rows, &d.grid_cols, &d.image_embed_dim,
                   &d.adapted_embed_dim, &d.vocab_size, &d.max_sequence_len}) {
        *v = r.i32();
    }
    d.special_token_ids = r.roles();

    auto &l = t.layout;
    l.total_len = r.i32();
    l.image_span.begin = r.i32();
    l.image_span.end = r.i32();
    l.query_span.begin = r.i32();
    l.query_span.end = r.i32();
    l.special_positions = r.roles();
    l.patch_order = static_cast<PatchOrder>(r.u8());
    l.grid_rows = r.i32();
    l.grid_cols = r.i32();
    l.token_texts.resize(r.u32());
    for (auto &text : l.token_texts) text = r.str();

    t.norm_mode = static_cast<NormMode>(r.u8());
    t.objective = r.f64();
    t.logits = r.matrix();
    const auto layers = r.u32();
    const auto heads = r.u32();
    t.feature_maps.assign(layers, std::vector<Matrix>(heads));
    t.raw_scores.assign(layers, std::vector<Matrix>(heads));
    t.gradients.assign(layers, std::vector<Matrix>(heads));
    for (std::uint32_t k = 0; k < layers; ++k) {
        for (std::uint32_t h = 0; h < heads; ++h) {
            t.feature_maps[k][h] = r.matrix();
            t.raw_scores[k][h] = r.matrix();
            t.gradients[k][h] = r.matrix();
        }
    }
    return t;
}

void save_trace(const std::filesystem::path &path, const AttentionTrace &trace) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
    write_trace(out, trace);
}

AttentionTrace load_trace(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
    return read_trace(in);
}

} // namespace agcam
