#include "agcam/core/saliency.hpp"
#include "agcam/error.hpp"
#include "agcam/micro/micro_model.hpp"
#include "agcam/micro/oracle.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace agcam;
using namespace agcam::core;
using agcam::testing::golden_image;
using agcam::testing::patterned_image;

namespace {

template <typename F>
ErrorCode code_of(F &&fn) {
    try {
        fn();
    } catch (const Error &e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an agcam::Error";
    return ErrorCode::kIoError;
}

// One-layer, one-head trace over an S-token layout with the given rows.
AttentionTrace tiny_trace(const Matrix &f, const Matrix &g) {
    AttentionTrace t;
    const int s = static_cast<int>(f.rows());
    t.descriptor.model_id = "tiny";
    t.descriptor.num_layers = 1;
    t.descriptor.num_heads = 1;
    t.layout.total_len = s;
    t.layout.image_span = {0, s};
    t.layout.grid_rows = 1;
    t.layout.grid_cols = s;
    t.layout.token_texts.assign(s, "");
    t.feature_maps = {{f}};
    t.raw_scores = {{f}};
    t.gradients = {{g}};
    return t;
}

struct Case {
    std::unique_ptr<micro::MicroModel> model;
    FusedInputs inputs;
    AttentionTrace trace;
};

Case random_case(std::mt19937_64 &rng) {
    Case c;
    c.model = micro::build_micro_model(agcam::testing::random_micro_config(rng));
    const auto question = agcam::testing::random_question(rng, 1, 12);
    const auto norm = rng() % 2 ? NormMode::kSigmoid : NormMode::kSoftmax;
    c.inputs = c.model->encode_inputs(patterned_image(8 + rng() % 8, 8 + rng() % 8, rng() % 50), question);
    c.trace = c.model->forward_backward_capture(c.inputs, norm);
    return c;
}

LayerRange random_range(std::mt19937_64 &rng, int k) {
    std::uniform_int_distribution<int> pick(1, k);
    int a = pick(rng), b = pick(rng);
    return {std::min(a, b), std::max(a, b)};
}

} // namespace

TEST(LayerTokenSaliency, NegativeGradientsGiveZero) {
    Matrix f = Matrix::Constant(3, 3, 1.0 / 3);
    Matrix g = Matrix::Constant(3, 3, -2.0);
    const auto out = layer_token_saliency(tiny_trace(f, g), 1, 1);
    EXPECT_EQ(out, std::vector<double>(3, 0.0));
}

TEST(LayerTokenSaliency, TwoTokenProduct) {
    Matrix f(2, 2), g(2, 2);
    f << 0.5, 0.5, 0.5, 0.5;
    g << 2, 0, 9, 9;
    EXPECT_EQ(layer_token_saliency(tiny_trace(f, g), 1, 0), (std::vector<double>{1.0, 0.0}));
}

TEST(LayerTokenSaliency, ThreeByThreeWorkedExample) {
    Matrix f(3, 3), g(3, 3);
    f << 0.2, 0.3, 0.5, 0.1, 0.6, 0.3, 0.4, 0.4, 0.2;
    g << 1.0, -1.0, 2.0, -0.5, 3.0, 0.25, 0.0, -2.0, 4.0;
    // Row 1: [0.1*0, 0.6*3, 0.3*0.25]
    const auto out = layer_token_saliency(tiny_trace(f, g), 1, 1);
    EXPECT_DOUBLE_EQ(out[0], 0.0);
    EXPECT_DOUBLE_EQ(out[1], 1.8);
    EXPECT_DOUBLE_EQ(out[2], 0.075);
    EXPECT_EQ(out, oracle::brute_force_agcam(tiny_trace(f, g), 1, 1, 1));
}

TEST(LayerTokenSaliency, OutOfRangeRejected) {
    const auto t = tiny_trace(Matrix::Identity(2, 2), Matrix::Identity(2, 2));
    EXPECT_EQ(code_of([&] { layer_token_saliency(t, 2, 0); }), ErrorCode::kIndexOutOfRange);
    EXPECT_EQ(code_of([&] { layer_token_saliency(t, 1, 2); }), ErrorCode::kIndexOutOfRange);
}

TEST(AggregateLayers, SingleLayerIsIdentity) {
    const std::vector<std::vector<double>> maps = {{0.25, 1.5, 0.0}};
    EXPECT_EQ(aggregate_layers(maps), maps[0]);
}

TEST(AggregateLayers, EmptyAndRaggedRejected) {
    EXPECT_EQ(code_of([] { aggregate_layers({}); }), ErrorCode::kEmptyRange);
    const std::vector<std::vector<double>> ragged = {{1.0}, {1.0, 2.0}};
    EXPECT_EQ(code_of([&] { aggregate_layers(ragged); }), ErrorCode::kShapeMismatch);
}

TEST(Rollout, IdentityLayersLeaveRemainingMap) {
    // Row-normalizing I + I gives I, so identity layers drop out of the product.
    Matrix w(3, 3);
    w << 0.0, 2.0, 1.0, 1.0, 1.0, 1.0, 3.0, 0.0, 0.0;
    const std::vector<Matrix> only = {w};
    const std::vector<Matrix> padded = {Matrix::Identity(3, 3), w, Matrix::Identity(3, 3)};
    for (int q = 0; q < 3; ++q) {
        const auto a = rollout_layers(only, q);
        const auto b = rollout_layers(padded, q);
        for (int j = 0; j < 3; ++j) EXPECT_NEAR(a[j], b[j], 1e-15);
    }
}

TEST(Rollout, RowsAreDistributions) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Matrix> layers(1 + trial % 4, Matrix(5, 5));
        for (auto &m : layers) {
            for (int i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
        }
        const auto row = rollout_layers(layers, trial % 5);
        EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-12);
    }
}

TEST(ExtractImageHeat, SlicesImageSpan) {
    TokenLayout l;
    l.total_len = 8;
    const std::vector<double> heat = {0, 1, 2, 3, 4, 5, 6, 7};
    l.image_span = {0, 4};
    EXPECT_EQ(extract_image_heat(heat, l), (std::vector<double>{0, 1, 2, 3}));
    l.image_span = {2, 6};
    EXPECT_EQ(extract_image_heat(heat, l), (std::vector<double>{2, 3, 4, 5}));
    l.total_len = 9;
    EXPECT_EQ(code_of([&] { extract_image_heat(heat, l); }), ErrorCode::kShapeMismatch);
}

TEST(ExtractImageHeat, PartitionReconstructsHeat) {
    auto model = micro::build_micro_model();
    const auto inputs = model->encode_inputs(golden_image(), "where?");
    const auto trace = model->forward_backward_capture(inputs, NormMode::kSoftmax);
    const auto heat = layer_token_saliency(trace, 2, inputs.layout.query_span.begin);
    const auto image = extract_image_heat(heat, inputs.layout);
    std::vector<double> rebuilt(heat.size(), -1.0);
    for (int i = 0; i < inputs.layout.image_span.size(); ++i) rebuilt[inputs.layout.image_span.begin + i] = image[i];
    for (int i = inputs.layout.query_span.begin; i < inputs.layout.query_span.end; ++i) rebuilt[i] = heat[i];
    for (const auto &[role, pos] : inputs.layout.special_positions) rebuilt[pos] = heat[pos];
    EXPECT_EQ(rebuilt, heat);
}

TEST(NormalizeHeat, Examples) {
    const auto out = normalize_heat(std::vector<double>{0, 1, 3});
    EXPECT_EQ(out[0], 0.0);
    EXPECT_DOUBLE_EQ(out[1], 1.0 / 3);
    EXPECT_EQ(out[2], 1.0);
    EXPECT_EQ(normalize_heat(std::vector<double>{5, 5, 5}), std::vector<double>(3, 0.0));
    EXPECT_TRUE(normalize_heat(std::vector<double>{}).empty());
}

TEST(NormalizeHeat, NegativeRejected) {
    EXPECT_EQ(code_of([] { normalize_heat(std::vector<double>{1.0, -0.5}); }), ErrorCode::kNegativeInput);
}

TEST(NormalizeHeat, SpansUnitIntervalAndIsIdempotent) {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> v(2 + trial % 30);
        for (auto &x : v) x = u(rng);
        const auto n = normalize_heat(v);
        ASSERT_EQ(*std::min_element(n.begin(), n.end()), 0.0);
        ASSERT_EQ(*std::max_element(n.begin(), n.end()), 1.0);
        ASSERT_EQ(normalize_heat(n), n);
    }
}

TEST(TokenSelector, ParseAndResolve) {
    auto model = micro::build_micro_model();
    const auto layout = model->encode_inputs(golden_image(), "abc").layout;
    EXPECT_EQ(resolve_tokens(TokenSelector::parse("all"), layout), (std::vector<int>{6, 7, 8}));
    EXPECT_EQ(resolve_tokens(TokenSelector::parse("bos"), layout), std::vector<int>{0});
    EXPECT_EQ(resolve_tokens(TokenSelector::parse("separator"), layout), std::vector<int>{5});
    EXPECT_EQ(resolve_tokens(TokenSelector::parse("7"), layout), std::vector<int>{7});
    EXPECT_EQ(code_of([&] { resolve_tokens(TokenSelector::at(2), layout); }), ErrorCode::kInvalidTokenSelector);
    EXPECT_EQ(code_of([] { TokenSelector::parse("-1"); }), ErrorCode::kInvalidTokenSelector);
    EXPECT_EQ(code_of([] { TokenSelector::parse("first"); }), ErrorCode::kInvalidTokenSelector);
    EXPECT_EQ(code_of([&] { resolve_tokens(TokenSelector::of_role(SpecialRole::kEos), layout); }),
              ErrorCode::kInvalidTokenSelector);
}

TEST(LayerRange, Validation) {
    EXPECT_NO_THROW((LayerRange{1, 2}.validate(2)));
    EXPECT_EQ(code_of([] { LayerRange{2, 1}.validate(2); }), ErrorCode::kEmptyRange);
    EXPECT_EQ(code_of([] { LayerRange{0, 1}.validate(2); }), ErrorCode::kEmptyRange);
    EXPECT_EQ(code_of([] { LayerRange{1, 3}.validate(2); }), ErrorCode::kEmptyRange);
    EXPECT_EQ((LayerRange{3, 5}.label()), "3-5");
}

TEST(ComputeSaliency, BosSelector) {
    auto model = micro::build_micro_model();
    SaliencyRequest req{TokenSelector::parse("bos"), {1, 2}};
    const auto results = compute_saliency(*model, golden_image(), "bos?", req);
    ASSERT_EQ(results.size(), 1u);
    EXPECT_EQ(results[0].token_index, 0);
    EXPECT_EQ(results[0].token_text, "<bos>");
}

TEST(ComputeSaliency, OneResultPerQueryToken) {
    auto model = micro::build_micro_model();
    const auto results = compute_saliency(*model, golden_image(), "hello", {TokenSelector::all_query_tokens(), {1, 2}});
    ASSERT_EQ(results.size(), 5u);
    for (std::size_t i = 0; i < results.size(); ++i) {
        EXPECT_EQ(results[i].token_text, std::string(1, "hello"[i]));
        EXPECT_EQ(results[i].normalized_grid.rows, 2);
        EXPECT_EQ(results[i].normalized_grid.cols, 2);
        EXPECT_EQ(results[i].provenance.prompt_id, prompt_hash("hello"));
    }
}

TEST(ComputeSaliency, QuestionIdBecomesPromptId) {
    auto model = micro::build_micro_model();
    const auto results = compute_saliency(*model, golden_image(), "hi", {TokenSelector::at(6), {1, 1}}, "Q7");
    EXPECT_EQ(results.at(0).provenance.prompt_id, "Q7");
}

TEST(ComputeSaliency, BadRangeFailsBeforeCapture) {
    auto model = micro::build_micro_model();
    EXPECT_EQ(code_of([&] { compute_saliency(*model, golden_image(), "hi", {{}, {2, 1}}); }), ErrorCode::kEmptyRange);
}

TEST(ComputeSaliency, PerLayerRequestsSumToFullRange) {
    micro::MicroModelConfig cfg;
    cfg.num_layers = 4;
    auto model = micro::build_micro_model(cfg);
    const auto inputs = model->encode_inputs(golden_image(), "sum me");
    const auto trace = model->forward_backward_capture(inputs, NormMode::kSoftmax);
    const auto full = saliency_from_trace(trace, {{}, {1, 4}}, inputs.prompt);
    std::vector<std::vector<double>> acc(full.size(), std::vector<double>(trace.seq_len(), 0.0));
    for (int k = 1; k <= 4; ++k) {
        const auto single = saliency_from_trace(trace, {{}, {k, k}}, inputs.prompt);
        for (std::size_t t = 0; t < single.size(); ++t) {
            for (int j = 0; j < trace.seq_len(); ++j) acc[t][j] += single[t].raw_heat[j];
        }
    }
    for (std::size_t t = 0; t < full.size(); ++t) EXPECT_EQ(acc[t], full[t].raw_heat);
}

TEST(ComputeSaliency, MatchesBruteForceOracle) {
    for (auto norm : {NormMode::kSoftmax, NormMode::kSigmoid}) {
        auto model = micro::build_micro_model();
        const auto inputs = model->encode_inputs(golden_image(), agcam::testing::kGoldenQuestion);
        for (int a = 1; a <= 2; ++a) {
            for (int b = a; b <= 2; ++b) {
                const auto results = compute_saliency(*model, golden_image(), agcam::testing::kGoldenQuestion,
                                                      {{}, {a, b}, AggregationMode::kSum, norm});
                for (const auto &r : results) {
                    const auto expected = oracle::brute_force_agcam(*model, inputs, r.token_index, a, b, norm);
                    ASSERT_EQ(expected.size(), r.raw_heat.size());
                    for (std::size_t j = 0; j < expected.size(); ++j) {
                        ASSERT_NEAR(r.raw_heat[j], expected[j], 1e-6);
                    }
                }
            }
        }
    }
}

// Invariants over random micro-models, questions, norms and layer ranges.
TEST(SaliencyProperties, RandomTraces) {
    std::mt19937_64 rng(31337);
    for (int trial = 0; trial < 1000; ++trial) {
        SCOPED_TRACE(trial);
        Case c = random_case(rng);
        const auto &t = c.trace;
        const int k = t.num_layers();
        const LayerRange range = random_range(rng, k);
        const auto results = saliency_from_trace(t, {{}, range}, c.inputs.prompt);
        ASSERT_EQ(static_cast<int>(results.size()), t.layout.query_span.size());

        for (const auto &r : results) {
            ASSERT_EQ(static_cast<int>(r.raw_heat.size()), t.seq_len());
            for (double v : r.raw_heat) ASSERT_GE(v, 0.0);
            ASSERT_EQ(static_cast<int>(r.normalized_grid.values.size()), t.layout.image_span.size());
            const auto [lo, hi] = std::minmax_element(r.normalized_grid.values.begin(), r.normalized_grid.values.end());
            const bool constant = *std::min_element(r.image_heat.begin(), r.image_heat.end()) ==
                                  *std::max_element(r.image_heat.begin(), r.image_heat.end());
            ASSERT_EQ(*lo, 0.0);
            ASSERT_EQ(*hi, constant ? 0.0 : 1.0);
            ASSERT_EQ(normalize_heat(r.normalized_grid.values), r.normalized_grid.values);
        }

        // Layer-sum linearity: the range equals the exact sum of its single layers.
        const int q = results.front().token_index;
        std::vector<double> acc(t.seq_len(), 0.0);
        for (int layer = range.start; layer <= range.end; ++layer) {
            const auto m = layer_token_saliency(t, layer, q);
            for (int j = 0; j < t.seq_len(); ++j) acc[j] += m[j];
        }
        ASSERT_EQ(acc, results.front().raw_heat);

        // Row locality: other rows of F and grad do not matter.
        AttentionTrace scrambled = t;
        std::normal_distribution<double> noise(0.0, 1.0);
        for (int layer = 0; layer < k; ++layer) {
            for (int h = 0; h < t.num_heads(); ++h) {
                for (int i = 0; i < t.seq_len(); ++i) {
                    if (i == q) continue;
                    for (int j = 0; j < t.seq_len(); ++j) {
                        scrambled.gradients[layer][h](i, j) = noise(rng);
                        scrambled.feature_maps[layer][h](i, j) = std::abs(noise(rng));
                    }
                }
            }
        }
        for (int layer = 1; layer <= k; ++layer) {
            ASSERT_EQ(layer_token_saliency(scrambled, layer, q), layer_token_saliency(t, layer, q));
        }

        // Head permutation changes nothing beyond summation order.
        if (t.num_heads() > 1) {
            AttentionTrace permuted = t;
            for (int layer = 0; layer < k; ++layer) {
                std::reverse(permuted.feature_maps[layer].begin(), permuted.feature_maps[layer].end());
                std::reverse(permuted.gradients[layer].begin(), permuted.gradients[layer].end());
            }
            for (int layer = 1; layer <= k; ++layer) {
                const auto a = layer_token_saliency(t, layer, q);
                const auto b = layer_token_saliency(permuted, layer, q);
                for (int j = 0; j < t.seq_len(); ++j) ASSERT_NEAR(a[j], b[j], 1e-12);
            }
        }

        // Oracle agreement on the same trace.
        const auto brute = oracle::brute_force_agcam(t, q, range.start, range.end);
        for (int j = 0; j < t.seq_len(); ++j) ASSERT_NEAR(brute[j], results.front().raw_heat[j], 1e-6);
    }
}

TEST(SaliencyProperties, RolloutHeatIsNonnegativeAndNormalized) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        Case c = random_case(rng);
        const auto range = random_range(rng, c.trace.num_layers());
        const auto results = saliency_from_trace(c.trace, {{}, range, AggregationMode::kRollout}, c.inputs.prompt);
        for (const auto &r : results) {
            for (double v : r.raw_heat) ASSERT_GE(v, 0.0);
            for (double v : r.normalized_grid.values) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
        }
    }
}

TEST(Export, RoundTrip) {
    auto model = micro::build_micro_model();
    const auto results = compute_saliency(*model, golden_image(), "hi", {TokenSelector::at(7), {1, 2},
                                                                          AggregationMode::kRollout, NormMode::kSigmoid});
    const auto doc = to_export_json(results.at(0));
    EXPECT_EQ(doc.at("schema_version"), kExportSchemaVersion);
    const auto back = from_export_json(nlohmann::json::parse(doc.dump()));
    EXPECT_EQ(to_export_json(back), doc);
    EXPECT_EQ(back.normalized_grid, results[0].normalized_grid);
    EXPECT_EQ(back.aggregation, AggregationMode::kRollout);
    EXPECT_EQ(back.norm, NormMode::kSigmoid);
}

TEST(Export, SchemaViolationsRejected) {
    nlohmann::json doc = {{"schema_version", 2}};
    EXPECT_EQ(code_of([&] { from_export_json(doc); }), ErrorCode::kSchemaError);
    doc = {{"schema_version", 1}};
    EXPECT_EQ(code_of([&] { from_export_json(doc); }), ErrorCode::kSchemaError);
}
