#include <set>

#include "doctest.h"
#include "vsal/model.hpp"
#include "vsal/rng.hpp"

using namespace vsal;

namespace {

TensorPtr<float> random_clip(const ModelConfig& cfg, Rng& rng) {
    auto clip = zeros<float>({3, cfg.clip_len, cfg.input_height, cfg.input_width});
    for (auto& v : clip->data) v = static_cast<float>(rng.uniform(0, 1));
    return clip;
}

}  // namespace

TEST_CASE("paper preset: symbolic shape contract gives X4 = 1024x4x7x12") {
    const auto plan = plan_architecture(ModelConfig::paper_preset());
    CHECK(plan.pyramid_shape(4) == Shape{1024, 4, 7, 12});
    CHECK(plan.pyramid_shape(1) == Shape{64, 32, 56, 96});
    CHECK(plan.pyramid_shape(2) == Shape{192, 16, 28, 48});
    CHECK(plan.pyramid_shape(3) == Shape{480, 8, 14, 24});
}

TEST_CASE("toy preset: X4 = C4 x 1 x 1 x 2 for a 3x8x32x64 clip") {
    const auto cfg = ModelConfig::toy_preset();
    const auto plan = plan_architecture(cfg);
    CHECK(plan.pyramid_shape(4) == Shape{cfg.encoder_channels[3], 1, 1, 2});
}

TEST_CASE("shape contract holds symbolically across valid configs") {
    for (std::size_t t0 : {8u, 16u, 32u, 48u}) {
        for (std::size_t h0 : {32u, 64u, 96u}) {
            for (std::size_t w0 : {32u, 64u}) {
                ModelConfig cfg = ModelConfig::toy_preset();
                cfg.clip_len = t0;
                cfg.input_height = h0;
                cfg.input_width = w0;
                const auto plan = plan_architecture(cfg);
                CHECK(plan.pyramid_shape(4) ==
                      Shape{cfg.encoder_channels[3], t0 / 8, h0 / 32, w0 / 32});
                // every level's spatial resolution is a power-of-two multiple of X4's
                for (int level = 1; level <= 3; ++level) {
                    const auto s = plan.pyramid_shape(level);
                    const auto s4 = plan.pyramid_shape(4);
                    const std::size_t ratio = s[2] / s4[2];
                    CHECK(s[2] == ratio * s4[2]);
                    CHECK((ratio & (ratio - 1)) == 0);
                }
                // decoder output recovers the input resolution
                CHECK(plan.blocks.back().out_shape[2] == h0);
                CHECK(plan.blocks.back().out_shape[3] == w0);
            }
        }
    }
}

TEST_CASE("config validation rejects bad dimensions") {
    ModelConfig cfg = ModelConfig::toy_preset();
    cfg.clip_len = 12;
    CHECK_THROWS_AS(plan_architecture(cfg), ValueError);
    cfg = ModelConfig::toy_preset();
    cfg.input_height = 48;
    CHECK_THROWS_AS(plan_architecture(cfg), ValueError);
    cfg = ModelConfig::toy_preset();
    cfg.input_width = 0;
    CHECK_THROWS_AS(plan_architecture(cfg), ValueError);
}

TEST_CASE("parameter counting: primitive cases and the hand-summed toy total") {
    ConvSpec empty;
    CHECK(empty.param_count() == 0);  // zero-layer stub

    ConvSpec unit;
    unit.weight = {1, 1, 1, 1, 1};
    unit.bias = {1};
    CHECK(unit.param_count() == 2);  // single 1x1x1x1x1 conv with bias

    // Hand-summed oracle for the toy preset (channels {8,16,24,32}, decoder
    // widths {24,16,8,4,4}, T collapses to 1 before the final conv).
    const std::size_t encoder = (8 * 3 * 9 + 8) + (8 * 8 * 3 + 8) + (16 * 8 * 9 + 16) +
                                (16 * 16 * 3 + 16) + (24 * 16 * 9 + 24) + (24 * 24 * 3 + 24) +
                                (32 * 24 * 9 + 32) + (32 * 32 * 3 + 32);
    const std::size_t dec_convs = (24 * 32 * 27 + 24) + (16 * 24 * 27 + 16) + (8 * 16 * 27 + 8) +
                                  (4 * 8 * 27 + 4) + (4 * 4 * 27 + 4);
    const std::size_t skips = (24 * 24 + 24) + (24 * 24 * 27 + 24) + (16 * 16 + 16) +
                              (16 * 16 * 27 + 16) + (8 * 8 + 8) + (8 * 8 * 27 + 8);
    const std::size_t tail = (4 * 4 * 1 * 9 + 4) + (1 * 4 + 1);
    CHECK(count_parameters(ModelConfig::toy_preset()) == encoder + dec_convs + skips + tail);

    // and the instantiated model agrees with the symbolic count
    ViNet<float> model(ModelConfig::toy_preset(), 1);
    CHECK(model.parameter_count() == count_parameters(ModelConfig::toy_preset()));
}

TEST_CASE("hierarchy and skip-mode parameter orderings") {
    ModelConfig with = ModelConfig::toy_preset();
    ModelConfig without = with;
    without.use_hierarchy = false;
    CHECK(count_parameters(without) < count_parameters(with));

    ModelConfig channel_mode = with;
    channel_mode.skip_concat_mode = SkipConcatMode::channel;
    CHECK(count_parameters(with) < count_parameters(channel_mode));

    ModelConfig transpose = with;
    transpose.upsample_mode = UpsampleMode::transpose_conv;
    CHECK(count_parameters(transpose) > count_parameters(with));
}

TEST_CASE("zero-weight encoder produces an all-zero pyramid") {
    ModelConfig cfg = ModelConfig::toy_preset();
    ViNet<float> model(cfg, 3);
    for (auto& [name, p] : model.named_parameters()) {
        if (name.rfind("enc", 0) == 0) {
            for (auto& v : p->data) v = 0.f;
        }
    }
    Rng rng(4);
    const auto pyr = model.encode(nullptr, random_clip(cfg, rng));
    for (const auto& level : {pyr.x1, pyr.x2, pyr.x3, pyr.x4}) {
        for (float v : level->data) REQUIRE(v == 0.f);
    }
}

TEST_CASE("forward pass: output contract and bit-exact determinism") {
    ModelConfig cfg = ModelConfig::toy_preset();
    ViNet<float> model(cfg, 5);
    Rng rng(6);
    auto clip = random_clip(cfg, rng);

    auto out1 = model.forward(nullptr, clip);
    CHECK(out1->shape == Shape{cfg.input_height, cfg.input_width});
    for (float v : out1->data) {
        REQUIRE(v > 0.f);
        REQUIRE(v < 1.f);
    }
    auto out2 = model.forward(nullptr, clip);
    CHECK(out1->data == out2->data);

    auto bad_clip = zeros<float>({3, cfg.clip_len, cfg.input_height, cfg.input_width * 2});
    CHECK_THROWS_AS(model.encode(nullptr, bad_clip), ShapeError);
}

TEST_CASE("decode rejects a pyramid from a different config") {
    ModelConfig cfg = ModelConfig::toy_preset();
    ViNet<float> model(cfg, 5);

    ModelConfig other = cfg;
    other.encoder_channels = {4, 8, 12, 16};
    ViNet<float> other_model(other, 5);
    Rng rng(6);
    const auto pyr = other_model.encode(nullptr, random_clip(other, rng));
    CHECK_THROWS_AS(model.decode(nullptr, pyr), ShapeError);
}

TEST_CASE("skip_fuse: axis arithmetic and both modes' output shapes") {
    Rng rng(8);
    const std::size_t c = 6;
    auto state = zeros<float>({c, 2, 4, 4});
    auto skip = zeros<float>({c, 2, 4, 4});
    for (auto& v : state->data) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : skip->data) v = static_cast<float>(rng.uniform(-1, 1));

    // pre-merge arithmetic: temporal concat -> C x 4 x 4 x 4, channel -> 2C x 2 x 4 x 4
    auto pre_t = ops::concat<float>(nullptr, {state, skip}, 1);
    CHECK(pre_t->shape == Shape{c, 4, 4, 4});
    auto pre_c = ops::concat<float>(nullptr, {state, skip}, 0);
    CHECK(pre_c->shape == Shape{2 * c, 2, 4, 4});

    auto align_w = zeros<float>({c, c, 1, 1, 1});
    auto align_b = zeros<float>({c});
    auto merge_t_w = zeros<float>({c, c, 3, 3, 3});
    auto merge_t_b = zeros<float>({c});
    for (auto& v : align_w->data) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : merge_t_w->data) v = static_cast<float>(rng.uniform(-1, 1));
    auto fused_t = skip_fuse<float>(nullptr, state, skip, SkipConcatMode::temporal, align_w,
                                    align_b, merge_t_w, merge_t_b);
    CHECK(fused_t->shape == state->shape);

    auto merge_c_w = zeros<float>({c, 2 * c, 3, 3, 3});
    for (auto& v : merge_c_w->data) v = static_cast<float>(rng.uniform(-1, 1));
    auto fused_c = skip_fuse<float>(nullptr, state, skip, SkipConcatMode::channel, nullptr, nullptr,
                                    merge_c_w, merge_t_b);
    CHECK(fused_c->shape == state->shape);

    // skips with a different temporal extent are resampled onto the state's T
    auto long_skip = zeros<float>({c, 6, 4, 4});
    for (auto& v : long_skip->data) v = static_cast<float>(rng.uniform(-1, 1));
    auto fused_l = skip_fuse<float>(nullptr, state, long_skip, SkipConcatMode::temporal, align_w,
                                    align_b, merge_t_w, merge_t_b);
    CHECK(fused_l->shape == state->shape);

    auto mismatched = zeros<float>({c, 2, 8, 8});
    CHECK_THROWS_AS(skip_fuse<float>(nullptr, state, mismatched, SkipConcatMode::temporal, align_w,
                                     align_b, merge_t_w, merge_t_b),
                    ShapeError);
}

TEST_CASE("all model variants produce valid outputs") {
    Rng rng(9);
    for (bool hierarchy : {true, false}) {
        for (auto skip_mode : {SkipConcatMode::temporal, SkipConcatMode::channel}) {
            for (auto up : {UpsampleMode::trilinear, UpsampleMode::transpose_conv}) {
                ModelConfig cfg = ModelConfig::toy_preset();
                cfg.use_hierarchy = hierarchy;
                cfg.skip_concat_mode = skip_mode;
                cfg.upsample_mode = up;
                ViNet<float> model(cfg, 11);
                auto out = model.forward(nullptr, random_clip(cfg, rng));
                REQUIRE(out->shape == Shape{cfg.input_height, cfg.input_width});
            }
        }
    }
}

TEST_CASE("named parameters are unique and cover the whole model") {
    ViNet<float> model(ModelConfig::toy_preset(), 13);
    std::set<std::string> names;
    std::size_t total = 0;
    for (const auto& [name, p] : model.named_parameters()) {
        CHECK(names.insert(name).second);
        CHECK(p->requires_grad);
        total += p->numel();
    }
    CHECK(total == model.parameter_count());
}

TEST_CASE("longer clips exercise the temporal halving schedule") {
    ModelConfig cfg = ModelConfig::toy_preset();
    cfg.clip_len = 48;  // T4 = 6 -> 3 -> 2 -> 1 through the stride-2 blocks
    const auto plan = plan_architecture(cfg);
    CHECK(plan.pyramid_shape(4)[1] == 6);
    CHECK(plan.blocks[0].out_shape[1] == 3);
    CHECK(plan.blocks[1].out_shape[1] == 2);
    CHECK(plan.blocks[2].out_shape[1] == 1);
    CHECK(plan.collapse.weight[2] == 1);

    ViNet<float> model(cfg, 17);
    Rng rng(18);
    auto out = model.forward(nullptr, random_clip(cfg, rng));
    CHECK(out->shape == Shape{cfg.input_height, cfg.input_width});
}
