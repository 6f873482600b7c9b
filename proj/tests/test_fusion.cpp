#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "vsal/fusion.hpp"
#include "vsal/model.hpp"
#include "vsal/rng.hpp"

using namespace vsal;

TEST_CASE("audio branch: zero waveform gives zero features, shape contract holds") {
    Rng rng(1);
    AudioBranch<double> branch(8, rng);

    Waveform silent;
    silent.samples.assign(2000, 0.f);
    const auto feats = branch.forward(nullptr, silent);
    CHECK(feats.features->shape == Shape{8, 3, 1});
    for (double v : feats.features->data) CHECK(v == 0.0);  // zero biases at init

    Waveform noise;
    noise.samples.resize(313);  // shorter than the stack minimum; gets tiled
    Rng wr(2);
    for (auto& s : noise.samples) s = static_cast<float>(wr.uniform(-1, 1));
    const auto f2 = branch.forward(nullptr, noise);
    CHECK(f2.features->shape == Shape{8, 3, 1});
    CHECK(f2.source == AudioSource::computed_from_waveform);

    Waveform empty;
    CHECK_THROWS_AS(branch.forward(nullptr, empty), ValueError);
}

TEST_CASE("audio branch conv stages match the direct-summation conv1d oracle") {
    Rng rng(3);
    AudioBranch<double> branch(4, rng);
    const auto params = branch.named_parameters();     // conv1..3 (w,b) pairs
    const auto layers = audio_branch_layers(4);

    Waveform wav;
    wav.samples.resize(1700);
    Rng wr(4);
    for (auto& s : wav.samples) s = static_cast<float>(wr.uniform(-1, 1));

    // oracle route: tile to the minimum length, then conv1d+relu per stage
    std::vector<double> x;
    for (float s : wav.samples) x.push_back(s);
    while (x.size() < audio_branch_min_samples()) x.push_back(x[x.size() % wav.samples.size()]);
    std::size_t len = x.size(), c_in = 1;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        x = oracle::conv1d(x, c_in, len, params[2 * i].second->data, l.c_out, l.kernel,
                           params[2 * i + 1].second->data, l.stride, l.pad);
        len = (len + 2 * l.pad - l.kernel) / l.stride + 1;
        c_in = l.c_out;
        for (auto& v : x) v = std::max(0.0, v);
    }
    // adaptive max-pool to 3 taps
    std::vector<double> pooled(c_in * 3, -1e300);
    for (std::size_t c = 0; c < c_in; ++c) {
        for (std::size_t b = 0; b < 3; ++b) {
            for (std::size_t i = b * len / 3; i < (b + 1) * len / 3; ++i) {
                pooled[c * 3 + b] = std::max(pooled[c * 3 + b], x[c * len + i]);
            }
        }
    }

    const auto feats = branch.forward(nullptr, wav);
    REQUIRE(feats.features->numel() == pooled.size());
    for (std::size_t i = 0; i < pooled.size(); ++i) {
        CHECK(feats.features->data[i] == doctest::Approx(pooled[i]).epsilon(1e-12));
    }
}

TEST_CASE("zero_audio: zeroed, idempotent, flagged") {
    Rng rng(5);
    AudioFeatures<float> a;
    a.features = zeros<float>({4, 3, 1});
    for (auto& v : a.features->data) v = static_cast<float>(rng.uniform(-1, 1));

    const auto z = zero_audio(a);
    CHECK(z.features->shape == a.features->shape);
    CHECK(z.source == AudioSource::zeroed);
    double s = 0;
    for (float v : z.features->data) s += std::abs(v);
    CHECK(s == 0.0);

    const auto zz = zero_audio(z);
    CHECK(zz.features->data == z.features->data);
}

TEST_CASE("fuse_concat: identity selection, shape arithmetic, tiled-mean oracle") {
    Rng rng(6);
    const std::size_t c4 = 4;
    auto visual = zeros<float>({c4, 2, 2, 2});
    for (auto& v : visual->data) v = static_cast<float>(rng.uniform(-1, 1));
    AudioFeatures<float> audio;
    audio.features = zeros<float>({c4, 3, 1});
    for (auto& v : audio.features->data) v = static_cast<float>(rng.uniform(-1, 1));

    // pre-reduction concat shape: visual 4x2x2x2 + tiled audio -> 8x2x2x2
    auto tiled = zeros<float>({c4, 2, 2, 2});
    auto pre = ops::concat<float>(nullptr, {visual, tiled}, 0);
    CHECK(pre->shape == Shape{2 * c4, 2, 2, 2});

    // reduction conv that selects the visual half reproduces the input exactly
    auto select_w = zeros<float>({c4, 2 * c4, 1, 1, 1});
    for (std::size_t c = 0; c < c4; ++c) select_w->data[c * 2 * c4 + c] = 1.f;
    auto zero_b = zeros<float>({c4});
    const auto self = fuse_concat<float>(nullptr, visual, zero_audio(audio), select_w, zero_b);
    CHECK(self->data == visual->data);

    // selecting the audio half exposes the tiled per-channel means
    auto select_audio = zeros<float>({c4, 2 * c4, 1, 1, 1});
    for (std::size_t c = 0; c < c4; ++c) select_audio->data[c * 2 * c4 + c4 + c] = 1.f;
    const auto tiles = fuse_concat<float>(nullptr, visual, audio, select_audio, zero_b);
    for (std::size_t c = 0; c < c4; ++c) {
        const float want = (audio.features->data[c * 3] + audio.features->data[c * 3 + 1] +
                            audio.features->data[c * 3 + 2]) /
                           3.f;
        for (std::size_t i = 0; i < 8; ++i) {
            CHECK(tiles->data[c * 8 + i] == doctest::Approx(want).epsilon(1e-6));
        }
    }

    AudioFeatures<float> wrong;
    wrong.features = zeros<float>({c4 + 1, 3, 1});
    CHECK_THROWS_AS(fuse_concat<float>(nullptr, visual, wrong, select_w, zero_b), ShapeError);
}

TEST_CASE("fuse_bilinear: zero parameters, oracle composition, extent validation") {
    Rng rng(7);
    const std::size_t c4 = 3;
    auto visual = zeros<float>({c4, 2, 2, 4});
    for (auto& v : visual->data) v = static_cast<float>(rng.uniform(-1, 1));
    AudioFeatures<float> audio;
    audio.features = zeros<float>({c4, 3, 1});
    for (auto& v : audio.features->data) v = static_cast<float>(rng.uniform(-1, 1));

    const std::size_t x0 = bilinear_pooled_extent(2, 2, 4);  // (2/2)*(2/2)*(4/2) = 2
    const std::size_t x = 2 * 2 * 4;
    BilinearFusionParams<float> params;
    params.A = zeros<float>({x0, x, 3});
    params.b = zeros<float>({x});
    CHECK(params.parameter_count() == x0 * x * 3 + x);

    const auto zero_out = fuse_bilinear<float>(nullptr, visual, audio, params);
    CHECK(zero_out->shape == visual->shape);
    for (float v : zero_out->data) CHECK(v == 0.f);

    for (auto& v : params.A->data) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : params.b->data) v = static_cast<float>(rng.uniform(-1, 1));
    const auto fused = fuse_bilinear<float>(nullptr, visual, audio, params);

    // oracle: maxpool -> flatten -> triple loop -> reshape
    auto pooled = ops::maxpool3d<float>(nullptr, visual, {2, 2, 2}, {2, 2, 2});
    std::vector<double> x1(pooled->data.begin(), pooled->data.end());
    std::vector<double> x2(audio.features->data.begin(), audio.features->data.end());
    std::vector<double> A(params.A->data.begin(), params.A->data.end());
    std::vector<double> b(params.b->data.begin(), params.b->data.end());
    const auto ref = oracle::bilinear(x1, A, x2, b, c4, x0, x, 3);
    for (std::size_t i = 0; i < ref.size(); ++i) {
        CHECK(fused->data[i] == doctest::Approx(ref[i]).epsilon(1e-5));
    }

    BilinearFusionParams<float> bad;
    bad.A = zeros<float>({x0, x + 1, 3});
    bad.b = zeros<float>({x + 1});
    CHECK_THROWS_AS(fuse_bilinear<float>(nullptr, visual, audio, bad), ShapeError);
}

TEST_CASE("fusion-free model output is bit-identical for any audio input") {
    ModelConfig cfg = ModelConfig::toy_preset();
    ViNet<float> model(cfg, 21);
    Rng rng(22);
    auto clip = zeros<float>({3, cfg.clip_len, cfg.input_height, cfg.input_width});
    for (auto& v : clip->data) v = static_cast<float>(rng.uniform(0, 1));

    AudioFeatures<float> a;
    a.features = zeros<float>({cfg.audio_channels(), 3, 1});
    for (auto& v : a.features->data) v = static_cast<float>(rng.uniform(-1, 1));
    const auto zeroed = zero_audio(a);

    const auto with_audio = model.forward(nullptr, clip, &a);
    const auto with_zero = model.forward(nullptr, clip, &zeroed);
    const auto without = model.forward(nullptr, clip);
    CHECK(with_audio->data == with_zero->data);
    CHECK(with_audio->data == without->data);
}

TEST_CASE("fused model variants forward correctly and demand audio") {
    Rng rng(23);
    for (auto mode : {FusionMode::concat, FusionMode::bilinear}) {
        ModelConfig cfg = ModelConfig::toy_preset();
        cfg.fusion_mode = mode;
        ViNet<float> model(cfg, 31);

        auto clip = zeros<float>({3, cfg.clip_len, cfg.input_height, cfg.input_width});
        for (auto& v : clip->data) v = static_cast<float>(rng.uniform(0, 1));
        Waveform wav;
        wav.samples.resize(4000);
        for (auto& s : wav.samples) s = static_cast<float>(rng.uniform(-1, 1));

        const auto audio = model.audio_features(nullptr, wav);
        CHECK(audio.features->shape == Shape{cfg.audio_channels(), 3, 1});
        const auto out = model.forward(nullptr, clip, &audio);
        CHECK(out->shape == Shape{cfg.input_height, cfg.input_width});

        CHECK_THROWS_AS(model.forward(nullptr, clip), ValueError);

        // With amplified fusion weights (a stand-in for training them up),
        // zeroing the audio must change the prediction. At init the effect
        // can round away below f32 resolution, so amplify first.
        for (auto& [name, p] : model.named_parameters()) {
            if (name.rfind("fusion.", 0) == 0) {
                for (auto& v : p->data) v *= 50.f;
            }
        }
        const auto zeroed = zero_audio(audio);
        const auto out_amp = model.forward(nullptr, clip, &audio);
        const auto out_zero = model.forward(nullptr, clip, &zeroed);
        CHECK(out_amp->data != out_zero->data);
    }
}
