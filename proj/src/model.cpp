#include "vsal/model.hpp"

#include <algorithm>
#include <cmath>

namespace vsal {

void ModelConfig::validate() const {
    if (clip_len == 0 || clip_len % 8 != 0) {
        throw ValueError("ModelConfig: clip_len must be a positive multiple of 8, got " +
                         std::to_string(clip_len));
    }
    if (input_height == 0 || input_height % 32 != 0) {
        throw ValueError("ModelConfig: input_height must be a positive multiple of 32, got " +
                         std::to_string(input_height));
    }
    if (input_width == 0 || input_width % 32 != 0) {
        throw ValueError("ModelConfig: input_width must be a positive multiple of 32, got " +
                         std::to_string(input_width));
    }
    for (std::size_t c : encoder_channels) {
        if (c == 0) throw ValueError("ModelConfig: encoder channel widths must be positive");
    }
}

ModelConfig ModelConfig::paper_preset() {
    ModelConfig c;
    c.clip_len = 32;
    c.input_height = 224;
    c.input_width = 384;
    c.encoder_channels = {64, 192, 480, 1024};
    return c;
}

ModelConfig ModelConfig::toy_preset() {
    ModelConfig c;
    c.clip_len = 8;
    c.input_height = 32;
    c.input_width = 64;
    c.encoder_channels = {8, 16, 24, 32};
    return c;
}

namespace {

ConvSpec conv_spec(std::string name, std::size_t co, std::size_t ci, std::size_t kt, std::size_t kh,
                   std::size_t kw, ops::Stride3 stride = {1, 1, 1}, ops::Pad3 pad = {0, 0, 0}) {
    ConvSpec s;
    s.name = std::move(name);
    s.weight = {co, ci, kt, kh, kw};
    s.bias = {co};
    s.stride = stride;
    s.pad = pad;
    return s;
}

}  // namespace

ArchPlan plan_architecture(const ModelConfig& config) {
    config.validate();
    ArchPlan plan;
    plan.config = config;
    const auto& ch = config.encoder_channels;

    // Encoder: 4 stages of separable conv + maxpool. Cumulative strides are
    // pinned to temporal (1,2,2,2) -> /8 and spatial (4,2,2,2) -> /32.
    std::size_t t = config.clip_len, h = config.input_height, w = config.input_width;
    std::size_t c_in = 3;
    for (int i = 0; i < 4; ++i) {
        EncoderStagePlan st;
        const std::string base = "enc" + std::to_string(i + 1);
        st.spatial = conv_spec(base + ".spatial", ch[i], c_in, 1, 3, 3, {1, 1, 1}, {0, 1, 1});
        st.temporal = conv_spec(base + ".temporal", ch[i], ch[i], 3, 1, 1, {1, 1, 1}, {1, 0, 0});
        st.pool_kernel = (i == 0) ? ops::Size3{1, 4, 4} : ops::Size3{2, 2, 2};
        t /= st.pool_kernel.t;
        h /= st.pool_kernel.h;
        w /= st.pool_kernel.w;
        st.out_shape = {ch[i], t, h, w};
        plan.stages[i] = st;
        c_in = ch[i];
    }

    // Decoder: 5 blocks of (x2 spatial upsample, 3x3x3 conv, ReLU), with skip
    // fusion of X3/X2/X1 after blocks 1-3; blocks 1-3 halve T through the
    // conv's temporal stride while T >= 2. A final conv spans the residual T.
    const std::size_t dmin = 4;
    const std::array<std::size_t, 5> dec_ch = {ch[2], ch[1], ch[0], std::max(ch[0] / 2, dmin),
                                               std::max(ch[0] / 2, dmin)};
    std::size_t c_cur = ch[3];
    for (int k = 0; k < 5; ++k) {
        DecoderBlockPlan blk;
        const std::string base = "dec" + std::to_string(k + 1);
        h *= 2;
        w *= 2;
        if (config.upsample_mode == UpsampleMode::trilinear) {
            blk.upsample_to = {t, h, w};
        } else {
            ConvSpec up = conv_spec(base + ".up", 0, 0, 1, 2, 2, {1, 2, 2}, {0, 0, 0});
            up.weight = {c_cur, c_cur, 1, 2, 2};  // transposed layout [ci,co,...]
            up.bias = {c_cur};
            up.transposed = true;
            blk.upconv = up;
        }
        const bool halve_t = (k < 3 && t >= 2);
        blk.conv = conv_spec(base + ".conv", dec_ch[k], c_cur, 3, 3, 3,
                             {halve_t ? std::size_t{2} : std::size_t{1}, 1, 1}, {1, 1, 1});
        if (halve_t) t = (t - 1) / 2 + 1;
        c_cur = dec_ch[k];

        if (config.use_hierarchy && k < 3) {
            blk.skip.enabled = true;
            blk.skip.pyramid_level = 3 - k;  // X3, X2, X1
            const std::size_t skip_c = ch[blk.skip.pyramid_level - 1];
            if (config.skip_concat_mode == SkipConcatMode::temporal) {
                blk.skip.align = conv_spec(base + ".skip.align", c_cur, skip_c, 1, 1, 1);
                blk.skip.merge =
                    conv_spec(base + ".skip.merge", c_cur, c_cur, 3, 3, 3, {2, 1, 1}, {1, 1, 1});
            } else {
                blk.skip.merge = conv_spec(base + ".skip.merge", c_cur, c_cur + skip_c, 3, 3, 3,
                                           {1, 1, 1}, {1, 1, 1});
            }
        }
        blk.out_shape = {c_cur, t, h, w};
        plan.blocks.push_back(blk);
    }

    plan.collapse = conv_spec("collapse", c_cur, c_cur, t, 3, 3, {1, 1, 1}, {0, 1, 1});
    plan.head = conv_spec("head", 1, c_cur, 1, 1, 1);

    if (config.fusion_mode != FusionMode::none) {
        for (std::size_t i = 0; i < audio_branch_layers(config.audio_channels()).size(); ++i) {
            const auto l = audio_branch_layers(config.audio_channels())[i];
            ConvSpec s;
            s.name = "audio.conv" + std::to_string(i + 1);
            s.weight = {l.c_out, l.c_in, l.kernel};
            s.bias = {l.c_out};
            plan.audio_convs.push_back(s);
        }
        const Shape& x4 = plan.stages[3].out_shape;
        if (config.fusion_mode == FusionMode::concat) {
            plan.concat_reduce = conv_spec("fusion.reduce", ch[3], 2 * ch[3], 1, 1, 1);
        } else {
            plan.bilinear_x0 = bilinear_pooled_extent(x4[1], x4[2], x4[3]);
            plan.bilinear_x = x4[1] * x4[2] * x4[3];
            plan.bilinear_y0 = 3;
        }
    }
    return plan;
}

std::size_t ArchPlan::parameter_count() const {
    std::size_t n = 0;
    for (const auto& st : stages) n += st.spatial.param_count() + st.temporal.param_count();
    for (const auto& blk : blocks) {
        if (blk.upconv) n += blk.upconv->param_count();
        n += blk.conv.param_count();
        if (blk.skip.enabled) {
            if (!blk.skip.align.weight.empty()) n += blk.skip.align.param_count();
            n += blk.skip.merge.param_count();
        }
    }
    n += collapse.param_count() + head.param_count();
    for (const auto& a : audio_convs) n += a.param_count();
    if (config.fusion_mode == FusionMode::concat) n += concat_reduce.param_count();
    if (config.fusion_mode == FusionMode::bilinear) {
        n += bilinear_x0 * bilinear_x * bilinear_y0 + bilinear_x;
    }
    return n;
}

std::size_t count_parameters(const ModelConfig& config) {
    return plan_architecture(config).parameter_count();
}

// ---------------------------------------------------------------------------

namespace {

// The decoder emits the clip's final frame, so skips with a longer temporal
// extent contribute their trailing window; shorter ones (which the fixed
// schedule never produces) are linearly resampled.
template <class T>
TensorPtr<T> align_temporal(Tape<T>* tape, const TensorPtr<T>& x, std::size_t target_t) {
    if (x->shape[1] == target_t) return x;
    if (x->shape[1] > target_t) {
        return ops::slice(tape, x, 1, x->shape[1] - target_t, target_t);
    }
    return ops::trilinear_upsample(tape, x, {target_t, x->shape[2], x->shape[3]});
}

}  // namespace

template <class T>
TensorPtr<T> skip_fuse(Tape<T>* tape, const TensorPtr<T>& state, const TensorPtr<T>& skip,
                       SkipConcatMode mode, const TensorPtr<T>& align_w,
                       const TensorPtr<T>& align_b, const TensorPtr<T>& merge_w,
                       const TensorPtr<T>& merge_b) {
    if (state->ndim() != 4 || skip->ndim() != 4) {
        throw ShapeError("skip_fuse: operands must be [C,T,H,W]");
    }
    if (state->shape[2] != skip->shape[2] || state->shape[3] != skip->shape[3]) {
        throw ShapeError("skip_fuse: spatial extents differ, " + shape_to_string(state->shape) +
                         " vs " + shape_to_string(skip->shape));
    }
    if (mode == SkipConcatMode::temporal) {
        auto aligned = ops::conv3d(tape, skip, align_w, align_b, {}, {});  // channels -> C_state
        auto resampled = align_temporal(tape, aligned, state->shape[1]);
        auto joined = ops::concat<T>(tape, {state, resampled}, 1);  // concat on T
        return ops::conv3d(tape, joined, merge_w, merge_b, {2, 1, 1}, {1, 1, 1});
    }
    auto resampled = align_temporal(tape, skip, state->shape[1]);
    auto joined = ops::concat<T>(tape, {state, resampled}, 0);  // concat on C
    return ops::conv3d(tape, joined, merge_w, merge_b, {1, 1, 1}, {1, 1, 1});
}

template <class T>
typename ViNet<T>::ConvParams ViNet<T>::alloc(const ConvSpec& spec, Rng& rng) {
    ConvParams p;
    p.w = zeros<T>(spec.weight, /*requires_grad=*/true);
    const std::size_t c_out = spec.transposed ? spec.weight[1] : spec.weight[0];
    const double scale = 1.0 / std::sqrt(static_cast<double>(shape_numel(spec.weight) / c_out));
    for (auto& v : p.w->data) v = static_cast<T>(rng.uniform(-scale, scale));
    p.b = zeros<T>(spec.bias, /*requires_grad=*/true);
    named_params_.emplace_back(spec.name + ".w", p.w);
    named_params_.emplace_back(spec.name + ".b", p.b);
    return p;
}

template <class T>
TensorPtr<T> ViNet<T>::apply(Tape<T>* tape, const ConvSpec& spec, const ConvParams& p,
                             const TensorPtr<T>& x) const {
    if (spec.transposed) return ops::conv_transpose3d(tape, x, p.w, p.b, spec.stride, spec.pad);
    return ops::conv3d(tape, x, p.w, p.b, spec.stride, spec.pad);
}

template <class T>
ViNet<T>::ViNet(const ModelConfig& config, std::uint64_t seed) : plan_(plan_architecture(config)) {
    Rng rng(seed);
    for (int i = 0; i < 4; ++i) {
        enc_spatial_[i] = alloc(plan_.stages[i].spatial, rng);
        enc_temporal_[i] = alloc(plan_.stages[i].temporal, rng);
    }
    for (const auto& blk : plan_.blocks) {
        dec_upconv_.push_back(blk.upconv ? alloc(*blk.upconv, rng) : ConvParams{});
        dec_conv_.push_back(alloc(blk.conv, rng));
        if (blk.skip.enabled && !blk.skip.align.weight.empty()) {
            skip_align_.push_back(alloc(blk.skip.align, rng));
        } else {
            skip_align_.push_back(ConvParams{});
        }
        skip_merge_.push_back(blk.skip.enabled ? alloc(blk.skip.merge, rng) : ConvParams{});
    }
    collapse_ = alloc(plan_.collapse, rng);
    head_ = alloc(plan_.head, rng);
    // Start the sigmoid head sparse (~0.12) instead of half-on; saliency mass
    // is concentrated, and the normalized-map gradients are far better scaled.
    head_.b->data[0] = T(-2);

    if (config.fusion_mode != FusionMode::none) {
        Rng audio_rng = rng.fork(1);
        audio_branch_ = std::make_unique<AudioBranch<T>>(config.audio_channels(), audio_rng);
        for (auto& np : audio_branch_->named_parameters()) named_params_.push_back(np);
        if (config.fusion_mode == FusionMode::concat) {
            concat_reduce_ = alloc(plan_.concat_reduce, rng);
        } else {
            BilinearFusionParams<T> bp;
            bp.A = zeros<T>({plan_.bilinear_x0, plan_.bilinear_x, plan_.bilinear_y0}, true);
            const double scale = 1.0 / std::sqrt(static_cast<double>(plan_.bilinear_x0 * plan_.bilinear_y0));
            for (auto& v : bp.A->data) v = static_cast<T>(rng.uniform(-scale, scale));
            bp.b = zeros<T>({plan_.bilinear_x}, true);
            named_params_.emplace_back("fusion.bilinear.A", bp.A);
            named_params_.emplace_back("fusion.bilinear.b", bp.b);
            bilinear_params_ = std::move(bp);
        }
    }
}

template <class T>
FeaturePyramid<T> ViNet<T>::encode(Tape<T>* tape, const TensorPtr<T>& clip) const {
    const auto& cfg = plan_.config;
    const Shape expected{3, cfg.clip_len, cfg.input_height, cfg.input_width};
    if (clip->shape != expected) {
        throw ShapeError("encode: clip shape " + shape_to_string(clip->shape) +
                         " does not match config " + shape_to_string(expected));
    }
    FeaturePyramid<T> pyr;
    TensorPtr<T> x = clip;
    for (int i = 0; i < 4; ++i) {
        const auto& st = plan_.stages[i];
        x = apply(tape, st.spatial, enc_spatial_[i], x);
        x = apply(tape, st.temporal, enc_temporal_[i], x);
        x = ops::relu(tape, x);
        x = ops::maxpool3d(tape, x, st.pool_kernel,
                           {st.pool_kernel.t, st.pool_kernel.h, st.pool_kernel.w});
        (i == 0 ? pyr.x1 : i == 1 ? pyr.x2 : i == 2 ? pyr.x3 : pyr.x4) = x;
    }
    return pyr;
}

template <class T>
TensorPtr<T> ViNet<T>::decode(Tape<T>* tape, const FeaturePyramid<T>& pyramid,
                              const TensorPtr<T>* fused) const {
    const std::array<const TensorPtr<T>*, 4> levels = {&pyramid.x1, &pyramid.x2, &pyramid.x3,
                                                       &pyramid.x4};
    for (int i = 0; i < 4; ++i) {
        if (!*levels[i] || (*levels[i])->shape != plan_.stages[i].out_shape) {
            throw ShapeError("decode: pyramid level X" + std::to_string(i + 1) +
                             " does not match the config");
        }
    }
    TensorPtr<T> state = fused ? *fused : pyramid.x4;
    if (state->shape != plan_.stages[3].out_shape) {
        throw ShapeError("decode: fused tensor must match X4's shape");
    }

    for (std::size_t k = 0; k < plan_.blocks.size(); ++k) {
        const auto& blk = plan_.blocks[k];
        if (blk.upconv) {
            state = apply(tape, *blk.upconv, dec_upconv_[k], state);
        } else {
            state = ops::trilinear_upsample(tape, state, blk.upsample_to);
        }
        state = apply(tape, blk.conv, dec_conv_[k], state);
        state = ops::relu(tape, state);
        if (blk.skip.enabled) {
            const TensorPtr<T>& skip = *levels[blk.skip.pyramid_level - 1];
            state = skip_fuse(tape, state, skip, plan_.config.skip_concat_mode, skip_align_[k].w,
                              skip_align_[k].b, skip_merge_[k].w, skip_merge_[k].b);
        }
    }

    state = apply(tape, plan_.collapse, collapse_, state);
    state = ops::relu(tape, state);
    state = apply(tape, plan_.head, head_, state);
    state = ops::sigmoid(tape, state);
    return ops::reshape(tape, state, {plan_.config.input_height, plan_.config.input_width});
}

template <class T>
TensorPtr<T> ViNet<T>::forward(Tape<T>* tape, const TensorPtr<T>& clip,
                               const AudioFeatures<T>* audio) const {
    auto pyr = encode(tape, clip);
    if (plan_.config.fusion_mode == FusionMode::none) {
        return decode(tape, pyr);
    }
    if (!audio || !audio->features) {
        throw ValueError("forward: fusion is enabled but no audio features were provided");
    }
    TensorPtr<T> fused;
    if (plan_.config.fusion_mode == FusionMode::concat) {
        fused = fuse_concat(tape, pyr.x4, *audio, concat_reduce_.w, concat_reduce_.b);
    } else {
        fused = fuse_bilinear(tape, pyr.x4, *audio, *bilinear_params_);
    }
    return decode(tape, pyr, &fused);
}

template <class T>
AudioFeatures<T> ViNet<T>::audio_features(Tape<T>* tape, const Waveform& waveform) const {
    if (!audio_branch_) {
        throw ValueError("audio_features: model was built with fusion_mode = none");
    }
    return audio_branch_->forward(tape, waveform);
}

template <class T>
std::vector<std::pair<std::string, TensorPtr<T>>> ViNet<T>::named_parameters() const {
    return named_params_;
}

template <class T>
std::vector<TensorPtr<T>> ViNet<T>::parameters() const {
    std::vector<TensorPtr<T>> out;
    out.reserve(named_params_.size());
    for (const auto& [name, t] : named_params_) out.push_back(t);
    return out;
}

template <class T>
std::size_t ViNet<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : named_params_) n += t->numel();
    return n;
}

template class ViNet<float>;
template class ViNet<double>;
template TensorPtr<float> skip_fuse<float>(Tape<float>*, const TensorPtr<float>&,
                                           const TensorPtr<float>&, SkipConcatMode,
                                           const TensorPtr<float>&, const TensorPtr<float>&,
                                           const TensorPtr<float>&, const TensorPtr<float>&);
template TensorPtr<double> skip_fuse<double>(Tape<double>*, const TensorPtr<double>&,
                                             const TensorPtr<double>&, SkipConcatMode,
                                             const TensorPtr<double>&, const TensorPtr<double>&,
                                             const TensorPtr<double>&, const TensorPtr<double>&);

}  // namespace vsal
