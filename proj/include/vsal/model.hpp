#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vsal/fusion.hpp"
#include "vsal/ops.hpp"
#include "vsal/tensor.hpp"

namespace vsal {

enum class SkipConcatMode { temporal, channel };
enum class UpsampleMode { trilinear, transpose_conv };
enum class FusionMode { none, concat, bilinear };

struct ModelConfig {
    std::size_t clip_len = 8;       // T0, multiple of 8
    std::size_t input_height = 32;  // H0, multiple of 32
    std::size_t input_width = 64;   // W0, multiple of 32
    std::array<std::size_t, 4> encoder_channels = {8, 16, 24, 32};
    bool use_hierarchy = true;
    SkipConcatMode skip_concat_mode = SkipConcatMode::temporal;
    UpsampleMode upsample_mode = UpsampleMode::trilinear;
    FusionMode fusion_mode = FusionMode::none;

    // Audio embeddings must match C4 so fusion lines up channel-wise.
    std::size_t audio_channels() const { return encoder_channels[3]; }

    void validate() const;

    static ModelConfig paper_preset();  // T0=32, 224x384, C4=1024
    static ModelConfig toy_preset();    // T0=8, 32x64, small widths
};

// The four encoder outputs at strictly decreasing spatio-temporal resolution;
// x4 is [C4, T0/8, H0/32, W0/32].
template <class T>
struct FeaturePyramid {
    TensorPtr<T> x1, x2, x3, x4;
};

// ---------------------------------------------------------------------------
// Symbolic architecture plan: every layer's geometry derived from the config
// alone. The model allocates weights from this table, and the `shapes` /
// parameter-count queries read it without allocating anything.
// ---------------------------------------------------------------------------

struct ConvSpec {
    std::string name;
    Shape weight;  // conv [co,ci,kt,kh,kw]; transposed [ci,co,kt,kh,kw]; conv1d [co,ci,k]
    Shape bias;    // [co]
    bool transposed = false;
    ops::Stride3 stride{1, 1, 1};
    ops::Pad3 pad{0, 0, 0};

    std::size_t param_count() const {
        return (weight.empty() ? 0 : shape_numel(weight)) + (bias.empty() ? 0 : shape_numel(bias));
    }
};

struct EncoderStagePlan {
    ConvSpec spatial, temporal;
    ops::Size3 pool_kernel;
    Shape out_shape;  // pyramid level [C,T,H,W]
};

struct SkipPlan {
    bool enabled = false;
    int pyramid_level = 0;  // 1..3, consumes X3, X2, X1 (deepest first)
    ConvSpec align;         // temporal mode only: 1x1x1 channel alignment
    ConvSpec merge;
};

struct DecoderBlockPlan {
    ops::Size3 upsample_to{0, 0, 0};  // trilinear target (zero if none)
    std::optional<ConvSpec> upconv;   // transpose-conv alternative
    ConvSpec conv;
    SkipPlan skip;
    Shape out_shape;
};

struct ArchPlan {
    ModelConfig config;
    std::array<EncoderStagePlan, 4> stages;
    std::vector<DecoderBlockPlan> blocks;  // 5 upsampling blocks
    ConvSpec collapse;                     // temporal-collapse conv (block 6)
    ConvSpec head;                         // 1-channel 1x1x1 conv + sigmoid
    // fusion (populated when fusion_mode != none)
    std::vector<ConvSpec> audio_convs;
    ConvSpec concat_reduce;
    std::size_t bilinear_x0 = 0, bilinear_x = 0, bilinear_y0 = 3;

    Shape pyramid_shape(int level) const { return stages[level - 1].out_shape; }
    std::size_t parameter_count() const;
};

ArchPlan plan_architecture(const ModelConfig& config);

// Exact number of scalar weights for the config, computed symbolically.
std::size_t count_parameters(const ModelConfig& config);

// ---------------------------------------------------------------------------

// Decoder-side fusion of one skip level into the running state.
// temporal mode: align skip channels via 1x1x1 conv (align_w/align_b),
//   resample skip to the state's T, concatenate on T, then merge with a
//   temporal-stride-2 3x3x3 conv back to the state's shape.
// channel mode: resample skip to the state's T, concatenate on C, merge with
//   a stride-1 3x3x3 conv (align_w/align_b unused, pass nullptr).
template <class T>
TensorPtr<T> skip_fuse(Tape<T>* tape, const TensorPtr<T>& state, const TensorPtr<T>& skip,
                       SkipConcatMode mode, const TensorPtr<T>& align_w,
                       const TensorPtr<T>& align_b, const TensorPtr<T>& merge_w,
                       const TensorPtr<T>& merge_b);

// ViNet encoder-decoder; with fusion_mode != none it also owns the audio
// branch and fusion parameters (the AViNet variants).
template <class T>
class ViNet {
public:
    ViNet(const ModelConfig& config, std::uint64_t seed);

    FeaturePyramid<T> encode(Tape<T>* tape, const TensorPtr<T>& clip) const;

    // Decoder over the pyramid; `fused` (if non-null) replaces x4.
    TensorPtr<T> decode(Tape<T>* tape, const FeaturePyramid<T>& pyramid,
                        const TensorPtr<T>* fused = nullptr) const;

    // Full pipeline. With fusion enabled, `audio` is required.
    TensorPtr<T> forward(Tape<T>* tape, const TensorPtr<T>& clip,
                         const AudioFeatures<T>* audio = nullptr) const;

    AudioFeatures<T> audio_features(Tape<T>* tape, const Waveform& waveform) const;

    std::vector<std::pair<std::string, TensorPtr<T>>> named_parameters() const;
    std::vector<TensorPtr<T>> parameters() const;
    std::size_t parameter_count() const;

    const ModelConfig& config() const { return plan_.config; }
    const ArchPlan& plan() const { return plan_; }

private:
    struct ConvParams {
        TensorPtr<T> w, b;
    };
    ConvParams alloc(const ConvSpec& spec, Rng& rng);
    TensorPtr<T> apply(Tape<T>* tape, const ConvSpec& spec, const ConvParams& p,
                       const TensorPtr<T>& x) const;

    ArchPlan plan_;
    std::array<ConvParams, 4> enc_spatial_, enc_temporal_;
    std::vector<ConvParams> dec_conv_, dec_upconv_, skip_align_, skip_merge_;
    ConvParams collapse_, head_;
    std::unique_ptr<AudioBranch<T>> audio_branch_;
    ConvParams concat_reduce_;
    std::optional<BilinearFusionParams<T>> bilinear_params_;
    std::vector<std::pair<std::string, TensorPtr<T>>> named_params_;
};

}  // namespace vsal
