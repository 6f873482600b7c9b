#include "vsal/fusion.hpp"

#include <algorithm>
#include <cmath>

namespace vsal {

template <class T>
AudioFeatures<T> zero_audio(const AudioFeatures<T>& like) {
    AudioFeatures<T> out;
    out.features = zeros<T>(like.features->shape);
    out.source = AudioSource::zeroed;
    return out;
}

std::vector<AudioConvDims> audio_branch_layers(std::size_t out_channels) {
    return {
        {1, 16, 65, 8, 32},
        {16, 32, 33, 8, 16},
        {32, out_channels, 17, 8, 8},
    };
}

// 1536 samples survive the three stride-8 stages with 3 output taps.
std::size_t audio_branch_min_samples() { return 1536; }

template <class T>
AudioBranch<T>::AudioBranch(std::size_t out_channels, Rng& rng) : out_channels_(out_channels) {
    for (const auto& l : audio_branch_layers(out_channels)) {
        auto w = zeros<T>({l.c_out, l.c_in, l.kernel}, /*requires_grad=*/true);
        const double scale = 1.0 / std::sqrt(static_cast<double>(l.c_in * l.kernel));
        for (auto& v : w->data) v = static_cast<T>(rng.uniform(-scale, scale));
        weights_.push_back(w);
        biases_.push_back(zeros<T>({l.c_out}, /*requires_grad=*/true));
    }
}

template <class T>
AudioFeatures<T> AudioBranch<T>::forward(Tape<T>* tape, const Waveform& waveform) const {
    if (waveform.samples.empty()) throw ValueError("audio_branch: empty waveform");

    // tile short waveforms up to the minimum stack length
    std::vector<T> padded;
    const std::size_t min_len = audio_branch_min_samples();
    padded.reserve(std::max<std::size_t>(waveform.samples.size(), min_len));
    for (float s : waveform.samples) padded.push_back(static_cast<T>(s));
    while (padded.size() < min_len) {
        padded.push_back(padded[padded.size() % waveform.samples.size()]);
    }

    const std::size_t padded_len = padded.size();
    auto x = make_tensor<T>({1, padded_len}, std::move(padded));
    const auto dims = audio_branch_layers(out_channels_);
    for (std::size_t i = 0; i < dims.size(); ++i) {
        x = ops::conv1d(tape, x, weights_[i], biases_[i], dims[i].stride, dims[i].pad);
        x = ops::relu(tape, x);
    }
    x = ops::adaptive_maxpool1d(tape, x, 3);

    AudioFeatures<T> out;
    out.features = ops::reshape(tape, x, {out_channels_, 3, 1});
    out.source = AudioSource::computed_from_waveform;
    return out;
}

template <class T>
std::vector<std::pair<std::string, TensorPtr<T>>> AudioBranch<T>::named_parameters() const {
    std::vector<std::pair<std::string, TensorPtr<T>>> out;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        out.emplace_back("audio.conv" + std::to_string(i + 1) + ".w", weights_[i]);
        out.emplace_back("audio.conv" + std::to_string(i + 1) + ".b", biases_[i]);
    }
    return out;
}

template <class T>
TensorPtr<T> fuse_concat(Tape<T>* tape, const TensorPtr<T>& visual, const AudioFeatures<T>& audio,
                         const TensorPtr<T>& reduce_w, const TensorPtr<T>& reduce_b) {
    if (visual->ndim() != 4) throw ShapeError("fuse_concat: visual must be [C,T,H,W]");
    const std::size_t c4 = visual->shape[0];
    if (audio.features->ndim() != 3 || audio.features->shape[0] != c4) {
        throw ShapeError("fuse_concat: audio channels " + shape_to_string(audio.features->shape) +
                         " do not match visual C4=" + std::to_string(c4));
    }
    auto pooled = ops::mean_axes(tape, audio.features, {1, 2}, /*keepdims=*/true);  // [C4,1,1]
    auto vec4 = ops::reshape(tape, pooled, {c4, 1, 1, 1});
    auto tiled = ops::broadcast_to(tape, vec4, visual->shape);
    auto joint = ops::concat<T>(tape, {visual, tiled}, 0);  // [2*C4,T,H,W]
    return ops::conv3d(tape, joint, reduce_w, reduce_b, {}, {});
}

std::size_t bilinear_pooled_extent(std::size_t t, std::size_t h, std::size_t w) {
    return (t / std::min<std::size_t>(2, t)) * (h / std::min<std::size_t>(2, h)) *
           (w / std::min<std::size_t>(2, w));
}

template <class T>
TensorPtr<T> fuse_bilinear(Tape<T>* tape, const TensorPtr<T>& visual, const AudioFeatures<T>& audio,
                           const BilinearFusionParams<T>& params) {
    if (visual->ndim() != 4) throw ShapeError("fuse_bilinear: visual must be [C,T,H,W]");
    const std::size_t c4 = visual->shape[0];
    const std::size_t t = visual->shape[1], h = visual->shape[2], w = visual->shape[3];
    if (audio.features->ndim() != 3 || audio.features->shape[0] != c4) {
        throw ShapeError("fuse_bilinear: audio channels do not match visual C4");
    }
    const std::size_t x_out = params.b->shape[0];
    if (x_out != t * h * w) {
        throw ShapeError("fuse_bilinear: output extent " + std::to_string(x_out) +
                         " does not match visual T*H*W = " + std::to_string(t * h * w));
    }

    const ops::Size3 k{std::min<std::size_t>(2, t), std::min<std::size_t>(2, h),
                       std::min<std::size_t>(2, w)};
    auto pooled = ops::maxpool3d(tape, visual, k, {k.t, k.h, k.w});
    const std::size_t x0 = pooled->numel() / c4;
    auto x1 = ops::reshape(tape, pooled, {c4, x0});
    auto x2 = ops::reshape(tape, audio.features,
                           {c4, audio.features->shape[1] * audio.features->shape[2]});
    auto y = ops::bilinear_form(tape, x1, params.A, x2, params.b);
    return ops::reshape(tape, y, {c4, t, h, w});
}

template struct AudioFeatures<float>;
template struct AudioFeatures<double>;
template AudioFeatures<float> zero_audio<float>(const AudioFeatures<float>&);
template AudioFeatures<double> zero_audio<double>(const AudioFeatures<double>&);
template struct BilinearFusionParams<float>;
template struct BilinearFusionParams<double>;
template class AudioBranch<float>;
template class AudioBranch<double>;
template TensorPtr<float> fuse_concat<float>(Tape<float>*, const TensorPtr<float>&,
                                             const AudioFeatures<float>&, const TensorPtr<float>&,
                                             const TensorPtr<float>&);
template TensorPtr<double> fuse_concat<double>(Tape<double>*, const TensorPtr<double>&,
                                               const AudioFeatures<double>&, const TensorPtr<double>&,
                                               const TensorPtr<double>&);
template TensorPtr<float> fuse_bilinear<float>(Tape<float>*, const TensorPtr<float>&,
                                               const AudioFeatures<float>&,
                                               const BilinearFusionParams<float>&);
template TensorPtr<double> fuse_bilinear<double>(Tape<double>*, const TensorPtr<double>&,
                                                 const AudioFeatures<double>&,
                                                 const BilinearFusionParams<double>&);

}  // namespace vsal
