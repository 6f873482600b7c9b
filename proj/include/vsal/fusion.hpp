#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vsal/ops.hpp"
#include "vsal/rng.hpp"
#include "vsal/tape.hpp"
#include "vsal/tensor.hpp"

// Audio feature branch and the two audio-visual fusion schemes inserted
// between the encoder and the decoder.
namespace vsal {

enum class AudioSource { computed_from_waveform, precomputed_file, zeroed };

// Audio embedding of shape [Ca, 3, 1].
template <class T>
struct AudioFeatures {
    TensorPtr<T> features;
    AudioSource source = AudioSource::computed_from_waveform;
};

// Same shape, all zeros, source marked zeroed. Idempotent.
template <class T>
AudioFeatures<T> zero_audio(const AudioFeatures<T>& like);

// Parameters of the channel-shared bilinear fusion y = x1^T A x2 + b with
// A [x0, x, y0] and b [x]. Parameter count is exactly x0*x*y0 + x.
template <class T>
struct BilinearFusionParams {
    TensorPtr<T> A;
    TensorPtr<T> b;

    std::size_t parameter_count() const { return A->numel() + b->numel(); }
};

// Mono waveform samples in [-1, 1] plus their rate.
struct Waveform {
    std::vector<float> samples;
    int sample_rate = 16000;
};

// Geometry of one audio conv1d stage; shared between the branch itself and
// the symbolic architecture plan.
struct AudioConvDims {
    std::size_t c_in, c_out, kernel, stride, pad;
};
std::vector<AudioConvDims> audio_branch_layers(std::size_t out_channels);
std::size_t audio_branch_min_samples();

// Downsampling conv1d stack (stride 8 per stage, 512x total) followed by an
// adaptive max-pool to 3 taps. Waveforms shorter than the stack's minimum
// length are tiled before entry, so any non-empty waveform maps to [Ca,3,1].
template <class T>
class AudioBranch {
public:
    AudioBranch(std::size_t out_channels, Rng& rng);

    AudioFeatures<T> forward(Tape<T>* tape, const Waveform& waveform) const;

    std::vector<std::pair<std::string, TensorPtr<T>>> named_parameters() const;
    std::size_t out_channels() const { return out_channels_; }

private:
    std::size_t out_channels_;
    std::vector<TensorPtr<T>> weights_;
    std::vector<TensorPtr<T>> biases_;
};

// Audio averaged over its [3,1] taps, tiled across T*H*W, concatenated on
// channels and reduced back to C4 by a learned 1x1x1 convolution.
// reduce_w must be [C4, 2*C4, 1, 1, 1].
template <class T>
TensorPtr<T> fuse_concat(Tape<T>* tape, const TensorPtr<T>& visual,
                         const AudioFeatures<T>& audio, const TensorPtr<T>& reduce_w,
                         const TensorPtr<T>& reduce_b);

// Visual features are max-pooled (kernel = stride = min(2, extent) per axis),
// flattened to x1 [C4, x0]; audio flattens to x2 [C4, y0]; the bilinear form
// produces [C4, x] which is reshaped back to the visual shape (x = T*H*W).
template <class T>
TensorPtr<T> fuse_bilinear(Tape<T>* tape, const TensorPtr<T>& visual,
                           const AudioFeatures<T>& audio,
                           const BilinearFusionParams<T>& params);

// The pooled-visual flat extent (x0) used by fuse_bilinear for a given X4
// shape; exposed so the model can size BilinearFusionParams symbolically.
std::size_t bilinear_pooled_extent(std::size_t t, std::size_t h, std::size_t w);

}  // namespace vsal
