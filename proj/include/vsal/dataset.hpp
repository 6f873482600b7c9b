#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vsal/fusion.hpp"
#include "vsal/metrics.hpp"
#include "vsal/model.hpp"
#include "vsal/tensor.hpp"

// On-disk dataset layout:
//   <root>/<video_id>/frames/NNNNN.png   8-bit RGB, ordered by filename
//   <root>/<video_id>/fixations.csv      header "frame,x,y"
//   <root>/<video_id>/maps/NNNNN.png     optional 8-bit grayscale densities
//   <root>/<video_id>/audio.wav          optional PCM16 mono
namespace vsal {

struct VideoRecord {
    std::string id;
    std::vector<std::string> frame_paths;  // ordered
    std::vector<metrics::FixationRecord> fixations;  // per frame
    std::vector<std::string> map_paths;    // empty, or one per frame
    std::optional<Waveform> audio;
    std::size_t native_height = 0, native_width = 0;

    std::size_t frame_count() const { return frame_paths.size(); }
};

std::vector<VideoRecord> load_dataset(const std::string& root);

struct ClipSample {
    std::string video_id;
    std::size_t end_index = 0;
    TensorPtr<float> frames;            // [3, T0, H0, W0], values in [0,1]
    TensorPtr<double> target_density;   // [H0, W0], sums to 1
    metrics::FixationRecord target_fixations;  // scaled to the model grid
    Waveform audio_segment;             // empty when the video has no audio
};

// Clip ending at frame t; indices below zero repeat frame 0. Frames are
// bilinearly resized (half-pixel centers, the same convention as the tensor
// ops). The audio slice is aligned proportionally: frame k of an N-frame
// video owns samples [k*S/N, (k+1)*S/N).
ClipSample sample_clip(const VideoRecord& video, std::size_t t, const ModelConfig& config,
                       double density_sigma);

// Ground truth for frame t on the model grid: the precomputed density map
// when available (resized, renormalized), otherwise a Gaussian density from
// the scaled fixations.
struct FrameTargets {
    TensorPtr<double> density;
    metrics::FixationRecord fixations;
};
FrameTargets frame_targets(const VideoRecord& video, std::size_t t, const ModelConfig& config,
                           double density_sigma);

// Pixel-center mapping of a fixation from native to model resolution.
metrics::Fixation scale_fixation(const metrics::Fixation& f, std::size_t native_h,
                                 std::size_t native_w, std::size_t out_h, std::size_t out_w);

struct SyntheticSpec {
    std::size_t n_videos = 4;
    std::size_t frames_per_video = 24;
    std::size_t height = 64, width = 96;  // native generation resolution
    bool audio_informative = true;        // waveform frequency tracks the blob's x position
    bool write_maps = false;
    std::uint64_t seed = 0;
    std::size_t fixations_per_frame = 6;
    double fixation_spread = 2.0;  // px std-dev around the blob center; 0 pins all to it
    int sample_rate = 16000;
    std::size_t samples_per_frame = 1600;
};

// Ground-truth blob trajectory, exposed for verification.
struct SyntheticTrace {
    // [video][frame] -> blob center (x, y) in native pixels
    std::vector<std::vector<std::pair<double, double>>> blob_centers;
};

// Moving bright blob over noise; fixations cluster at the blob; audio either
// encodes the blob's horizontal position or comes from an independent stream.
// Deterministic given the seed, byte-identical on regeneration.
SyntheticTrace generate_synthetic(const std::string& root, const SyntheticSpec& spec);

// Shared resize helper (bilinear, half-pixel centers) for [C,H,W] planes.
void resize_bilinear(const float* in, std::size_t channels, std::size_t in_h, std::size_t in_w,
                     float* out, std::size_t out_h, std::size_t out_w);

}  // namespace vsal
