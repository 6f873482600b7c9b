#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vsal/checkpoint.hpp"
#include "vsal/dataset.hpp"
#include "vsal/metrics.hpp"
#include "vsal/model.hpp"

namespace vsal {

struct TrainConfig {
    std::size_t batch_size = 8;    // paper-scale default; toy runs use <= 4
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::size_t max_steps = 2000;
    std::size_t val_interval = 100;  // steps between validation checks
    std::size_t patience = 5;        // validation checks without improvement
    std::uint64_t seed = 0;
    double kldiv_epsilon = 1e-7;
    double density_sigma = 9.0;
    std::size_t val_frame_stride = 1;  // evaluate every k-th frame during validation

    void validate() const;
};

// Bias-corrected Adam over a fixed parameter list.
template <class T>
class Adam {
public:
    Adam(std::vector<TensorPtr<T>> params, const TrainConfig& cfg);

    void step();       // applies current .grad fields
    void zero_grads();
    std::size_t steps_taken() const { return t_; }

private:
    std::vector<TensorPtr<T>> params_;
    std::vector<std::vector<T>> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
};

struct LossCurvePoint {
    std::size_t step = 0;
    double train_kldiv = 0.0;
    double val_cc = std::numeric_limits<double>::quiet_NaN();  // most recent check
};

struct TrainResult {
    Checkpoint best;  // weights at the best validation CC
    double best_val_cc = -2.0;
    std::size_t best_step = 0;
    std::size_t steps_run = 0;
    bool early_stopped = false;
    std::vector<LossCurvePoint> curve;
};

// Adam on the KLDiv loss with early stopping on mean validation CC. The best
// checkpoint is kept; when out_dir is non-empty the loss curve, the best
// checkpoint, and (on NaN aborts) a diagnostic dump are written there.
TrainResult train(ViNet<float>& model, const std::vector<VideoRecord>& train_videos,
                  const std::vector<VideoRecord>& val_videos, const TrainConfig& cfg,
                  const std::string& out_dir = "");

// Mean CC over validation frames (frames first, then videos).
double validation_cc(const ViNet<float>& model, const std::vector<VideoRecord>& videos,
                     double density_sigma, std::size_t frame_stride = 1);

struct PredictOptions {
    bool zero_audio = false;            // feed zeroed feature vectors
    const Waveform* swapped_audio = nullptr;  // replace the video's waveform
    double density_sigma = 9.0;
};

// Sliding-window inference: one map per frame, clip t uses frames
// [t-T0+1, t] with first-frame repetition.
std::vector<TensorPtr<float>> predict_video(const ViNet<float>& model, const VideoRecord& video,
                                            const PredictOptions& options = {});

// Installs checkpoint weights into a model with the identical parameter list.
void load_weights(ViNet<float>& model, const Checkpoint& ckpt);

struct EvalRow {
    std::string video_id;
    std::string frame_id;  // number, "mean" for per-video rows
    double cc = 0, sim = 0, auc_judd = 0, sauc = 0, nss = 0, kldiv = 0;
};

struct EvalReport {
    std::vector<EvalRow> frame_rows;
    std::vector<EvalRow> video_rows;  // mean over frames
    EvalRow overall;                  // mean over videos
};

EvalReport evaluate(const ViNet<float>& model, const std::vector<VideoRecord>& videos,
                    const metrics::MetricsConfig& mcfg);

// Metric core over externally produced maps (one per frame per video);
// lets tests feed oracle predictors through the same scoring path.
EvalReport evaluate_maps(const std::vector<std::vector<TensorPtr<float>>>& per_video_maps,
                         const std::vector<VideoRecord>& videos, const ModelConfig& cfg,
                         const metrics::MetricsConfig& mcfg);

// CSV with columns video_id,frame_id,cc,sim,auc_judd,sauc,nss,kldiv.
void write_metrics_csv(const std::string& path, const EvalReport& report);

struct AblationRow {
    std::string label;
    double cc = 0, sim = 0, nss = 0;
    std::size_t params = 0;
};

std::vector<AblationRow> ablate_clip_size(const std::vector<std::size_t>& sizes,
                                          const ModelConfig& base,
                                          const std::vector<VideoRecord>& train_videos,
                                          const std::vector<VideoRecord>& val_videos,
                                          const TrainConfig& tcfg);

std::vector<AblationRow> ablate_hierarchy(const ModelConfig& base,
                                          const std::vector<VideoRecord>& train_videos,
                                          const std::vector<VideoRecord>& val_videos,
                                          const TrainConfig& tcfg);

void write_ablation_csv(const std::string& path, const std::string& key_column,
                        const std::vector<AblationRow>& rows);

struct ProbeRow {
    std::string video_id;
    double cc_zeroed = 0, sim_zeroed = 0;    // true audio vs zeroed audio
    double cc_swapped = 0, sim_swapped = 0;  // true audio vs another video's audio
};

struct ProbeReport {
    std::vector<ProbeRow> per_video;
    ProbeRow overall;  // video_id = "overall"
};

// Prediction-pair agreement under zeroed and swapped audio. On a fusion-free
// model every pair is bit-identical, so CC and SIM are exactly 1.
ProbeReport probe_audio(const ViNet<float>& model, const std::vector<VideoRecord>& videos,
                        std::uint64_t seed, double density_sigma = 9.0);

// summary mirrors the method x {CC, SIM} table layout; detail has per-video rows
void write_probe_csv(const std::string& summary_path, const std::string& detail_path,
                     const ProbeReport& report);

void write_loss_curve(const std::string& path, const std::vector<LossCurvePoint>& curve);

}  // namespace vsal
