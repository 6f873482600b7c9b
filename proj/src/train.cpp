#include "vsal/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vsal/image_io.hpp"
#include "vsal/rng.hpp"

namespace fs = std::filesystem;

namespace vsal {

void TrainConfig::validate() const {
    if (!(learning_rate >= 0)) throw ValueError("TrainConfig: learning_rate must be >= 0");
    if (patience < 1) throw ValueError("TrainConfig: patience must be >= 1");
    if (batch_size < 1) throw ValueError("TrainConfig: batch_size must be >= 1");
    if (val_interval < 1) throw ValueError("TrainConfig: val_interval must be >= 1");
}

template <class T>
Adam<T>::Adam(std::vector<TensorPtr<T>> params, const TrainConfig& cfg)
    : params_(std::move(params)),
      lr_(cfg.learning_rate),
      beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      eps_(cfg.adam_epsilon) {
    for (const auto& p : params_) {
        m_.emplace_back(p->numel(), T(0));
        v_.emplace_back(p->numel(), T(0));
    }
}

template <class T>
void Adam<T>::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& p = *params_[i];
        if (p.grad.empty()) continue;  // parameter untouched by this step
        for (std::size_t j = 0; j < p.numel(); ++j) {
            const double g = static_cast<double>(p.grad[j]);
            m_[i][j] = static_cast<T>(beta1_ * m_[i][j] + (1.0 - beta1_) * g);
            v_[i][j] = static_cast<T>(beta2_ * v_[i][j] + (1.0 - beta2_) * g * g);
            const double mhat = static_cast<double>(m_[i][j]) / bc1;
            const double vhat = static_cast<double>(v_[i][j]) / bc2;
            p.data[j] = static_cast<T>(static_cast<double>(p.data[j]) -
                                       lr_ * mhat / (std::sqrt(vhat) + eps_));
        }
    }
}

template <class T>
void Adam<T>::zero_grads() {
    for (const auto& p : params_) p->zero_grad();
}

template class Adam<float>;
template class Adam<double>;

namespace {

// All frames of a video resized to the model grid, so sliding-window passes
// assemble clips by memcpy instead of re-reading PNGs.
struct FrameCache {
    std::size_t n = 0, h0 = 0, w0 = 0;
    std::vector<std::vector<float>> planes;  // per frame, planar [3][h0*w0]
};

FrameCache build_frame_cache(const VideoRecord& video, const ModelConfig& cfg) {
    FrameCache cache;
    cache.n = video.frame_count();
    cache.h0 = cfg.input_height;
    cache.w0 = cfg.input_width;
    std::vector<float> native(3 * video.native_height * video.native_width);
    for (std::size_t t = 0; t < cache.n; ++t) {
        const auto img8 = img::read_png(video.frame_paths[t]);
        if (img8.channels != 3 || img8.height != video.native_height ||
            img8.width != video.native_width) {
            throw IoError("frame " + video.frame_paths[t] + " does not match the video's geometry");
        }
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t i = 0; i < img8.height * img8.width; ++i) {
                native[c * img8.height * img8.width + i] =
                    static_cast<float>(img8.pixels[i * 3 + c]) / 255.0f;
            }
        }
        std::vector<float> resized(3 * cache.h0 * cache.w0);
        resize_bilinear(native.data(), 3, img8.height, img8.width, resized.data(), cache.h0,
                        cache.w0);
        cache.planes.push_back(std::move(resized));
    }
    return cache;
}

TensorPtr<float> assemble_clip(const FrameCache& cache, std::size_t t, std::size_t t0) {
    auto clip = zeros<float>({3, t0, cache.h0, cache.w0});
    const std::size_t hw = cache.h0 * cache.w0;
    for (std::size_t k = 0; k < t0; ++k) {
        const long want = static_cast<long>(t) - static_cast<long>(t0) + 1 + static_cast<long>(k);
        const std::size_t idx = want < 0 ? 0 : static_cast<std::size_t>(want);
        for (std::size_t c = 0; c < 3; ++c) {
            std::copy(cache.planes[idx].begin() + c * hw, cache.planes[idx].begin() + (c + 1) * hw,
                      clip->data.begin() + (c * t0 + k) * hw);
        }
    }
    return clip;
}

Waveform slice_audio(const Waveform& wav, std::size_t t, std::size_t t0, std::size_t n_frames) {
    Waveform out;
    out.sample_rate = wav.sample_rate;
    const std::size_t total = wav.samples.size();
    const long start_frame = std::max<long>(0, static_cast<long>(t) - static_cast<long>(t0) + 1);
    const std::size_t lo = static_cast<std::size_t>(start_frame) * total / n_frames;
    const std::size_t hi = (t + 1) * total / n_frames;
    out.samples.assign(wav.samples.begin() + lo, wav.samples.begin() + hi);
    return out;
}

// Audio features for a clip under the probe overrides.
AudioFeatures<float> clip_audio_features(const ViNet<float>& model, const VideoRecord& video,
                                         std::size_t t, const PredictOptions& options) {
    const auto& cfg = model.config();
    if (options.zero_audio) {
        AudioFeatures<float> z;
        z.features = zeros<float>({cfg.audio_channels(), 3, 1});
        z.source = AudioSource::zeroed;
        return z;
    }
    const Waveform* source = options.swapped_audio;
    if (!source) {
        if (!video.audio || video.audio->samples.empty()) {
            throw ValueError("predict: video '" + video.id +
                             "' has no audio but the model requires fusion input");
        }
        source = &*video.audio;
    }
    const auto segment = slice_audio(*source, t, cfg.clip_len, video.frame_count());
    return model.audio_features(nullptr, segment);
}

std::vector<std::pair<std::size_t, TensorPtr<float>>> predict_frames(
    const ViNet<float>& model, const VideoRecord& video, const PredictOptions& options,
    std::size_t stride) {
    if (video.frame_count() == 0) throw ValueError("predict: empty video");
    const auto& cfg = model.config();
    const auto cache = build_frame_cache(video, cfg);
    const bool fused = cfg.fusion_mode != FusionMode::none;

    std::vector<std::pair<std::size_t, TensorPtr<float>>> out;
    for (std::size_t t = 0; t < cache.n; t += stride) {
        auto clip = assemble_clip(cache, t, cfg.clip_len);
        if (fused) {
            const auto audio = clip_audio_features(model, video, t, options);
            out.emplace_back(t, model.forward(nullptr, clip, &audio));
        } else {
            out.emplace_back(t, model.forward(nullptr, clip));
        }
    }
    return out;
}

TensorPtr<double> to_double(const TensorPtr<float>& t) { return cast<float, double>(*t); }

TensorPtr<double> to_distribution(const TensorPtr<double>& t) {
    double s = 0;
    for (double v : t->data) s += v;
    auto out = zeros<double>(t->shape);
    for (std::size_t i = 0; i < t->numel(); ++i) out->data[i] = t->data[i] / s;
    return out;
}

std::string config_identity(const ModelConfig& cfg) {
    std::ostringstream os;
    os << cfg.clip_len << "x" << cfg.input_height << "x" << cfg.input_width << ":"
       << cfg.encoder_channels[0] << "," << cfg.encoder_channels[1] << ","
       << cfg.encoder_channels[2] << "," << cfg.encoder_channels[3]
       << ":h=" << cfg.use_hierarchy << ":s=" << static_cast<int>(cfg.skip_concat_mode)
       << ":u=" << static_cast<int>(cfg.upsample_mode)
       << ":f=" << static_cast<int>(cfg.fusion_mode);
    return os.str();
}

Checkpoint snapshot_weights(const ViNet<float>& model, std::size_t step, std::uint64_t seed) {
    Checkpoint ckpt;
    ckpt.meta.step = static_cast<std::uint32_t>(step);
    ckpt.meta.seed = seed;
    ckpt.meta.config_hash = fnv1a32(config_identity(model.config()));
    for (const auto& [name, p] : model.named_parameters()) {
        ckpt.tensors.emplace_back(name, make_tensor<float>(p->shape, p->data));
    }
    return ckpt;
}

std::string format_metric(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

double validation_cc(const ViNet<float>& model, const std::vector<VideoRecord>& videos,
                     double density_sigma, std::size_t frame_stride) {
    if (videos.empty()) throw ValueError("validation_cc: empty dataset");
    PredictOptions options;
    options.density_sigma = density_sigma;
    double video_sum = 0;
    for (const auto& video : videos) {
        const auto maps = predict_frames(model, video, options, std::max<std::size_t>(1, frame_stride));
        double frame_sum = 0;
        for (const auto& [t, map] : maps) {
            const auto targets = frame_targets(video, t, model.config(), density_sigma);
            frame_sum += metrics::cc(*to_double(map), *targets.density);
        }
        video_sum += frame_sum / static_cast<double>(maps.size());
    }
    return video_sum / static_cast<double>(videos.size());
}

TrainResult train(ViNet<float>& model, const std::vector<VideoRecord>& train_videos,
                  const std::vector<VideoRecord>& val_videos, const TrainConfig& cfg,
                  const std::string& out_dir) {
    cfg.validate();
    if (train_videos.empty()) throw ValueError("train: empty training dataset");
    if (val_videos.empty()) throw ValueError("train: empty validation dataset");
    if (!out_dir.empty()) fs::create_directories(out_dir);

    const auto& mcfg = model.config();
    const bool fused = mcfg.fusion_mode != FusionMode::none;

    // Per-video caches; targets are computed once per (video, frame).
    std::vector<FrameCache> caches;
    std::vector<std::vector<TensorPtr<float>>> targets(train_videos.size());
    std::vector<std::vector<Waveform>> audio_segments(train_videos.size());
    for (std::size_t v = 0; v < train_videos.size(); ++v) {
        caches.push_back(build_frame_cache(train_videos[v], mcfg));
        targets[v].resize(train_videos[v].frame_count());
        audio_segments[v].resize(train_videos[v].frame_count());
    }

    Adam<float> adam(model.parameters(), cfg);
    Rng rng(cfg.seed);
    TrainResult result;
    result.best = snapshot_weights(model, 0, cfg.seed);
    result.best_val_cc = -2.0;

    double last_val = std::numeric_limits<double>::quiet_NaN();
    std::size_t checks_without_improvement = 0;

    for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
        adam.zero_grads();
        double batch_kldiv = 0;
        try {
            for (std::size_t b = 0; b < cfg.batch_size; ++b) {
                const std::size_t v = rng.uniform_int(train_videos.size());
                const std::size_t t = rng.uniform_int(train_videos[v].frame_count());
                if (!targets[v][t]) {
                    const auto ft = frame_targets(train_videos[v], t, mcfg, cfg.density_sigma);
                    targets[v][t] = cast<double, float>(*ft.density);
                    if (fused) {
                        if (!train_videos[v].audio) {
                            throw ValueError("train: video '" + train_videos[v].id +
                                             "' has no audio but fusion is enabled");
                        }
                        audio_segments[v][t] =
                            slice_audio(*train_videos[v].audio, t, mcfg.clip_len,
                                        train_videos[v].frame_count());
                    }
                }
                auto clip = assemble_clip(caches[v], t, mcfg.clip_len);

                Tape<float> tape;
                TensorPtr<float> out;
                if (fused) {
                    const auto audio = model.audio_features(&tape, audio_segments[v][t]);
                    out = model.forward(&tape, clip, &audio);
                } else {
                    out = model.forward(&tape, clip);
                }
                auto p = ops::normalize_to_distribution(&tape, out);
                auto loss = ops::kldiv(&tape, p, targets[v][t],
                                       static_cast<float>(cfg.kldiv_epsilon));
                batch_kldiv += static_cast<double>(loss->scalar());
                auto scaled = ops::mul_scalar(&tape, loss,
                                              1.0f / static_cast<float>(cfg.batch_size));
                tape.backward(scaled);
            }
        } catch (const NumericError& e) {
            if (!out_dir.empty()) {
                save_checkpoint(out_dir + "/diagnostic_step_" + std::to_string(step) + ".ckpt",
                                snapshot_weights(model, step, cfg.seed));
                write_loss_curve(out_dir + "/loss_curve.txt", result.curve);
            }
            throw NumericError("train: aborted at step " + std::to_string(step) + ": " + e.what());
        }
        adam.step();
        result.steps_run = step;

        LossCurvePoint point;
        point.step = step;
        point.train_kldiv = batch_kldiv / static_cast<double>(cfg.batch_size);

        if (step % cfg.val_interval == 0) {
            last_val = validation_cc(model, val_videos, cfg.density_sigma, cfg.val_frame_stride);
            if (last_val > result.best_val_cc) {
                result.best_val_cc = last_val;
                result.best_step = step;
                result.best = snapshot_weights(model, step, cfg.seed);
                checks_without_improvement = 0;
            } else {
                ++checks_without_improvement;
            }
        }
        point.val_cc = last_val;
        result.curve.push_back(point);

        if (step % cfg.val_interval == 0 && checks_without_improvement >= cfg.patience) {
            result.early_stopped = true;
            break;
        }
    }

    if (result.best_step == 0) {
        // no validation checkpointed (max_steps < val_interval); keep final weights
        result.best_val_cc = validation_cc(model, val_videos, cfg.density_sigma,
                                           cfg.val_frame_stride);
        result.best_step = result.steps_run;
        result.best = snapshot_weights(model, result.steps_run, cfg.seed);
    }

    if (!out_dir.empty()) {
        write_loss_curve(out_dir + "/loss_curve.txt", result.curve);
        save_checkpoint(out_dir + "/best.ckpt", result.best);
    }
    return result;
}

std::vector<TensorPtr<float>> predict_video(const ViNet<float>& model, const VideoRecord& video,
                                            const PredictOptions& options) {
    const auto frames = predict_frames(model, video, options, 1);
    std::vector<TensorPtr<float>> maps;
    maps.reserve(frames.size());
    for (const auto& [t, map] : frames) maps.push_back(map);
    return maps;
}

void load_weights(ViNet<float>& model, const Checkpoint& ckpt) {
    auto named = model.named_parameters();
    if (named.size() != ckpt.tensors.size()) {
        throw ValueError("load_weights: checkpoint has " + std::to_string(ckpt.tensors.size()) +
                         " records for a model with " + std::to_string(named.size()));
    }
    for (std::size_t i = 0; i < named.size(); ++i) {
        const auto& [want_name, param] = named[i];
        const auto& [got_name, tensor] = ckpt.tensors[i];
        if (want_name != got_name || param->shape != tensor->shape) {
            throw ValueError("load_weights: record '" + got_name + "' does not match parameter '" +
                             want_name + "'");
        }
        param->data = tensor->data;
    }
}

EvalReport evaluate(const ViNet<float>& model, const std::vector<VideoRecord>& videos,
                    const metrics::MetricsConfig& mcfg) {
    if (videos.empty()) throw ValueError("evaluate: empty dataset");
    PredictOptions options;
    options.density_sigma = mcfg.density_sigma_px;
    std::vector<std::vector<TensorPtr<float>>> maps;
    maps.reserve(videos.size());
    for (const auto& video : videos) maps.push_back(predict_video(model, video, options));
    return evaluate_maps(maps, videos, model.config(), mcfg);
}

EvalReport evaluate_maps(const std::vector<std::vector<TensorPtr<float>>>& per_video_maps,
                         const std::vector<VideoRecord>& videos, const ModelConfig& cfg,
                         const metrics::MetricsConfig& mcfg) {
    if (videos.empty()) throw ValueError("evaluate: empty dataset");
    if (per_video_maps.size() != videos.size()) {
        throw ValueError("evaluate: map count does not match video count");
    }

    // shuffled-AUC pools: every other video's scaled fixations
    std::vector<std::vector<metrics::FixationRecord>> scaled(videos.size());
    for (std::size_t v = 0; v < videos.size(); ++v) {
        for (std::size_t t = 0; t < videos[v].frame_count(); ++t) {
            metrics::FixationRecord rec;
            for (const auto& f : videos[v].fixations[t].points) {
                rec.points.push_back(scale_fixation(f, videos[v].native_height,
                                                    videos[v].native_width, cfg.input_height,
                                                    cfg.input_width));
            }
            scaled[v].push_back(std::move(rec));
        }
    }

    EvalReport report;
    EvalRow total{"overall", "mean", 0, 0, 0, 0, 0, 0};

    for (std::size_t v = 0; v < videos.size(); ++v) {
        std::vector<metrics::FixationRecord> pool;
        for (std::size_t u = 0; u < videos.size(); ++u) {
            if (u == v) continue;
            pool.insert(pool.end(), scaled[u].begin(), scaled[u].end());
        }

        const auto& maps = per_video_maps[v];
        if (maps.size() != videos[v].frame_count()) {
            throw ValueError("evaluate: expected one map per frame for video " + videos[v].id);
        }
        EvalRow video_row{videos[v].id, "mean", 0, 0, 0, 0, 0, 0};
        for (std::size_t t = 0; t < maps.size(); ++t) {
            const auto targets = frame_targets(videos[v], t, cfg, mcfg.density_sigma_px);
            const auto pred = to_double(maps[t]);
            const auto pred_dist = to_distribution(pred);

            EvalRow row;
            row.video_id = videos[v].id;
            row.frame_id = std::to_string(t);
            row.cc = metrics::cc(*pred, *targets.density);
            row.sim = metrics::sim(*pred_dist, *targets.density);
            row.kldiv = metrics::kldiv(*pred_dist, *targets.density, mcfg.kldiv_epsilon);
            if (!targets.fixations.points.empty()) {
                row.auc_judd = metrics::auc_judd(*pred, targets.fixations);
                row.nss = metrics::nss(*pred, targets.fixations);
                row.sauc = pool.empty() ? std::numeric_limits<double>::quiet_NaN()
                                        : metrics::sauc(*pred, targets.fixations, pool,
                                                        mcfg.sauc_splits, mcfg.sauc_seed);
            } else {
                row.auc_judd = row.nss = row.sauc = std::numeric_limits<double>::quiet_NaN();
            }
            video_row.cc += row.cc;
            video_row.sim += row.sim;
            video_row.auc_judd += row.auc_judd;
            video_row.sauc += row.sauc;
            video_row.nss += row.nss;
            video_row.kldiv += row.kldiv;
            report.frame_rows.push_back(std::move(row));
        }
        const auto n = static_cast<double>(maps.size());
        video_row.cc /= n;
        video_row.sim /= n;
        video_row.auc_judd /= n;
        video_row.sauc /= n;
        video_row.nss /= n;
        video_row.kldiv /= n;
        total.cc += video_row.cc;
        total.sim += video_row.sim;
        total.auc_judd += video_row.auc_judd;
        total.sauc += video_row.sauc;
        total.nss += video_row.nss;
        total.kldiv += video_row.kldiv;
        report.video_rows.push_back(std::move(video_row));
    }
    const auto nv = static_cast<double>(videos.size());
    total.cc /= nv;
    total.sim /= nv;
    total.auc_judd /= nv;
    total.sauc /= nv;
    total.nss /= nv;
    total.kldiv /= nv;
    report.overall = total;
    return report;
}

void write_metrics_csv(const std::string& path, const EvalReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_metrics_csv: cannot open " + path);
    out << "video_id,frame_id,cc,sim,auc_judd,sauc,nss,kldiv\n";
    auto emit = [&out](const EvalRow& r) {
        out << r.video_id << "," << r.frame_id << "," << format_metric(r.cc) << ","
            << format_metric(r.sim) << "," << format_metric(r.auc_judd) << ","
            << format_metric(r.sauc) << "," << format_metric(r.nss) << ","
            << format_metric(r.kldiv) << "\n";
    };
    for (const auto& r : report.frame_rows) emit(r);
    for (const auto& r : report.video_rows) emit(r);
    emit(report.overall);
}

std::vector<AblationRow> ablate_clip_size(const std::vector<std::size_t>& sizes,
                                          const ModelConfig& base,
                                          const std::vector<VideoRecord>& train_videos,
                                          const std::vector<VideoRecord>& val_videos,
                                          const TrainConfig& tcfg) {
    std::vector<AblationRow> rows;
    for (std::size_t size : sizes) {
        ModelConfig cfg = base;
        cfg.clip_len = size;
        cfg.validate();
        ViNet<float> model(cfg, tcfg.seed);
        const auto result = train(model, train_videos, val_videos, tcfg);
        load_weights(model, result.best);

        metrics::MetricsConfig mcfg;
        mcfg.density_sigma_px = tcfg.density_sigma;
        const auto report = evaluate(model, val_videos, mcfg);
        AblationRow row;
        row.label = std::to_string(size);
        row.cc = report.overall.cc;
        row.sim = report.overall.sim;
        row.nss = report.overall.nss;
        row.params = model.parameter_count();
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<AblationRow> ablate_hierarchy(const ModelConfig& base,
                                          const std::vector<VideoRecord>& train_videos,
                                          const std::vector<VideoRecord>& val_videos,
                                          const TrainConfig& tcfg) {
    std::vector<AblationRow> rows;
    for (bool hierarchy : {false, true}) {
        ModelConfig cfg = base;
        cfg.use_hierarchy = hierarchy;
        ViNet<float> model(cfg, tcfg.seed);
        const auto result = train(model, train_videos, val_videos, tcfg);
        load_weights(model, result.best);

        metrics::MetricsConfig mcfg;
        mcfg.density_sigma_px = tcfg.density_sigma;
        const auto report = evaluate(model, val_videos, mcfg);
        AblationRow row;
        row.label = hierarchy ? "with_hierarchy" : "without_hierarchy";
        row.cc = report.overall.cc;
        row.sim = report.overall.sim;
        row.nss = report.overall.nss;
        row.params = model.parameter_count();
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_ablation_csv(const std::string& path, const std::string& key_column,
                        const std::vector<AblationRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_ablation_csv: cannot open " + path);
    out << key_column << ",cc,sim,nss,params\n";
    for (const auto& r : rows) {
        out << r.label << "," << format_metric(r.cc) << "," << format_metric(r.sim) << ","
            << format_metric(r.nss) << "," << r.params << "\n";
    }
}

ProbeReport probe_audio(const ViNet<float>& model, const std::vector<VideoRecord>& videos,
                        std::uint64_t seed, double density_sigma) {
    if (videos.size() < 2) {
        throw ValueError("probe_audio: need at least two videos for swapped-audio pairs");
    }
    Rng rng(seed);
    ProbeReport report;
    ProbeRow total{"overall", 0, 0, 0, 0};

    for (std::size_t v = 0; v < videos.size(); ++v) {
        // swap payload from a different, randomly chosen video
        std::size_t other = rng.uniform_int(videos.size() - 1);
        if (other >= v) ++other;
        if (!videos[other].audio) {
            throw ValueError("probe_audio: video '" + videos[other].id + "' has no audio");
        }

        PredictOptions true_opts, zero_opts, swap_opts;
        true_opts.density_sigma = zero_opts.density_sigma = swap_opts.density_sigma = density_sigma;
        zero_opts.zero_audio = true;
        swap_opts.swapped_audio = &*videos[other].audio;

        const bool fused = model.config().fusion_mode != FusionMode::none;
        if (fused && !videos[v].audio) {
            throw ValueError("probe_audio: video '" + videos[v].id + "' has no audio");
        }

        const auto maps_true = predict_video(model, videos[v], true_opts);
        const auto maps_zero = predict_video(model, videos[v], zero_opts);
        const auto maps_swap = predict_video(model, videos[v], swap_opts);

        ProbeRow row{videos[v].id, 0, 0, 0, 0};
        for (std::size_t t = 0; t < maps_true.size(); ++t) {
            const auto a = to_double(maps_true[t]);
            const auto b = to_double(maps_zero[t]);
            const auto c = to_double(maps_swap[t]);
            row.cc_zeroed += metrics::cc(*a, *b);
            row.sim_zeroed += metrics::sim(*to_distribution(a), *to_distribution(b));
            row.cc_swapped += metrics::cc(*a, *c);
            row.sim_swapped += metrics::sim(*to_distribution(a), *to_distribution(c));
        }
        const auto n = static_cast<double>(maps_true.size());
        row.cc_zeroed /= n;
        row.sim_zeroed /= n;
        row.cc_swapped /= n;
        row.sim_swapped /= n;
        total.cc_zeroed += row.cc_zeroed;
        total.sim_zeroed += row.sim_zeroed;
        total.cc_swapped += row.cc_swapped;
        total.sim_swapped += row.sim_swapped;
        report.per_video.push_back(std::move(row));
    }
    const auto nv = static_cast<double>(videos.size());
    total.cc_zeroed /= nv;
    total.sim_zeroed /= nv;
    total.cc_swapped /= nv;
    total.sim_swapped /= nv;
    report.overall = total;
    return report;
}

void write_probe_csv(const std::string& summary_path, const std::string& detail_path,
                     const ProbeReport& report) {
    {
        std::ofstream out(summary_path, std::ios::binary);
        if (!out) throw IoError("write_probe_csv: cannot open " + summary_path);
        out << "method,cc,sim\n";
        out << "true_vs_zeroed," << format_metric(report.overall.cc_zeroed) << ","
            << format_metric(report.overall.sim_zeroed) << "\n";
        out << "true_vs_swapped," << format_metric(report.overall.cc_swapped) << ","
            << format_metric(report.overall.sim_swapped) << "\n";
    }
    {
        std::ofstream out(detail_path, std::ios::binary);
        if (!out) throw IoError("write_probe_csv: cannot open " + detail_path);
        out << "video_id,cc_zeroed,sim_zeroed,cc_swapped,sim_swapped\n";
        auto emit = [&out](const ProbeRow& r) {
            out << r.video_id << "," << format_metric(r.cc_zeroed) << ","
                << format_metric(r.sim_zeroed) << "," << format_metric(r.cc_swapped) << ","
                << format_metric(r.sim_swapped) << "\n";
        };
        for (const auto& r : report.per_video) emit(r);
        emit(report.overall);
    }
}

void write_loss_curve(const std::string& path, const std::vector<LossCurvePoint>& curve) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_loss_curve: cannot open " + path);
    out << "# step kldiv val_cc\n";
    for (const auto& p : curve) {
        out << p.step << " " << format_metric(p.train_kldiv) << " " << format_metric(p.val_cc)
            << "\n";
    }
}

}  // namespace vsal
