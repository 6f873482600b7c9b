#include "vsal/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vsal/image_io.hpp"
#include "vsal/kernels.hpp"
#include "vsal/rng.hpp"

namespace fs = std::filesystem;

namespace vsal {

namespace {

std::vector<std::string> sorted_pngs(const fs::path& dir) {
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".png") {
            out.push_back(e.path().string());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<metrics::FixationRecord> parse_fixations(const std::string& csv_path,
                                                     std::size_t n_frames, std::size_t height,
                                                     std::size_t width) {
    std::ifstream in(csv_path);
    if (!in) throw IoError("load_dataset: cannot open " + csv_path);

    std::vector<metrics::FixationRecord> records(n_frames);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != "frame,x,y") {
                throw IoError(csv_path + ":1: expected header 'frame,x,y', got '" + line + "'");
            }
            continue;
        }
        std::istringstream ss(line);
        std::string a, b, c;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c)) {
            throw IoError(csv_path + ":" + std::to_string(line_no) + ": malformed row '" + line + "'");
        }
        long frame, x, y;
        try {
            frame = std::stol(a);
            x = std::stol(b);
            y = std::stol(c);
        } catch (const std::exception&) {
            throw IoError(csv_path + ":" + std::to_string(line_no) + ": non-numeric field in '" +
                          line + "'");
        }
        if (frame < 0 || static_cast<std::size_t>(frame) >= n_frames) {
            throw IoError(csv_path + ":" + std::to_string(line_no) + ": frame index " +
                          std::to_string(frame) + " out of range [0," + std::to_string(n_frames) + ")");
        }
        if (x < 0 || static_cast<std::size_t>(x) >= width || y < 0 ||
            static_cast<std::size_t>(y) >= height) {
            throw IoError(csv_path + ":" + std::to_string(line_no) + ": fixation (" +
                          std::to_string(x) + "," + std::to_string(y) + ") outside " +
                          std::to_string(width) + "x" + std::to_string(height) + " frame");
        }
        records[frame].points.push_back({static_cast<int>(x), static_cast<int>(y)});
    }
    return records;
}

}  // namespace

std::vector<VideoRecord> load_dataset(const std::string& root) {
    if (!fs::exists(root)) throw IoError("load_dataset: no such directory: " + root);

    std::vector<std::string> video_dirs;
    for (const auto& e : fs::directory_iterator(root)) {
        if (e.is_directory() && fs::exists(e.path() / "frames")) {
            video_dirs.push_back(e.path().string());
        }
    }
    std::sort(video_dirs.begin(), video_dirs.end());

    std::vector<VideoRecord> out;
    for (const auto& dir : video_dirs) {
        VideoRecord rec;
        rec.id = fs::path(dir).filename().string();
        rec.frame_paths = sorted_pngs(fs::path(dir) / "frames");
        if (rec.frame_paths.empty()) {
            throw IoError("load_dataset: video '" + rec.id + "' has no frames");
        }
        const auto first = img::read_png(rec.frame_paths[0]);
        rec.native_height = first.height;
        rec.native_width = first.width;

        const auto csv = fs::path(dir) / "fixations.csv";
        if (!fs::exists(csv)) throw IoError("load_dataset: missing " + csv.string());
        rec.fixations = parse_fixations(csv.string(), rec.frame_paths.size(), rec.native_height,
                                        rec.native_width);

        const auto maps_dir = fs::path(dir) / "maps";
        if (fs::exists(maps_dir)) {
            rec.map_paths = sorted_pngs(maps_dir);
            if (rec.map_paths.size() != rec.frame_paths.size()) {
                throw IoError("load_dataset: video '" + rec.id + "' has " +
                              std::to_string(rec.map_paths.size()) + " maps for " +
                              std::to_string(rec.frame_paths.size()) + " frames");
            }
        }
        const auto wav = fs::path(dir) / "audio.wav";
        if (fs::exists(wav)) rec.audio = img::read_wav(wav.string());
        out.push_back(std::move(rec));
    }
    return out;
}

void resize_bilinear(const float* in, std::size_t channels, std::size_t in_h, std::size_t in_w,
                     float* out, std::size_t out_h, std::size_t out_w) {
    kernels::Resize3dGeom g;
    g.c = channels;
    g.in_t = 1;
    g.in_h = in_h;
    g.in_w = in_w;
    g.out_t = 1;
    g.out_h = out_h;
    g.out_w = out_w;
    kernels::trilinear_forward(g, in, out);
}

metrics::Fixation scale_fixation(const metrics::Fixation& f, std::size_t native_h,
                                 std::size_t native_w, std::size_t out_h, std::size_t out_w) {
    metrics::Fixation out;
    out.x = static_cast<int>(std::min<double>(
        static_cast<double>(out_w - 1),
        std::floor((f.x + 0.5) * static_cast<double>(out_w) / static_cast<double>(native_w))));
    out.y = static_cast<int>(std::min<double>(
        static_cast<double>(out_h - 1),
        std::floor((f.y + 0.5) * static_cast<double>(out_h) / static_cast<double>(native_h))));
    return out;
}

FrameTargets frame_targets(const VideoRecord& video, std::size_t t, const ModelConfig& config,
                           double density_sigma) {
    if (t >= video.frame_count()) {
        throw ValueError("frame_targets: frame index out of range");
    }
    const std::size_t h0 = config.input_height, w0 = config.input_width;

    FrameTargets out;
    for (const auto& f : video.fixations[t].points) {
        out.fixations.points.push_back(
            scale_fixation(f, video.native_height, video.native_width, h0, w0));
    }

    if (!video.map_paths.empty()) {
        const auto m8 = img::read_png(video.map_paths[t]);
        if (m8.channels != 1) throw IoError("frame_targets: density map must be grayscale");
        std::vector<float> mf(m8.height * m8.width);
        for (std::size_t i = 0; i < mf.size(); ++i) mf[i] = static_cast<float>(m8.pixels[i]);
        std::vector<float> mr(h0 * w0);
        resize_bilinear(mf.data(), 1, m8.height, m8.width, mr.data(), h0, w0);
        auto dens = zeros<double>({h0, w0});
        double s = 0;
        for (std::size_t i = 0; i < mr.size(); ++i) s += mr[i];
        if (s <= 0) throw ValueError("frame_targets: density map for frame is all zero");
        for (std::size_t i = 0; i < mr.size(); ++i) dens->data[i] = mr[i] / s;
        out.density = dens;
    } else {
        out.density = metrics::fixations_to_density(out.fixations, h0, w0, density_sigma);
    }
    return out;
}

ClipSample sample_clip(const VideoRecord& video, std::size_t t, const ModelConfig& config,
                       double density_sigma) {
    const std::size_t n = video.frame_count();
    if (t >= n) {
        throw ValueError("sample_clip: frame index " + std::to_string(t) + " out of range [0," +
                         std::to_string(n) + ")");
    }
    const std::size_t t0 = config.clip_len;
    const std::size_t h0 = config.input_height, w0 = config.input_width;

    ClipSample sample;
    sample.video_id = video.id;
    sample.end_index = t;
    sample.frames = zeros<float>({3, t0, h0, w0});

    // Frames are loaded once per distinct index; indices below zero repeat
    // frame 0 per the padding rule.
    std::vector<float> plane(3 * video.native_height * video.native_width);
    std::vector<float> resized(3 * h0 * w0);
    long prev_idx = -1;
    for (std::size_t k = 0; k < t0; ++k) {
        const long want = static_cast<long>(t) - static_cast<long>(t0) + 1 + static_cast<long>(k);
        const long idx = want < 0 ? 0 : want;
        if (idx != prev_idx) {
            const auto img8 = img::read_png(video.frame_paths[idx]);
            if (img8.channels != 3 || img8.height != video.native_height ||
                img8.width != video.native_width) {
                throw IoError("sample_clip: frame " + video.frame_paths[idx] +
                              " does not match the video's geometry");
            }
            // planar float [3,H,W] in [0,1]
            for (std::size_t c = 0; c < 3; ++c) {
                for (std::size_t i = 0; i < img8.height * img8.width; ++i) {
                    plane[c * img8.height * img8.width + i] =
                        static_cast<float>(img8.pixels[i * 3 + c]) / 255.0f;
                }
            }
            resize_bilinear(plane.data(), 3, img8.height, img8.width, resized.data(), h0, w0);
            prev_idx = idx;
        }
        for (std::size_t c = 0; c < 3; ++c) {
            std::copy(resized.begin() + c * h0 * w0, resized.begin() + (c + 1) * h0 * w0,
                      sample.frames->data.begin() + (c * t0 + k) * h0 * w0);
        }
    }

    const auto targets = frame_targets(video, t, config, density_sigma);
    sample.target_fixations = targets.fixations;
    sample.target_density = targets.density;

    if (video.audio && !video.audio->samples.empty()) {
        const std::size_t total = video.audio->samples.size();
        const long start_frame = std::max<long>(0, static_cast<long>(t) - static_cast<long>(t0) + 1);
        const std::size_t lo = static_cast<std::size_t>(start_frame) * total / n;
        const std::size_t hi = (t + 1) * total / n;
        sample.audio_segment.sample_rate = video.audio->sample_rate;
        sample.audio_segment.samples.assign(video.audio->samples.begin() + lo,
                                            video.audio->samples.begin() + hi);
    }
    return sample;
}

SyntheticTrace generate_synthetic(const std::string& root, const SyntheticSpec& spec) {
    if (spec.n_videos == 0 || spec.frames_per_video == 0 || spec.height == 0 || spec.width == 0) {
        throw ValueError("generate_synthetic: sizes must be >= 1");
    }
    fs::create_directories(root);

    SyntheticTrace trace;
    Rng master(spec.seed);
    const double sigma_blob = std::min(spec.height, spec.width) / 10.0;

    for (std::size_t v = 0; v < spec.n_videos; ++v) {
        Rng traj_rng = master.fork(v * 4 + 0);
        Rng noise_rng = master.fork(v * 4 + 1);
        Rng fix_rng = master.fork(v * 4 + 2);
        Rng audio_rng = master.fork(v * 4 + 3);

        char vid[32];
        std::snprintf(vid, sizeof(vid), "v%03zu", v);
        const fs::path vdir = fs::path(root) / vid;
        fs::create_directories(vdir / "frames");
        if (spec.write_maps) fs::create_directories(vdir / "maps");

        const double f1 = traj_rng.uniform(0.5, 1.5), f2 = traj_rng.uniform(0.5, 1.5);
        const double p1 = traj_rng.uniform(0, 6.283185307179586);
        const double p2 = traj_rng.uniform(0, 6.283185307179586);

        const std::size_t n = spec.frames_per_video;
        std::vector<std::pair<double, double>> centers(n);
        std::ostringstream csv;
        csv << "frame,x,y\n";

        for (std::size_t t = 0; t < n; ++t) {
            const double phase = static_cast<double>(t) / static_cast<double>(n);
            const double cx = spec.width * (0.5 + 0.33 * std::sin(6.283185307179586 * f1 * phase + p1));
            const double cy = spec.height * (0.5 + 0.33 * std::sin(6.283185307179586 * f2 * phase + p2));
            centers[t] = {cx, cy};

            img::ImageU8 frame;
            frame.height = spec.height;
            frame.width = spec.width;
            frame.channels = 3;
            frame.pixels.resize(spec.height * spec.width * 3);
            for (std::size_t y = 0; y < spec.height; ++y) {
                for (std::size_t x = 0; x < spec.width; ++x) {
                    const double dx = static_cast<double>(x) - cx;
                    const double dy = static_cast<double>(y) - cy;
                    const double blob = 0.75 * std::exp(-(dx * dx + dy * dy) / (2 * sigma_blob * sigma_blob));
                    for (std::size_t c = 0; c < 3; ++c) {
                        const double noise = noise_rng.uniform(0.0, 0.25);
                        const double val = std::min(1.0, noise + blob);
                        frame.pixels[(y * spec.width + x) * 3 + c] =
                            static_cast<std::uint8_t>(std::lrint(255.0 * val));
                    }
                }
            }
            char fname[32];
            std::snprintf(fname, sizeof(fname), "%05zu.png", t);
            img::write_png((vdir / "frames" / fname).string(), frame);

            metrics::FixationRecord frame_fix;
            for (std::size_t i = 0; i < spec.fixations_per_frame; ++i) {
                const double fx = cx + (spec.fixation_spread > 0
                                            ? fix_rng.normal(0.0, spec.fixation_spread)
                                            : 0.0);
                const double fy = cy + (spec.fixation_spread > 0
                                            ? fix_rng.normal(0.0, spec.fixation_spread)
                                            : 0.0);
                const int ix = std::clamp<int>(static_cast<int>(std::lrint(fx)), 0,
                                               static_cast<int>(spec.width) - 1);
                const int iy = std::clamp<int>(static_cast<int>(std::lrint(fy)), 0,
                                               static_cast<int>(spec.height) - 1);
                csv << t << "," << ix << "," << iy << "\n";
                frame_fix.points.push_back({ix, iy});
            }
            if (spec.write_maps) {
                auto dens = metrics::fixations_to_density(frame_fix, spec.height, spec.width,
                                                          std::max(2.0, spec.height / 16.0));
                double peak = 0;
                for (double d : dens->data) peak = std::max(peak, d);
                img::ImageU8 m;
                m.height = spec.height;
                m.width = spec.width;
                m.channels = 1;
                m.pixels.resize(dens->numel());
                for (std::size_t i = 0; i < dens->numel(); ++i) {
                    m.pixels[i] = static_cast<std::uint8_t>(std::lrint(255.0 * dens->data[i] / peak));
                }
                img::write_png((vdir / "maps" / fname).string(), m);
            }
        }

        {
            std::ofstream csv_out(vdir / "fixations.csv", std::ios::binary);
            if (!csv_out) throw IoError("generate_synthetic: cannot write fixations.csv");
            csv_out << csv.str();
        }

        // Audio: frame t's segment is a sine whose frequency either encodes
        // the blob's horizontal position or follows an independent stream.
        Waveform wav;
        wav.sample_rate = spec.sample_rate;
        wav.samples.resize(n * spec.samples_per_frame);
        double phase_acc = 0.0;
        double wander = audio_rng.uniform(0.0, 1.0);
        for (std::size_t t = 0; t < n; ++t) {
            double freq;
            if (spec.audio_informative) {
                freq = 220.0 + 660.0 * (centers[t].first / spec.width);
            } else {
                wander = std::clamp(wander + audio_rng.uniform(-0.15, 0.15), 0.0, 1.0);
                freq = 220.0 + 660.0 * wander;
            }
            for (std::size_t s = 0; s < spec.samples_per_frame; ++s) {
                phase_acc += 6.283185307179586 * freq / spec.sample_rate;
                wav.samples[t * spec.samples_per_frame + s] =
                    static_cast<float>(0.5 * std::sin(phase_acc));
            }
        }
        img::write_wav((vdir / "audio.wav").string(), wav);

        trace.blob_centers.push_back(std::move(centers));
    }
    return trace;
}

}  // namespace vsal
