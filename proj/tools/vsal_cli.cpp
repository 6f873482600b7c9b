// Command-line front end: synthetic data generation, training, evaluation,
// sliding-window inference, ablations, the audio probe, gradient checks, and
// a symbolic shape dump.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vsal/gradcheck.hpp"
#include "vsal/image_io.hpp"
#include "vsal/kernels.hpp"
#include "vsal/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliConfig {
    vsal::ModelConfig model = vsal::ModelConfig::toy_preset();
    vsal::TrainConfig train;
    vsal::metrics::MetricsConfig metrics;
    vsal::SyntheticSpec synth;
};

vsal::SkipConcatMode parse_skip_mode(const std::string& s) {
    if (s == "temporal") return vsal::SkipConcatMode::temporal;
    if (s == "channel") return vsal::SkipConcatMode::channel;
    throw vsal::ValueError("config: skip_concat_mode must be 'temporal' or 'channel', got '" + s + "'");
}

vsal::UpsampleMode parse_upsample_mode(const std::string& s) {
    if (s == "trilinear") return vsal::UpsampleMode::trilinear;
    if (s == "transpose_conv") return vsal::UpsampleMode::transpose_conv;
    throw vsal::ValueError("config: upsample_mode must be 'trilinear' or 'transpose_conv', got '" + s + "'");
}

vsal::FusionMode parse_fusion_mode(const std::string& s) {
    if (s == "none") return vsal::FusionMode::none;
    if (s == "concat") return vsal::FusionMode::concat;
    if (s == "bilinear") return vsal::FusionMode::bilinear;
    throw vsal::ValueError("config: fusion_mode must be 'none', 'concat' or 'bilinear', got '" + s + "'");
}

template <class T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void apply_config_file(CliConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw vsal::IoError("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw vsal::ValueError("config " + path + ": " + e.what());
    }
    if (j.contains("model")) {
        const auto& m = j["model"];
        maybe(m, "clip_len", cfg.model.clip_len);
        maybe(m, "input_height", cfg.model.input_height);
        maybe(m, "input_width", cfg.model.input_width);
        if (m.contains("encoder_channels")) {
            const auto v = m["encoder_channels"].get<std::vector<std::size_t>>();
            if (v.size() != 4) throw vsal::ValueError("config: encoder_channels must have 4 entries");
            std::copy(v.begin(), v.end(), cfg.model.encoder_channels.begin());
        }
        maybe(m, "use_hierarchy", cfg.model.use_hierarchy);
        if (m.contains("skip_concat_mode")) {
            cfg.model.skip_concat_mode = parse_skip_mode(m["skip_concat_mode"].get<std::string>());
        }
        if (m.contains("upsample_mode")) {
            cfg.model.upsample_mode = parse_upsample_mode(m["upsample_mode"].get<std::string>());
        }
        if (m.contains("fusion_mode")) {
            cfg.model.fusion_mode = parse_fusion_mode(m["fusion_mode"].get<std::string>());
        }
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        maybe(t, "batch_size", cfg.train.batch_size);
        maybe(t, "learning_rate", cfg.train.learning_rate);
        maybe(t, "beta1", cfg.train.beta1);
        maybe(t, "beta2", cfg.train.beta2);
        maybe(t, "adam_epsilon", cfg.train.adam_epsilon);
        maybe(t, "max_steps", cfg.train.max_steps);
        maybe(t, "val_interval", cfg.train.val_interval);
        maybe(t, "patience", cfg.train.patience);
        maybe(t, "seed", cfg.train.seed);
        maybe(t, "kldiv_epsilon", cfg.train.kldiv_epsilon);
        maybe(t, "density_sigma", cfg.train.density_sigma);
        maybe(t, "val_frame_stride", cfg.train.val_frame_stride);
    }
    if (j.contains("metrics")) {
        const auto& m = j["metrics"];
        maybe(m, "kldiv_epsilon", cfg.metrics.kldiv_epsilon);
        maybe(m, "sauc_splits", cfg.metrics.sauc_splits);
        maybe(m, "sauc_seed", cfg.metrics.sauc_seed);
        maybe(m, "density_sigma_px", cfg.metrics.density_sigma_px);
    }
    if (j.contains("synth")) {
        const auto& s = j["synth"];
        maybe(s, "n_videos", cfg.synth.n_videos);
        maybe(s, "frames_per_video", cfg.synth.frames_per_video);
        maybe(s, "height", cfg.synth.height);
        maybe(s, "width", cfg.synth.width);
        maybe(s, "audio_informative", cfg.synth.audio_informative);
        maybe(s, "write_maps", cfg.synth.write_maps);
        maybe(s, "fixations_per_frame", cfg.synth.fixations_per_frame);
        maybe(s, "fixation_spread", cfg.synth.fixation_spread);
        maybe(s, "sample_rate", cfg.synth.sample_rate);
        maybe(s, "samples_per_frame", cfg.synth.samples_per_frame);
    }
}

// Deterministic fallback when no separate validation set is given: every
// fourth video (at least one) makes up the validation split.
void split_train_val(const std::vector<vsal::VideoRecord>& all,
                     std::vector<vsal::VideoRecord>& train_set,
                     std::vector<vsal::VideoRecord>& val_set) {
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (all.size() > 1 && i % 4 == 3) {
            val_set.push_back(all[i]);
        } else {
            train_set.push_back(all[i]);
        }
    }
    if (val_set.empty()) val_set = train_set;
}

std::string shape_line(const vsal::Shape& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out;
}

void print_shapes(const vsal::ModelConfig& cfg) {
    const auto plan = vsal::plan_architecture(cfg);
    std::printf("input: 3x%zux%zux%zu\n", cfg.clip_len, cfg.input_height, cfg.input_width);
    for (int level = 1; level <= 4; ++level) {
        std::printf("X%d: %s\n", level, shape_line(plan.pyramid_shape(level)).c_str());
    }
    for (std::size_t k = 0; k < plan.blocks.size(); ++k) {
        std::string suffix;
        if (plan.blocks[k].skip.enabled) {
            suffix = " (skip X" + std::to_string(plan.blocks[k].skip.pyramid_level) + ")";
        }
        std::printf("dec%zu: %s%s\n", k + 1, shape_line(plan.blocks[k].out_shape).c_str(),
                    suffix.c_str());
    }
    std::printf("output: %zux%zu\n", cfg.input_height, cfg.input_width);
    std::printf("parameters: %zu\n", plan.parameter_count());
}

vsal::ViNet<float> build_model(const CliConfig& cfg, std::uint64_t seed,
                               const std::string& checkpoint) {
    vsal::ViNet<float> model(cfg.model, seed);
    if (!checkpoint.empty()) {
        vsal::load_weights(model, vsal::load_checkpoint(checkpoint));
    }
    return model;
}

std::vector<vsal::VideoRecord> load_required(const std::string& data_dir) {
    auto videos = vsal::load_dataset(data_dir);
    if (videos.empty()) throw vsal::ValueError("dataset at '" + data_dir + "' contains no videos");
    return videos;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Video saliency prediction: encoder-decoder with optional audio fusion"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may appear after the subcommand

    std::string config_path, out_dir, data_dir, val_dir, checkpoint, backend = "default";
    std::string preset = "toy";
    std::uint64_t seed = 0;
    std::size_t clip_size = 0;
    std::string fusion;

    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "global random seed");
    app.add_option("--preset", preset, "model preset: paper or toy")
        ->check(CLI::IsMember({"paper", "toy"}));
    app.add_option("--clip-size", clip_size, "override clip length T0");
    app.add_option("--fusion", fusion, "override fusion mode: none, concat or bilinear")
        ->check(CLI::IsMember({"none", "concat", "bilinear"}));
    app.add_option("--checkpoint", checkpoint, "checkpoint file to load");
    app.add_option("--backend", backend, "kernel backend: serial or openmp")
        ->check(CLI::IsMember({"serial", "openmp", "default"}));

    auto* synth = app.add_subcommand("synth", "generate a synthetic audio-visual dataset");
    auto* train_cmd = app.add_subcommand("train", "train a model");
    train_cmd->add_option("--data", data_dir, "training dataset root")->required();
    train_cmd->add_option("--val-data", val_dir, "validation dataset root (default: split --data)");
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    eval_cmd->add_option("--data", data_dir, "dataset root")->required();
    auto* infer = app.add_subcommand("infer", "write per-frame saliency maps as PNGs");
    infer->add_option("--data", data_dir, "dataset root")->required();
    auto* ablate_clip = app.add_subcommand("ablate-clip", "train at several clip sizes");
    std::string sizes_arg = "8,16,32,48";
    ablate_clip->add_option("sizes", sizes_arg, "comma-separated clip sizes");
    ablate_clip->add_option("--data", data_dir, "dataset root")->required();
    ablate_clip->add_option("--val-data", val_dir, "validation dataset root");
    auto* ablate_h = app.add_subcommand("ablate-hierarchy", "train with and without skip hierarchy");
    ablate_h->add_option("--data", data_dir, "dataset root")->required();
    ablate_h->add_option("--val-data", val_dir, "validation dataset root");
    auto* probe = app.add_subcommand("probe-audio", "compare predictions under true/zeroed/swapped audio");
    probe->add_option("--data", data_dir, "dataset root")->required();
    auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    int gradcheck_seeds = 1;
    gradcheck_cmd->add_option("--seeds", gradcheck_seeds, "number of seeds to run");
    auto* shapes = app.add_subcommand("shapes", "symbolic shape contract dump");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (backend == "serial") vsal::kernels::set_backend(vsal::kernels::Backend::serial);
        if (backend == "openmp") vsal::kernels::set_backend(vsal::kernels::Backend::openmp);

        CliConfig cfg;
        cfg.model = (preset == "paper") ? vsal::ModelConfig::paper_preset()
                                        : vsal::ModelConfig::toy_preset();
        if (!config_path.empty()) apply_config_file(cfg, config_path);
        if (clip_size != 0) cfg.model.clip_len = clip_size;
        if (!fusion.empty()) cfg.model.fusion_mode = parse_fusion_mode(fusion);
        if (app.count("--seed")) {
            cfg.train.seed = seed;
            cfg.synth.seed = seed;
        }
        cfg.model.validate();
        cfg.train.validate();

        const bool needs_out = synth->parsed() || train_cmd->parsed() || eval_cmd->parsed() ||
                               infer->parsed() || ablate_clip->parsed() || ablate_h->parsed() ||
                               probe->parsed();
        if (needs_out && out_dir.empty()) {
            std::cerr << "error: --out is required for this subcommand\n";
            return 1;
        }
        if (!out_dir.empty()) fs::create_directories(out_dir);

        if (shapes->parsed()) {
            print_shapes(cfg.model);
            return 0;
        }

        if (gradcheck_cmd->parsed()) {
            bool all_ok = true;
            for (int s = 0; s < gradcheck_seeds; ++s) {
                const auto results = vsal::gradcheck_suite(cfg.train.seed + s);
                for (const auto& r : results) {
                    const bool ok = r.passed(1e-4);
                    all_ok = all_ok && ok;
                    std::printf("seed %llu  %-26s max_rel_error %.3e  (%zu params)  %s\n",
                                static_cast<unsigned long long>(cfg.train.seed + s), r.name.c_str(),
                                r.max_rel_error, r.params_checked, ok ? "ok" : "FAIL");
                }
            }
            return all_ok ? 0 : 2;
        }

        if (synth->parsed()) {
            vsal::generate_synthetic(out_dir, cfg.synth);
            std::cerr << "wrote " << cfg.synth.n_videos << " videos ("
                      << cfg.synth.frames_per_video << " frames each) to " << out_dir << "\n";
            return 0;
        }

        if (train_cmd->parsed()) {
            auto all = load_required(data_dir);
            std::vector<vsal::VideoRecord> train_set, val_set;
            if (val_dir.empty()) {
                split_train_val(all, train_set, val_set);
            } else {
                train_set = std::move(all);
                val_set = load_required(val_dir);
            }
            vsal::ViNet<float> model = build_model(cfg, cfg.train.seed, checkpoint);
            const auto result = vsal::train(model, train_set, val_set, cfg.train, out_dir);
            std::cerr << "best validation CC " << result.best_val_cc << " at step "
                      << result.best_step << (result.early_stopped ? " (early stop)" : "") << "\n";
            return 0;
        }

        if (eval_cmd->parsed()) {
            const auto videos = load_required(data_dir);
            const auto model = build_model(cfg, cfg.train.seed, checkpoint);
            const auto report = vsal::evaluate(model, videos, cfg.metrics);
            vsal::write_metrics_csv(out_dir + "/metrics.csv", report);
            std::cerr << "overall: cc " << report.overall.cc << " sim " << report.overall.sim
                      << " auc " << report.overall.auc_judd << " nss " << report.overall.nss
                      << "\n";
            return 0;
        }

        if (infer->parsed()) {
            const auto videos = load_required(data_dir);
            const auto model = build_model(cfg, cfg.train.seed, checkpoint);
            vsal::PredictOptions options;
            options.density_sigma = cfg.train.density_sigma;
            for (const auto& video : videos) {
                const auto maps = vsal::predict_video(model, video, options);
                const auto dir = fs::path(out_dir) / video.id;
                fs::create_directories(dir);
                for (std::size_t t = 0; t < maps.size(); ++t) {
                    float peak = 0.f;
                    for (float v : maps[t]->data) peak = std::max(peak, v);
                    vsal::img::ImageU8 png;
                    png.height = cfg.model.input_height;
                    png.width = cfg.model.input_width;
                    png.channels = 1;
                    png.pixels.resize(png.height * png.width);
                    for (std::size_t i = 0; i < png.pixels.size(); ++i) {
                        png.pixels[i] = static_cast<std::uint8_t>(
                            std::lrint(255.0 * maps[t]->data[i] / peak));
                    }
                    char name[32];
                    std::snprintf(name, sizeof(name), "%05zu.png", t);
                    vsal::img::write_png((dir / name).string(), png);
                }
                std::cerr << video.id << ": " << maps.size() << " maps\n";
            }
            return 0;
        }

        if (ablate_clip->parsed() || ablate_h->parsed()) {
            auto all = load_required(data_dir);
            std::vector<vsal::VideoRecord> train_set, val_set;
            if (val_dir.empty()) {
                split_train_val(all, train_set, val_set);
            } else {
                train_set = std::move(all);
                val_set = load_required(val_dir);
            }
            if (ablate_clip->parsed()) {
                std::vector<std::size_t> sizes;
                std::stringstream ss(sizes_arg);
                std::string item;
                while (std::getline(ss, item, ',')) sizes.push_back(std::stoul(item));
                if (sizes.empty()) throw vsal::ValueError("ablate-clip: no sizes given");
                const auto rows =
                    vsal::ablate_clip_size(sizes, cfg.model, train_set, val_set, cfg.train);
                vsal::write_ablation_csv(out_dir + "/ablate_clip.csv", "clip_size", rows);
            } else {
                const auto rows = vsal::ablate_hierarchy(cfg.model, train_set, val_set, cfg.train);
                vsal::write_ablation_csv(out_dir + "/ablate_hierarchy.csv", "variant", rows);
            }
            return 0;
        }

        if (probe->parsed()) {
            const auto videos = load_required(data_dir);
            const auto model = build_model(cfg, cfg.train.seed, checkpoint);
            const auto report =
                vsal::probe_audio(model, videos, cfg.train.seed, cfg.train.density_sigma);
            vsal::write_probe_csv(out_dir + "/probe_summary.csv", out_dir + "/probe_detail.csv",
                                  report);
            std::cerr << "true_vs_zeroed: cc " << report.overall.cc_zeroed << " sim "
                      << report.overall.sim_zeroed << "\n";
            std::cerr << "true_vs_swapped: cc " << report.overall.cc_swapped << " sim "
                      << report.overall.sim_swapped << "\n";
            return 0;
        }
    } catch (const vsal::ValueError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const vsal::ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
