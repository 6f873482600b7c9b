#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "vsal/rng.hpp"
#include "vsal/train.hpp"

using namespace vsal;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const auto dir = fs::temp_directory_path() / ("vsal_train_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Tiny synthetic dataset shared by the training tests.
std::vector<VideoRecord> tiny_dataset(const std::string& tag, std::size_t n_videos,
                                      std::size_t frames, std::uint64_t seed) {
    const auto dir = temp_dir(tag);
    SyntheticSpec spec;
    spec.n_videos = n_videos;
    spec.frames_per_video = frames;
    spec.height = 32;
    spec.width = 48;
    spec.seed = seed;
    spec.samples_per_frame = 400;
    generate_synthetic(dir.string(), spec);
    return load_dataset(dir.string());
}

ModelConfig tiny_config() {
    ModelConfig cfg = ModelConfig::toy_preset();
    cfg.input_height = 32;
    cfg.input_width = 32;
    cfg.encoder_channels = {2, 4, 6, 8};
    return cfg;
}

}  // namespace

TEST_CASE("adam: zero gradients leave parameters unchanged from fresh state") {
    auto p = make_tensor<float>({3}, {1.f, -2.f, 0.5f}, true);
    TrainConfig cfg;
    Adam<float> adam({p}, cfg);
    p->ensure_grad();  // all-zero gradient
    const auto before = p->data;
    for (int i = 0; i < 5; ++i) adam.step();
    CHECK(p->data == before);
}

TEST_CASE("adam: first step with unit gradient moves by about the learning rate") {
    auto p = make_tensor<double>({1}, {1.0}, true);
    TrainConfig cfg;
    cfg.learning_rate = 1e-4;
    Adam<double> adam({p}, cfg);
    p->ensure_grad();
    p->grad[0] = 1.0;
    adam.step();
    // bias-corrected first step: mhat = 1, vhat = 1 -> delta = lr / (1 + eps)
    CHECK(p->data[0] == doctest::Approx(1.0 - 1e-4).epsilon(1e-6));
}

TEST_CASE("adam matches the scalar reference over 100 steps within 1e-12") {
    auto p = make_tensor<double>({1}, {0.7}, true);
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    Adam<double> adam({p}, cfg);
    oracle::AdamScalar ref;
    double ref_param = 0.7;
    Rng rng(11);
    for (int i = 0; i < 100; ++i) {
        const double g = rng.uniform(-1, 1);
        p->zero_grad();
        p->ensure_grad();
        p->grad[0] = g;
        adam.step();
        ref_param = ref.step(ref_param, g, 0.01, cfg.beta1, cfg.beta2, cfg.adam_epsilon);
        REQUIRE(p->data[0] == doctest::Approx(ref_param).epsilon(1e-12));
    }
}

TEST_CASE("train: lr=0 leaves weights unchanged; same seed gives identical curves") {
    const auto videos = tiny_dataset("lr0", 2, 6, 7);
    const auto cfg = tiny_config();

    TrainConfig tcfg;
    tcfg.learning_rate = 0.0;
    tcfg.batch_size = 2;
    tcfg.max_steps = 6;
    tcfg.val_interval = 3;
    tcfg.seed = 5;

    ViNet<float> model(cfg, 42);
    std::vector<std::vector<float>> before;
    for (const auto& [name, p] : model.named_parameters()) before.push_back(p->data);
    const auto r1 = train(model, videos, videos, tcfg);
    std::size_t i = 0;
    for (const auto& [name, p] : model.named_parameters()) {
        REQUIRE(p->data == before[i++]);
    }

    tcfg.learning_rate = 1e-4;
    ViNet<float> m2(cfg, 42), m3(cfg, 42);
    const auto r2 = train(m2, videos, videos, tcfg);
    const auto r3 = train(m3, videos, videos, tcfg);
    REQUIRE(r2.curve.size() == r3.curve.size());
    for (std::size_t k = 0; k < r2.curve.size(); ++k) {
        CHECK(r2.curve[k].train_kldiv == r3.curve[k].train_kldiv);
    }
}

TEST_CASE("train: early stopping fires on a plateau and keeps the best checkpoint") {
    const auto videos = tiny_dataset("early", 2, 6, 8);
    const auto cfg = tiny_config();

    TrainConfig tcfg;
    tcfg.learning_rate = 0.0;  // validation CC can never improve
    tcfg.batch_size = 1;
    tcfg.max_steps = 500;
    tcfg.val_interval = 2;
    tcfg.patience = 3;
    tcfg.seed = 1;

    ViNet<float> model(cfg, 9);
    const auto result = train(model, videos, videos, tcfg);
    CHECK(result.early_stopped);
    CHECK(result.steps_run == 2 * (1 + 3));  // first check + patience exhausted
    CHECK(result.best_step == 2);

    // the returned checkpoint's validation CC equals the best observed
    double best_seen = -2;
    for (const auto& p : result.curve) {
        if (!std::isnan(p.val_cc)) best_seen = std::max(best_seen, p.val_cc);
    }
    CHECK(result.best_val_cc == doctest::Approx(best_seen));
}

TEST_CASE("train writes a loss curve and aborts on NaN with a diagnostic dump") {
    const auto videos = tiny_dataset("nan", 1, 4, 3);
    const auto cfg = tiny_config();
    const auto out = temp_dir("nan_out");

    TrainConfig tcfg;
    tcfg.batch_size = 1;
    tcfg.max_steps = 2;
    tcfg.val_interval = 1;
    tcfg.seed = 2;

    ViNet<float> model(cfg, 4);
    train(model, videos, videos, tcfg, out.string());
    CHECK(fs::exists(out / "loss_curve.txt"));
    CHECK(fs::exists(out / "best.ckpt"));

    // poison a weight; the finite checks must abort and dump diagnostics
    ViNet<float> poisoned(cfg, 4);
    poisoned.named_parameters()[0].second->data[0] = std::numeric_limits<float>::infinity();
    const auto out2 = temp_dir("nan_out2");
    CHECK_THROWS_AS(train(poisoned, videos, videos, tcfg, out2.string()), NumericError);
    bool has_diag = false;
    for (const auto& e : fs::directory_iterator(out2)) {
        if (e.path().filename().string().rfind("diagnostic_step_", 0) == 0) has_diag = true;
    }
    CHECK(has_diag);
}

TEST_CASE("predict_video: count contract, padding, standalone recomputation is bit-identical") {
    const auto videos = tiny_dataset("pred", 1, 10, 12);
    const auto& video = videos[0];
    const auto cfg = tiny_config();
    ViNet<float> model(cfg, 77);

    const auto maps = predict_video(model, video);
    REQUIRE(maps.size() == 10);  // one map per frame

    // standalone recomputation through sample_clip matches bit-for-bit
    for (std::size_t t : {std::size_t{0}, std::size_t{4}, std::size_t{9}}) {
        const auto clip = sample_clip(video, t, cfg, 9.0);
        const auto lone = model.forward(nullptr, clip.frames);
        REQUIRE(lone->data == maps[t]->data);
    }

    // a 1-frame video still yields exactly one map (frame repeated T0 times)
    const auto singles = tiny_dataset("pred1", 1, 1, 13);
    const auto one = predict_video(model, singles[0]);
    CHECK(one.size() == 1);
    const auto clip0 = sample_clip(singles[0], 0, cfg, 9.0);
    for (std::size_t k = 1; k < cfg.clip_len; ++k) {
        for (std::size_t i = 0; i < cfg.input_height * cfg.input_width; ++i) {
            REQUIRE(clip0.frames->data[(0 * cfg.clip_len + k) * 32 * 32 + i] ==
                    clip0.frames->data[i]);
        }
    }
}

TEST_CASE("evaluate: perfect oracle scores, constant model chance level, CSV aggregation") {
    const auto dir = temp_dir("eval");
    SyntheticSpec spec;
    spec.n_videos = 2;
    spec.frames_per_video = 4;
    spec.height = 32;
    spec.width = 48;
    spec.seed = 21;
    spec.fixation_spread = 0.0;  // all fixations exactly at the blob center
    spec.fixations_per_frame = 3;
    spec.samples_per_frame = 400;
    generate_synthetic(dir.string(), spec);
    const auto videos = load_dataset(dir.string());

    const auto cfg = tiny_config();
    metrics::MetricsConfig mcfg;
    mcfg.density_sigma_px = 4.0;

    // perfect oracle: emit the ground-truth density as the prediction
    std::vector<std::vector<TensorPtr<float>>> oracle_maps(videos.size());
    for (std::size_t v = 0; v < videos.size(); ++v) {
        for (std::size_t t = 0; t < videos[v].frame_count(); ++t) {
            const auto targets = frame_targets(videos[v], t, cfg, mcfg.density_sigma_px);
            oracle_maps[v].push_back(cast<double, float>(*targets.density));
        }
    }
    const auto report = evaluate_maps(oracle_maps, videos, cfg, mcfg);
    CHECK(report.overall.cc == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(report.overall.sim == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(report.overall.auc_judd == doctest::Approx(1.0).epsilon(1e-9));

    // constant model: chance-level AUC, zero NSS
    std::vector<std::vector<TensorPtr<float>>> flat_maps(videos.size());
    for (std::size_t v = 0; v < videos.size(); ++v) {
        for (std::size_t t = 0; t < videos[v].frame_count(); ++t) {
            flat_maps[v].push_back(full<float>({cfg.input_height, cfg.input_width}, 0.5f));
        }
    }
    const auto flat = evaluate_maps(flat_maps, videos, cfg, mcfg);
    CHECK(flat.overall.auc_judd == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(flat.overall.sauc == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(flat.overall.nss == 0.0);

    // CSV aggregates equal the hand-mean of the per-frame rows
    const auto csv_path = (dir / "report.csv").string();
    write_metrics_csv(csv_path, report);
    std::ifstream in(csv_path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "video_id,frame_id,cc,sim,auc_judd,sauc,nss,kldiv");
    double cc_sum = 0;
    std::size_t n_frames = 0;
    double overall_cc = -1;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string vid, fid, cc_s;
        std::getline(ss, vid, ',');
        std::getline(ss, fid, ',');
        std::getline(ss, cc_s, ',');
        if (vid == "overall") {
            overall_cc = std::stod(cc_s);
        } else if (fid != "mean") {
            cc_sum += std::stod(cc_s);
            ++n_frames;
        }
    }
    REQUIRE(n_frames == 8);
    CHECK(overall_cc == doctest::Approx(cc_sum / n_frames).epsilon(1e-5));
}

TEST_CASE("probe_audio: fusion-free control is exactly 1.0 and reports both pairs") {
    const auto videos = tiny_dataset("probe", 2, 4, 31);
    const auto cfg = tiny_config();
    ViNet<float> model(cfg, 50);

    const auto report = probe_audio(model, videos, 0);
    REQUIRE(report.per_video.size() == 2);
    for (const auto& row : report.per_video) {
        CHECK(row.cc_zeroed == 1.0);
        CHECK(row.sim_zeroed == 1.0);
        CHECK(row.cc_swapped == 1.0);
        CHECK(row.sim_swapped == 1.0);
    }
    CHECK(report.overall.cc_zeroed == 1.0);
    CHECK(report.overall.sim_zeroed == 1.0);

    // deterministic given the seed
    const auto again = probe_audio(model, videos, 0);
    CHECK(again.overall.cc_swapped == report.overall.cc_swapped);

    const auto dir = temp_dir("probe_csv");
    write_probe_csv((dir / "summary.csv").string(), (dir / "detail.csv").string(), report);
    std::ifstream in(dir / "summary.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "method,cc,sim");
    std::getline(in, line);
    CHECK(line == "true_vs_zeroed,1.000000,1.000000");
    std::getline(in, line);
    CHECK(line == "true_vs_swapped,1.000000,1.000000");
}

TEST_CASE("single repeated batch: loss trend is non-increasing over a 100-step window") {
    const auto videos = tiny_dataset("trend", 1, 1, 17);  // one video, one frame
    const auto cfg = tiny_config();

    TrainConfig tcfg;
    tcfg.batch_size = 1;
    tcfg.learning_rate = 1e-4;
    tcfg.max_steps = 300;
    tcfg.val_interval = 300;
    tcfg.seed = 3;

    ViNet<float> model(cfg, 23);
    const auto result = train(model, videos, videos, tcfg);
    REQUIRE(result.curve.size() == 300);
    // windowed trend: loss 100 steps later must not exceed today's, for all
    // but 5% of window starts (Adam is not per-step monotone)
    std::size_t violations = 0, windows = 0;
    for (std::size_t i = 0; i + 100 < result.curve.size(); ++i) {
        ++windows;
        if (result.curve[i + 100].train_kldiv > result.curve[i].train_kldiv) ++violations;
    }
    CHECK(violations * 20 <= windows);  // <= 5%
}
