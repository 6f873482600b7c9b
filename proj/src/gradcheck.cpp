#include "vsal/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "vsal/model.hpp"
#include "vsal/ops.hpp"
#include "vsal/rng.hpp"

namespace vsal {

GradCheckResult run_grad_check(const GradCheckCase& check) {
    GradCheckResult result;
    result.name = check.name;

    for (const auto& leaf : check.leaves) leaf->zero_grad();
    Tape<double> tape;
    auto loss = check.forward(&tape);
    tape.backward(loss);

    const double h = check.step;
    for (const auto& leaf : check.leaves) {
        std::size_t n = leaf->numel();
        if (check.max_fd_params > 0) n = std::min(n, check.max_fd_params);
        for (std::size_t i = 0; i < n; ++i) {
            const double original = leaf->data[i];
            leaf->data[i] = original + h;
            const double f_plus = check.forward(nullptr)->scalar();
            leaf->data[i] = original - h;
            const double f_minus = check.forward(nullptr)->scalar();
            leaf->data[i] = original;

            const double numeric = (f_plus - f_minus) / (2.0 * h);
            const double analytic = leaf->grad.empty() ? 0.0 : leaf->grad[i];
            const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
            result.max_rel_error = std::max(result.max_rel_error, std::abs(analytic - numeric) / denom);
            ++result.params_checked;
        }
    }
    return result;
}

namespace {

TensorPtr<double> leaf(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    auto t = zeros<double>(std::move(shape), /*requires_grad=*/true);
    for (auto& v : t->data) v = rng.uniform(lo, hi);
    return t;
}

// Values with pairwise gaps well above the finite-difference step, so that
// max-pool argmaxes cannot flip during perturbation.
TensorPtr<double> gapped_leaf(Shape shape, Rng& rng) {
    auto t = zeros<double>(std::move(shape), /*requires_grad=*/true);
    std::vector<std::size_t> order(t->numel());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[rng.uniform_int(i)]);
    }
    for (std::size_t i = 0; i < order.size(); ++i) {
        t->data[order[i]] = 0.05 * static_cast<double>(i) + rng.uniform(-0.01, 0.01);
    }
    return t;
}

// Signed values bounded away from the ReLU kink.
TensorPtr<double> kink_free_leaf(Shape shape, Rng& rng) {
    auto t = zeros<double>(std::move(shape), /*requires_grad=*/true);
    for (auto& v : t->data) {
        const double mag = rng.uniform(0.2, 1.0);
        v = rng.uniform() < 0.5 ? -mag : mag;
    }
    return t;
}

}  // namespace

std::vector<GradCheckResult> gradcheck_suite(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<GradCheckCase> cases;

    {
        auto x = leaf({2, 4, 5, 5}, rng);
        auto w = leaf({3, 2, 3, 3, 3}, rng);
        auto b = leaf({3}, rng);
        cases.push_back({"conv3d",
                         {x, w, b},
                         [=](Tape<double>* t) {
                             return ops::sum(t, ops::conv3d(t, x, w, b, {1, 2, 2}, {1, 1, 0}));
                         }});
    }
    {
        auto x = leaf({2, 2, 3, 3}, rng);
        auto w = leaf({2, 3, 2, 2, 2}, rng);
        auto b = leaf({3}, rng);
        cases.push_back({"conv_transpose3d",
                         {x, w, b},
                         [=](Tape<double>* t) {
                             return ops::sum(t, ops::conv_transpose3d(t, x, w, b, {2, 2, 2}, {1, 0, 0}));
                         }});
    }
    {
        auto x = leaf({2, 12}, rng);
        auto w = leaf({3, 2, 5}, rng);
        auto b = leaf({3}, rng);
        cases.push_back({"conv1d",
                         {x, w, b},
                         [=](Tape<double>* t) { return ops::sum(t, ops::conv1d(t, x, w, b, 2, 2)); }});
    }
    {
        auto x = leaf({1, 4, 5, 5}, rng);
        auto sw = leaf({2, 1, 1, 3, 3}, rng);
        auto sb = leaf({2}, rng);
        auto tw = leaf({2, 2, 3, 1, 1}, rng);
        auto tb = leaf({2}, rng);
        cases.push_back({"sep_conv3d",
                         {x, sw, sb, tw, tb},
                         [=](Tape<double>* t) {
                             return ops::sum(t, ops::sep_conv3d(t, x, sw, sb, tw, tb, {}, {0, 1, 1},
                                                                {}, {1, 0, 0}));
                         }});
    }
    {
        auto x = gapped_leaf({2, 4, 4, 4}, rng);
        cases.push_back({"maxpool3d",
                         {x},
                         [=](Tape<double>* t) {
                             return ops::sum(t, ops::maxpool3d(t, x, {2, 2, 2}, {2, 2, 2}));
                         }});
    }
    {
        auto x = gapped_leaf({3, 11}, rng);
        cases.push_back({"adaptive_maxpool1d",
                         {x},
                         [=](Tape<double>* t) { return ops::sum(t, ops::adaptive_maxpool1d(t, x, 3)); }});
    }
    {
        auto x = leaf({2, 3, 4, 4}, rng);
        cases.push_back({"trilinear_upsample",
                         {x},
                         [=](Tape<double>* t) {
                             return ops::sum(t, ops::trilinear_upsample(t, x, {5, 8, 6}));
                         }});
    }
    {
        auto x = kink_free_leaf({3, 4, 2}, rng);
        cases.push_back({"relu", {x}, [=](Tape<double>* t) { return ops::sum(t, ops::relu(t, x)); }});
    }
    {
        auto x = leaf({3, 4}, rng);
        cases.push_back(
            {"sigmoid", {x}, [=](Tape<double>* t) { return ops::sum(t, ops::sigmoid(t, x)); }});
    }
    {
        auto a = leaf({3, 4}, rng);
        auto b = leaf({3, 4}, rng);
        cases.push_back({"add_mul",
                         {a, b},
                         [=](Tape<double>* t) {
                             auto m = ops::mul(t, ops::add(t, a, b), b);
                             return ops::sum(t, ops::add_scalar(t, ops::mul_scalar(t, m, 1.5), 0.25));
                         }});
    }
    {
        auto a = leaf({3, 4}, rng);
        auto b = leaf({4, 2}, rng);
        cases.push_back(
            {"matmul", {a, b}, [=](Tape<double>* t) { return ops::sum(t, ops::matmul(t, a, b)); }});
    }
    {
        auto a = leaf({2, 2, 3}, rng);
        auto b = leaf({2, 4, 3}, rng);
        cases.push_back({"concat",
                         {a, b},
                         [=](Tape<double>* t) {
                             auto c = ops::concat<double>(t, {a, b}, 1);
                             return ops::sum(t, ops::mul(t, c, c));
                         }});
    }
    {
        auto x = leaf({2, 5, 3}, rng);
        cases.push_back({"slice",
                         {x},
                         [=](Tape<double>* t) {
                             auto s = ops::slice(t, x, 1, 2, 3);
                             return ops::sum(t, ops::mul(t, s, s));
                         }});
    }
    {
        auto x = leaf({2, 1, 3}, rng);
        cases.push_back({"broadcast_reshape",
                         {x},
                         [=](Tape<double>* t) {
                             auto b = ops::broadcast_to(t, x, {2, 4, 3});
                             auto r = ops::reshape(t, b, {4, 6});
                             return ops::sum(t, ops::mul(t, r, r));
                         }});
    }
    {
        auto x = leaf({2, 3, 4}, rng);
        cases.push_back({"reductions",
                         {x},
                         [=](Tape<double>* t) {
                             auto s = ops::sum_axes(t, x, {1}, true);
                             auto m = ops::mean_axes(t, s, {0, 2}, false);
                             return ops::mean(t, ops::mul(t, m, m));
                         }});
    }
    {
        auto x = leaf({3, 3}, rng, 0.1, 1.0);
        cases.push_back({"normalize_to_distribution",
                         {x},
                         [=](Tape<double>* t) {
                             auto n = ops::normalize_to_distribution(t, x);
                             return ops::sum(t, ops::mul(t, n, n));
                         }});
    }
    {
        // KLDiv through the normalization head, as used in training.
        auto p_raw = leaf({3, 3}, rng, 0.1, 1.0);
        auto q = zeros<double>({3, 3});
        double qs = 0;
        for (auto& v : q->data) {
            v = rng.uniform(0.05, 1.0);
            qs += v;
        }
        for (auto& v : q->data) v /= qs;
        cases.push_back({"kldiv_head",
                         {p_raw},
                         [=](Tape<double>* t) {
                             auto p = ops::normalize_to_distribution(t, p_raw);
                             return ops::kldiv(t, p, q, 1e-7);
                         }});
    }
    {
        // KLDiv directly, with a step small enough to stay inside the
        // normalization precondition (|sum - 1| <= 1e-4).
        auto p = zeros<double>({2, 2}, true);
        auto q = zeros<double>({2, 2});
        double ps = 0, qs = 0;
        for (auto& v : p->data) {
            v = rng.uniform(0.1, 1.0);
            ps += v;
        }
        for (auto& v : p->data) v /= ps;
        for (auto& v : q->data) {
            v = rng.uniform(0.1, 1.0);
            qs += v;
        }
        for (auto& v : q->data) v /= qs;
        GradCheckCase c{"kldiv_direct", {p}, [=](Tape<double>* t) { return ops::kldiv(t, p, q, 1e-7); }};
        c.step = 1e-5;
        cases.push_back(std::move(c));
    }
    {
        auto x1 = leaf({2, 3}, rng);
        auto A = leaf({3, 4, 2}, rng);
        auto x2 = leaf({2, 2}, rng);
        auto b = leaf({4}, rng);
        cases.push_back({"bilinear_form",
                         {x1, A, x2, b},
                         [=](Tape<double>* t) {
                             auto y = ops::bilinear_form(t, x1, A, x2, b);
                             return ops::sum(t, ops::mul(t, y, y));
                         }});
    }
    {
        // Resample until every conv output clears the ReLU kink by more than
        // any single +-h perturbation can move it (each element shifts an
        // output cell by at most h here, with |x|, |w| <= 1).
        TensorPtr<double> x, w, b;
        for (int attempt = 0; attempt < 100; ++attempt) {
            x = leaf({1, 4, 4, 4}, rng);
            w = leaf({2, 1, 3, 3, 3}, rng);
            b = leaf({2}, rng);
            auto probe = ops::conv3d<double>(nullptr, x, w, b, {}, {1, 1, 1});
            double min_abs = 1e9;
            for (double v : probe->data) min_abs = std::min(min_abs, std::abs(v));
            if (min_abs > 5e-3) break;
        }
        cases.push_back({"conv3d_relu_sum",
                         {x, w, b},
                         [=](Tape<double>* t) {
                             return ops::sum(t, ops::relu(t, ops::conv3d(t, x, w, b, {}, {1, 1, 1})));
                         }});
    }
    {
        Rng branch_rng = rng.fork(3);
        auto branch = std::make_shared<AudioBranch<double>>(4, branch_rng);
        Waveform wav;
        wav.samples.resize(2000);
        for (auto& s : wav.samples) s = static_cast<float>(rng.uniform(-1, 1));
        std::vector<TensorPtr<double>> leaves;
        for (auto& [name, p] : branch->named_parameters()) leaves.push_back(p);
        GradCheckCase c{"audio_branch", leaves, [=](Tape<double>* t) {
                            auto feats = branch->forward(t, wav);
                            return ops::sum(t, ops::mul(t, feats.features, feats.features));
                        }};
        c.max_fd_params = 40;
        // deep ReLU stack: a smaller step keeps probes off activation kinks
        c.step = 1e-5;
        cases.push_back(std::move(c));
    }
    {
        auto visual = gapped_leaf({4, 2, 2, 2}, rng);
        auto audio_t = leaf({4, 3, 1}, rng);
        auto rw = leaf({4, 8, 1, 1, 1}, rng);
        auto rb = leaf({4}, rng);
        cases.push_back({"fuse_concat_path",
                         {visual, audio_t, rw, rb},
                         [=](Tape<double>* t) {
                             AudioFeatures<double> af{audio_t, AudioSource::precomputed_file};
                             auto fused = fuse_concat(t, visual, af, rw, rb);
                             return ops::sum(t, ops::mul(t, fused, fused));
                         }});
    }
    {
        auto visual = gapped_leaf({4, 2, 2, 2}, rng);
        auto audio_t = leaf({4, 3, 1}, rng);
        BilinearFusionParams<double> bp;
        bp.A = leaf({1, 8, 3}, rng);  // x0=1 after (2,2,2) pooling, x=8, y0=3
        bp.b = leaf({8}, rng);
        cases.push_back({"fuse_bilinear_path",
                         {visual, audio_t, bp.A, bp.b},
                         [=](Tape<double>* t) {
                             AudioFeatures<double> af{audio_t, AudioSource::precomputed_file};
                             auto fused = fuse_bilinear(t, visual, af, bp);
                             return ops::sum(t, ops::mul(t, fused, fused));
                         }});
    }
    {
        // End-to-end toy model: KLDiv(normalize(decode(encode(clip))), target),
        // finite differences taken over the first-layer weights.
        ModelConfig cfg = ModelConfig::toy_preset();
        cfg.input_width = 32;
        cfg.encoder_channels = {2, 3, 4, 5};
        auto model = std::make_shared<ViNet<double>>(cfg, seed + 17);
        auto clip = zeros<double>({3, cfg.clip_len, cfg.input_height, cfg.input_width});
        for (auto& v : clip->data) v = rng.uniform(0.0, 1.0);
        auto target = zeros<double>({cfg.input_height, cfg.input_width});
        double ts = 0;
        for (auto& v : target->data) {
            v = rng.uniform(0.01, 1.0);
            ts += v;
        }
        for (auto& v : target->data) v /= ts;
        auto first_w = model->named_parameters()[0].second;
        cases.push_back({"vinet_end_to_end",
                         {first_w},
                         [=](Tape<double>* t) {
                             auto out = model->forward(t, clip);
                             auto p = ops::normalize_to_distribution(t, out);
                             return ops::kldiv(t, p, target, 1e-7);
                         }});
    }

    std::vector<GradCheckResult> results;
    results.reserve(cases.size());
    for (const auto& c : cases) results.push_back(run_grad_check(c));
    return results;
}

}  // namespace vsal
