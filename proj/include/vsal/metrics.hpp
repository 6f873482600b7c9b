#pragma once

#include <cstdint>
#include <vector>

#include "vsal/tensor.hpp"

// Evaluation metrics over 2-D saliency maps [H,W] plus the KLDiv loss in its
// non-autograd form. All functions are pure and safe to call from multiple
// threads.
namespace vsal::metrics {

struct Fixation {
    int x = 0;  // column, 0 <= x < W
    int y = 0;  // row,    0 <= y < H
};

// Discrete gaze points recorded for one frame.
struct FixationRecord {
    std::vector<Fixation> points;
};

struct MetricsConfig {
    double kldiv_epsilon = 1e-7;
    int sauc_splits = 100;
    std::uint64_t sauc_seed = 0;
    double density_sigma_px = 9.0;  // default blur at the 32-px toy height scale
};

// Pearson correlation over flattened pixels. Zero-variance input returns 0
// and sets *degenerate. Identical non-constant maps score exactly 1.
double cc(const Tensor<double>& p, const Tensor<double>& q, bool* degenerate = nullptr);

// Histogram intersection sum_i min(P_i, Q_i); inputs must each sum to 1
// within 1e-4. Identical maps score exactly 1.
double sim(const Tensor<double>& p, const Tensor<double>& q);

// Mean of the zero-mean/unit-population-variance normalized map at fixated
// pixels. Zero-variance map returns 0 and sets *degenerate.
double nss(const Tensor<double>& p, const FixationRecord& fix, bool* degenerate = nullptr);

// ROC area with thresholds at each distinct fixated saliency value
// (descending): TPR over fixations, FPR over all non-fixated pixels,
// trapezoidal area through (0,0) and (1,1).
double auc_judd(const Tensor<double>& p, const FixationRecord& fix);

// Shuffled AUC: negatives are drawn with replacement from the pooled
// fixation locations of other frames (the pool must not include this frame's
// own record), sample size = #positives, averaged over n_splits seeded draws.
double sauc(const Tensor<double>& p, const FixationRecord& fix,
            const std::vector<FixationRecord>& shuffle_pool, int n_splits,
            std::uint64_t rng_seed);

// sum_i Q_i * log(eps + Q_i/(P_i + eps)), natural log.
double kldiv(const Tensor<double>& p, const Tensor<double>& q, double epsilon = 1e-7);

// Sum of isotropic Gaussians at the fixations, radial cutoff 4*sigma,
// normalized to sum 1.
TensorPtr<double> fixations_to_density(const FixationRecord& fix, std::size_t height,
                                       std::size_t width, double sigma_px);

}  // namespace vsal::metrics
