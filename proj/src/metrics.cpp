#include "vsal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "vsal/rng.hpp"

namespace vsal::metrics {

namespace {

void require_map(const Tensor<double>& t, const char* name) {
    if (t.ndim() != 2) throw ShapeError(std::string(name) + ": saliency map must be 2-D [H,W]");
}

void require_same(const Tensor<double>& a, const Tensor<double>& b, const char* name) {
    if (a.shape != b.shape) {
        throw ShapeError(std::string(name) + ": map shapes differ, " + shape_to_string(a.shape) +
                         " vs " + shape_to_string(b.shape));
    }
}

void require_normalized(const Tensor<double>& t, const char* name, const char* which) {
    double s = 0;
    for (double v : t.data) s += v;
    if (std::abs(s - 1.0) > 1e-4) {
        throw ValueError(std::string(name) + ": " + which + " must sum to 1 (got " + std::to_string(s) + ")");
    }
}

std::size_t fixation_index(const Tensor<double>& p, const Fixation& f, const char* name) {
    if (f.x < 0 || f.y < 0 || static_cast<std::size_t>(f.x) >= p.shape[1] ||
        static_cast<std::size_t>(f.y) >= p.shape[0]) {
        throw ValueError(std::string(name) + ": fixation (" + std::to_string(f.x) + "," +
                         std::to_string(f.y) + ") outside " + shape_to_string(p.shape));
    }
    return static_cast<std::size_t>(f.y) * p.shape[1] + static_cast<std::size_t>(f.x);
}

// Trapezoidal ROC area for thresholds at the distinct fixated values, given a
// callable that counts negatives >= tau and the negative count.
template <class CountNeg>
double roc_area(const Tensor<double>& p, const FixationRecord& fix, CountNeg&& negatives_at_or_above,
                double n_negatives, const char* name) {
    if (fix.points.empty()) throw ValueError(std::string(name) + ": no fixations");
    std::vector<double> fixated;
    fixated.reserve(fix.points.size());
    for (const auto& f : fix.points) fixated.push_back(p.data[fixation_index(p, f, name)]);

    std::vector<double> thresholds(fixated);
    std::sort(thresholds.begin(), thresholds.end(), std::greater<double>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    std::vector<double> sorted_fixated(fixated);
    std::sort(sorted_fixated.begin(), sorted_fixated.end());

    double area = 0.0, prev_fpr = 0.0, prev_tpr = 0.0;
    for (double tau : thresholds) {
        const double tp = static_cast<double>(sorted_fixated.end() -
                                              std::lower_bound(sorted_fixated.begin(),
                                                               sorted_fixated.end(), tau));
        const double tpr = tp / static_cast<double>(fix.points.size());
        const double fpr = negatives_at_or_above(tau) / n_negatives;
        area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    area += (1.0 - prev_fpr) * (1.0 + prev_tpr) / 2.0;
    return area;
}

}  // namespace

double cc(const Tensor<double>& p, const Tensor<double>& q, bool* degenerate) {
    require_map(p, "cc");
    require_same(p, q, "cc");
    if (degenerate) *degenerate = false;
    const std::size_t n = p.numel();

    double mp = 0, mq = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mp += p.data[i];
        mq += q.data[i];
    }
    mp /= static_cast<double>(n);
    mq /= static_cast<double>(n);

    // A constant map carries no correlation signal; detect exactly via min==max
    // rather than through a rounded variance.
    auto is_constant = [](const std::vector<double>& v) {
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        return *lo == *hi;
    };
    if (is_constant(p.data) || is_constant(q.data)) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    if (p.data == q.data) return 1.0;  // exact on identical maps

    double spq = 0, spp = 0, sqq = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dp = p.data[i] - mp;
        const double dq = q.data[i] - mq;
        spq += dp * dq;
        spp += dp * dp;
        sqq += dq * dq;
    }
    return spq / (std::sqrt(spp) * std::sqrt(sqq));
}

double sim(const Tensor<double>& p, const Tensor<double>& q) {
    require_map(p, "sim");
    require_same(p, q, "sim");
    require_normalized(p, "sim", "P");
    require_normalized(q, "sim", "Q");
    if (p.data == q.data) return 1.0;  // exact on identical distributions
    double s = 0;
    for (std::size_t i = 0; i < p.numel(); ++i) s += std::min(p.data[i], q.data[i]);
    return s;
}

double nss(const Tensor<double>& p, const FixationRecord& fix, bool* degenerate) {
    require_map(p, "nss");
    if (fix.points.empty()) throw ValueError("nss: no fixations");
    if (degenerate) *degenerate = false;

    const auto [lo, hi] = std::minmax_element(p.data.begin(), p.data.end());
    if (*lo == *hi) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    const std::size_t n = p.numel();
    double m = 0;
    for (double v : p.data) m += v;
    m /= static_cast<double>(n);
    double var = 0;
    for (double v : p.data) var += (v - m) * (v - m);
    var /= static_cast<double>(n);  // population variance
    const double sd = std::sqrt(var);
    double s = 0;
    for (const auto& f : fix.points) s += (p.data[fixation_index(p, f, "nss")] - m) / sd;
    return s / static_cast<double>(fix.points.size());
}

double auc_judd(const Tensor<double>& p, const FixationRecord& fix) {
    require_map(p, "auc_judd");
    if (fix.points.empty()) throw ValueError("auc_judd: no fixations");

    std::vector<bool> is_fixated(p.numel(), false);
    for (const auto& f : fix.points) is_fixated[fixation_index(p, f, "auc_judd")] = true;

    std::vector<double> non_fixated;
    non_fixated.reserve(p.numel());
    for (std::size_t i = 0; i < p.numel(); ++i) {
        if (!is_fixated[i]) non_fixated.push_back(p.data[i]);
    }
    if (non_fixated.empty()) throw ValueError("auc_judd: every pixel is fixated");
    std::sort(non_fixated.begin(), non_fixated.end());

    auto negatives_at_or_above = [&non_fixated](double tau) {
        return static_cast<double>(non_fixated.end() -
                                   std::lower_bound(non_fixated.begin(), non_fixated.end(), tau));
    };
    return roc_area(p, fix, negatives_at_or_above, static_cast<double>(non_fixated.size()),
                    "auc_judd");
}

double sauc(const Tensor<double>& p, const FixationRecord& fix,
            const std::vector<FixationRecord>& shuffle_pool, int n_splits,
            std::uint64_t rng_seed) {
    require_map(p, "sauc");
    if (fix.points.empty()) throw ValueError("sauc: no fixations");
    if (n_splits < 1) throw ValueError("sauc: n_splits must be >= 1");

    std::vector<double> pool_values;
    for (const auto& rec : shuffle_pool) {
        for (const auto& f : rec.points) pool_values.push_back(p.data[fixation_index(p, f, "sauc")]);
    }
    if (pool_values.empty()) throw ValueError("sauc: empty shuffle pool");

    Rng rng(rng_seed);
    const std::size_t n_pos = fix.points.size();
    double total = 0.0;
    std::vector<double> negs(n_pos);
    for (int split = 0; split < n_splits; ++split) {
        for (std::size_t i = 0; i < n_pos; ++i) {
            negs[i] = pool_values[rng.uniform_int(pool_values.size())];
        }
        std::sort(negs.begin(), negs.end());
        auto negatives_at_or_above = [&negs](double tau) {
            return static_cast<double>(negs.end() - std::lower_bound(negs.begin(), negs.end(), tau));
        };
        total += roc_area(p, fix, negatives_at_or_above, static_cast<double>(n_pos), "sauc");
    }
    return total / n_splits;
}

double kldiv(const Tensor<double>& p, const Tensor<double>& q, double epsilon) {
    require_map(p, "kldiv");
    require_same(p, q, "kldiv");
    if (!(epsilon > 0)) throw ValueError("kldiv: epsilon must be positive");
    require_normalized(p, "kldiv", "P");
    require_normalized(q, "kldiv", "Q");
    double s = 0;
    for (std::size_t i = 0; i < p.numel(); ++i) {
        s += q.data[i] * std::log(epsilon + q.data[i] / (p.data[i] + epsilon));
    }
    return s;
}

TensorPtr<double> fixations_to_density(const FixationRecord& fix, std::size_t height,
                                       std::size_t width, double sigma_px) {
    if (fix.points.empty()) throw ValueError("fixations_to_density: no fixations");
    if (!(sigma_px > 0)) throw ValueError("fixations_to_density: sigma must be positive");

    auto out = zeros<double>({height, width});
    const double radius = 4.0 * sigma_px;
    const double r2max = radius * radius;
    const double inv_2s2 = 1.0 / (2.0 * sigma_px * sigma_px);
    for (const auto& f : fix.points) {
        if (f.x < 0 || f.y < 0 || static_cast<std::size_t>(f.x) >= width ||
            static_cast<std::size_t>(f.y) >= height) {
            throw ValueError("fixations_to_density: fixation outside the map");
        }
        const long y_lo = std::max<long>(0, static_cast<long>(std::floor(f.y - radius)));
        const long y_hi = std::min<long>(static_cast<long>(height) - 1, static_cast<long>(std::ceil(f.y + radius)));
        const long x_lo = std::max<long>(0, static_cast<long>(std::floor(f.x - radius)));
        const long x_hi = std::min<long>(static_cast<long>(width) - 1, static_cast<long>(std::ceil(f.x + radius)));
        for (long y = y_lo; y <= y_hi; ++y) {
            for (long x = x_lo; x <= x_hi; ++x) {
                const double dx = static_cast<double>(x) - f.x;
                const double dy = static_cast<double>(y) - f.y;
                const double r2 = dx * dx + dy * dy;
                if (r2 <= r2max) out->data[y * width + x] += std::exp(-r2 * inv_2s2);
            }
        }
    }
    double s = 0;
    for (double v : out->data) s += v;
    for (double& v : out->data) v /= s;
    return out;
}

}  // namespace vsal::metrics
