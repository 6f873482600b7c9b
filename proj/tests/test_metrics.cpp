#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "vsal/metrics.hpp"
#include "vsal/rng.hpp"

using namespace vsal;
namespace mt = vsal::metrics;

namespace {

TensorPtr<double> random_map(std::size_t h, std::size_t w, Rng& rng, double lo = 0.0, double hi = 1.0) {
    auto t = zeros<double>({h, w});
    for (auto& v : t->data) v = rng.uniform(lo, hi);
    return t;
}

TensorPtr<double> normalized(const TensorPtr<double>& t) {
    double s = 0;
    for (double v : t->data) s += v;
    auto out = zeros<double>(t->shape);
    for (std::size_t i = 0; i < t->numel(); ++i) out->data[i] = t->data[i] / s;
    return out;
}

std::vector<oracle::Point> as_points(const mt::FixationRecord& r) {
    std::vector<oracle::Point> pts;
    for (const auto& f : r.points) pts.push_back({f.x, f.y});
    return pts;
}

mt::FixationRecord random_fixations(std::size_t h, std::size_t w, std::size_t n, Rng& rng) {
    mt::FixationRecord r;
    for (std::size_t i = 0; i < n; ++i) {
        r.points.push_back({static_cast<int>(rng.uniform_int(w)), static_cast<int>(rng.uniform_int(h))});
    }
    return r;
}

}  // namespace

TEST_CASE("cc: identical, inverted, degenerate") {
    Rng rng(1);
    auto p = random_map(4, 4, rng);
    CHECK(mt::cc(*p, *p) == 1.0);  // exact

    auto q = zeros<double>({4, 4});
    for (std::size_t i = 0; i < 16; ++i) q->data[i] = 2.0 - p->data[i];
    CHECK(mt::cc(*p, *q) == doctest::Approx(-1.0).epsilon(1e-12));

    bool degenerate = false;
    auto flat = full<double>({4, 4}, 0.3);
    CHECK(mt::cc(*flat, *p, &degenerate) == 0.0);
    CHECK(degenerate);
}

TEST_CASE("sim: identical, disjoint, half overlap") {
    auto a = make_tensor<double>({1, 2}, {0.5, 0.5});
    CHECK(mt::sim(*a, *a) == 1.0);

    auto h1 = make_tensor<double>({1, 2}, {1.0, 0.0});
    auto h2 = make_tensor<double>({1, 2}, {0.0, 1.0});
    CHECK(mt::sim(*h1, *h2) == 0.0);
    CHECK(mt::sim(*a, *h1) == doctest::Approx(0.5));

    auto un = make_tensor<double>({1, 2}, {0.9, 0.9});
    CHECK_THROWS_AS(mt::sim(*un, *a), ValueError);
}

TEST_CASE("nss hand values on the 2x2 map 1..4") {
    auto p = make_tensor<double>({2, 2}, {1, 2, 3, 4});
    mt::FixationRecord at4{{{1, 1}}};
    mt::FixationRecord at1{{{0, 0}}};
    const double expected = 1.5 / std::sqrt(1.25);
    CHECK(mt::nss(*p, at4) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(mt::nss(*p, at1) == doctest::Approx(-expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(1.3416).epsilon(1e-4));

    bool degenerate = false;
    auto flat = full<double>({2, 2}, 1.0);
    CHECK(mt::nss(*flat, at4, &degenerate) == 0.0);
    CHECK(degenerate);

    CHECK_THROWS_AS(mt::nss(*p, mt::FixationRecord{}), ValueError);
    mt::FixationRecord out_of_range{{{2, 0}}};
    CHECK_THROWS_AS(mt::nss(*p, out_of_range), ValueError);
}

TEST_CASE("auc_judd: perfect separation, constant map, oracle match") {
    auto p = zeros<double>({3, 3});
    p->data[4] = 1.0;  // center strictly maximal
    mt::FixationRecord fix{{{1, 1}}};
    CHECK(mt::auc_judd(*p, fix) == doctest::Approx(1.0).epsilon(1e-12));

    auto flat = full<double>({3, 3}, 0.5);
    CHECK(mt::auc_judd(*flat, fix) == doctest::Approx(0.5).epsilon(1e-12));

    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        auto m = random_map(6, 6, rng);
        auto f = random_fixations(6, 6, 4, rng);
        const double got = mt::auc_judd(*m, f);
        const double ref = oracle::auc_judd(m->data, 6, 6, as_points(f));
        CHECK(got == doctest::Approx(ref).epsilon(1e-10));
    }
}

TEST_CASE("sauc: trivial extremes and determinism") {
    auto p = zeros<double>({4, 4});
    p->data[5] = 1.0;
    mt::FixationRecord fix{{{1, 1}}};
    std::vector<mt::FixationRecord> pool{{{{3, 3}, {0, 0}}}};
    CHECK(mt::sauc(*p, fix, pool, 50, 0) == doctest::Approx(1.0).epsilon(1e-12));

    auto flat = full<double>({4, 4}, 0.25);
    CHECK(mt::sauc(*flat, fix, pool, 50, 0) == doctest::Approx(0.5).epsilon(1e-12));

    Rng rng(4);
    auto m = random_map(4, 4, rng);
    CHECK(mt::sauc(*m, fix, pool, 100, 7) == mt::sauc(*m, fix, pool, 100, 7));
    CHECK_THROWS_AS(mt::sauc(*m, fix, {}, 10, 0), ValueError);
}

TEST_CASE("sauc mean lies within 2 standard errors of the enumerated expectation") {
    Rng rng(12);
    for (int trial = 0; trial < 5; ++trial) {
        auto m = random_map(5, 5, rng);
        auto fix = random_fixations(5, 5, 3, rng);
        auto pool_rec = random_fixations(5, 5, 4, rng);
        std::vector<mt::FixationRecord> pool{pool_rec};

        double exact_mean = 0, exact_var = 0;
        oracle::sauc_enumerate(m->data, 5, as_points(fix), as_points(pool_rec), &exact_mean,
                               &exact_var);
        const int n_splits = 1000;
        const double got = mt::sauc(*m, fix, pool, n_splits, 1234 + trial);
        const double se = std::sqrt(exact_var / n_splits);
        CHECK(std::abs(got - exact_mean) <= 2.0 * se + 1e-12);
    }
}

TEST_CASE("metric battery: 200 random 8x8 instances match the oracles within 1e-10") {
    Rng rng(2024);
    for (int i = 0; i < 200; ++i) {
        auto p_raw = random_map(8, 8, rng, 0.01, 1.0);
        auto q_raw = random_map(8, 8, rng, 0.01, 1.0);
        auto p = normalized(p_raw);
        auto q = normalized(q_raw);
        auto fix = random_fixations(8, 8, 5, rng);

        CHECK(mt::cc(*p, *q) == doctest::Approx(oracle::cc(p->data, q->data)).epsilon(1e-10));
        CHECK(mt::sim(*p, *q) == doctest::Approx(oracle::sim(p->data, q->data)).epsilon(1e-10));
        CHECK(mt::kldiv(*p, *q, 1e-7) ==
              doctest::Approx(oracle::kldiv(p->data, q->data, 1e-7)).epsilon(1e-10));
        CHECK(mt::nss(*p, fix) == doctest::Approx(oracle::nss(p->data, 8, as_points(fix))).epsilon(1e-10));
        CHECK(mt::auc_judd(*p, fix) ==
              doctest::Approx(oracle::auc_judd(p->data, 8, 8, as_points(fix))).epsilon(1e-10));
    }
}

TEST_CASE("cc and nss are invariant under positive affine transforms of P") {
    Rng rng(77);
    auto p = random_map(6, 6, rng);
    auto q = random_map(6, 6, rng);
    auto fix = random_fixations(6, 6, 4, rng);

    auto scaled = zeros<double>({6, 6});
    for (std::size_t i = 0; i < 36; ++i) scaled->data[i] = 3.5 * p->data[i] + 0.25;
    CHECK(mt::cc(*scaled, *q) == doctest::Approx(mt::cc(*p, *q)).epsilon(1e-12));
    CHECK(mt::nss(*scaled, fix) == doctest::Approx(mt::nss(*p, fix)).epsilon(1e-12));
}

TEST_CASE("auc_judd and sauc are invariant under strictly monotone transforms") {
    Rng rng(78);
    auto p = random_map(6, 6, rng);
    auto fix = random_fixations(6, 6, 4, rng);
    auto pool_rec = random_fixations(6, 6, 4, rng);
    std::vector<mt::FixationRecord> pool{pool_rec};

    auto warped = zeros<double>({6, 6});
    for (std::size_t i = 0; i < 36; ++i) warped->data[i] = std::exp(2.0 * p->data[i]);
    CHECK(mt::auc_judd(*warped, fix) == mt::auc_judd(*p, fix));           // bit-exact
    CHECK(mt::sauc(*warped, fix, pool, 64, 5) == mt::sauc(*p, fix, pool, 64, 5));
}

TEST_CASE("sim symmetry and the kldiv self-divergence bound") {
    Rng rng(79);
    auto p = normalized(random_map(8, 8, rng, 0.01, 1.0));
    auto q = normalized(random_map(8, 8, rng, 0.01, 1.0));
    CHECK(mt::sim(*p, *q) == mt::sim(*q, *p));

    // |kldiv(P,P)| <= 4 * eps * n  (c = 4; from |log(1+x)| <= 2|x| for |x| <= 1/2)
    const double eps = 1e-7;
    CHECK(std::abs(mt::kldiv(*p, *p, eps)) <= 4.0 * eps * 64);
}

TEST_CASE("fixations_to_density: symmetry, modes, per-pixel oracle") {
    mt::FixationRecord center{{{8, 8}}};
    auto d = mt::fixations_to_density(center, 17, 17, 2.0);
    // argmax at the fixation, radially symmetric
    std::size_t best = 0;
    for (std::size_t i = 0; i < d->numel(); ++i) {
        if (d->data[i] > d->data[best]) best = i;
    }
    CHECK(best == 8u * 17 + 8);
    CHECK(d->data[8 * 17 + 5] == doctest::Approx(d->data[8 * 17 + 11]).epsilon(1e-12));
    CHECK(d->data[5 * 17 + 8] == doctest::Approx(d->data[11 * 17 + 8]).epsilon(1e-12));

    mt::FixationRecord two{{{2, 2}, {13, 13}}};
    auto d2 = mt::fixations_to_density(two, 16, 16, 1.5);
    CHECK(d2->data[2 * 16 + 2] == doctest::Approx(d2->data[13 * 16 + 13]).epsilon(1e-12));

    mt::FixationRecord one{{{7, 5}}};
    auto d3 = mt::fixations_to_density(one, 16, 16, 2.0);
    auto ref = oracle::gaussian_density(16, 16, {{7, 5}}, 2.0);
    for (std::size_t i = 0; i < ref.size(); ++i) {
        CHECK(d3->data[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }

    CHECK_THROWS_AS(mt::fixations_to_density(mt::FixationRecord{}, 8, 8, 2.0), ValueError);
    CHECK_THROWS_AS(mt::fixations_to_density(one, 8, 8, 0.0), ValueError);
}
