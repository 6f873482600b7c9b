#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "vsal/ops.hpp"
#include "vsal/rng.hpp"
#include "vsal/tape.hpp"

using namespace vsal;
namespace op = vsal::ops;

namespace {

TensorPtr<double> random_tensor(Shape shape, Rng& rng, bool requires_grad = false,
                                double lo = -1.0, double hi = 1.0) {
    auto t = zeros<double>(std::move(shape), requires_grad);
    for (auto& v : t->data) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace

TEST_CASE("conv3d: same-padding keeps shape, full-kernel sum, C_in mismatch rejected") {
    auto x = full<double>({1, 4, 4, 4}, 1.0);
    auto w = full<double>({1, 1, 3, 3, 3}, 1.0);
    auto y = op::conv3d<double>(nullptr, x, w, nullptr, {}, {1, 1, 1});
    CHECK(y->shape == Shape{1, 4, 4, 4});

    auto x3 = full<double>({1, 3, 3, 3}, 1.0);
    auto y3 = op::conv3d<double>(nullptr, x3, w, nullptr, {}, {});
    CHECK(y3->shape == Shape{1, 1, 1, 1});
    CHECK(y3->data[0] == doctest::Approx(27.0));

    auto bad = full<double>({2, 4, 4, 4}, 1.0);
    CHECK_THROWS_AS(op::conv3d<double>(nullptr, bad, w, nullptr, {}, {}), ShapeError);
    auto tiny = full<double>({1, 2, 2, 2}, 1.0);
    CHECK_THROWS_AS(op::conv3d<double>(nullptr, tiny, w, nullptr, {}, {}), ShapeError);
}

TEST_CASE("conv3d matches the direct-summation oracle on random instances") {
    Rng rng(101);
    auto x = random_tensor({2, 4, 6, 6}, rng);
    auto w = random_tensor({3, 2, 3, 3, 3}, rng);
    auto b = random_tensor({3}, rng);
    auto y = op::conv3d<double>(nullptr, x, w, b, {1, 2, 1}, {1, 0, 1});

    oracle::Conv3dDims d{2, 4, 6, 6, 3, 3, 3, 3, 1, 2, 1, 1, 0, 1};
    auto ref = oracle::conv3d(d, x->data, w->data, b->data);
    REQUIRE(y->numel() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y->data[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("conv3d with identity 1x1x1 kernel is the identity map") {
    Rng rng(5);
    auto x = random_tensor({3, 2, 4, 4}, rng);
    auto w = zeros<double>({3, 3, 1, 1, 1});
    for (std::size_t c = 0; c < 3; ++c) w->data[c * 3 + c] = 1.0;
    auto y = op::conv3d<double>(nullptr, x, w, nullptr, {}, {});
    CHECK(y->data == x->data);
}

TEST_CASE("sep_conv3d: shape preservation, identity kernels, composition oracle") {
    Rng rng(33);
    auto x = random_tensor({1, 8, 8, 8}, rng);
    auto sw = random_tensor({1, 1, 1, 3, 3}, rng);
    auto sb = zeros<double>({1});
    auto tw = random_tensor({1, 1, 3, 1, 1}, rng);
    auto tb = zeros<double>({1});
    auto y = op::sep_conv3d<double>(nullptr, x, sw, sb, tw, tb, {}, {0, 1, 1}, {}, {1, 0, 0});
    CHECK(y->shape == Shape{1, 8, 8, 8});

    // identity kernels reproduce the input exactly
    auto isw = zeros<double>({1, 1, 1, 3, 3});
    isw->data[4] = 1.0;  // center of the 3x3
    auto itw = zeros<double>({1, 1, 3, 1, 1});
    itw->data[1] = 1.0;  // center of the k=3 temporal kernel
    auto id = op::sep_conv3d<double>(nullptr, x, isw, sb, itw, tb, {}, {0, 1, 1}, {}, {1, 0, 0});
    CHECK(id->data == x->data);

    // equals the two-step conv3d composition
    auto s1 = op::conv3d<double>(nullptr, x, sw, sb, {}, {0, 1, 1});
    auto s2 = op::conv3d<double>(nullptr, s1, tw, tb, {}, {1, 0, 0});
    CHECK(y->data == s2->data);
}

TEST_CASE("conv1d matches the direct-summation oracle") {
    Rng rng(77);
    auto x = random_tensor({2, 16}, rng);
    auto w = random_tensor({4, 2, 5}, rng);
    auto b = random_tensor({4}, rng);
    auto y = op::conv1d<double>(nullptr, x, w, b, 2, 2);
    auto ref = oracle::conv1d(x->data, 2, 16, w->data, 4, 5, b->data, 2, 2);
    REQUIRE(y->numel() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y->data[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("relu and maxpool3d basics") {
    auto x = make_tensor<double>({3}, {-1.0, 0.0, 2.0});
    auto y = op::relu<double>(nullptr, x);
    CHECK(y->data == std::vector<double>{0.0, 0.0, 2.0});

    auto p = make_tensor<double>({1, 2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    auto m = op::maxpool3d<double>(nullptr, p, {2, 2, 2}, {2, 2, 2});
    CHECK(m->shape == Shape{1, 1, 1, 1});
    CHECK(m->data[0] == 8.0);
}

TEST_CASE("trilinear upsample: constants, identity size, oracle values") {
    auto c = full<double>({2, 2, 3, 3}, 0.7);
    auto up = op::trilinear_upsample<double>(nullptr, c, {4, 6, 6});
    for (double v : up->data) CHECK(v == doctest::Approx(0.7).epsilon(1e-12));

    Rng rng(9);
    auto x = random_tensor({2, 3, 4, 5}, rng);
    auto same = op::trilinear_upsample<double>(nullptr, x, {3, 4, 5});
    CHECK(same->data == x->data);

    auto m = make_tensor<double>({1, 1, 2, 2}, {1, 2, 3, 4});
    auto big = op::trilinear_upsample<double>(nullptr, m, {1, 4, 4});
    for (std::size_t oh = 0; oh < 4; ++oh)
        for (std::size_t ow = 0; ow < 4; ++ow) {
            const double ref = oracle::trilinear_at(m->data, 0, 1, 2, 2, 0, oh, ow, 1, 4, 4);
            CHECK(big->data[oh * 4 + ow] == doctest::Approx(ref).epsilon(1e-12));
        }
}

TEST_CASE("trilinear x2 upsample preserves the global mean under area back-averaging") {
    Rng rng(21);
    auto x = random_tensor({1, 4, 8, 8}, rng, false, 0.0, 1.0);
    auto up = op::trilinear_upsample<double>(nullptr, x, {8, 16, 16});
    double mean_in = 0, mean_back = 0;
    for (double v : x->data) mean_in += v;
    mean_in /= x->numel();
    // average each 2x2x2 block back down
    for (std::size_t t = 0; t < 4; ++t)
        for (std::size_t h = 0; h < 8; ++h)
            for (std::size_t w = 0; w < 8; ++w) {
                double acc = 0;
                for (std::size_t dt = 0; dt < 2; ++dt)
                    for (std::size_t dh = 0; dh < 2; ++dh)
                        for (std::size_t dw = 0; dw < 2; ++dw)
                            acc += up->data[((2 * t + dt) * 16 + (2 * h + dh)) * 16 + (2 * w + dw)];
                mean_back += acc / 8.0;
            }
    mean_back /= x->numel();
    CHECK(mean_back == doctest::Approx(mean_in).epsilon(1e-5));
}

TEST_CASE("normalize_to_distribution") {
    auto u = full<double>({2, 2}, 1.0);
    auto n = op::normalize_to_distribution<double>(nullptr, u);
    for (double v : n->data) CHECK(v == doctest::Approx(0.25));

    auto one = make_tensor<double>({2, 2}, {2, 0, 0, 0});
    auto n1 = op::normalize_to_distribution<double>(nullptr, one);
    CHECK(n1->data[0] == 1.0);
    CHECK(n1->data[1] == 0.0);

    Rng rng(3);
    auto r = random_tensor({4, 4}, rng, false, 0.01, 1.0);
    auto nr = op::normalize_to_distribution<double>(nullptr, r);
    double s = 0;
    for (double v : nr->data) s += v;
    CHECK(std::abs(s - 1.0) < 1e-6);

    auto z = zeros<double>({2, 2});
    CHECK_THROWS_AS(op::normalize_to_distribution<double>(nullptr, z), ValueError);
    auto neg = make_tensor<double>({2}, {1.0, -0.5});
    CHECK_THROWS_AS(op::normalize_to_distribution<double>(nullptr, neg), ValueError);
}

TEST_CASE("kldiv hand values") {
    auto pu = full<double>({2, 2}, 0.25);
    auto qu = full<double>({2, 2}, 0.25);
    CHECK(std::abs(op::kldiv<double>(nullptr, pu, qu, 1e-8)->scalar()) < 1e-6);

    auto p = make_tensor<double>({2}, {0.9, 0.1});
    auto q = make_tensor<double>({2}, {0.5, 0.5});
    const double expected = 0.5 * std::log(5.0 / 9.0) + 0.5 * std::log(5.0);
    CHECK(op::kldiv<double>(nullptr, p, q, 1e-12)->scalar() == doctest::Approx(expected).epsilon(1e-4));
    CHECK(expected == doctest::Approx(0.5108).epsilon(1e-3));

    auto p4 = full<double>({4}, 0.25);
    auto q4 = make_tensor<double>({4}, {1.0, 0.0, 0.0, 0.0});
    CHECK(op::kldiv<double>(nullptr, p4, q4, 1e-12)->scalar() == doctest::Approx(std::log(4.0)).epsilon(1e-4));

    auto bad = make_tensor<double>({2}, {0.9, 0.9});
    CHECK_THROWS_AS(op::kldiv<double>(nullptr, bad, q, 1e-8), ValueError);
    CHECK_THROWS_AS(op::kldiv<double>(nullptr, p, q, 0.0), ValueError);
}

TEST_CASE("bilinear_form: scalar case, zero parameters, triple-loop oracle") {
    auto x1 = make_tensor<double>({1, 1}, {2.0});
    auto x2 = make_tensor<double>({1, 1}, {3.0});
    auto A = make_tensor<double>({1, 1, 1}, {0.5});
    auto b = make_tensor<double>({1}, {1.0});
    CHECK(op::bilinear_form<double>(nullptr, x1, A, x2, b)->data[0] == doctest::Approx(4.0));

    Rng rng(55);
    auto rx1 = random_tensor({2, 2}, rng);
    auto rx2 = random_tensor({2, 3}, rng);
    auto zA = zeros<double>({2, 2, 3});
    auto zb = zeros<double>({2});
    auto zy = op::bilinear_form<double>(nullptr, rx1, zA, rx2, zb);
    for (double v : zy->data) CHECK(v == 0.0);

    auto rA = random_tensor({2, 2, 3}, rng);
    auto rb = random_tensor({2}, rng);
    auto y = op::bilinear_form<double>(nullptr, rx1, rA, rx2, rb);
    auto ref = oracle::bilinear(rx1->data, rA->data, rx2->data, rb->data, 2, 2, 2, 3);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y->data[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("matmul matches naive multiplication and validates shapes") {
    Rng rng(8);
    auto a = random_tensor({3, 4}, rng);
    auto b = random_tensor({4, 2}, rng);
    auto y = op::matmul<double>(nullptr, a, b);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            double acc = 0;
            for (std::size_t p = 0; p < 4; ++p) acc += a->data[i * 4 + p] * b->data[p * 2 + j];
            CHECK(y->data[i * 2 + j] == doctest::Approx(acc).epsilon(1e-12));
        }
    auto bad = random_tensor({3, 2}, rng);
    CHECK_THROWS_AS(op::matmul<double>(nullptr, a, bad), ShapeError);
}

TEST_CASE("reductions and broadcast") {
    auto x = make_tensor<double>({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(op::sum<double>(nullptr, x)->scalar() == 21.0);
    CHECK(op::mean<double>(nullptr, x)->scalar() == doctest::Approx(3.5));

    auto s0 = op::sum_axes<double>(nullptr, x, {0}, true);
    CHECK(s0->shape == Shape{1, 3});
    CHECK(s0->data == std::vector<double>{5, 7, 9});

    auto m1 = op::mean_axes<double>(nullptr, x, {1}, false);
    CHECK(m1->shape == Shape{2});
    CHECK(m1->data[0] == doctest::Approx(2.0));
    CHECK(m1->data[1] == doctest::Approx(5.0));

    auto v = make_tensor<double>({2, 1, 1}, {1.0, 2.0});
    auto bc = op::broadcast_to<double>(nullptr, v, {2, 2, 3});
    CHECK(bc->shape == Shape{2, 2, 3});
    for (std::size_t i = 0; i < 6; ++i) CHECK(bc->data[i] == 1.0);
    for (std::size_t i = 6; i < 12; ++i) CHECK(bc->data[i] == 2.0);
    CHECK_THROWS_AS(op::broadcast_to<double>(nullptr, x, {2, 4}), ShapeError);
}

TEST_CASE("adaptive_maxpool1d bins cover the input") {
    auto x = make_tensor<double>({1, 7}, {0, 5, 1, 2, 9, 3, 4});
    auto y = op::adaptive_maxpool1d<double>(nullptr, x, 3);
    CHECK(y->shape == Shape{1, 3});
    // bins: [0,2) [2,4) [4,7)
    CHECK(y->data == std::vector<double>{5, 2, 9});
}

TEST_CASE("conv_transpose3d doubles spatial extent and is adjoint to conv3d") {
    Rng rng(14);
    auto x = random_tensor({3, 2, 4, 4}, rng);
    auto w = random_tensor({3, 2, 1, 2, 2}, rng);  // [C_in=3, C_out=2, k]
    auto y = op::conv_transpose3d<double>(nullptr, x, w, nullptr, {1, 2, 2}, {});
    CHECK(y->shape == Shape{2, 2, 8, 8});

    // Adjointness: <conv_t(x; W), g> == <x, conv(g; V)> where V reinterprets
    // W's [ci][co] leading axes as conv's [co][ci] -- same memory layout.
    auto g = random_tensor({2, 2, 8, 8}, rng);
    auto v = make_tensor<double>({3, 2, 1, 2, 2}, w->data);
    auto back = op::conv3d<double>(nullptr, g, v, nullptr, {1, 2, 2}, {});
    REQUIRE(back->shape == x->shape);

    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < y->numel(); ++i) lhs += y->data[i] * g->data[i];
    for (std::size_t i = 0; i < x->numel(); ++i) rhs += x->data[i] * back->data[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
}

TEST_CASE("tape: sum gives all-ones gradient, sum of squares gives 2x") {
    Rng rng(1);
    auto x = random_tensor({2, 3, 2}, rng, /*requires_grad=*/true);

    Tape<double> tape;
    auto loss = op::sum<double>(&tape, x);
    tape.backward(loss);
    for (double gv : x->grad) CHECK(gv == 1.0);

    x->zero_grad();
    Tape<double> tape2;
    auto loss2 = op::sum<double>(&tape2, op::mul<double>(&tape2, x, x));
    tape2.backward(loss2);
    for (std::size_t i = 0; i < x->numel(); ++i) {
        CHECK(x->grad[i] == doctest::Approx(2.0 * x->data[i]).epsilon(1e-12));
    }
}

TEST_CASE("tape misuse: double backward, non-scalar loss, empty tape") {
    Rng rng(2);
    auto x = random_tensor({2, 2}, rng, true);
    Tape<double> tape;
    auto y = op::mul_scalar<double>(&tape, x, 2.0);
    auto loss = op::sum<double>(&tape, y);
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), NumericError);
    tape.reset();
    CHECK_THROWS_AS(tape.backward(loss), NumericError);  // empty after reset

    Tape<double> tape2;
    auto y2 = op::mul_scalar<double>(&tape2, x, 2.0);
    CHECK_THROWS_AS(tape2.backward(y2), ShapeError);
}

TEST_CASE("maxpool gradient ties break to the lowest flat index") {
    auto x = full<double>({1, 1, 2, 2}, 3.0);
    x->requires_grad = true;
    Tape<double> tape;
    auto y = op::maxpool3d<double>(&tape, x, {1, 2, 2}, {1, 2, 2});
    auto loss = op::sum<double>(&tape, y);
    tape.backward(loss);
    CHECK(x->grad == std::vector<double>{1.0, 0.0, 0.0, 0.0});
}

TEST_CASE("gradient accumulates across multiple uses of a tensor") {
    auto x = full<double>({1}, 1.5);
    x->requires_grad = true;
    Tape<double> tape;
    auto y = op::add<double>(&tape, x, x);  // y = 2x
    auto loss = op::sum<double>(&tape, y);
    tape.backward(loss);
    CHECK(x->grad[0] == 2.0);
}
