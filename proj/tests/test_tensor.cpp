#include <vector>

#include "doctest.h"
#include "vsal/ops.hpp"
#include "vsal/rng.hpp"
#include "vsal/tensor.hpp"

using namespace vsal;

TEST_CASE("tensor shape/data invariant is enforced") {
    CHECK_NOTHROW(Tensor<float>({2, 3}, std::vector<float>(6, 0.f)));
    CHECK_THROWS_AS(Tensor<float>({2, 3}, std::vector<float>(5, 0.f)), ShapeError);
    CHECK_THROWS_AS(Tensor<float>({2, 0}, std::vector<float>(0)), ShapeError);
    CHECK_THROWS_AS(Tensor<float>({}, std::vector<float>(1, 0.f)), ShapeError);
}

TEST_CASE("scalar accessor requires a single element") {
    auto s = full<double>({1}, 7.0);
    CHECK(s->scalar() == 7.0);
    auto m = zeros<double>({2, 2});
    CHECK_THROWS_AS(m->scalar(), ShapeError);
}

TEST_CASE("grad buffer matches data extent and zeroes correctly") {
    auto t = zeros<float>({3, 4}, /*requires_grad=*/true);
    CHECK(t->grad.empty());
    t->ensure_grad();
    CHECK(t->grad.size() == t->numel());
    t->grad[5] = 2.f;
    t->zero_grad();
    CHECK(t->grad[5] == 0.f);
}

TEST_CASE("check_finite flags NaN and Inf") {
    auto t = full<float>({2}, 1.f);
    CHECK_NOTHROW(t->check_finite("test"));
    t->data[1] = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(t->check_finite("test"), NumericError);
}

TEST_CASE("concat then split recovers operands bit-exactly") {
    Rng rng(42);
    for (std::size_t axis = 0; axis < 3; ++axis) {
        Shape sa = {2, 3, 4}, sb = {2, 3, 4};
        sa[axis] = 2;
        sb[axis] = 5;
        auto a = zeros<double>(sa);
        auto b = zeros<double>(sb);
        for (auto& v : a->data) v = rng.uniform(-1, 1);
        for (auto& v : b->data) v = rng.uniform(-1, 1);

        auto joined = ops::concat<double>(nullptr, {a, b}, axis);
        auto parts = split(*joined, axis, {sa[axis], sb[axis]});
        REQUIRE(parts.size() == 2);
        CHECK(parts[0]->shape == a->shape);
        CHECK(parts[1]->shape == b->shape);
        CHECK(parts[0]->data == a->data);
        CHECK(parts[1]->data == b->data);
    }
}

TEST_CASE("concat shape arithmetic: two 2x3 on axis 0 gives 4x3") {
    auto a = full<float>({2, 3}, 1.f);
    auto b = full<float>({2, 3}, 2.f);
    auto c = ops::concat<float>(nullptr, {a, b}, 0);
    CHECK(c->shape == Shape{4, 3});
    CHECK(c->data[0] == 1.f);
    CHECK(c->data[11] == 2.f);
}

TEST_CASE("split validates sizes and axis") {
    auto t = zeros<float>({4, 2});
    CHECK_THROWS_AS(split(*t, 2, {2, 2}), ShapeError);
    CHECK_THROWS_AS(split(*t, 0, {1, 2}), ShapeError);
}

TEST_CASE("cast converts between precisions") {
    auto f = full<float>({3}, 1.5f);
    auto d = cast<float, double>(*f);
    CHECK(d->data[0] == 1.5);
    CHECK(d->shape == f->shape);
}
