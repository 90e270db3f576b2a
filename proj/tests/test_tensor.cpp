#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "vcformer/rng.hpp"
#include "vcformer/tensor.hpp"

using namespace vcformer;

TEST_SUITE_BEGIN("tensor");

TEST_CASE("construction enforces shape/data agreement") {
    CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5, 0.0)), ShapeError);
    Tensor t({2, 3}, std::vector<double>(6, 1.5));
    CHECK(t.size() == 6);
    CHECK(t.at2(1, 2) == 1.5);
}

TEST_CASE("f32 tag rounds storage through float") {
    double v = 0.1; // not representable in f32
    Tensor t({1}, {v}, DType::F32);
    CHECK(t[0] == static_cast<double>(static_cast<float>(v)));
    CHECK(t[0] != v);
}

TEST_CASE("matmul identity and annihilator") {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor i2 = Tensor::identity(2);
    Tensor prod = matmul(i2, a);
    for (std::size_t k = 0; k < 4; ++k) CHECK(prod[k] == a[k]);

    Tensor z = matmul(Tensor::zeros({2, 3}), Tensor::full({3, 2}, 7.0));
    for (std::size_t k = 0; k < 4; ++k) CHECK(z[k] == 0.0);
}

TEST_CASE("matmul small case against triple-loop oracle") {
    Tensor a({1, 2}, {1, 2});
    Tensor b({2, 1}, {3, 4});
    Tensor c = matmul(a, b);
    CHECK(c.size() == 1);
    CHECK(c[0] == doctest::Approx(11.0).epsilon(1e-14));

    Rng rng(7);
    Tensor x = Tensor::random_gaussian({5, 4}, rng);
    Tensor y = Tensor::random_gaussian({4, 6}, rng);
    CHECK(oracle::max_abs_diff(matmul(x, y), oracle::naive_matmul(x, y)) < 1e-12);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Tensor a({2, 3}, std::vector<double>(6, 0.0));
    Tensor b({4, 2}, std::vector<double>(8, 0.0));
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2x3]"), ShapeError);
}

TEST_CASE("matmul associativity on random triples") {
    Rng rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor a = Tensor::random_gaussian({3, 4}, rng);
        Tensor b = Tensor::random_gaussian({4, 5}, rng);
        Tensor c = Tensor::random_gaussian({5, 2}, rng);
        Tensor left = matmul(matmul(a, b), c);
        Tensor right = matmul(a, matmul(b, c));
        for (std::size_t i = 0; i < left.size(); ++i) {
            double denom = std::max({std::abs(left[i]), std::abs(right[i]), 1.0});
            CHECK(std::abs(left[i] - right[i]) / denom < 1e-9);
        }
    }
}

TEST_CASE("softmax uniform and shifted rows") {
    Tensor u = softmax_rows(Tensor({1, 3}, {0, 0, 0}));
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(u[j] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

    Tensor big = softmax_rows(Tensor({1, 2}, {1000, 1000}));
    CHECK(big[0] == doctest::Approx(0.5).epsilon(1e-14));

    Tensor t = softmax_rows(Tensor({1, 2}, {0.0, std::log(3.0)}));
    CHECK(t[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(t[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one and are shift invariant") {
    Rng rng(3);
    Tensor x = Tensor::random_gaussian({6, 9}, rng);
    Tensor y = softmax_rows(x);
    for (std::size_t i = 0; i < 6; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 9; ++j) s += y.at2(i, j);
        CHECK(std::abs(s - 1.0) < 1e-12);
    }
    Tensor shifted = softmax_rows(add_scalar(x, 4.2));
    CHECK(oracle::max_abs_diff(y, shifted) < 1e-12);
}

TEST_CASE("softmax rejects NaN input") {
    Tensor bad({1, 2}, {0.0, std::nan("")});
    CHECK_THROWS_AS(softmax_rows(bad), NumericError);
}

TEST_CASE("layernorm matches the direct mean/variance formula") {
    Tensor gamma = Tensor::full({3}, 1.0);
    Tensor beta = Tensor::zeros({3});
    Tensor y = layernorm(Tensor({1, 3}, {1, 2, 3}), gamma, beta, 1e-14);
    double r = std::sqrt(1.5);
    CHECK(y[0] == doctest::Approx(-r).epsilon(1e-6));
    CHECK(y[1] == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(y[2] == doctest::Approx(r).epsilon(1e-6));

    // constant row: eps floors the variance, output is beta
    Tensor c = layernorm(Tensor({1, 3}, {5, 5, 5}), gamma, beta);
    for (std::size_t j = 0; j < 3; ++j) CHECK(c[j] == 0.0);

    // gamma = 0 collapses to broadcast beta
    Tensor z = layernorm(Tensor({1, 3}, {1, 2, 3}), Tensor::zeros({3}),
                         Tensor({3}, {7, 8, 9}));
    CHECK(z[0] == 7.0);
    CHECK(z[2] == 9.0);
}

TEST_CASE("layernorm row statistics before affine") {
    Rng rng(5);
    Tensor x = Tensor::random_gaussian({4, 16}, rng);
    Tensor y = layernorm(x, Tensor::full({16}, 1.0), Tensor::zeros({16}), 1e-12);
    for (std::size_t i = 0; i < 4; ++i) {
        double mu = 0.0, var = 0.0;
        for (std::size_t j = 0; j < 16; ++j) mu += y.at2(i, j);
        mu /= 16.0;
        for (std::size_t j = 0; j < 16; ++j)
            var += (y.at2(i, j) - mu) * (y.at2(i, j) - mu);
        var /= 16.0;
        CHECK(std::abs(mu) < 1e-6);
        CHECK(std::abs(var - 1.0) < 1e-6);
    }
}

TEST_CASE("roll definition, periodicity, composition") {
    Tensor v({4}, {1, 2, 3, 4});
    Tensor r1 = roll_last_axis(v, 1);
    CHECK(r1[0] == 4.0);
    CHECK(r1[1] == 1.0);
    CHECK(r1[2] == 2.0);
    CHECK(r1[3] == 3.0);

    CHECK(oracle::max_abs_diff(roll_last_axis(v, 0), v) == 0.0);
    CHECK(oracle::max_abs_diff(roll_last_axis(v, 4), v) == 0.0);

    Rng rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor x = Tensor::random_gaussian({7}, rng);
        auto a = static_cast<std::int64_t>(rng.index(20)) - 10;
        auto b = static_cast<std::int64_t>(rng.index(20)) - 10;
        CHECK(oracle::max_abs_diff(roll_last_axis(roll_last_axis(x, a), b),
                                   roll_last_axis(x, a + b)) == 0.0);
        // bijection preserves the multiset, so the sum is exact
        CHECK(sum(roll_last_axis(x, a)) == doctest::Approx(sum(x)).epsilon(1e-12));
    }
}

TEST_CASE("elementwise ops and reductions") {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2, 2}, {5, 6, 7, 8});
    CHECK(add(a, b)[3] == 12.0);
    CHECK(sub(b, a)[0] == 4.0);
    CHECK(mul(a, b)[2] == 21.0);
    CHECK(sum(a) == 10.0);
    CHECK(mean(a) == 2.5);
    CHECK_THROWS_AS(add(a, Tensor::zeros({3})), ShapeError);

    Tensor rv = add_rowvec(a, Tensor({2}, {10, 20}));
    CHECK(rv.at2(0, 0) == 11.0);
    CHECK(rv.at2(1, 1) == 24.0);

    CHECK(relu(Tensor({2}, {-1, 2}))[0] == 0.0);
    CHECK(gelu(Tensor({1}, {0.0}))[0] == 0.0);
    // gelu(x) -> x for large x, -> 0 for very negative x
    CHECK(gelu(Tensor({1}, {10.0}))[0] == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(std::abs(gelu(Tensor({1}, {-10.0}))[0]) < 1e-12);
}

TEST_CASE("row-parallel kernels are bit-identical across thread counts") {
    Rng rng(99);
    Tensor a = Tensor::random_gaussian({33, 24}, rng);
    Tensor b = Tensor::random_gaussian({24, 17}, rng);
    Tensor sig = Tensor::random_gaussian({9, 37}, rng);

    Tensor mm1 = matmul(a, b);
    Tensor fft1 = irfft_last_axis(rfft_last_axis(sig), 37);
    set_num_threads(3);
    Tensor mm3 = matmul(a, b);
    Tensor fft3 = irfft_last_axis(rfft_last_axis(sig), 37);
    set_num_threads(1);

    CHECK(num_threads() == 1);
    CHECK(oracle::max_abs_diff(mm1, mm3) == 0.0);
    CHECK(oracle::max_abs_diff(fft1, fft3) == 0.0);
}

TEST_CASE("transpose, reshape, slices, concat") {
    Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor at = transpose(a);
    CHECK(at.extent(0) == 3);
    CHECK(at.at2(2, 1) == 6.0);

    Tensor r = reshape(a, {3, 2});
    CHECK(r.at2(2, 1) == 6.0);
    CHECK_THROWS_AS(reshape(a, {4, 2}), ShapeError);

    Tensor c = slice_cols(a, 1, 3);
    CHECK(c.at2(0, 0) == 2.0);
    CHECK(c.at2(1, 1) == 6.0);

    Tensor back = concat_cols({slice_cols(a, 0, 1), slice_cols(a, 1, 3)});
    CHECK(oracle::max_abs_diff(back, a) == 0.0);

    Tensor rows = slice_rows(a, 1, 2);
    CHECK(rows.extent(0) == 1);
    CHECK(rows.at2(0, 2) == 6.0);
}

TEST_SUITE_END();
