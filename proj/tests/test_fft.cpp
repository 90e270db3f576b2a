#include <doctest.h>

#include <cmath>
#include <complex>

#include "oracles.hpp"
#include "vcformer/fft.hpp"
#include "vcformer/rng.hpp"
#include "vcformer/tensor.hpp"

using namespace vcformer;

TEST_SUITE_BEGIN("fft");

TEST_CASE("impulse and DC spectra") {
    ComplexTensor delta = rfft_last_axis(Tensor({4}, {1, 0, 0, 0}));
    CHECK(delta.shape().back() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(delta.re(k) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(std::abs(delta.im(k)) < 1e-14);
    }

    double c = 2.5;
    ComplexTensor dc = rfft_last_axis(Tensor({4}, {c, c, c, c}));
    CHECK(dc.re(0) == doctest::Approx(4 * c).epsilon(1e-14));
    for (std::size_t k = 1; k < 3; ++k) {
        CHECK(std::abs(dc.re(k)) < 1e-12);
        CHECK(std::abs(dc.im(k)) < 1e-12);
    }
}

TEST_CASE("matches the naive DFT for awkward lengths") {
    Rng rng(42);
    for (std::size_t n : {std::size_t(3), std::size_t(5), std::size_t(37),
                          std::size_t(96)}) {
        std::vector<double> x(n);
        for (double& v : x) v = rng.gaussian();
        auto ref = oracle::naive_dft(x);
        ComplexTensor got = rfft_last_axis(Tensor({n}, x));
        for (std::size_t k = 0; k < n / 2 + 1; ++k) {
            CHECK(std::abs(got.re(k) - ref[k].real()) < 1e-10);
            CHECK(std::abs(got.im(k) - ref[k].imag()) < 1e-10);
        }
    }
}

TEST_CASE("round trip identity across lengths") {
    Rng rng(9);
    for (std::size_t n : {std::size_t(1), std::size_t(2), std::size_t(3),
                          std::size_t(4), std::size_t(5), std::size_t(6),
                          std::size_t(7), std::size_t(8), std::size_t(37),
                          std::size_t(96), std::size_t(128)}) {
        std::vector<double> x(n);
        for (double& v : x) v = rng.gaussian();
        Tensor t({n}, x);
        Tensor rt = irfft_last_axis(rfft_last_axis(t), n);
        CHECK(oracle::max_abs_diff(t, rt) < 1e-10);
    }
}

TEST_CASE("multi-row transform handles each row independently") {
    Rng rng(20);
    Tensor x = Tensor::random_gaussian({3, 37}, rng);
    ComplexTensor spec = rfft_last_axis(x);
    Tensor back = irfft_last_axis(spec, 37);
    CHECK(back.same_shape(x));
    CHECK(oracle::max_abs_diff(back, x) < 1e-10);

    // row 1 of the batch equals a standalone transform of that row
    std::vector<double> row(x.data() + 37, x.data() + 74);
    ComplexTensor single = rfft_last_axis(Tensor({std::size_t(37)}, row));
    std::size_t bins = 37 / 2 + 1;
    for (std::size_t k = 0; k < bins; ++k) {
        CHECK(spec.re(bins + k) == doctest::Approx(single.re(k)).epsilon(1e-13));
        CHECK(spec.im(bins + k) == doctest::Approx(single.im(k)).epsilon(1e-13));
    }
}

TEST_CASE("complex transform inverse matches forward") {
    Rng rng(77);
    for (std::size_t n : {std::size_t(12), std::size_t(31), std::size_t(64)}) {
        std::vector<std::complex<double>> x(n), orig;
        for (auto& v : x) v = {rng.gaussian(), rng.gaussian()};
        orig = x;
        fft::transform(x, false);
        fft::transform(x, true);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::abs(x[i].real() - orig[i].real()) < 1e-10);
            CHECK(std::abs(x[i].imag() - orig[i].imag()) < 1e-10);
        }
    }
}

TEST_SUITE_END();
