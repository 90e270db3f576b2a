#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "vcformer/autodiff.hpp"
#include "vcformer/rng.hpp"

using namespace vcformer;

TEST_SUITE_BEGIN("autodiff");

namespace {

// Finite-difference check of a scalar builder over one named tensor.
double fd_worst(const std::function<Var(Tape&, const std::vector<Var>&)>& build,
                const std::vector<std::pair<std::string, Tensor>>& params) {
    return grad_check(build, params).worst;
}

} // namespace

TEST_CASE("sum of squares has gradient 2x") {
    Rng rng(1);
    Tensor x = Tensor::random_gaussian({3, 3}, rng);
    Tape t;
    Var vx = t.leaf(x, true);
    Var loss = ad::sum(t, ad::mul(t, vx, vx));
    t.backward(loss);
    Tensor g = t.grad(vx);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(g[i] == doctest::Approx(2.0 * x[i]).epsilon(1e-12));
}

TEST_CASE("disconnected leaf gets a zero gradient") {
    Tape t;
    Var a = t.leaf(Tensor({2}, {1, 2}), true);
    Var b = t.leaf(Tensor({2}, {3, 4}), true);
    Var loss = ad::sum(t, a);
    t.backward(loss);
    Tensor gb = t.grad(b);
    CHECK(gb[0] == 0.0);
    CHECK(gb[1] == 0.0);
}

TEST_CASE("fan-out accumulates additively") {
    Tape t;
    Var x = t.leaf(Tensor({3}, {1, 2, 3}), true);
    Var loss = ad::add(t, ad::sum(t, x), ad::sum(t, x));
    t.backward(loss);
    Tensor g = t.grad(x);
    for (std::size_t i = 0; i < 3; ++i) CHECK(g[i] == 2.0);
}

TEST_CASE("non-scalar loss is rejected") {
    Tape t;
    Var x = t.leaf(Tensor({2}, {1, 2}), true);
    CHECK_THROWS_AS(t.backward(x), ShapeError);
}

TEST_CASE("matmul gradient matches sum(A*B) analytics and finite differences") {
    Rng rng(2);
    Tensor a = Tensor::random_gaussian({2, 3}, rng);
    Tensor b = Tensor::random_gaussian({3, 4}, rng);
    Tape t;
    Var va = t.leaf(a, true);
    Var vb = t.leaf(b, true);
    t.backward(ad::sum(t, ad::matmul(t, va, vb)));
    // d/dA sum(AB) = ones * B^T
    Tensor expect = matmul(Tensor::full({2, 4}, 1.0), transpose(b));
    CHECK(oracle::max_abs_diff(t.grad(va), expect) < 1e-12);

    auto build = [](Tape& tp, const std::vector<Var>& vs) {
        return ad::sum(tp, ad::matmul(tp, vs[0], vs[1]));
    };
    CHECK(fd_worst(build, {{"a", a}, {"b", b}}) < 1e-7);
}

TEST_CASE("per-primitive finite-difference checks") {
    Rng rng(3);
    Tensor x = Tensor::random_gaussian({3, 4}, rng);
    Tensor y = Tensor::random_gaussian({3, 4}, rng);
    Tensor row = Tensor::random_gaussian({4}, rng);

    auto scalarize = [](Tape& tp, Var v) {
        // mix entries so every coordinate participates with distinct weight
        Tensor w = Tensor::zeros(tp.value(v).shape());
        std::vector<double> buf(w.size());
        for (std::size_t i = 0; i < buf.size(); ++i)
            buf[i] = 0.3 + 0.1 * static_cast<double>(i % 7);
        Var c = tp.constant(Tensor(tp.value(v).shape(), buf));
        return ad::sum(tp, ad::mul(tp, v, c));
    };

    SUBCASE("add/sub/mul/scalar") {
        auto build = [&](Tape& tp, const std::vector<Var>& vs) {
            Var z = ad::add(tp, vs[0], vs[1]);
            z = ad::sub(tp, z, ad::mul(tp, vs[0], vs[1]));
            z = ad::mul_scalar(tp, z, 1.7);
            z = ad::add_scalar(tp, z, -0.3);
            return scalarize(tp, z);
        };
        CHECK(fd_worst(build, {{"x", x}, {"y", y}}) < 1e-7);
    }
    SUBCASE("add_rowvec") {
        auto build = [&](Tape& tp, const std::vector<Var>& vs) {
            return scalarize(tp, ad::add_rowvec(tp, vs[0], vs[1]));
        };
        CHECK(fd_worst(build, {{"x", x}, {"row", row}}) < 1e-8);
    }
    SUBCASE("relu away from the kink") {
        Tensor safe = add_scalar(mul_scalar(relu(x), 0.5), 1.0);
        auto build = [&](Tape& tp, const std::vector<Var>& vs) {
            return scalarize(tp, ad::relu(tp, vs[0]));
        };
        CHECK(fd_worst(build, {{"x", safe}}) < 1e-8);
    }
    SUBCASE("gelu") {
        auto build = [&](Tape& tp, const std::vector<Var>& vs) {
            return scalarize(tp, ad::gelu(tp, vs[0]));
        };
        CHECK(fd_worst(build, {{"x", x}}) < 1e-7);
    }
    SUBCASE("mean") {
        auto build = [&](Tape& tp, const std::vector<Var>& vs) {
            return ad::mean(tp, ad::mul(tp, vs[0], vs[0]));
        };
        CHECK(fd_worst(build, {{"x", x}}) < 1e-8);
    }
    SUBCASE("transpose/reshape/roll") {
        auto build = [&](Tape& tp, const std::vector<Var>& vs) {
            Var z = ad::transpose(tp, vs[0]);
            z = ad::reshape(tp, z, {2, 6});
            z = ad::roll_last(tp, z, 4);
            return scalarize(tp, z);
        };
        CHECK(fd_worst(build, {{"x", x}}) < 1e-8);
    }
    SUBCASE("slice/concat") {
        auto build = [&](Tape& tp, const std::vector<Var>& vs) {
            Var a = ad::slice_cols(tp, vs[0], 0, 2);
            Var b = ad::slice_cols(tp, vs[0], 2, 4);
            Var z = ad::concat_cols(tp, {b, a});
            return scalarize(tp, z);
        };
        CHECK(fd_worst(build, {{"x", x}}) < 1e-8);
    }
    SUBCASE("softmax_rows") {
        auto build = [&](Tape& tp, const std::vector<Var>& vs) {
            return scalarize(tp, ad::softmax_rows(tp, vs[0]));
        };
        CHECK(fd_worst(build, {{"x", x}}) < 1e-6);
    }
    SUBCASE("layernorm") {
        Tensor gamma = Tensor::random_gaussian({4}, rng);
        Tensor beta = Tensor::random_gaussian({4}, rng);
        auto build = [&](Tape& tp, const std::vector<Var>& vs) {
            return scalarize(tp, ad::layernorm(tp, vs[0], vs[1], vs[2]));
        };
        CHECK(fd_worst(build, {{"x", x}, {"gamma", gamma}, {"beta", beta}}) < 1e-6);
    }
    SUBCASE("mse") {
        auto build = [&](Tape& tp, const std::vector<Var>& vs) {
            return ad::mse(tp, vs[0], vs[1]);
        };
        CHECK(fd_worst(build, {{"p", x}, {"t", y}}) < 1e-8);
    }
}

TEST_CASE("rfft and irfft adjoints verified numerically") {
    Rng rng(4);
    for (std::size_t len : {std::size_t(6), std::size_t(7), std::size_t(12)}) {
        Tensor x = Tensor::random_gaussian({2, len}, rng);
        auto build_fwd = [len](Tape& tp, const std::vector<Var>& vs) {
            Var spec = ad::rfft(tp, vs[0]);
            // weighted sum over interleaved components
            Tensor w = tp.value(spec);
            std::vector<double> buf(w.size());
            for (std::size_t i = 0; i < buf.size(); ++i)
                buf[i] = 0.2 + 0.05 * static_cast<double>(i % 11);
            return ad::sum(tp, ad::mul(tp, spec, tp.constant(Tensor(w.shape(), buf))));
        };
        CHECK(fd_worst(build_fwd, {{"x", x}}) < 1e-7);

        auto build_round = [len](Tape& tp, const std::vector<Var>& vs) {
            Var spec = ad::rfft(tp, vs[0]);
            Var back = ad::irfft(tp, spec, len);
            return ad::sum(tp, ad::mul(tp, back, back));
        };
        CHECK(fd_worst(build_round, {{"x", x}}) < 1e-7);
    }
}

TEST_CASE("cross_spectrum and lag_contract adjoints") {
    Rng rng(5);
    Tensor q = Tensor::random_gaussian({2, 8}, rng); // interleaved, 4 bins
    Tensor k = Tensor::random_gaussian({2, 8}, rng);
    auto build_cs = [](Tape& tp, const std::vector<Var>& vs) {
        Var z = ad::cross_spectrum(tp, vs[0], vs[1]);
        return ad::sum(tp, ad::mul(tp, z, z));
    };
    CHECK(fd_worst(build_cs, {{"q", q}, {"k", k}}) < 1e-7);

    Tensor r = Tensor::random_gaussian({2, 2, 5}, rng);
    Tensor w = Tensor::random_gaussian({5}, rng);
    auto build_lc = [](Tape& tp, const std::vector<Var>& vs) {
        Var z = ad::lag_contract(tp, vs[0], vs[1]);
        return ad::sum(tp, ad::mul(tp, z, z));
    };
    CHECK(fd_worst(build_lc, {{"r", r}, {"w", w}}) < 1e-7);
}

TEST_CASE("linear_solve solves and differentiates") {
    // identity system
    Tensor b({2, 2}, {1, 2, 3, 4});
    Tape t;
    Var x = ad::linear_solve(t, t.constant(Tensor::identity(2)), t.constant(b));
    CHECK(oracle::max_abs_diff(t.value(x), b) < 1e-14);

    // diagonal system solved by hand
    Tensor d({2, 2}, {2, 0, 0, 4});
    Tensor rhs({2, 1}, {2, 4});
    Tape t2;
    Var x2 = ad::linear_solve(t2, t2.constant(d), t2.constant(rhs));
    CHECK(t2.value(x2)[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(t2.value(x2)[1] == doctest::Approx(1.0).epsilon(1e-14));

    // gradient of sum(solve(A, B)) w.r.t. both on a random SPD 3x3
    Rng rng(6);
    Tensor m = Tensor::random_gaussian({3, 3}, rng);
    Tensor spd = add(matmul(m, transpose(m)), mul_scalar(Tensor::identity(3), 0.5));
    Tensor rhs3 = Tensor::random_gaussian({3, 2}, rng);
    auto build = [](Tape& tp, const std::vector<Var>& vs) {
        return ad::sum(tp, ad::linear_solve(tp, vs[0], vs[1]));
    };
    CHECK(fd_worst(build, {{"a", spd}, {"b", rhs3}}) < 1e-5);

    // residual contract: |A x - B| below 1e-9 relative
    Tensor sol = linear_solve(spd, rhs3);
    Tensor residual = sub(matmul(spd, sol), rhs3);
    double rel = 0.0;
    for (std::size_t i = 0; i < residual.size(); ++i)
        rel = std::max(rel, std::abs(residual[i]) / std::max(1.0, std::abs(rhs3[i])));
    CHECK(rel < 1e-9);
}

TEST_CASE("linear_solve reports the failing pivot on singular input") {
    Tensor singular({2, 2}, {1, 1, 1, 1});
    CHECK_THROWS_WITH_AS(linear_solve(singular, Tensor::zeros({2, 1})),
                         doctest::Contains("pivot"), NumericError);
}

TEST_CASE("psd_pinv_solve handles exactly singular Grams") {
    // rank-1 PSD matrix: A = c c^T with c = [1, 2]
    Tensor a({2, 2}, {1, 2, 2, 4});
    Tensor b({2, 1}, {1, 2}); // in range(A)
    Tensor x = psd_pinv_solve(a, b);
    // A x should reproduce b
    Tensor ax = matmul(a, x);
    CHECK(oracle::max_abs_diff(ax, b) < 1e-10);
}

TEST_CASE("gradient linearity") {
    Rng rng(8);
    Tensor x = Tensor::random_gaussian({4}, rng);
    double a = 1.3, b = -0.7;

    auto grad_of = [&](const std::function<Var(Tape&, Var)>& f) {
        Tape t;
        Var vx = t.leaf(x, true);
        t.backward(f(t, vx));
        return t.grad(vx);
    };
    auto f = [](Tape& t, Var v) { return ad::sum(t, ad::mul(t, v, v)); };
    auto g = [](Tape& t, Var v) { return ad::sum(t, ad::gelu(t, v)); };
    Tensor gf = grad_of(f);
    Tensor gg = grad_of(g);
    Tensor combined = grad_of([&](Tape& t, Var v) {
        return ad::add(t, ad::mul_scalar(t, f(t, v), a), ad::mul_scalar(t, g(t, v), b));
    });
    Tensor expect = add(mul_scalar(gf, a), mul_scalar(gg, b));
    CHECK(oracle::max_abs_diff(combined, expect) < 1e-10);
}

TEST_CASE("grad_check on a quadratic bowl is nearly exact") {
    Rng rng(9);
    // coordinates away from zero keep the relative error well defined
    Tensor x = Tensor::random_uniform({5}, rng, 0.5, 1.5);
    auto build = [](Tape& tp, const std::vector<Var>& vs) {
        return ad::sum(tp, ad::mul(tp, vs[0], vs[0]));
    };
    GradCheckReport report = grad_check(build, {{"x", x}});
    CHECK(report.worst < 1e-8);
    CHECK(report.passed(1e-8));
}

TEST_CASE("grad_check absolute fallback for zero/zero") {
    // loss ignores the parameter entirely: analytic and numeric both 0
    Tensor x = Tensor::zeros({3});
    auto build = [](Tape& tp, const std::vector<Var>& vs) {
        (void)vs;
        return ad::sum(tp, tp.constant(Tensor::scalar(1.0)));
    };
    GradCheckReport report = grad_check(build, {{"x", x}});
    CHECK(report.worst == 0.0);
}

TEST_SUITE_END();
