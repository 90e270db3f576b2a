#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vcformer/autodiff.hpp"
#include "vcformer/tensor.hpp"

namespace vcformer {

/**
 * Lagged circular cross-correlation between every query/key row pair.
 *
 * For Q, K of shape [N x L], the result has shape [N x N x L] with
 *
 *   R(i, j, tau) = (1/L) * sum_t Q[i, t] * K[j, (t - tau) mod L]
 *
 * for tau = 1..L stored at index tau - 1. Lag L wraps all the way around,
 * so R(i, j, L) recovers the plain zero-shift dot product. The 1/L factor
 * keeps magnitudes length-independent: standardized rows (zero mean, unit
 * mean square) give |R| <= 1.
 */

// Reference path: explicit circular shifts of K, one matmul per lag.
Tensor lagged_corr_naive(const Tensor& q, const Tensor& k);

// Fast path: per-row spectra, conjugate products per pair, inverse
// transform. Agrees with the naive path to ~1e-12 at 64-bit; the lag axis
// is the exact series length (no padding), so the circular semantics match.
Tensor lagged_corr_fft(const Tensor& q, const Tensor& k);

// COR(i, j) = sum_tau lambda[tau] * R(i, j, tau).
Tensor aggregate_scores(const Tensor& r, const Tensor& lambda);

/** Learnable per-lag aggregation weights, shared across all (i, j) pairs. */
struct LagWeights {
    Tensor lambda;
    static LagWeights uniform(std::size_t lag_len) {
        return {Tensor::full({lag_len}, 1.0 / static_cast<double>(lag_len))};
    }
};

namespace ad {

// Differentiable fast path, composed from rfft / cross_spectrum / irfft /
// roll, so each piece carries its own tested adjoint.
Var lagged_corr_fft(Tape& t, Var q, Var k);

inline Var aggregate_scores(Tape& t, Var r, Var lambda) {
    return lag_contract(t, r, lambda);
}

} // namespace ad

// ============================================================================
// Benchmark
// ============================================================================

struct BenchRow {
    std::size_t n = 0;
    std::size_t len = 0;
    std::int64_t naive_ns = 0;
    std::int64_t fft_ns = 0;
};

/**
 * Times both paths over the given (n, len) sizes. Each run cross-checks the
 * two results against each other and throws NumericError on disagreement,
 * so a reported speedup is always a speedup of a correct kernel.
 */
std::vector<BenchRow> bench_lagcorr(const std::vector<std::pair<std::size_t, std::size_t>>& sizes,
                                    std::uint64_t seed = 0);

// Header `n,len,naive_ns,fft_ns` plus one row per entry.
std::string bench_csv(const std::vector<BenchRow>& rows);

} // namespace vcformer
