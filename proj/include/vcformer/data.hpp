#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vcformer/tensor.hpp"

namespace vcformer {

/** A loaded multivariate series: [timesteps x N], NaN rows already dropped. */
struct RawSeries {
    Tensor values;
    std::vector<std::string> column_names;
    std::size_t rows_rejected = 0; // rows dropped for NaN cells
};

/**
 * Parses a UTF-8 CSV with a header row. When has_timestamp_column is set the
 * first column is dropped from the features. Ragged rows and unparseable
 * cells fail with row/column coordinates; rows containing NaN are rejected
 * and counted.
 */
RawSeries load_csv(const std::string& path, bool has_timestamp_column);

struct DatasetSplit {
    Tensor train, val, test;       // z-scored by the TRAIN statistics
    Tensor mean, stdev;            // per channel, computed on train only
    std::array<double, 3> ratios{};
};

/**
 * Contiguous, ordered split (train before val before test) with boundaries
 * floored on cumulative ratios; leftover rows land in test. Channels are
 * z-scored using train-split statistics only (std floored at 1e-8).
 */
DatasetSplit split_normalize(const RawSeries& raw, std::array<double, 3> ratios);

/** Maps a normalized matrix back to raw scale with the stored train stats. */
Tensor denormalize(const Tensor& normalized, const Tensor& mean, const Tensor& stdev);
Tensor normalize_with(const Tensor& raw, const Tensor& mean, const Tensor& stdev);

/**
 * Sliding (input, target) windows over one split: input = rows [s, s+T),
 * target = rows [s+T, s+T+H), stride over s.
 */
class WindowSampler {
public:
    WindowSampler(Tensor source, std::size_t t_len, std::size_t horizon,
                  std::size_t stride = 1);

    std::size_t count() const { return count_; }
    std::pair<Tensor, Tensor> window(std::size_t index) const;
    // Sequential starts, or a seeded permutation of them.
    std::vector<std::size_t> order_sequential() const;
    std::vector<std::size_t> order_shuffled(std::uint64_t seed) const;

private:
    Tensor source_;
    std::size_t t_len_, horizon_, stride_, count_;
};

struct Metrics {
    double mse = 0.0;
    double mae = 0.0;
};

/** Means over all entries of one prediction/target pair. */
Metrics metrics(const Tensor& pred, const Tensor& target);

/** Accumulator for window-by-window evaluation. */
class MetricsAccumulator {
public:
    void add(const Tensor& pred, const Tensor& target);
    Metrics result() const;
    std::size_t windows() const { return windows_; }

private:
    double se_ = 0.0, ae_ = 0.0;
    std::size_t entries_ = 0, windows_ = 0;
};

// ============================================================================
// Synthetic lag-coupled generator
// ============================================================================

struct SynthMeta {
    std::size_t n = 0;
    std::size_t timesteps = 0;
    std::size_t lag = 0;
    double coupling = 0.0;
    double noise_sigma = 0.0;
    double indep_scale = 1.0;
    std::uint64_t seed = 0;
};

/**
 * Channel 0 is a smooth sum of three random sinusoids; channel j > 0 is
 * coupling * (channel 0 delayed by j*lag) plus an independent smooth
 * component (scaled by indep_scale) plus Gaussian noise. The delayed copies
 * are evaluated analytically, so every channel is defined from t = 0.
 * Deterministic for a fixed seed.
 */
RawSeries synth_lagged(std::size_t n, std::size_t timesteps, std::size_t lag,
                       double coupling, double noise_sigma, std::uint64_t seed,
                       double indep_scale = 1.0, SynthMeta* meta = nullptr);

/**
 * Pearson correlation between every pair of channels of a [rows x N] matrix.
 * Pairs involving a zero-variance channel are defined as 0; the count of
 * such channels is reported through zero_variance_channels when non-null.
 */
Tensor pearson_map(const Tensor& series, std::size_t* zero_variance_channels = nullptr);

} // namespace vcformer
