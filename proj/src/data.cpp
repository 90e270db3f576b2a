#include "vcformer/data.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include "vcformer/rng.hpp"

namespace vcformer {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

} // namespace

RawSeries load_csv(const std::string& path, bool has_timestamp_column) {
    std::ifstream in(path);
    if (!in) throw DataError("load_csv: cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw DataError("load_csv: '" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<std::string> header = split_fields(line);
    std::size_t skip = has_timestamp_column ? 1 : 0;
    if (header.size() <= skip) {
        throw DataError("load_csv: no feature columns in '" + path + "'");
    }
    RawSeries raw;
    raw.column_names.assign(header.begin() + skip, header.end());
    std::size_t n_cols = header.size();
    std::size_t n_feat = n_cols - skip;

    std::vector<double> buf;
    std::size_t file_row = 1;
    std::vector<double> row_vals(n_feat);
    while (std::getline(in, line)) {
        ++file_row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields = split_fields(line);
        if (fields.size() != n_cols) {
            throw DataError("load_csv: row " + std::to_string(file_row) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(n_cols));
        }
        bool has_nan = false;
        for (std::size_t c = 0; c < n_feat; ++c) {
            const std::string& cell = fields[c + skip];
            const char* begin = cell.c_str();
            char* end = nullptr;
            double v = std::strtod(begin, &end);
            while (end && *end == ' ') ++end;
            if (cell.empty() || end == begin || (end && *end != '\0')) {
                throw DataError("load_csv: unparseable cell '" + cell + "' at row " +
                                std::to_string(file_row) + ", column " +
                                std::to_string(c + skip + 1));
            }
            if (std::isnan(v)) has_nan = true;
            row_vals[c] = v;
        }
        if (has_nan) {
            ++raw.rows_rejected;
            continue;
        }
        buf.insert(buf.end(), row_vals.begin(), row_vals.end());
    }
    std::size_t rows = buf.size() / n_feat;
    if (rows == 0) throw DataError("load_csv: no data rows in '" + path + "'");
    raw.values = Tensor({rows, n_feat}, std::move(buf));
    return raw;
}

DatasetSplit split_normalize(const RawSeries& raw, std::array<double, 3> ratios) {
    double total = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(total - 1.0) > 1e-9) {
        throw ConfigError("split_normalize: ratios sum to " + std::to_string(total));
    }
    std::size_t rows = raw.values.extent(0), n = raw.values.extent(1);
    auto n_train = static_cast<std::size_t>(
        std::floor(static_cast<double>(rows) * ratios[0]));
    auto n_train_val = static_cast<std::size_t>(
        std::floor(static_cast<double>(rows) * (ratios[0] + ratios[1])));
    std::size_t n_val = n_train_val - n_train;
    std::size_t n_test = rows - n_train_val;
    if (n_train == 0 || n_val == 0 || n_test == 0) {
        throw ConfigError("split_normalize: empty split (" + std::to_string(n_train) +
                          "/" + std::to_string(n_val) + "/" + std::to_string(n_test) +
                          ")");
    }

    std::vector<double> mean(n, 0.0), stdev(n, 0.0);
    for (std::size_t i = 0; i < n_train; ++i)
        for (std::size_t c = 0; c < n; ++c) mean[c] += raw.values.at2(i, c);
    for (double& m : mean) m /= static_cast<double>(n_train);
    for (std::size_t i = 0; i < n_train; ++i)
        for (std::size_t c = 0; c < n; ++c) {
            double d = raw.values.at2(i, c) - mean[c];
            stdev[c] += d * d;
        }
    for (double& s : stdev)
        s = std::max(std::sqrt(s / static_cast<double>(n_train)), 1e-8);

    DatasetSplit split;
    split.ratios = ratios;
    split.mean = Tensor({n}, mean);
    split.stdev = Tensor({n}, stdev);

    auto zscore = [&](std::size_t r0, std::size_t r1) {
        std::vector<double> out((r1 - r0) * n);
        for (std::size_t i = r0; i < r1; ++i)
            for (std::size_t c = 0; c < n; ++c)
                out[(i - r0) * n + c] = (raw.values.at2(i, c) - mean[c]) / stdev[c];
        return Tensor({r1 - r0, n}, std::move(out));
    };
    split.train = zscore(0, n_train);
    split.val = zscore(n_train, n_train_val);
    split.test = zscore(n_train_val, rows);
    return split;
}

Tensor denormalize(const Tensor& normalized, const Tensor& mean, const Tensor& stdev) {
    std::size_t rows = normalized.extent(0), n = normalized.extent(1);
    std::vector<double> out(rows * n);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t c = 0; c < n; ++c)
            out[i * n + c] = normalized.at2(i, c) * stdev[c] + mean[c];
    return Tensor({rows, n}, std::move(out));
}

Tensor normalize_with(const Tensor& raw, const Tensor& mean, const Tensor& stdev) {
    std::size_t rows = raw.extent(0), n = raw.extent(1);
    std::vector<double> out(rows * n);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t c = 0; c < n; ++c)
            out[i * n + c] = (raw.at2(i, c) - mean[c]) / stdev[c];
    return Tensor({rows, n}, std::move(out));
}

WindowSampler::WindowSampler(Tensor source, std::size_t t_len, std::size_t horizon,
                             std::size_t stride)
    : source_(std::move(source)), t_len_(t_len), horizon_(horizon),
      stride_(stride == 0 ? 1 : stride) {
    std::size_t rows = source_.extent(0);
    if (rows < t_len_ + horizon_) {
        count_ = 0;
    } else {
        count_ = (rows - t_len_ - horizon_) / stride_ + 1;
    }
}

std::pair<Tensor, Tensor> WindowSampler::window(std::size_t index) const {
    if (index >= count_) {
        throw ConfigError("WindowSampler: index " + std::to_string(index) +
                          " out of range (" + std::to_string(count_) + " windows)");
    }
    std::size_t s = index * stride_;
    return {slice_rows(source_, s, s + t_len_),
            slice_rows(source_, s + t_len_, s + t_len_ + horizon_)};
}

std::vector<std::size_t> WindowSampler::order_sequential() const {
    std::vector<std::size_t> order(count_);
    std::iota(order.begin(), order.end(), std::size_t(0));
    return order;
}

std::vector<std::size_t> WindowSampler::order_shuffled(std::uint64_t seed) const {
    std::vector<std::size_t> order = order_sequential();
    Rng rng(seed);
    rng.shuffle(order);
    return order;
}

Metrics metrics(const Tensor& pred, const Tensor& target) {
    MetricsAccumulator acc;
    acc.add(pred, target);
    return acc.result();
}

void MetricsAccumulator::add(const Tensor& pred, const Tensor& target) {
    if (!pred.same_shape(target)) {
        throw ShapeError("metrics: shape mismatch " + pred.shape_str() + " vs " +
                         target.shape_str());
    }
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = pred[i] - target[i];
        se_ += d * d;
        ae_ += std::abs(d);
    }
    entries_ += pred.size();
    ++windows_;
}

Metrics MetricsAccumulator::result() const {
    if (entries_ == 0) return {};
    double n = static_cast<double>(entries_);
    return {se_ / n, ae_ / n};
}

// ============================================================================
// Synthetic generator
// ============================================================================

namespace {

// Sum of three sinusoids with random periods, phases and amplitudes.
// Evaluated analytically so delayed copies exist for any t.
struct SmoothSignal {
    std::array<double, 3> amp{}, freq{}, phase{};

    static SmoothSignal draw(Rng& rng, double amp_lo, double amp_hi) {
        SmoothSignal s;
        for (int k = 0; k < 3; ++k) {
            // periods log-uniform in [16, 256] samples
            double log_p = rng.uniform(std::log(16.0), std::log(256.0));
            s.freq[k] = 2.0 * 3.14159265358979323846 / std::exp(log_p);
            s.phase[k] = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
            s.amp[k] = rng.uniform(amp_lo, amp_hi);
        }
        return s;
    }

    double at(double t) const {
        double v = 0.0;
        for (int k = 0; k < 3; ++k) v += amp[k] * std::sin(freq[k] * t + phase[k]);
        return v;
    }
};

} // namespace

RawSeries synth_lagged(std::size_t n, std::size_t timesteps, std::size_t lag,
                       double coupling, double noise_sigma, std::uint64_t seed,
                       double indep_scale, SynthMeta* meta) {
    if (n == 0 || timesteps == 0) {
        throw ConfigError("synth_lagged: n and timesteps must be positive");
    }
    if (n > 1 && lag * (n - 1) >= timesteps) {
        throw ConfigError("synth_lagged: total shift " + std::to_string(lag * (n - 1)) +
                          " exceeds series length " + std::to_string(timesteps));
    }
    Rng rng(seed);
    SmoothSignal base = SmoothSignal::draw(rng, 0.5, 1.0);
    std::vector<SmoothSignal> indep;
    indep.reserve(n);
    for (std::size_t c = 0; c < n; ++c)
        indep.push_back(SmoothSignal::draw(rng, 0.15, 0.35));

    std::vector<double> buf(timesteps * n);
    for (std::size_t t = 0; t < timesteps; ++t) {
        double tt = static_cast<double>(t);
        buf[t * n] = base.at(tt);
        for (std::size_t c = 1; c < n; ++c) {
            double delayed = base.at(tt - static_cast<double>(c * lag));
            buf[t * n + c] = coupling * delayed + indep_scale * indep[c].at(tt) +
                             noise_sigma * rng.gaussian();
        }
    }

    RawSeries raw;
    raw.values = Tensor({timesteps, n}, std::move(buf));
    raw.column_names.reserve(n);
    for (std::size_t c = 0; c < n; ++c) raw.column_names.push_back("ch" + std::to_string(c));
    if (meta) {
        *meta = {n, timesteps, lag, coupling, noise_sigma, indep_scale, seed};
    }
    return raw;
}

Tensor pearson_map(const Tensor& series, std::size_t* zero_variance_channels) {
    if (series.rank() != 2) {
        throw ShapeError("pearson_map: need rank 2, got " + series.shape_str());
    }
    std::size_t rows = series.extent(0), n = series.extent(1);
    std::vector<double> mean(n, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t c = 0; c < n; ++c) mean[c] += series.at2(i, c);
    for (double& m : mean) m /= static_cast<double>(rows);

    std::vector<double> ss(n, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t c = 0; c < n; ++c) {
            double d = series.at2(i, c) - mean[c];
            ss[c] += d * d;
        }
    std::size_t degenerate = 0;
    std::vector<bool> flat(n, false);
    for (std::size_t c = 0; c < n; ++c) {
        if (ss[c] <= 0.0) {
            flat[c] = true;
            ++degenerate;
        }
    }
    if (zero_variance_channels) *zero_variance_channels = degenerate;

    std::vector<double> out(n * n, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            if (flat[a] || flat[b]) continue; // defined as 0
            double cov = 0.0;
            for (std::size_t i = 0; i < rows; ++i)
                cov += (series.at2(i, a) - mean[a]) * (series.at2(i, b) - mean[b]);
            out[a * n + b] = cov / (std::sqrt(ss[a]) * std::sqrt(ss[b]));
        }
    }
    return Tensor({n, n}, std::move(out));
}

} // namespace vcformer
