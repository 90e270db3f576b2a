#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace vcformer::fft {

/**
 * In-place complex FFT of arbitrary length. Power-of-two lengths use an
 * iterative radix-2 kernel; every other length goes through Bluestein's
 * chirp-z algorithm (the paper-facing call sites need lengths like 37 and
 * 96 exactly -- padding is not an option for circular correlation).
 *
 * Forward: X_k = sum_t x_t exp(-2*pi*i*k*t/n). Inverse includes the 1/n.
 */
void transform(std::complex<double>* data, std::size_t n, bool inverse);

void transform(std::vector<std::complex<double>>& data, bool inverse);

} // namespace vcformer::fft
