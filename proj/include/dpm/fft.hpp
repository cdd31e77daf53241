#pragma once

#include <complex>
#include <vector>

namespace dpm {

/// In-place radix-2 FFT, unnormalized, e^{-i 2 pi jk / n} convention.
/// n must be a power of two.
void fft(std::vector<std::complex<double>>& a);

/// Inverse transform including the 1/n factor.
void ifft(std::vector<std::complex<double>>& a);

}  // namespace dpm
