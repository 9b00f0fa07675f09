#pragma once

#include <complex>
#include <span>
#include <vector>

namespace ambiroom::fft {

using cplx = std::complex<double>;

// In-place DFT, length must be a power of two. inverse=true applies the
// conjugate transform and the 1/N scale.
void fft_pow2(std::vector<cplx>& a, bool inverse);

// DFT of arbitrary length (Bluestein for non power-of-two sizes).
// Forward transform is unnormalized; inverse includes the 1/N scale.
std::vector<cplx> fft(const std::vector<cplx>& a, bool inverse = false);

// One-sided DFT of a real sequence: bins 0 .. floor(N/2). Bin 0 (and the
// Nyquist bin for even N) are computed as plain real sums, so their
// imaginary parts are exactly zero.
std::vector<cplx> rfft_onesided(std::span<const double> x);

// Full linear convolution (length |a| + |b| - 1) via zero-padded FFT.
std::vector<double> convolve_real(std::span<const double> a, std::span<const double> b);

std::size_t next_pow2(std::size_t n);

}  // namespace ambiroom::fft
