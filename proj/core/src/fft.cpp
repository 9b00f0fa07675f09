#include "ambiroom/fft.hpp"

#include <cmath>
#include <cstddef>

#include "ambiroom/error.hpp"

namespace ambiroom::fft {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

void fft_pow2(std::vector<cplx>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n <= 1) return;
    if (!is_pow2(n)) fail_numeric("fft_pow2: length is not a power of two");

    // Bit-reversal permutation.
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * kPi / static_cast<double>(len);
        const std::size_t half = len >> 1;
        std::vector<cplx> w(half);
        for (std::size_t k = 0; k < half; ++k) {
            w[k] = cplx(std::cos(ang * static_cast<double>(k)),
                        std::sin(ang * static_cast<double>(k)));
        }
        w[0] = cplx(1.0, 0.0);
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < half; ++k) {
                const cplx u = a[i + k];
                const cplx v = a[i + k + half] * w[k];
                a[i + k] = u + v;
                a[i + k + half] = u - v;
            }
        }
    }

    if (inverse) {
        const double s = 1.0 / static_cast<double>(n);
        for (auto& z : a) z *= s;
    }
}

namespace {

// Bluestein chirp-z: re-expresses an arbitrary-length DFT as a circular
// convolution of power-of-two length.
std::vector<cplx> bluestein(const std::vector<cplx>& x, bool inverse) {
    const std::size_t n = x.size();
    const std::size_t m = next_pow2(2 * n - 1);
    const double sign = inverse ? 1.0 : -1.0;

    // w[k] = exp(sign * i * pi * k^2 / n); k^2 taken mod 2n keeps the
    // angle argument small for long transforms.
    std::vector<cplx> w(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t k2 = (k * k) % (2 * n);
        const double ang = sign * kPi * static_cast<double>(k2) / static_cast<double>(n);
        w[k] = cplx(std::cos(ang), std::sin(ang));
    }

    std::vector<cplx> a(m, cplx(0.0, 0.0));
    std::vector<cplx> b(m, cplx(0.0, 0.0));
    for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * w[k];
    b[0] = std::conj(w[0]);
    for (std::size_t k = 1; k < n; ++k) b[k] = b[m - k] = std::conj(w[k]);

    fft_pow2(a, false);
    fft_pow2(b, false);
    for (std::size_t k = 0; k < m; ++k) a[k] *= b[k];
    fft_pow2(a, true);

    std::vector<cplx> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * w[k];
    if (inverse) {
        const double s = 1.0 / static_cast<double>(n);
        for (auto& z : out) z *= s;
    }
    return out;
}

}  // namespace

std::vector<cplx> fft(const std::vector<cplx>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n == 0) return {};
    if (is_pow2(n)) {
        std::vector<cplx> out = a;
        fft_pow2(out, inverse);
        return out;
    }
    return bluestein(a, inverse);
}

std::vector<cplx> rfft_onesided(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<cplx> buf(n);
    for (std::size_t i = 0; i < n; ++i) buf[i] = cplx(x[i], 0.0);
    std::vector<cplx> full = fft(buf, false);

    const std::size_t bins = n / 2 + 1;
    std::vector<cplx> out(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(bins));

    // Real input makes these bins real; compute them directly so the
    // imaginary part is zero by construction rather than roundoff-small.
    double dc = 0.0;
    for (std::size_t i = 0; i < n; ++i) dc += x[i];
    out[0] = cplx(dc, 0.0);
    if (n % 2 == 0 && n > 0) {
        double nyq = 0.0;
        for (std::size_t i = 0; i < n; ++i) nyq += (i % 2 == 0) ? x[i] : -x[i];
        out[bins - 1] = cplx(nyq, 0.0);
    }
    return out;
}

std::vector<double> convolve_real(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) return {};
    const std::size_t out_len = a.size() + b.size() - 1;
    const std::size_t m = next_pow2(out_len);

    std::vector<cplx> fa(m, cplx(0.0, 0.0));
    std::vector<cplx> fb(m, cplx(0.0, 0.0));
    for (std::size_t i = 0; i < a.size(); ++i) fa[i] = cplx(a[i], 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) fb[i] = cplx(b[i], 0.0);
    fft_pow2(fa, false);
    fft_pow2(fb, false);
    for (std::size_t i = 0; i < m; ++i) fa[i] *= fb[i];
    fft_pow2(fa, true);

    std::vector<double> out(out_len);
    for (std::size_t i = 0; i < out_len; ++i) out[i] = fa[i].real();
    return out;
}

}  // namespace ambiroom::fft
