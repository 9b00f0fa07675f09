#pragma once

#include <array>
#include <complex>
#include <span>
#include <string>
#include <vector>

namespace ambiroom {

// --- Mel filterbank (feature banding) ---------------------------------

struct MelBand {
    std::vector<int> bins;        // DFT bin indices with nonzero weight
    std::vector<double> weights;  // same length, sums to 1
    double center_hz = 0.0;
};

struct MelFilterbank {
    double sample_rate = 0.0;
    int fft_len = 0;
    std::vector<MelBand> bands;

    int band_count() const { return static_cast<int>(bands.size()); }

    static double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
    static double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }
};

// Triangular responses with vertices equally spaced on the mel scale,
// each band renormalized to unit weight sum. Throws when fft_len is too
// small to give every band at least one bin.
MelFilterbank build_mel_filterbank(double sample_rate, int fft_len, int band_count, double f_lo,
                                   double f_hi);

std::string filterbank_debug_json(const MelFilterbank& fb);

// --- Third-octave label bank ------------------------------------------

// One biquad section, denominator normalized (a0 = 1).
struct Sos {
    double b0 = 0.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;
};

struct BandFilter {
    double lo_hz = 0.0, hi_hz = 0.0;
    bool highpass = false;  // top band when its upper edge hits Nyquist
    std::vector<Sos> sections;
};

// Ten third-octave bands, 1 kHz to Nyquist. Edges are derived from the
// exact base-2 series (1000 * 2^(k/3)) so adjacent bands meet exactly;
// nominal centers carry the usual rounded values used for reporting.
struct ThirdOctaveBank {
    double sample_rate = 0.0;
    std::array<double, 10> nominal_center_hz{};
    std::array<double, 10> exact_center_hz{};
    std::array<std::array<double, 2>, 10> edge_hz{};  // {lo, hi}, hi clipped to Nyquist
    std::array<BandFilter, 10> filters{};

    static constexpr int kBands = 10;
};

ThirdOctaveBank build_third_octave_bank(double sample_rate);

// Zero-phase (forward-backward) filtering through a biquad cascade.
std::vector<double> sosfiltfilt(const std::vector<Sos>& sections, std::span<const double> x);

// Zero-phase band limit with one bank filter; output length equals input.
std::vector<double> bandpass_filter(std::span<const double> x, int band,
                                    const ThirdOctaveBank& bank);

// Single-pass frequency response of a cascade at normalized angular
// frequency omega = 2*pi*f/fs (the zero-phase magnitude is its square).
std::complex<double> sos_response(const std::vector<Sos>& sections, double omega);

}  // namespace ambiroom
