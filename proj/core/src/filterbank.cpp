#include "ambiroom/filterbank.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ambiroom/error.hpp"

namespace ambiroom {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

using cplx = std::complex<double>;

}  // namespace

MelFilterbank build_mel_filterbank(double sample_rate, int fft_len, int band_count, double f_lo,
                                   double f_hi) {
    const double nyquist = sample_rate / 2.0;
    if (band_count < 1) fail_usage("mel filterbank: band_count must be >= 1");
    if (!(f_lo < f_hi) || f_hi > nyquist + 1e-9) {
        fail_usage("mel filterbank: need f_lo < f_hi <= Nyquist");
    }

    MelFilterbank fb;
    fb.sample_rate = sample_rate;
    fb.fft_len = fft_len;

    const double mel_lo = MelFilterbank::hz_to_mel(f_lo);
    const double mel_hi = MelFilterbank::hz_to_mel(f_hi);
    std::vector<double> vertices(band_count + 2);
    for (int i = 0; i < band_count + 2; ++i) {
        vertices[i] = mel_lo + (mel_hi - mel_lo) * i / (band_count + 1);
    }

    const int bins = fft_len / 2 + 1;
    const double hz_per_bin = sample_rate / fft_len;

    fb.bands.resize(band_count);
    for (int b = 0; b < band_count; ++b) {
        const double left = vertices[b];
        const double center = vertices[b + 1];
        const double right = vertices[b + 2];
        MelBand& band = fb.bands[b];
        band.center_hz = MelFilterbank::mel_to_hz(center);
        double sum = 0.0;
        for (int k = 0; k < bins; ++k) {
            const double mel = MelFilterbank::hz_to_mel(k * hz_per_bin);
            double w = 0.0;
            if (mel > left && mel < center) {
                w = (mel - left) / (center - left);
            } else if (mel >= center && mel < right) {
                w = (right - mel) / (right - center);
            }
            if (w > 0.0) {
                band.bins.push_back(k);
                band.weights.push_back(w);
                sum += w;
            }
        }
        if (band.bins.empty()) {
            fail_data("mel filterbank: band " + std::to_string(b) +
                      " has no bins; fft_len too small for band_count");
        }
        for (double& w : band.weights) w /= sum;
    }
    return fb;
}

std::string filterbank_debug_json(const MelFilterbank& fb) {
    std::ostringstream os;
    os.precision(10);
    os << "{\"sample_rate\":" << fb.sample_rate << ",\"fft_len\":" << fb.fft_len << ",\"bands\":[";
    const double hz_per_bin = fb.sample_rate / fb.fft_len;
    for (int b = 0; b < fb.band_count(); ++b) {
        const MelBand& band = fb.bands[b];
        double wsum = 0.0;
        for (double w : band.weights) wsum += w;
        if (b) os << ",";
        os << "{\"center_hz\":" << band.center_hz
           << ",\"edge_lo_hz\":" << band.bins.front() * hz_per_bin
           << ",\"edge_hi_hz\":" << band.bins.back() * hz_per_bin
           << ",\"first_bin\":" << band.bins.front() << ",\"last_bin\":" << band.bins.back()
           << ",\"weight_sum\":" << wsum << "}";
    }
    os << "]}";
    return os.str();
}

// --- Butterworth design -------------------------------------------------

namespace {

double prewarp(double f_hz, double fs) { return 2.0 * fs * std::tan(kPi * f_hz / fs); }

cplx bilinear_pole(cplx s, double fs) {
    return (cplx(2.0 * fs, 0.0) + s) / (cplx(2.0 * fs, 0.0) - s);
}

// 4-pole bandpass from the order-2 Butterworth lowpass prototype; zeros
// land on z = +1 (x2) and z = -1 (x2), one (1 - z^-2) per section.
std::vector<Sos> design_bandpass4(double lo_hz, double hi_hz, double fs) {
    const double wl = prewarp(lo_hz, fs);
    const double wu = prewarp(hi_hz, fs);
    const double w0 = std::sqrt(wl * wu);
    const double bw = wu - wl;

    std::vector<Sos> sections;
    const cplx proto = std::polar(1.0, 3.0 * kPi / 4.0);  // upper-half prototype pole
    const cplx bp = bw * proto;
    const cplx disc = std::sqrt(bp * bp - 4.0 * w0 * w0);
    for (const cplx s : {(bp + disc) / 2.0, (bp - disc) / 2.0}) {
        const cplx zp = bilinear_pole(s, fs);
        Sos sec;
        sec.b0 = 1.0;
        sec.b1 = 0.0;
        sec.b2 = -1.0;
        sec.a1 = -2.0 * zp.real();
        sec.a2 = std::norm(zp);
        sections.push_back(sec);
    }

    const double wc = 2.0 * kPi * std::sqrt(lo_hz * hi_hz) / fs;
    const double mag = std::abs(sos_response(sections, wc));
    sections[0].b0 /= mag;
    sections[0].b2 /= mag;
    return sections;
}

// 4-pole highpass used for the top band once its upper edge clips to
// Nyquist; zeros are z = +1 (x4).
std::vector<Sos> design_highpass4(double fc_hz, double fs) {
    const double wc = prewarp(fc_hz, fs);
    std::vector<Sos> sections;
    for (int k : {0, 1}) {
        const cplx proto = std::polar(1.0, kPi * (2.0 * k + 5.0) / 8.0);
        const cplx s = wc / proto;
        const cplx zp = bilinear_pole(s, fs);
        Sos sec;
        sec.b0 = 1.0;
        sec.b1 = -2.0;
        sec.b2 = 1.0;
        sec.a1 = -2.0 * zp.real();
        sec.a2 = std::norm(zp);
        sections.push_back(sec);
    }
    const double mag = std::abs(sos_response(sections, kPi));  // unity at Nyquist
    for (auto* c : {&sections[0].b0, &sections[0].b1, &sections[0].b2}) *c /= mag;
    return sections;
}

}  // namespace

ThirdOctaveBank build_third_octave_bank(double sample_rate) {
    if (sample_rate < 16000.0) fail_usage("third-octave bank: sample_rate must be >= 16 kHz");
    ThirdOctaveBank bank;
    bank.sample_rate = sample_rate;
    bank.nominal_center_hz = {1000.0, 1250.0, 1600.0, 2000.0, 2500.0,
                              3150.0, 4000.0, 5000.0, 6300.0, 8000.0};
    const double nyquist = sample_rate / 2.0;
    const double half_band = std::pow(2.0, 1.0 / 6.0);
    for (int b = 0; b < ThirdOctaveBank::kBands; ++b) {
        const double center = 1000.0 * std::pow(2.0, b / 3.0);
        bank.exact_center_hz[b] = center;
        const double lo = center / half_band;
        const double hi = std::min(center * half_band, nyquist);
        bank.edge_hz[b] = {lo, hi};

        BandFilter& f = bank.filters[b];
        f.lo_hz = lo;
        f.hi_hz = hi;
        f.highpass = hi >= 0.995 * nyquist;
        f.sections = f.highpass ? design_highpass4(lo, sample_rate)
                                : design_bandpass4(lo, hi, sample_rate);
    }
    return bank;
}

std::complex<double> sos_response(const std::vector<Sos>& sections, double omega) {
    const cplx z1 = std::polar(1.0, -omega);
    const cplx z2 = z1 * z1;
    cplx h(1.0, 0.0);
    for (const Sos& s : sections) {
        h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
    }
    return h;
}

namespace {

void sosfilt_inplace(const std::vector<Sos>& sections, std::vector<double>& x) {
    for (const Sos& s : sections) {
        double z1 = 0.0, z2 = 0.0;  // direct form II transposed state
        for (double& v : x) {
            const double in = v;
            const double out = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * out + z2;
            z2 = s.b2 * in - s.a2 * out;
            v = out;
        }
    }
}

}  // namespace

std::vector<double> sosfiltfilt(const std::vector<Sos>& sections, std::span<const double> x) {
    std::vector<double> y(x.begin(), x.end());
    sosfilt_inplace(sections, y);
    std::reverse(y.begin(), y.end());
    sosfilt_inplace(sections, y);
    std::reverse(y.begin(), y.end());
    return y;
}

std::vector<double> bandpass_filter(std::span<const double> x, int band,
                                    const ThirdOctaveBank& bank) {
    if (band < 0 || band >= ThirdOctaveBank::kBands) fail_usage("bandpass_filter: band out of range");
    return sosfiltfilt(bank.filters[band].sections, x);
}

}  // namespace ambiroom
