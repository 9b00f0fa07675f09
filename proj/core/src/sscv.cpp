#include "ambiroom/sscv.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ambiroom/error.hpp"
#include "ambiroom/hash.hpp"

namespace ambiroom {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488016887242097;

// Upper-triangle pair order (row-major): fixed for reproducibility.
constexpr int kPairRow[6] = {0, 0, 0, 1, 1, 2};
constexpr int kPairCol[6] = {1, 2, 3, 2, 3, 3};

}  // namespace

SmoothingParams SmoothingParams::constant(double a, int bands) {
    SmoothingParams p;
    p.alpha.assign(static_cast<std::size_t>(bands), a);
    p.validate();
    return p;
}

void SmoothingParams::validate() const {
    for (double a : alpha) {
        if (!(a >= 0.0 && a < 1.0)) fail_usage("smoothing: alpha must lie in [0, 1)");
    }
}

RealDftBasis RealDftBasis::standard() {
    RealDftBasis b;
    const double h = 0.5;
    const double s = 1.0 / kSqrt2;
    b.f = {{{h, h, h, h}, {s, 0.0, -s, 0.0}, {0.0, s, 0.0, -s}, {h, -h, h, -h}}};
    return b;
}

CovarianceSeries banded_covariance(const SpectralFrames& x, const MelFilterbank& fb) {
    if (x.channels != kFoaChannels) fail_usage("banded_covariance: expected 4 channels");
    if (fb.fft_len != x.frame_len) {
        fail_usage("banded_covariance: filterbank built for a different DFT length");
    }

    CovarianceSeries cov;
    cov.frames = x.frames;
    cov.bands = fb.band_count();
    cov.m.assign(static_cast<std::size_t>(cov.frames) * cov.bands * 16, {0.0, 0.0});

    for (int n = 0; n < x.frames; ++n) {
        std::array<const std::complex<double>*, kFoaChannels> chan{};
        for (int c = 0; c < kFoaChannels; ++c) chan[c] = x.at(n, c);
        for (int b = 0; b < cov.bands; ++b) {
            const MelBand& band = fb.bands[b];
            std::complex<double>* out = cov.at(n, b);
            const std::size_t m = band.bins.size();
            for (std::size_t k = 0; k < m; ++k) {
                const int bin = band.bins[k];
                const double w = band.weights[k];
                for (int i = 0; i < kFoaChannels; ++i) {
                    const std::complex<double> xi = chan[i][bin];
                    for (int j = 0; j < kFoaChannels; ++j) {
                        out[i * 4 + j] += w * xi * std::conj(chan[j][bin]);
                    }
                }
            }
            const double inv_count = 1.0 / static_cast<double>(m);
            for (int e = 0; e < 16; ++e) out[e] *= inv_count;
        }
    }
    return cov;
}

CovarianceSeries smooth(const CovarianceSeries& cov, const SmoothingParams& p,
                        std::span<const Cov4> init) {
    if (cov.frames < 1) fail_usage("smooth: need at least one frame");
    if (static_cast<int>(p.alpha.size()) != cov.bands) {
        fail_usage("smooth: alpha count does not match band count");
    }
    p.validate();
    if (!init.empty() && static_cast<int>(init.size()) != cov.bands) {
        fail_usage("smooth: init must supply one matrix per band");
    }

    CovarianceSeries out;
    out.frames = cov.frames;
    out.bands = cov.bands;
    out.m.resize(cov.m.size());

    for (int b = 0; b < cov.bands; ++b) {
        const double a = p.alpha[b];
        Cov4 state{};
        if (!init.empty()) state = init[b];
        for (int n = 0; n < cov.frames; ++n) {
            const std::complex<double>* in = cov.at(n, b);
            std::complex<double>* dst = out.at(n, b);
            for (int e = 0; e < 16; ++e) {
                state[e] = (1.0 - a) * in[e] + a * state[e];
                dst[e] = state[e];
            }
        }
    }
    return out;
}

namespace {

// Shared by covariance_vectors / vectorize: one matrix to 16 raw coords.
inline void unitary_coords(const std::complex<double>* c, const RealDftBasis& basis, double* r) {
    for (int i = 0; i < 4; ++i) {
        double acc = 0.0;
        for (int j = 0; j < 4; ++j) acc += basis.f[i][j] * c[j * 4 + j].real();
        r[i] = acc;
    }
    for (int q = 0; q < 6; ++q) {
        const std::complex<double> z = c[kPairRow[q] * 4 + kPairCol[q]];
        r[4 + 2 * q] = kSqrt2 * z.real();
        r[4 + 2 * q + 1] = kSqrt2 * z.imag();
    }
}

}  // namespace

SscvSeries covariance_vectors(const CovarianceSeries& cov, const RealDftBasis& basis) {
    SscvSeries out;
    out.stage = FeatureStage::Linear;
    out.frames = cov.frames;
    out.bands = cov.bands;
    out.v.resize(static_cast<std::size_t>(cov.frames) * cov.bands * kSscvDim);
    for (int n = 0; n < cov.frames; ++n) {
        for (int b = 0; b < cov.bands; ++b) {
            unitary_coords(cov.at(n, b), basis, out.at(n, b));
        }
    }
    return out;
}

SscvSeries vectorize(const CovarianceSeries& cov, const RealDftBasis& basis) {
    SscvSeries out = covariance_vectors(cov, basis);
    out.stage = FeatureStage::Sscv;
    for (int n = 0; n < out.frames; ++n) {
        for (int b = 0; b < out.bands; ++b) {
            double* r = out.at(n, b);
            const double r0 = std::max(r[0], kSilenceFloor);
            for (int e = 1; e < kSscvDim; ++e) r[e] /= r0;
            r[0] = std::log(r0);
        }
    }
    return out;
}

Cov4 invert_vectorize(std::span<const double> v, const RealDftBasis& basis) {
    if (v.size() != kSscvDim) fail_usage("invert_vectorize: need 16 coordinates");
    std::array<double, kSscvDim> r{};
    const double r0 = std::exp(v[0]);
    r[0] = r0;
    for (int e = 1; e < kSscvDim; ++e) r[e] = v[e] * r0;

    Cov4 c{};
    for (int j = 0; j < 4; ++j) {
        double acc = 0.0;
        for (int i = 0; i < 4; ++i) acc += basis.f[i][j] * r[i];  // F^T (orthonormal inverse)
        c[j * 4 + j] = {acc, 0.0};
    }
    for (int q = 0; q < 6; ++q) {
        const std::complex<double> z(r[4 + 2 * q] / kSqrt2, r[4 + 2 * q + 1] / kSqrt2);
        c[kPairRow[q] * 4 + kPairCol[q]] = z;
        c[kPairCol[q] * 4 + kPairRow[q]] = std::conj(z);
    }
    return c;
}

SscvSeries sscv_pipeline(const FoaSignal& x, const FrameSpec& spec, const MelFilterbank& fb,
                         const SmoothingParams& p) {
    const FramedSignal frames = frame_signal(x, spec);
    const SpectralFrames spectra = dft_frames(frames);
    const CovarianceSeries cov = banded_covariance(spectra, fb);
    const CovarianceSeries smoothed = smooth(cov, p);
    return vectorize(smoothed, RealDftBasis::standard());
}

// --- Serialization -------------------------------------------------------

std::uint64_t FeatureConfig::hash() const {
    std::ostringstream os;
    os << "sr=" << sample_rate << ";L=" << frame_len << ";H=" << hop << ";win=hann"
       << ";mel=" << mel_bands << ";flo=" << mel_f_lo << ";fhi=" << mel_f_hi
       << ";melref=2595log10;dim=" << kSscvDim;
    return fnv1a64(os.str());
}

namespace {

constexpr char kMagic[4] = {'S', 'S', 'C', 'V'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& f, T v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& f, const std::string& path) {
    T v;
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) fail_data("feature file: truncated: " + path);
    return v;
}

}  // namespace

void save_feature_file(const std::string& path, const SscvSeries& s, const FeatureConfig& cfg,
                       const std::vector<double>* alpha) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail_data("feature file: cannot open for writing: " + path);
    f.write(kMagic, 4);
    put<std::uint32_t>(f, kVersion);
    put<std::uint8_t>(f, static_cast<std::uint8_t>(s.stage));
    put<std::uint8_t>(f, 0);
    put<std::uint8_t>(f, 0);
    put<std::uint8_t>(f, 0);
    put<std::uint32_t>(f, static_cast<std::uint32_t>(s.frames));
    put<std::uint32_t>(f, static_cast<std::uint32_t>(s.bands));
    put<std::uint32_t>(f, kSscvDim);
    put<std::uint64_t>(f, cfg.hash());
    for (double d : s.v) put<float>(f, static_cast<float>(d));
    if (!f) fail_data("feature file: short write: " + path);
    f.close();

    std::ostringstream meta;
    meta.precision(12);
    meta << "{\"version\":" << kVersion
         << ",\"stage\":\"" << (s.stage == FeatureStage::Sscv ? "sscv" : "linear") << "\""
         << ",\"frames\":" << s.frames << ",\"bands\":" << s.bands << ",\"dim\":" << kSscvDim
         << ",\"config_hash\":\"" << std::hex << cfg.hash() << std::dec << "\""
         << ",\"frame\":{\"sample_rate\":" << cfg.sample_rate << ",\"frame_len\":" << cfg.frame_len
         << ",\"hop\":" << cfg.hop << ",\"window\":\"hann\"}"
         << ",\"mel\":{\"bands\":" << cfg.mel_bands << ",\"f_lo\":" << cfg.mel_f_lo
         << ",\"f_hi\":" << cfg.mel_f_hi << "}";
    if (alpha != nullptr) {
        meta << ",\"alpha\":[";
        for (std::size_t i = 0; i < alpha->size(); ++i) meta << (i ? "," : "") << (*alpha)[i];
        meta << "]";
    } else {
        meta << ",\"alpha\":null";
    }
    meta << "}";
    std::ofstream side(path + ".json", std::ios::trunc);
    if (!side) fail_data("feature file: cannot write sidecar: " + path + ".json");
    side << meta.str() << "\n";
}

LoadedFeature load_feature_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail_data("feature file: cannot open: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0) fail_data("feature file: bad magic: " + path);
    const auto version = get<std::uint32_t>(f, path);
    if (version != kVersion) fail_data("feature file: unsupported version: " + path);
    const auto stage = get<std::uint8_t>(f, path);
    get<std::uint8_t>(f, path);
    get<std::uint8_t>(f, path);
    get<std::uint8_t>(f, path);
    const auto frames = get<std::uint32_t>(f, path);
    const auto bands = get<std::uint32_t>(f, path);
    const auto dim = get<std::uint32_t>(f, path);
    if (dim != kSscvDim) fail_data("feature file: unexpected vector dimension: " + path);

    LoadedFeature lf;
    lf.config_hash = get<std::uint64_t>(f, path);
    lf.series.stage = static_cast<FeatureStage>(stage);
    lf.series.frames = static_cast<int>(frames);
    lf.series.bands = static_cast<int>(bands);
    const std::size_t count = static_cast<std::size_t>(frames) * bands * dim;
    lf.series.v.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        lf.series.v[i] = static_cast<double>(get<float>(f, path));
    }
    return lf;
}

}  // namespace ambiroom
