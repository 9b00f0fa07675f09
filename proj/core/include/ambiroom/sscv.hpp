#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ambiroom/filterbank.hpp"
#include "ambiroom/signal.hpp"

namespace ambiroom {

inline constexpr int kSscvDim = 16;  // M^2 for M = 4 channels
inline constexpr double kSilenceFloor = 1e-12;

using Cov4 = std::array<std::complex<double>, 16>;  // row-major 4x4

// Per-frame, per-band 4x4 Hermitian channel covariances.
struct CovarianceSeries {
    int frames = 0;
    int bands = 0;
    std::vector<std::complex<double>> m;  // [frame][band][4][4]

    std::complex<double>* at(int n, int b) {
        return m.data() + (static_cast<std::size_t>(n) * bands + b) * 16;
    }
    const std::complex<double>* at(int n, int b) const {
        return m.data() + (static_cast<std::size_t>(n) * bands + b) * 16;
    }
};

// One-pole smoothing coefficients, one per band, each in [0, 1).
struct SmoothingParams {
    std::vector<double> alpha;

    static SmoothingParams constant(double a, int bands);
    void validate() const;
};

// Real orthonormal 4x4 basis applied to the covariance diagonal during
// vectorization. First row is strictly positive, so the leading
// coordinate of the transformed vector is positive for any nonzero PSD
// input.
struct RealDftBasis {
    std::array<std::array<double, 4>, 4> f{};

    static RealDftBasis standard();
};

// Per-frame, per-band 16-element real vectors. `Linear` holds the
// unitary-transformed covariance before the log/normalize step (the
// form cached for training, where smoothing commutes with it); `Sscv`
// is the final feature.
enum class FeatureStage : std::uint8_t { Linear = 0, Sscv = 1 };

struct SscvSeries {
    FeatureStage stage = FeatureStage::Sscv;
    int frames = 0;
    int bands = 0;
    std::vector<double> v;  // [frame][band][16]

    double* at(int n, int b) {
        return v.data() + (static_cast<std::size_t>(n) * bands + b) * kSscvDim;
    }
    const double* at(int n, int b) const {
        return v.data() + (static_cast<std::size_t>(n) * bands + b) * kSscvDim;
    }
};

// Cov(n,b) = (1/|B_b|) * sum_{f in B_b} W_b(f) X(n,f) X(n,f)^H.
// Both the 1/|B_b| factor and the unit weight sum are applied.
CovarianceSeries banded_covariance(const SpectralFrames& x, const MelFilterbank& fb);

// Cov'(n,b) = (1-alpha_b) Cov(n,b) + alpha_b Cov'(n-1,b), zero initial
// state unless `init` supplies one matrix per band.
CovarianceSeries smooth(const CovarianceSeries& cov, const SmoothingParams& p,
                        std::span<const Cov4> init = {});

// Unitary transform only: diagonal through the real basis, conjugate
// pairs (i<j, row-major order) mapped to (sqrt2*Re, sqrt2*Im).
SscvSeries covariance_vectors(const CovarianceSeries& cov, const RealDftBasis& basis);

// Full vectorization: unitary transform, then
// [log r0, r1/r0, ..., r15/r0] with r0 floored at kSilenceFloor.
SscvSeries vectorize(const CovarianceSeries& cov, const RealDftBasis& basis);

// Test oracle: rebuild the Hermitian matrix from a 16-vector produced
// by vectorize (undo normalization, pair transform, and basis).
Cov4 invert_vectorize(std::span<const double> v, const RealDftBasis& basis);

SscvSeries sscv_pipeline(const FoaSignal& x, const FrameSpec& spec, const MelFilterbank& fb,
                         const SmoothingParams& p);

// --- Feature extraction configuration and serialization ----------------

struct FeatureConfig {
    double sample_rate = 16000.0;
    int frame_len = 1536;
    int hop = 768;
    int mel_bands = 52;
    double mel_f_lo = 0.0;
    double mel_f_hi = 8000.0;

    FrameSpec frame_spec() const { return FrameSpec::hann(frame_len, hop); }
    MelFilterbank mel() const {
        return build_mel_filterbank(sample_rate, frame_len, mel_bands, mel_f_lo, mel_f_hi);
    }
    std::uint64_t hash() const;
};

// Flat little-endian float32 container, "SSCV" magic, with a JSON
// sidecar recording the frame spec, filterbank parameters and (for the
// smoothed stage) the alpha values.
void save_feature_file(const std::string& path, const SscvSeries& s, const FeatureConfig& cfg,
                       const std::vector<double>* alpha = nullptr);

struct LoadedFeature {
    SscvSeries series;
    std::uint64_t config_hash = 0;
};

LoadedFeature load_feature_file(const std::string& path);

}  // namespace ambiroom
