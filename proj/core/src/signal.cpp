#include "ambiroom/signal.hpp"

#include <cmath>

#include "ambiroom/error.hpp"
#include "ambiroom/fft.hpp"
#include "ambiroom/wav.hpp"

namespace ambiroom {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

FrameSpec FrameSpec::hann(int frame_len, int hop) {
    if (frame_len <= 0 || hop <= 0 || hop > frame_len) {
        fail_usage("frame spec: need 0 < hop <= frame_len");
    }
    FrameSpec s;
    s.frame_len = frame_len;
    s.hop = hop;
    s.window.resize(frame_len);
    // Periodic Hann (denominator L), COLA-compatible at 50% overlap.
    for (int i = 0; i < frame_len; ++i) {
        s.window[i] = 0.5 - 0.5 * std::cos(kTwoPi * i / frame_len);
    }
    return s;
}

FrameSpec FrameSpec::default_16k() { return hann(1536, 768); }

int frame_count(std::size_t n_samples, int frame_len, int hop) {
    if (n_samples < static_cast<std::size_t>(frame_len)) {
        fail_data("frame_signal: signal shorter than one frame");
    }
    return static_cast<int>((n_samples - frame_len) / hop) + 1;
}

FramedSignal frame_signal(const FoaSignal& x, const FrameSpec& spec) {
    const int n_frames = frame_count(x.length(), spec.frame_len, spec.hop);
    FramedSignal out;
    out.frames = n_frames;
    out.channels = kFoaChannels;
    out.frame_len = spec.frame_len;
    out.data.resize(static_cast<std::size_t>(n_frames) * kFoaChannels * spec.frame_len);
    for (int n = 0; n < n_frames; ++n) {
        const std::size_t start = static_cast<std::size_t>(n) * spec.hop;
        for (int c = 0; c < kFoaChannels; ++c) {
            const double* src = x.ch[c].data() + start;
            double* dst = out.frame(n, c);
            for (int i = 0; i < spec.frame_len; ++i) dst[i] = src[i] * spec.window[i];
        }
    }
    return out;
}

SpectralFrames dft_frames(const FramedSignal& frames) {
    SpectralFrames out;
    out.frames = frames.frames;
    out.channels = frames.channels;
    out.frame_len = frames.frame_len;
    out.bins = frames.frame_len / 2 + 1;
    out.data.resize(static_cast<std::size_t>(out.frames) * out.channels * out.bins);
    for (int n = 0; n < frames.frames; ++n) {
        for (int c = 0; c < frames.channels; ++c) {
            auto spec = fft::rfft_onesided(
                std::span<const double>(frames.frame(n, c), static_cast<std::size_t>(frames.frame_len)));
            std::copy(spec.begin(), spec.end(), out.at(n, c));
        }
    }
    return out;
}

FoaSignal read_foa_wav(const std::string& path) {
    WavData wav = read_wav(path);
    if (wav.channels.size() != kFoaChannels) {
        fail_data("foa: expected 4 channels, got " + std::to_string(wav.channels.size()) + ": " +
                  path);
    }
    FoaSignal x;
    x.sample_rate = wav.sample_rate;
    for (int c = 0; c < kFoaChannels; ++c) {
        x.ch[c].assign(wav.channels[c].begin(), wav.channels[c].end());
        for (double v : x.ch[c]) {
            if (!std::isfinite(v)) fail_data("foa: non-finite sample in " + path);
        }
    }
    return x;
}

void write_foa_wav(const std::string& path, const FoaSignal& x) {
    WavData wav;
    wav.sample_rate = x.sample_rate;
    wav.channels.assign(kFoaChannels, {});
    for (int c = 0; c < kFoaChannels; ++c) {
        wav.channels[c].assign(x.ch[c].begin(), x.ch[c].end());
    }
    write_wav(path, wav);
}

FoaSignal conform_duration(FoaSignal x, double seconds) {
    const auto target = static_cast<std::size_t>(std::llround(seconds * x.sample_rate));
    for (auto& ch : x.ch) ch.resize(target, 0.0);
    return x;
}

}  // namespace ambiroom
