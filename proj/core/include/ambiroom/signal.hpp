#pragma once

#include <array>
#include <complex>
#include <span>
#include <string>
#include <vector>

namespace ambiroom {

// Channel convention used throughout: W, X, Y, Z in that order, SN3D
// gains. This is not AmbiX ACN (which would be W, Y, Z, X); WAV files
// are read and written in the same W,X,Y,Z order.
enum class ChannelOrder { Wxyz };

constexpr int kFoaChannels = 4;

struct FoaSignal {
    std::array<std::vector<double>, kFoaChannels> ch;
    double sample_rate = 16000.0;
    ChannelOrder order = ChannelOrder::Wxyz;

    std::size_t length() const { return ch[0].size(); }
};

// Analysis framing. The default configuration is 96 ms periodic Hann
// windows with 50% overlap at 16 kHz (1536/768 samples).
struct FrameSpec {
    int frame_len = 0;
    int hop = 0;
    std::vector<double> window;

    static FrameSpec hann(int frame_len, int hop);
    static FrameSpec default_16k();  // 1536 / 768

    int bins() const { return frame_len / 2 + 1; }
};

// Windowed time-domain frames, layout [frame][channel][sample].
struct FramedSignal {
    int frames = 0;
    int channels = 0;
    int frame_len = 0;
    std::vector<double> data;

    double* frame(int n, int c) { return data.data() + (static_cast<std::size_t>(n) * channels + c) * frame_len; }
    const double* frame(int n, int c) const {
        return data.data() + (static_cast<std::size_t>(n) * channels + c) * frame_len;
    }
};

// One-sided spectra, layout [frame][channel][bin], bins = frame_len/2 + 1.
struct SpectralFrames {
    int frames = 0;
    int channels = 0;
    int bins = 0;
    int frame_len = 0;
    std::vector<std::complex<double>> data;

    std::complex<double>* at(int n, int c) {
        return data.data() + (static_cast<std::size_t>(n) * channels + c) * bins;
    }
    const std::complex<double>* at(int n, int c) const {
        return data.data() + (static_cast<std::size_t>(n) * channels + c) * bins;
    }
};

int frame_count(std::size_t n_samples, int frame_len, int hop);

// Slices the signal into hop-spaced windows of frame_len samples and
// applies the analysis window. Trailing samples that do not fill a
// frame are dropped. Throws if the signal is shorter than one frame.
FramedSignal frame_signal(const FoaSignal& x, const FrameSpec& spec);

SpectralFrames dft_frames(const FramedSignal& frames);

// Reads a 4-channel WAV (float32 or PCM16) as FOA in W,X,Y,Z order.
FoaSignal read_foa_wav(const std::string& path);
void write_foa_wav(const std::string& path, const FoaSignal& x);

// Duration policy: keep the first `seconds` of signal, zero-pad the end
// when shorter.
FoaSignal conform_duration(FoaSignal x, double seconds);

}  // namespace ambiroom
