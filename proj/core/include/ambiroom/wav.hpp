#pragma once

#include <string>
#include <vector>

namespace ambiroom {

// Deinterleaved float samples, one vector per channel.
struct WavData {
    double sample_rate = 0.0;
    std::vector<std::vector<float>> channels;

    std::size_t frames() const { return channels.empty() ? 0 : channels[0].size(); }
};

// Reads a RIFF/WAVE file. Accepts PCM16 (scaled by 1/32768) and IEEE
// float32, mono or multichannel. Unsupported encodings, truncated data
// and malformed headers are reported as distinct data errors.
WavData read_wav(const std::string& path);

// Writes IEEE float32 WAVE.
void write_wav(const std::string& path, const WavData& wav);

}  // namespace ambiroom
