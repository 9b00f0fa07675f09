#include "ambiroom/wav.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "ambiroom/error.hpp"

namespace ambiroom {

namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T read_le(const std::uint8_t* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;  // little-endian host
}

template <typename T>
void append_le(std::vector<std::uint8_t>& out, T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

}  // namespace

WavData read_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail_data("wav: cannot open file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());

    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        fail_data("wav: not a RIFF/WAVE file: " + path);
    }

    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t sample_rate = 0;
    std::uint16_t bits = 0;
    bool have_fmt = false;
    const std::uint8_t* data_ptr = nullptr;
    std::uint32_t data_size = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
        const std::uint32_t chunk_size = read_le<std::uint32_t>(bytes.data() + pos + 4);
        const std::size_t body = pos + 8;
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (body + 16 > bytes.size()) fail_data("wav: truncated fmt chunk: " + path);
            format = read_le<std::uint16_t>(bytes.data() + body);
            channels = read_le<std::uint16_t>(bytes.data() + body + 2);
            sample_rate = read_le<std::uint32_t>(bytes.data() + body + 4);
            bits = read_le<std::uint16_t>(bytes.data() + body + 14);
            if (format == kFormatExtensible && chunk_size >= 40 && body + 26 <= bytes.size()) {
                format = read_le<std::uint16_t>(bytes.data() + body + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data_ptr = bytes.data() + body;
            data_size = chunk_size;
            if (body + data_size > bytes.size()) {
                fail_data("wav: truncated data chunk: " + path);
            }
        }
        pos = body + chunk_size + (chunk_size & 1);
    }

    if (!have_fmt || data_ptr == nullptr) fail_data("wav: missing fmt or data chunk: " + path);
    if (channels == 0 || sample_rate == 0) fail_data("wav: malformed fmt chunk: " + path);

    const bool pcm16 = (format == kFormatPcm && bits == 16);
    const bool f32 = (format == kFormatFloat && bits == 32);
    if (!pcm16 && !f32) {
        fail_data("wav: unsupported encoding (need PCM16 or float32): " + path);
    }

    const std::size_t bytes_per_sample = bits / 8;
    const std::size_t frame_bytes = bytes_per_sample * channels;
    if (data_size % frame_bytes != 0) fail_data("wav: truncated data chunk: " + path);
    const std::size_t frames = data_size / frame_bytes;

    WavData wav;
    wav.sample_rate = static_cast<double>(sample_rate);
    wav.channels.assign(channels, std::vector<float>(frames));
    for (std::size_t n = 0; n < frames; ++n) {
        for (std::size_t c = 0; c < channels; ++c) {
            const std::uint8_t* p = data_ptr + (n * channels + c) * bytes_per_sample;
            if (pcm16) {
                const auto s = read_le<std::int16_t>(p);
                wav.channels[c][n] = static_cast<float>(s) / 32768.0f;
            } else {
                wav.channels[c][n] = read_le<float>(p);
            }
        }
    }
    return wav;
}

void write_wav(const std::string& path, const WavData& wav) {
    if (wav.channels.empty()) fail_data("wav: refusing to write zero channels");
    const std::size_t channels = wav.channels.size();
    const std::size_t frames = wav.frames();
    for (const auto& ch : wav.channels) {
        if (ch.size() != frames) fail_data("wav: channel length mismatch");
    }

    const std::uint32_t data_size = static_cast<std::uint32_t>(frames * channels * 4);
    std::vector<std::uint8_t> out;
    out.reserve(58 + data_size);

    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    append_le<std::uint32_t>(out, 4 + 26 + 8 + data_size);
    out.insert(out.end(), {'W', 'A', 'V', 'E'});

    out.insert(out.end(), {'f', 'm', 't', ' '});
    append_le<std::uint32_t>(out, 18);
    append_le<std::uint16_t>(out, kFormatFloat);
    append_le<std::uint16_t>(out, static_cast<std::uint16_t>(channels));
    append_le<std::uint32_t>(out, static_cast<std::uint32_t>(wav.sample_rate));
    append_le<std::uint32_t>(out, static_cast<std::uint32_t>(wav.sample_rate) *
                                      static_cast<std::uint32_t>(channels) * 4);
    append_le<std::uint16_t>(out, static_cast<std::uint16_t>(channels * 4));
    append_le<std::uint16_t>(out, 32);
    append_le<std::uint16_t>(out, 0);  // no extension bytes

    out.insert(out.end(), {'d', 'a', 't', 'a'});
    append_le<std::uint32_t>(out, data_size);
    for (std::size_t n = 0; n < frames; ++n) {
        for (std::size_t c = 0; c < channels; ++c) {
            append_le<float>(out, wav.channels[c][n]);
        }
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail_data("wav: cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) fail_data("wav: short write: " + path);
}

}  // namespace ambiroom
