#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ambiroom/acoustics.hpp"
#include "ambiroom/filterbank.hpp"
#include "ambiroom/rng.hpp"
#include "ambiroom/signal.hpp"

namespace ambiroom {

// Parametric room description. Decay constants and DRR targets are per
// third-octave band; direction is the source bearing seen from the
// microphone.
struct RoomSpec {
    std::array<double, 10> tau_band_s{};
    std::array<double, 10> drr_target_db{};
    double azimuth_rad = 0.0;
    double elevation_rad = 0.0;
    double direct_delay_ms = 4.0;
    std::uint64_t seed = 0;
};

struct FoaRir {
    std::array<std::vector<double>, kFoaChannels> ch;
    double sample_rate = 16000.0;
    int direct_index = 0;

    Rir w_channel() const { return Rir{ch[0], sample_rate, direct_index}; }
};

// SN3D first-order gains for a plane wave from (azimuth, elevation):
// W = 1, X = cos(az) cos(el), Y = sin(az) cos(el), Z = sin(el).
std::array<double, 4> foa_encode_direction(double azimuth_rad, double elevation_rad);

// Synthesizes a 4-channel RIR: a direct impulse with the encoded gains
// plus an isotropic diffuse tail of band-filtered noise with an
// exponential amplitude envelope per band. Tail gains are calibrated so
// the measured per-band DRR (via labels_from_rir conventions) hits the
// target; an infeasible target rejects the spec.
FoaRir synth_foa_rir(const RoomSpec& spec, const ThirdOctaveBank& bank);

// Per-channel FFT convolution, conformed to `seconds` (keep-first /
// zero-pad-end policy).
FoaSignal convolve_foa(std::span<const double> dry, const FoaRir& rir, double seconds = 4.0);

// Amplitude-modulated speech-shaped noise (pink-ish spectrum with a
// syllabic ~4 Hz modulation), unit peak.
std::vector<double> synth_dry_signal(std::size_t n_samples, double sample_rate, StreamRng rng);

struct UtteranceRecord {
    std::string utt_id;
    std::string audio_path;
    std::string rir_id;
    std::string rir_path;
    std::string label_path;
    std::string split;  // train | val | test
    int room_index = 0;
    RoomSpec room;
};

struct DatasetManifest {
    std::uint64_t seed = 0;
    double sample_rate = 16000.0;
    std::vector<UtteranceRecord> records;
};

struct BuildDatasetConfig {
    int n_rooms = 0;
    int utts_per_room = 1;
    std::uint64_t seed = 0;
    std::string out_dir;
    std::string dry_source = "synthetic";  // or a directory of mono WAVs
    double sample_rate = 16000.0;
    double train_frac = 0.70;
    double val_frac = 0.10;
};

// Samples room specs from documented ranges, synthesizes FOA audio,
// computes labels, and writes audio/, rirs/, labels/ and manifest.jsonl
// under out_dir. Rooms are disjoint across splits. Deterministic in
// (seed, n_rooms, utts_per_room).
DatasetManifest build_dataset(const BuildDatasetConfig& cfg);

void write_manifest(const std::string& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::string& path);

}  // namespace ambiroom
