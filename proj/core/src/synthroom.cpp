#include "ambiroom/synthroom.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "ambiroom/error.hpp"
#include "ambiroom/fft.hpp"
#include "ambiroom/wav.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ambiroom {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;
// Tail onset sits outside the +-2.5 ms direct window plus most of the
// band filters' zero-phase smear, so direct x tail cross terms stay out
// of the DRR window energies the calibration solves for.
constexpr double kTailGapS = 0.004;
constexpr double kTailSpanTaus = 8.5;  // tail length in units of tau (decay to < -70 dB)
constexpr double kMinTailS = 0.15;

struct WindowEnergies {
    double in = 0.0;     // inside the +-2.5 ms direct window
    double after = 0.0;  // strictly after the window
};

// Mirrors the drr_from_rir windowing so calibration targets the same
// measurement.
WindowEnergies direct_window_energies(std::span<const double> h, int direct_index, double fs) {
    const int half = static_cast<int>(std::lround(0.0025 * fs));
    const int n = static_cast<int>(h.size());
    const int lo = std::max(0, direct_index - half);
    const int hi = std::min(n - 1, direct_index + half);
    WindowEnergies e;
    for (int i = lo; i <= hi; ++i) e.in += h[i] * h[i];
    for (int i = hi + 1; i < n; ++i) e.after += h[i] * h[i];
    return e;
}

// Sliding-RMS flattening: divides out the local energy fluctuation of a
// band-limited noise so the applied decay envelope is realized exactly.
void flatten_local_rms(std::vector<double>& x, int window) {
    const int n = static_cast<int>(x.size());
    if (n == 0) return;
    std::vector<double> cum(n + 1, 0.0);
    for (int i = 0; i < n; ++i) cum[i + 1] = cum[i] + x[i] * x[i];
    const double mean_sq = std::max(cum[n] / n, 1e-300);
    std::vector<double> flat(n);
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - window / 2);
        const int hi = std::min(n, i + window / 2 + 1);
        const double local = (cum[hi] - cum[lo]) / (hi - lo);
        flat[i] = x[i] / std::sqrt(std::max(local, 1e-6 * mean_sq));
    }
    x = std::move(flat);
}

// Solves A x = b in place (partial pivoting). Throws on singular A.
std::vector<double> solve_linear(std::vector<std::vector<double>> a, std::vector<double> b) {
    const int n = static_cast<int>(b.size());
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        }
        if (std::abs(a[pivot][col]) < 1e-300) fail_numeric("synth: singular DRR calibration system");
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (int r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (int r = n - 1; r >= 0; --r) {
        double acc = b[r];
        for (int c = r + 1; c < n; ++c) acc -= a[r][c] * x[c];
        x[r] = acc / a[r][r];
    }
    return x;
}

int flatten_window_samples(const BandFilter& f, double fs) {
    const double bw = std::max(f.hi_hz - f.lo_hz, 1.0);
    const double w_s = std::max(0.008, 2.0 / bw);
    return std::max(8, static_cast<int>(std::lround(w_s * fs)));
}

}  // namespace

std::array<double, 4> foa_encode_direction(double azimuth_rad, double elevation_rad) {
    if (azimuth_rad < -kPi - 1e-9 || azimuth_rad > kPi + 1e-9 ||
        elevation_rad < -kPi / 2 - 1e-9 || elevation_rad > kPi / 2 + 1e-9) {
        fail_usage("foa_encode_direction: angles out of range");
    }
    const double ce = std::cos(elevation_rad);
    return {1.0, std::cos(azimuth_rad) * ce, std::sin(azimuth_rad) * ce, std::sin(elevation_rad)};
}

FoaRir synth_foa_rir(const RoomSpec& spec, const ThirdOctaveBank& bank) {
    const double fs = bank.sample_rate;
    for (double tau : spec.tau_band_s) {
        if (!(tau > 0.0)) fail_data("synth: tau must be positive");
    }
    if (spec.direct_delay_ms < 0.0) fail_data("synth: direct delay must be >= 0");

    const int direct_index = static_cast<int>(std::lround(spec.direct_delay_ms * 1e-3 * fs));
    const int tail_start = direct_index + static_cast<int>(std::lround(kTailGapS * fs));
    const double tau_max = *std::max_element(spec.tau_band_s.begin(), spec.tau_band_s.end());
    const int tail_len =
        static_cast<int>(std::lround(fs * std::max(kTailSpanTaus * tau_max, kMinTailS)));
    const int total_len = tail_start + tail_len;

    StreamRng room_rng(spec.seed);

    // Unit-scale tail components per band x channel: band-filtered noise,
    // local-RMS flattened, exponential envelope from the tail onset.
    // Channels are independent; the isotropic diffuse target
    // diag(1, 1/3, 1/3, 1/3) comes from the 1/sqrt(3) dipole gains below.
    std::array<std::array<std::vector<double>, 4>, 10> tail{};
    for (int b = 0; b < ThirdOctaveBank::kBands; ++b) {
        const int w_flat = flatten_window_samples(bank.filters[b], fs);
        for (int c = 0; c < kFoaChannels; ++c) {
            StreamRng rng = room_rng.split(1000 + b * 8 + c);
            std::vector<double> noise(tail_len);
            for (double& v : noise) v = rng.normal();
            std::vector<double> shaped = sosfiltfilt(bank.filters[b].sections, noise);
            flatten_local_rms(shaped, w_flat);
            for (int i = 0; i < tail_len; ++i) {
                shaped[i] *= std::exp(-static_cast<double>(i) / (fs * spec.tau_band_s[b]));
            }
            auto& slot = tail[b][c];
            slot.assign(total_len, 0.0);
            std::copy(shaped.begin(), shaped.end(), slot.begin() + tail_start);
        }
    }

    // Direct path.
    const std::array<double, 4> gains =
        foa_encode_direction(spec.azimuth_rad, spec.elevation_rad);
    std::vector<double> direct_w(total_len, 0.0);
    direct_w[direct_index] = 1.0;

    // Calibrate per-band tail energies against the same band-filtered
    // window measurement the DRR label uses. Linear in the squared
    // gains g2: sum_b g2[b]*(rin[m][b] - r_m*rout[m][b]) = r_m*dout[m] - din[m].
    std::vector<std::vector<double>> a(10, std::vector<double>(10, 0.0));
    std::vector<double> rhs(10, 0.0);
    for (int m = 0; m < ThirdOctaveBank::kBands; ++m) {
        const auto& sections = bank.filters[m].sections;
        const double r_m = std::pow(10.0, spec.drr_target_db[m] / 10.0);
        const auto d = direct_window_energies(sosfiltfilt(sections, direct_w), direct_index, fs);
        rhs[m] = r_m * d.after - d.in;
        for (int b = 0; b < ThirdOctaveBank::kBands; ++b) {
            const auto r =
                direct_window_energies(sosfiltfilt(sections, tail[b][0]), direct_index, fs);
            a[m][b] = r.in - r_m * r.after;
        }
    }
    const std::vector<double> g2 = solve_linear(std::move(a), std::move(rhs));
    std::array<double, 10> gain{};
    for (int b = 0; b < 10; ++b) {
        if (!std::isfinite(g2[b]) || g2[b] <= 0.0) {
            fail_data("synth: unreachable DRR target in band " + std::to_string(b));
        }
        gain[b] = std::sqrt(g2[b]);
    }

    FoaRir rir;
    rir.sample_rate = fs;
    rir.direct_index = direct_index;
    const double dipole = 1.0 / std::sqrt(3.0);
    for (int c = 0; c < kFoaChannels; ++c) {
        rir.ch[c].assign(total_len, 0.0);
        rir.ch[c][direct_index] = gains[c];
        const double iso = (c == 0) ? 1.0 : dipole;
        for (int b = 0; b < 10; ++b) {
            const double g = gain[b] * iso;
            const auto& t = tail[b][c];
            for (int i = tail_start; i < total_len; ++i) rir.ch[c][i] += g * t[i];
        }
    }
    return rir;
}

FoaSignal convolve_foa(std::span<const double> dry, const FoaRir& rir, double seconds) {
    FoaSignal out;
    out.sample_rate = rir.sample_rate;
    for (int c = 0; c < kFoaChannels; ++c) {
        for (double v : rir.ch[c]) {
            if (!std::isfinite(v)) fail_data("convolve: non-finite RIR sample");
        }
        out.ch[c] = fft::convolve_real(dry, rir.ch[c]);
    }
    return conform_duration(std::move(out), seconds);
}

std::vector<double> synth_dry_signal(std::size_t n_samples, double sample_rate, StreamRng rng) {
    std::vector<double> x(n_samples);
    // Pink-ish shaping (Kellet's three-pole approximation).
    double b0 = 0.0, b1 = 0.0, b2 = 0.0;
    for (auto& v : x) {
        const double white = rng.normal();
        b0 = 0.99765 * b0 + white * 0.0990460;
        b1 = 0.96300 * b1 + white * 0.2965164;
        b2 = 0.57000 * b2 + white * 1.0526913;
        v = b0 + b1 + b2 + white * 0.1848;
    }
    // Syllabic amplitude modulation. Squaring the raised sine deepens the
    // dips to about -26 dB, leaving room for reverberant tails to show.
    const double f_mod = rng.uniform(3.0, 5.0);
    const double phase = rng.uniform(0.0, 2.0 * kPi);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double t = static_cast<double>(i) / sample_rate;
        const double env = 0.5 + 0.5 * std::sin(2.0 * kPi * f_mod * t + phase);
        x[i] *= 0.05 + 0.95 * env * env;
    }

    // Utterance-like pauses (bursts of 0.5-1.2 s separated by 0.25-0.5 s
    // of silence, 10 ms ramps): the room's free decay is fully visible
    // inside each gap.
    const int ramp = static_cast<int>(0.010 * sample_rate);
    std::size_t pos = static_cast<std::size_t>(rng.uniform(0.1, 0.7) * sample_rate);
    while (pos < n_samples) {
        const auto gap = static_cast<std::size_t>(rng.uniform(0.25, 0.5) * sample_rate);
        for (std::size_t i = 0; i < gap && pos + i < n_samples; ++i) {
            double g = 0.0;
            if (i < static_cast<std::size_t>(ramp)) {
                g = 1.0 - static_cast<double>(i) / ramp;
            } else if (gap - i < static_cast<std::size_t>(ramp)) {
                g = 1.0 - static_cast<double>(gap - i) / ramp;
            }
            x[pos + i] *= g;
        }
        pos += gap + static_cast<std::size_t>(rng.uniform(0.5, 1.2) * sample_rate);
    }
    double peak = 0.0;
    for (double v : x) peak = std::max(peak, std::abs(v));
    if (peak > 0.0) {
        for (double& v : x) v /= peak;
    }
    return x;
}

namespace {

// Highest measured DRR a band can reach given the direct impulse's own
// leakage past the window; targets are clamped below this in sampling.
std::array<double, 10> max_achievable_drr(const ThirdOctaveBank& bank) {
    const double fs = bank.sample_rate;
    const int len = 8192;
    const int d = len / 2;
    std::vector<double> imp(len, 0.0);
    imp[d] = 1.0;
    std::array<double, 10> out{};
    for (int b = 0; b < 10; ++b) {
        const auto e = direct_window_energies(sosfiltfilt(bank.filters[b].sections, imp), d, fs);
        out[b] = 10.0 * std::log10(e.in / std::max(e.after, 1e-300));
    }
    return out;
}

RoomSpec sample_room_spec(std::uint64_t dataset_seed, int room_index,
                          const std::array<double, 10>& drr_max) {
    StreamRng rng = StreamRng(dataset_seed).split(0x524f4f4d ^ static_cast<std::uint64_t>(room_index));
    RoomSpec spec;
    spec.seed = rng.next_u64();

    // Base decay log-uniform in [0.02, 0.2] s with a smooth spectral
    // tilt, mirroring how measured rooms vary gently across bands.
    const double ln_base = std::log(rng.log_uniform(0.02, 0.2));
    const double tilt = rng.uniform(-0.5, 0.5);
    for (int b = 0; b < 10; ++b) {
        const double jitter = rng.uniform(-0.05, 0.05);
        const double ln_tau = ln_base + tilt * (b / 9.0 - 0.5) + jitter;
        spec.tau_band_s[b] = std::clamp(std::exp(ln_tau), 0.02, 0.2);
    }

    const double drr_base = rng.uniform(-6.0, 18.0);
    const double drr_tilt = rng.uniform(-3.0, 3.0);
    for (int b = 0; b < 10; ++b) {
        const double want = drr_base + drr_tilt * (b / 9.0 - 0.5);
        spec.drr_target_db[b] = std::clamp(want, -6.0, std::min(18.0, drr_max[b] - 1.0));
    }

    spec.azimuth_rad = rng.uniform(-kPi, kPi);
    spec.elevation_rad = std::asin(rng.uniform(-1.0, 1.0));
    spec.direct_delay_ms = rng.uniform(2.0, 10.0);
    return spec;
}

nlohmann::json room_spec_json(const RoomSpec& s) {
    return {{"tau_band_s", s.tau_band_s},
            {"drr_target_db", s.drr_target_db},
            {"azimuth_rad", s.azimuth_rad},
            {"elevation_rad", s.elevation_rad},
            {"direct_delay_ms", s.direct_delay_ms},
            {"seed", s.seed}};
}

RoomSpec room_spec_from_json(const nlohmann::json& j) {
    RoomSpec s;
    for (int b = 0; b < 10; ++b) {
        s.tau_band_s[b] = j.at("tau_band_s").at(b).get<double>();
        s.drr_target_db[b] = j.at("drr_target_db").at(b).get<double>();
    }
    s.azimuth_rad = j.at("azimuth_rad").get<double>();
    s.elevation_rad = j.at("elevation_rad").get<double>();
    s.direct_delay_ms = j.at("direct_delay_ms").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

std::string zero_pad(int v, int width) {
    std::string s = std::to_string(v);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

}  // namespace

DatasetManifest build_dataset(const BuildDatasetConfig& cfg) {
    if (cfg.n_rooms < 2) fail_usage("build_dataset: need at least 2 rooms");
    if (cfg.utts_per_room < 1) fail_usage("build_dataset: utts_per_room must be >= 1");

    const fs::path out(cfg.out_dir);
    fs::create_directories(out / "audio");
    fs::create_directories(out / "rirs");
    fs::create_directories(out / "labels");

    const ThirdOctaveBank bank = build_third_octave_bank(cfg.sample_rate);
    const std::array<double, 10> drr_max = max_achievable_drr(bank);

    // Optional user-supplied dry corpus.
    std::vector<std::string> dry_files;
    if (cfg.dry_source != "synthetic") {
        for (const auto& entry : fs::directory_iterator(cfg.dry_source)) {
            if (entry.path().extension() == ".wav") dry_files.push_back(entry.path().string());
        }
        std::sort(dry_files.begin(), dry_files.end());
        if (dry_files.empty()) fail_data("build_dataset: no .wav files in " + cfg.dry_source);
    }

    // Room-disjoint split assignment.
    std::vector<int> order(cfg.n_rooms);
    for (int i = 0; i < cfg.n_rooms; ++i) order[i] = i;
    StreamRng split_rng = StreamRng(cfg.seed).split(0x53504c49);
    for (int i = cfg.n_rooms - 1; i > 0; --i) {
        std::swap(order[i], order[split_rng.uniform_int(0, i)]);
    }
    int n_train = std::max(1, static_cast<int>(cfg.train_frac * cfg.n_rooms));
    int n_val = cfg.n_rooms - n_train >= 2 ? std::max(1, static_cast<int>(cfg.val_frac * cfg.n_rooms)) : 0;
    if (n_train + n_val >= cfg.n_rooms) n_train = cfg.n_rooms - n_val - 1;
    std::vector<std::string> split_of(cfg.n_rooms);
    for (int i = 0; i < cfg.n_rooms; ++i) {
        split_of[order[i]] = i < n_train ? "train" : (i < n_train + n_val ? "val" : "test");
    }

    const auto n_utt_samples =
        static_cast<std::size_t>(std::lround(4.0 * cfg.sample_rate));

    DatasetManifest manifest;
    manifest.seed = cfg.seed;
    manifest.sample_rate = cfg.sample_rate;
    manifest.records.resize(static_cast<std::size_t>(cfg.n_rooms) * cfg.utts_per_room);

    std::vector<std::string> errors(cfg.n_rooms);

#pragma omp parallel for schedule(dynamic)
    for (int room = 0; room < cfg.n_rooms; ++room) {
        try {
            const RoomSpec spec = sample_room_spec(cfg.seed, room, drr_max);
            const FoaRir rir = synth_foa_rir(spec, bank);

            const std::string rir_id = "room_" + zero_pad(room, 4);
            const std::string rir_rel = "rirs/" + rir_id + ".wav";
            const std::string label_rel = "labels/" + rir_id + ".json";

            FoaSignal rir_sig;
            rir_sig.sample_rate = cfg.sample_rate;
            rir_sig.ch = rir.ch;
            write_foa_wav((out / rir_rel).string(), rir_sig);

            const RirLabels labels = labels_from_rir(rir.w_channel(), bank);
            for (int b = 0; b < 10; ++b) {
                if (labels.t60.flags[b]) {
                    fail_numeric("build_dataset: insufficient decay range in synthesized RIR");
                }
            }
            {
                std::ofstream lf((out / label_rel).string(), std::ios::trunc);
                lf << labels_to_json(rir_id, labels) << "\n";
            }

            for (int u = 0; u < cfg.utts_per_room; ++u) {
                const std::string utt_id = rir_id + "_utt_" + zero_pad(u, 2);
                const std::string audio_rel = "audio/" + utt_id + ".wav";

                std::vector<double> dry;
                // Synthetic dry material is shared across rooms per
                // utterance slot: examples then differ by room acoustics
                // only, which is what a desk-scale model must learn.
                StreamRng dry_rng = StreamRng(cfg.seed).split(0x44525900 ^
                                                              static_cast<std::uint64_t>(u));
                if (dry_files.empty()) {
                    dry = synth_dry_signal(n_utt_samples, cfg.sample_rate, dry_rng);
                } else {
                    const auto pick = static_cast<std::size_t>(dry_rng.uniform_int(
                        0, static_cast<std::int64_t>(dry_files.size()) - 1));
                    WavData w = read_wav(dry_files[pick]);
                    if (w.channels.size() != 1) {
                        fail_data("build_dataset: dry corpus must be mono: " + dry_files[pick]);
                    }
                    dry.assign(w.channels[0].begin(), w.channels[0].end());
                    dry.resize(n_utt_samples, 0.0);
                }

                FoaSignal utt = convolve_foa(dry, rir, 4.0);
                double peak = 0.0;
                for (const auto& ch : utt.ch) {
                    for (double v : ch) peak = std::max(peak, std::abs(v));
                }
                if (peak > 0.0) {
                    const double g = 0.5 / peak;
                    for (auto& ch : utt.ch) {
                        for (double& v : ch) v *= g;
                    }
                }
                write_foa_wav((out / audio_rel).string(), utt);

                UtteranceRecord& rec =
                    manifest.records[static_cast<std::size_t>(room) * cfg.utts_per_room + u];
                rec.utt_id = utt_id;
                rec.audio_path = audio_rel;
                rec.rir_id = rir_id;
                rec.rir_path = rir_rel;
                rec.label_path = label_rel;
                rec.split = split_of[room];
                rec.room_index = room;
                rec.room = spec;
            }
        } catch (const std::exception& e) {
            errors[room] = e.what();
        }
    }

    for (const auto& e : errors) {
        if (!e.empty()) fail_data("build_dataset: room synthesis failed: " + e);
    }

    write_manifest((out / "manifest.jsonl").string(), manifest);

    nlohmann::json meta = {{"seed", cfg.seed},
                           {"sample_rate", cfg.sample_rate},
                           {"n_rooms", cfg.n_rooms},
                           {"utts_per_room", cfg.utts_per_room},
                           {"dry_source", cfg.dry_source},
                           {"ambisonics", "FOA W,X,Y,Z (SN3D)"},
                           {"splits", {{"train", n_train}, {"val", n_val},
                                       {"test", cfg.n_rooms - n_train - n_val}}}};
    std::ofstream mf((out / "dataset.json").string(), std::ios::trunc);
    mf << meta.dump(2) << "\n";
    return manifest;
}

void write_manifest(const std::string& path, const DatasetManifest& m) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) fail_data("manifest: cannot open for writing: " + path);
    for (const auto& r : m.records) {
        nlohmann::json j = {{"utt_id", r.utt_id},       {"audio_path", r.audio_path},
                            {"rir_id", r.rir_id},       {"rir_path", r.rir_path},
                            {"label_path", r.label_path}, {"split", r.split},
                            {"room_index", r.room_index}, {"room", room_spec_json(r.room)},
                            {"seed", m.seed},           {"sample_rate", m.sample_rate}};
        f << j.dump() << "\n";
    }
}

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail_data("manifest: cannot open: " + path);
    DatasetManifest m;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail_data("manifest: bad JSON line in " + path + ": " + e.what());
        }
        UtteranceRecord r;
        r.utt_id = j.at("utt_id").get<std::string>();
        r.audio_path = j.at("audio_path").get<std::string>();
        r.rir_id = j.at("rir_id").get<std::string>();
        r.rir_path = j.at("rir_path").get<std::string>();
        r.label_path = j.at("label_path").get<std::string>();
        r.split = j.at("split").get<std::string>();
        r.room_index = j.at("room_index").get<int>();
        r.room = room_spec_from_json(j.at("room"));
        m.seed = j.at("seed").get<std::uint64_t>();
        m.sample_rate = j.at("sample_rate").get<double>();
        m.records.push_back(std::move(r));
    }
    if (m.records.empty()) fail_data("manifest: no records in " + path);
    return m;
}

}  // namespace ambiroom
