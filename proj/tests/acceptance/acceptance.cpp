// Acceptance suite: one criterion per invocation (argv[1] in 1..10), one
// PASS/FAIL line per criterion on stdout, exit 0 only if the criterion
// holds within its stated tolerance and budget.

#include <array>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ambiroom/acoustics.hpp"
#include "ambiroom/engine.hpp"
#include "ambiroom/error.hpp"
#include "ambiroom/fft.hpp"
#include "ambiroom/hash.hpp"
#include "ambiroom/metrics.hpp"
#include "ambiroom/model.hpp"
#include "ambiroom/rng.hpp"
#include "ambiroom/sscv.hpp"
#include "ambiroom/synthroom.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;
using namespace ambiroom;
using cplx = std::complex<double>;
using Clock = std::chrono::steady_clock;

namespace {

struct Criterion {
    int id = 0;
    std::string title;
    std::vector<std::string> failures;

    void require(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }

    int finish(double seconds) {
        std::ostringstream line;
        line.precision(4);
        if (failures.empty()) {
            line << "PASS criterion " << id << " [" << title << "] (" << seconds << " s)";
            std::cout << line.str() << std::endl;
            return 0;
        }
        line << "FAIL criterion " << id << " [" << title << "] (" << seconds << " s)";
        std::cout << line.str() << std::endl;
        for (const auto& f : failures) std::cout << "  - " << f << std::endl;
        return 1;
    }
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

Cov4 random_psd(StreamRng& rng, int k = 6) {
    std::vector<cplx> a(4 * k);
    for (auto& v : a) v = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
    Cov4 c{};
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            cplx acc(0, 0);
            for (int t = 0; t < k; ++t) acc += a[i * k + t] * std::conj(a[j * k + t]);
            c[i * 4 + j] = acc;
        }
    }
    return c;
}

CovarianceSeries one_matrix_series(const Cov4& c) {
    CovarianceSeries s;
    s.frames = 1;
    s.bands = 1;
    s.m.assign(c.begin(), c.end());
    return s;
}

FoaSignal random_foa(std::size_t n, std::uint64_t seed, double amp = 0.1) {
    FoaSignal x;
    StreamRng rng(seed);
    for (auto& ch : x.ch) {
        ch.resize(n);
        for (auto& v : ch) v = amp * rng.normal();
    }
    return x;
}

// --- criterion 1: SSCV losslessness ---------------------------------------

int criterion_1(Criterion& c) {
    const auto t0 = Clock::now();
    StreamRng rng(0xACC1);
    const RealDftBasis basis = RealDftBasis::standard();
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const Cov4 m = random_psd(rng);
        const SscvSeries v = vectorize(one_matrix_series(m), basis);
        const Cov4 back = invert_vectorize(std::span<const double>(v.at(0, 0), 16), basis);
        double num = 0.0, den = 0.0;
        for (int i = 0; i < 16; ++i) {
            num += std::norm(back[i] - m[i]);
            den += std::norm(m[i]);
        }
        worst = std::max(worst, std::sqrt(num / den));
    }
    const double dt = seconds_since(t0);
    c.require(worst < 1e-9, "max relative Frobenius error " + std::to_string(worst) + " >= 1e-9");
    c.require(dt < 1.0, "runtime " + std::to_string(dt) + " s exceeds 1 s");
    return c.finish(dt);
}

// --- criterion 2: gain invariance ------------------------------------------

int criterion_2(Criterion& c) {
    const auto t0 = Clock::now();
    const FeatureConfig fc;
    const MelFilterbank fb = fc.mel();
    const FrameSpec spec = fc.frame_spec();
    const SmoothingParams p = SmoothingParams::constant(0.4, fc.mel_bands);

    const FoaSignal x = random_foa(16000, 0xACC2);
    const SscvSeries base = sscv_pipeline(x, spec, fb, p);

    for (double g : {0.1, 1.0, 10.0}) {
        FoaSignal xs = x;
        for (auto& ch : xs.ch) {
            for (auto& v : ch) v *= g;
        }
        const SscvSeries scaled = sscv_pipeline(xs, spec, fb, p);
        double worst_shift = 0.0, worst_coord = 0.0;
        for (int n = 0; n < base.frames; ++n) {
            for (int b = 0; b < base.bands; ++b) {
                worst_shift = std::max(
                    worst_shift,
                    std::abs(scaled.at(n, b)[0] - base.at(n, b)[0] - 2.0 * std::log(g)));
                for (int e = 1; e < 16; ++e) {
                    const double ref = base.at(n, b)[e];
                    worst_coord =
                        std::max(worst_coord, std::abs(scaled.at(n, b)[e] - ref) /
                                                  std::max(1.0, std::abs(ref)));
                }
            }
        }
        c.require(worst_shift < 1e-9, "coordinate-0 shift error " + std::to_string(worst_shift) +
                                          " >= 1e-9 at g=" + std::to_string(g));
        c.require(worst_coord < 1e-11, "coordinates 1..15 moved by " +
                                           std::to_string(worst_coord) +
                                           " (beyond f64 rounding) at g=" + std::to_string(g));
    }
    return c.finish(seconds_since(t0));
}

// --- criterion 3: covariance vs naive oracle --------------------------------

int criterion_3(Criterion& c) {
    const auto t0 = Clock::now();
    StreamRng rng(0xACC3);
    const MelFilterbank fb = build_mel_filterbank(16000, 1536, 52, 0, 8000);

    SpectralFrames x;
    x.frames = 100;
    x.channels = 4;
    x.bins = 769;
    x.frame_len = 1536;
    x.data.resize(static_cast<std::size_t>(x.frames) * 4 * x.bins);
    for (auto& v : x.data) v = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));

    const CovarianceSeries cov = banded_covariance(x, fb);
    double worst = 0.0;
    for (int n = 0; n < x.frames; ++n) {
        for (int b = 0; b < fb.band_count(); ++b) {
            const MelBand& band = fb.bands[b];
            for (int i = 0; i < 4; ++i) {
                for (int j = 0; j < 4; ++j) {
                    cplx acc(0, 0);
                    for (std::size_t k = 0; k < band.bins.size(); ++k) {
                        acc += band.weights[k] * x.at(n, i)[band.bins[k]] *
                               std::conj(x.at(n, j)[band.bins[k]]);
                    }
                    acc /= static_cast<double>(band.bins.size());
                    worst = std::max(worst, std::abs(cov.at(n, b)[i * 4 + j] - acc));
                }
            }
        }
    }
    c.require(worst < 1e-12, "max covariance deviation " + std::to_string(worst) + " >= 1e-12");
    return c.finish(seconds_since(t0));
}

// --- criterion 4: transform unitarity ----------------------------------------

int criterion_4(Criterion& c) {
    const auto t0 = Clock::now();
    const RealDftBasis f = RealDftBasis::standard();
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            double dot = 0.0;
            for (int k = 0; k < 4; ++k) dot += f.f[i][k] * f.f[j][k];
            c.require(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-12,
                      "F F^T deviates from identity at (" + std::to_string(i) + "," +
                          std::to_string(j) + ")");
        }
    }

    StreamRng rng(0xACC4);
    for (int trial = 0; trial < 200; ++trial) {
        const Cov4 m = random_psd(rng);
        const SscvSeries v = covariance_vectors(one_matrix_series(m), f);
        double vec_energy = 0.0, mat_energy = 0.0;
        for (int e = 0; e < 16; ++e) vec_energy += v.at(0, 0)[e] * v.at(0, 0)[e];
        for (int i = 0; i < 16; ++i) mat_energy += std::norm(m[i]);
        c.require(std::abs(vec_energy - mat_energy) <= 1e-12 * std::max(1.0, mat_energy),
                  "pair-transform energy not preserved (trial " + std::to_string(trial) + ")");
    }
    return c.finish(seconds_since(t0));
}

// --- criterion 5: label oracles ----------------------------------------------

int criterion_5(Criterion& c) {
    const auto t0 = Clock::now();
    const double fs = 16000.0;
    const ThirdOctaveBank bank = build_third_octave_bank(fs);

    for (double tau : {0.03, 0.05, 0.1}) {
        // Direct-free per-band tonal exponential RIR: smooth band energy
        // envelopes make the analytic T60/C50 values exact targets.
        Rir r;
        r.sample_rate = fs;
        r.direct_index = 0;
        const int n = static_cast<int>(std::lround(std::max(12.0 * tau, 0.3) * fs));
        r.h.assign(n, 0.0);
        for (int b = 0; b < 10; ++b) {
            const double fc = b == 9 ? 7550.0 : 1000.0 * std::pow(2.0, b / 3.0);
            for (int i = 0; i < n; ++i) {
                const double t = i / fs;
                r.h[i] += 0.05 * std::exp(-t / tau) * std::cos(2.0 * M_PI * fc * t);
            }
        }
        const RirLabels labels = labels_from_rir(r, bank);
        const double t60_want = 6.9077552790 * tau;
        const double c50_want = 10.0 * std::log10(std::exp(0.1 / tau) - 1.0);
        for (int b = 0; b < 10; ++b) {
            c.require(!labels.t60.flags[b], "tau " + std::to_string(tau) + " band " +
                                                std::to_string(b) + ": insufficient decay");
            c.require(std::abs(labels.t60.values[b] / t60_want - 1.0) < 0.05,
                      "T60 off by >5% at tau " + std::to_string(tau) + " band " +
                          std::to_string(b) + " (" + std::to_string(labels.t60.values[b]) +
                          " vs " + std::to_string(t60_want) + ")");
            c.require(std::abs(labels.c50.values[b] - c50_want) < 0.3,
                      "C50 off by >0.3 dB at tau " + std::to_string(tau) + " band " +
                          std::to_string(b) + " (" + std::to_string(labels.c50.values[b]) +
                          " vs " + std::to_string(c50_want) + ")");
        }

        // Direct + calibrated tail: measured DRR against the constructed
        // per-band target.
        RoomSpec spec;
        spec.tau_band_s.fill(tau);
        spec.drr_target_db.fill(3.0);
        spec.azimuth_rad = 0.8;
        spec.elevation_rad = -0.2;
        spec.direct_delay_ms = 4.0;
        spec.seed = 0xACC5 + static_cast<std::uint64_t>(tau * 1000);
        const FoaRir rir = synth_foa_rir(spec, bank);
        const RirLabels dl = labels_from_rir(rir.w_channel(), bank);
        for (int b = 0; b < 10; ++b) {
            c.require(std::abs(dl.drr.values[b] - 3.0) < 1.0,
                      "DRR off by >1 dB at tau " + std::to_string(tau) + " band " +
                          std::to_string(b) + " (" + std::to_string(dl.drr.values[b]) + ")");
        }
    }
    const double dt = seconds_since(t0);
    c.require(dt < 30.0, "runtime " + std::to_string(dt) + " s exceeds 30 s");
    return c.finish(dt);
}

// --- criterion 6: gradient integrity ------------------------------------------

int criterion_6(Criterion& c) {
    const auto t0 = Clock::now();
    using engine::grad_check;
    using engine::Tensor;

    auto leaf = [](engine::Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
        StreamRng rng(seed);
        std::vector<double> v(engine::numel(shape));
        for (auto& x : v) x = rng.uniform(lo, hi);
        return Tensor<double>::leaf(std::move(shape), std::move(v), true);
    };

    {
        auto x = leaf({2, 4, 5, 6}, 1);
        auto w = leaf({3, 2, 1, 3, 3}, 2);
        auto b = leaf({3}, 3);
        auto build = [&]() {
            return engine::mse_loss(engine::relu(engine::conv3d(x, w, b)),
                                    std::vector<double>(3 * 4 * 5 * 6, 0.2));
        };
        c.require(grad_check(build, x, 48) < 1e-5, "conv3d input gradient exceeds 1e-5");
        c.require(grad_check(build, w, 48) < 1e-5, "conv3d kernel gradient exceeds 1e-5");
        c.require(grad_check(build, b, 8) < 1e-5, "conv3d bias gradient exceeds 1e-5");
    }
    {
        auto x = leaf({1, 2, 6, 6}, 4);
        auto build = [&]() {
            return engine::mse_loss(engine::flatten(engine::maxpool3d_122(x)),
                                    std::vector<double>(2 * 3 * 3, 0.0));
        };
        c.require(grad_check(build, x, 48) < 1e-5, "maxpool gradient exceeds 1e-5");
    }
    {
        auto x = leaf({24}, 5);
        auto w = leaf({7, 24}, 6);
        auto b = leaf({7}, 7);
        auto build = [&]() {
            return engine::mse_loss(engine::relu(engine::linear(x, w, b)),
                                    std::vector<double>(7, 0.1));
        };
        c.require(grad_check(build, x) < 1e-5, "linear input gradient exceeds 1e-5");
        c.require(grad_check(build, w, 48) < 1e-5, "linear weight gradient exceeds 1e-5");
        c.require(grad_check(build, b) < 1e-5, "linear bias gradient exceeds 1e-5");
    }
    {
        auto x = leaf({12}, 8);
        auto build = [&]() {
            return engine::mse_loss(engine::sigmoid(x), std::vector<double>(12, 0.5));
        };
        c.require(grad_check(build, x) < 1e-5, "sigmoid gradient exceeds 1e-5");
    }
    {
        auto v = leaf({6, 3, 4}, 9);
        auto alpha = Tensor<double>::leaf({3}, {0.25, 0.5, 0.75}, true);
        auto build = [&]() {
            return engine::mse_loss(engine::flatten(engine::one_pole_smooth(v, alpha)),
                                    std::vector<double>(6 * 3 * 4, 0.1));
        };
        c.require(grad_check(build, v, 48) < 1e-5, "smoothing input gradient exceeds 1e-5");
        c.require(grad_check(build, alpha) < 1e-5,
                  "alpha gradient through the recurrence exceeds 1e-5");
    }
    {
        auto v = leaf({4, 2, 5}, 10, 0.4, 2.0);
        auto build = [&]() {
            return engine::mse_loss(engine::flatten(engine::log_normalize(v, 1e-12)),
                                    std::vector<double>(4 * 2 * 5, 0.2));
        };
        c.require(grad_check(build, v, 40) < 1e-5, "log_normalize gradient exceeds 1e-5");
    }
    {
        // Full toy model, two blocks, alpha included.
        ModelConfig cfg;
        cfg.frames = 8;
        cfg.bands = 8;
        cfg.depth = 4;
        cfg.block_widths = {2, 3};
        cfg.mlp_h1 = 12;
        cfg.mlp_h2 = 6;
        cfg.dropout = 0.0;
        FoaConv3dNet<double> net(cfg, 11);
        StreamRng rng(12);
        std::vector<double> vv(static_cast<std::size_t>(cfg.frames) * cfg.bands * cfg.depth);
        for (std::size_t i = 0; i < vv.size(); ++i) {
            vv[i] = (i % cfg.depth == 0) ? rng.uniform(0.5, 2.0) : rng.uniform(-1.0, 1.0);
        }
        auto x = Tensor<double>::leaf({cfg.frames, cfg.bands, cfg.depth}, std::move(vv), false);
        const std::vector<double> target(10, 0.3);
        auto build = [&]() { return engine::mse_loss(net.forward(x, false, 0), target); };
        c.require(grad_check(build, net.raw_alpha.tensor) < 1e-4,
                  "toy model alpha gradient exceeds 1e-4");
        c.require(grad_check(build, net.blocks[0].w1.tensor, 18) < 1e-4,
                  "toy model conv gradient exceeds 1e-4");
        c.require(grad_check(build, net.fc1_w.tensor, 18) < 1e-4,
                  "toy model fc gradient exceeds 1e-4");
        c.require(grad_check(build, net.fc3_b.tensor, 10) < 1e-4,
                  "toy model output bias gradient exceeds 1e-4");
    }
    const double dt = seconds_since(t0);
    c.require(dt < 120.0, "runtime " + std::to_string(dt) + " s exceeds 2 min");
    return c.finish(dt);
}

// --- criterion 7: shape contract -----------------------------------------------

int criterion_7(Criterion& c) {
    const auto t0 = Clock::now();
    const FeatureConfig fc;
    const FoaSignal x = random_foa(64000, 0xACC7);
    const SscvSeries s = sscv_pipeline(x, fc.frame_spec(), fc.mel(),
                                       SmoothingParams::constant(0.5, fc.mel_bands));
    c.require(s.frames == 82, "pipeline frames " + std::to_string(s.frames) + " != 82");
    c.require(s.bands == 52, "pipeline bands " + std::to_string(s.bands) + " != 52");
    c.require(s.v.size() == 82u * 52u * 16u, "pipeline element count mismatch");

    ModelConfig mc;
    c.require(mc.block_widths.back() == 256, "final block width != 256");
    c.require(mc.pooled_frames() == 5, "pooled time axis != 5");
    c.require(mc.pooled_bands() == 3, "pooled band axis != 3");
    c.require(mc.flatten_dim() == 61440, "flatten width != 61440");

    FoaConv3dNet<float> net(mc, 0xACC7);
    std::vector<float> covvec(s.v.begin(), s.v.end());
    const auto out = net.predict_one(covvec);
    c.require(out.size() == 10, "model output size != 10");
    for (double v : out) c.require(std::isfinite(v), "non-finite model output");
    return c.finish(seconds_since(t0));
}

// --- criteria 8..10: dataset-scale checks ----------------------------------------

struct Pipeline {
    fs::path root;
    DatasetManifest manifest;
    FeatureConfig fc;

    void synth(int rooms, std::uint64_t seed) {
        BuildDatasetConfig cfg;
        cfg.n_rooms = rooms;
        cfg.seed = seed;
        cfg.out_dir = root.string();
        manifest = build_dataset(cfg);
        fc = FeatureConfig{};
    }

    void extract() {
        const fs::path feat = root / "features";
        fs::create_directories(feat);
        const MelFilterbank fb = fc.mel();
        const FrameSpec spec = fc.frame_spec();
        std::vector<std::string> errors(manifest.records.size());
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(manifest.records.size());
             ++i) {
            try {
                const auto& rec = manifest.records[i];
                FoaSignal x = read_foa_wav((root / rec.audio_path).string());
                x = conform_duration(std::move(x), 4.0);
                const FramedSignal frames = frame_signal(x, spec);
                const SpectralFrames spectra = dft_frames(frames);
                const CovarianceSeries cov = banded_covariance(spectra, fb);
                const SscvSeries s = covariance_vectors(cov, RealDftBasis::standard());
                save_feature_file((feat / (rec.utt_id + ".sscv")).string(), s, fc);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
        for (const auto& e : errors) {
            if (!e.empty()) fail_data("acceptance extract: " + e);
        }
    }

    TrainingData load(Target target) {
        return load_training_data(manifest, root.string(), (root / "features").string(), target,
                                  target == Target::T60);
    }
};

int criterion_8(Criterion& c, const fs::path& workdir) {
    const auto t0 = Clock::now();
    Pipeline pipe;
    pipe.root = workdir / "ds200";
    fs::remove_all(pipe.root);
    pipe.synth(200, 42);
    pipe.extract();

    const std::array<Target, 3> targets = {Target::T60, Target::Drr, Target::C50};
    for (std::size_t ti = 0; ti < targets.size(); ++ti) {
        const Target target = targets[ti];
        const TrainingData data = pipe.load(target);

        ModelConfig mc;
        mc.frames = data.frames;
        mc.bands = data.bands;
        TrainConfig tc;
        tc.target = target;
        tc.log_t60 = target == Target::T60;
        tc.seed = 7 + ti;
        tc.feature = pipe.fc;

        FoaConv3dNet<float> net(mc, tc.seed);
        const TrainReport report = train_model(net, data, tc);

        BandMatrix preds, tgts;
        for (const auto& ex : data.test) {
            preds.push_back(net.predict_one(ex.covvec));
            std::array<double, 10> t{};
            for (int b = 0; b < 10; ++b) t[b] = ex.target[b];
            tgts.push_back(t);
        }
        std::array<double, 10> mean{};
        for (const auto& ex : data.train) {
            for (int b = 0; b < 10; ++b) mean[b] += ex.target[b];
        }
        for (double& v : mean) v /= static_cast<double>(data.train.size());
        BandMatrix base(tgts.size());
        for (auto& row : base) row = mean;

        const auto mae = mae_per_band(preds, tgts);
        const auto base_mae = mae_per_band(base, tgts);
        const auto pov = pov_per_band(preds, tgts);
        double mean_mae = 0, mean_base = 0, mean_pov = 0;
        for (int b = 0; b < 10; ++b) {
            mean_mae += mae[b] / 10;
            mean_base += base_mae[b] / 10;
            mean_pov += pov[b] / 10;
        }
        std::cout << "  target " << target_name(target) << ": epochs "
                  << report.epochs.size() << ", test MAE " << mean_mae << ", baseline "
                  << mean_base << ", mean PoV " << mean_pov << std::endl;

        if (target == Target::T60) {
            c.require(mean_mae <= 0.7 * mean_base,
                      "log-T60 MAE " + std::to_string(mean_mae) + " not 30% below baseline " +
                          std::to_string(mean_base));
        }
        c.require(mean_pov > 0.0,
                  "mean PoV " + std::to_string(mean_pov) + " not positive for " +
                      target_name(target));
    }
    const double dt = seconds_since(t0);
    c.require(dt < 7200.0, "runtime " + std::to_string(dt) + " s exceeds 2 h");
    return c.finish(dt);
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

int criterion_9(Criterion& c, const fs::path& workdir) {
    const auto t0 = Clock::now();
#ifdef _OPENMP
    omp_set_num_threads(1);  // deterministic mode
#endif
    std::array<std::vector<double>, 2> losses;
    std::array<std::string, 2> eval_jsons;
    for (int run = 0; run < 2; ++run) {
        Pipeline pipe;
        pipe.root = workdir / ("det" + std::to_string(run));
        fs::remove_all(pipe.root);
        pipe.synth(10, 99);
        pipe.extract();

        const TrainingData data = pipe.load(Target::T60);
        ModelConfig mc;
        mc.frames = data.frames;
        mc.bands = data.bands;
        TrainConfig tc;
        tc.seed = 3;
        tc.max_epochs = 2;
        tc.feature = pipe.fc;
        tc.deterministic = true;
        FoaConv3dNet<float> net(mc, tc.seed);
        const TrainReport report = train_model(net, data, tc);
        for (const auto& e : report.epochs) {
            losses[run].push_back(e.train_loss);
            losses[run].push_back(e.val_loss);
        }

        BandMatrix preds, tgts;
        const auto& set = data.test.empty() ? data.val : data.test;
        for (const auto& ex : set) {
            preds.push_back(net.predict_one(ex.covvec));
            std::array<double, 10> t{};
            for (int b = 0; b < 10; ++b) t[b] = ex.target[b];
            tgts.push_back(t);
        }
        EvalReport rep;
        rep.model_id = "det";
        rep.dataset_hash = "fixed-seed-99";
        MetricGroup g;
        g.parameter = "log_t60";
        g.n = static_cast<int>(preds.size());
        g.mae = mae_per_band(preds, tgts);
        g.pov = pov_per_band(preds, tgts);
        g.pcc = pcc_per_band(preds, tgts);
        rep.groups.push_back(g);
        eval_jsons[run] = rep.to_json();
    }

    // Dataset bytes identical across reruns.
    const fs::path a = workdir / "det0";
    const fs::path b = workdir / "det1";
    c.require(slurp(a / "manifest.jsonl") == slurp(b / "manifest.jsonl"),
              "manifest bytes differ between runs");
    for (const auto& rec : read_manifest((a / "manifest.jsonl").string()).records) {
        c.require(slurp(a / rec.audio_path) == slurp(b / rec.audio_path),
                  "audio bytes differ for " + rec.utt_id);
        c.require(slurp(a / rec.rir_path) == slurp(b / rec.rir_path),
                  "rir bytes differ for " + rec.rir_id);
        c.require(slurp(a / "features" / (rec.utt_id + ".sscv")) ==
                      slurp(b / "features" / (rec.utt_id + ".sscv")),
                  "feature bytes differ for " + rec.utt_id);
    }
    c.require(losses[0] == losses[1], "training losses differ between runs");
    c.require(eval_jsons[0] == eval_jsons[1], "eval reports differ between runs");
    return c.finish(seconds_since(t0));
}

int criterion_10(Criterion& c, const fs::path& workdir, const std::string& cli) {
    const auto t0 = Clock::now();
    const fs::path root = workdir / "cli";
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path ds = root / "ds";

    auto run = [&](const std::string& args) {
        const std::string cmd = cli + " " + args + " >> " + (root / "cli.log").string() + " 2>&1";
        const int rc = std::system(cmd.c_str());
        return rc == 0 ? 0 : 1;
    };

    c.require(run("synth --rooms 50 --seed 7 --out " + ds.string()) == 0, "synth exited nonzero");
    c.require(run("extract --manifest " + (ds / "manifest.jsonl").string() + " --out " +
                  (ds / "features").string()) == 0,
              "extract exited nonzero");
    c.require(run("train --manifest " + (ds / "manifest.jsonl").string() + " --features " +
                  (ds / "features").string() + " --target t60 --epochs 5 --seed 5 --out " +
                  (root / "model_t60").string()) == 0,
              "train exited nonzero");
    c.require(run("eval --manifest " + (ds / "manifest.jsonl").string() + " --features " +
                  (ds / "features").string() + " --checkpoint " + (root / "model_t60").string() +
                  " --out " + (root / "eval.json").string() + " --csv " +
                  (root / "eval.csv").string()) == 0,
              "eval exited nonzero");

    // predict on one dataset utterance and on silence (low-energy flag).
    {
        const DatasetManifest m = read_manifest((ds / "manifest.jsonl").string());
        const std::string wav = (ds / m.records.front().audio_path).string();
        const std::string cmd = cli + " predict --checkpoint " + (root / "model_t60").string() +
                                " --wav " + wav + " > " + (root / "predict.json").string();
        c.require(std::system(cmd.c_str()) == 0, "predict exited nonzero");
        FoaSignal silence;
        for (auto& ch : silence.ch) ch.assign(64000, 0.0);
        write_foa_wav((root / "silence.wav").string(), silence);
        const std::string cmd2 = cli + " predict --checkpoint " + (root / "model_t60").string() +
                                 " --wav " + (root / "silence.wav").string() + " > " +
                                 (root / "predict_silence.json").string();
        c.require(std::system(cmd2.c_str()) == 0, "predict on silence exited nonzero");
        try {
            const auto p = nlohmann::json::parse(slurp(root / "predict.json"));
            c.require(p.at("values").size() == 10, "predict band count");
            for (const auto& v : p.at("values")) {
                c.require(std::isfinite(v.get<double>()) && v.get<double>() > 0.0,
                          "predict t60 values must be positive seconds");
            }
            const auto ps = nlohmann::json::parse(slurp(root / "predict_silence.json"));
            c.require(ps.at("low_energy").get<bool>(), "silence input not flagged low-energy");
            for (const auto& v : ps.at("values")) {
                c.require(std::isfinite(v.get<double>()), "silence predictions must stay finite");
            }
        } catch (const std::exception& e) {
            c.require(false, std::string("predict output parsing failed: ") + e.what());
        }
    }

    // Schema checks on every emitted artifact.
    try {
        std::ifstream mf(ds / "manifest.jsonl");
        std::string line;
        int records = 0;
        while (std::getline(mf, line)) {
            if (line.empty()) continue;
            const auto j = nlohmann::json::parse(line);
            for (const char* key : {"utt_id", "audio_path", "rir_id", "label_path", "split"}) {
                c.require(j.contains(key), std::string("manifest record missing ") + key);
            }
            ++records;
        }
        c.require(records == 50, "expected 50 manifest records");

        const auto report = nlohmann::json::parse(slurp(root / "model_t60.report.json"));
        c.require(report.at("schema_version").get<int>() == 1, "train report schema version");
        c.require(!report.at("epochs").empty(), "train report has no epochs");

        const auto ev = nlohmann::json::parse(slurp(root / "eval.json"));
        c.require(ev.at("schema_version").get<int>() == 1, "eval schema version");
        c.require(ev.at("groups").size() == 2, "t60 eval should carry log_t60 and t60 groups");
        for (const auto& g : ev.at("groups")) {
            c.require(g.at("mae").size() == 10, "eval mae band count");
            c.require(g.at("pov").size() == 10, "eval pov band count");
            c.require(g.at("pcc").size() == 10, "eval pcc band count");
        }

        const std::string csv = slurp(root / "eval.csv");
        c.require(csv.rfind("schema_version,model_id,dataset_hash,parameter,band_index,"
                            "band_center_hz,metric,value,n",
                            0) == 0,
                  "eval csv header mismatch");
    } catch (const std::exception& e) {
        c.require(false, std::string("artifact parsing failed: ") + e.what());
    }

    const double dt = seconds_since(t0);
    c.require(dt < 1200.0, "runtime " + std::to_string(dt) + " s exceeds 20 min");
    return c.finish(dt);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <criterion 1..10> [--workdir DIR] [--cli PATH]"
                  << std::endl;
        return 2;
    }
    const int id = std::atoi(argv[1]);
    fs::path workdir = "acceptance_work";
    std::string cli;
    for (int i = 2; i + 1 < argc; i += 2) {
        const std::string flag = argv[i];
        if (flag == "--workdir") workdir = argv[i + 1];
        if (flag == "--cli") cli = argv[i + 1];
    }
    fs::create_directories(workdir);

    static const char* kTitles[11] = {"",
                                      "SSCV losslessness",
                                      "SSCV gain invariance",
                                      "covariance correctness",
                                      "transform unitarity",
                                      "label oracles",
                                      "gradient integrity",
                                      "shape contract",
                                      "learning signal",
                                      "determinism",
                                      "end-to-end CLI"};
    if (id < 1 || id > 10) {
        std::cerr << "criterion must be in 1..10" << std::endl;
        return 2;
    }

    Criterion c;
    c.id = id;
    c.title = kTitles[id];
    try {
        switch (id) {
            case 1: return criterion_1(c);
            case 2: return criterion_2(c);
            case 3: return criterion_3(c);
            case 4: return criterion_4(c);
            case 5: return criterion_5(c);
            case 6: return criterion_6(c);
            case 7: return criterion_7(c);
            case 8: return criterion_8(c, workdir);
            case 9: return criterion_9(c, workdir);
            case 10: return criterion_10(c, workdir, cli);
        }
    } catch (const std::exception& e) {
        c.require(false, std::string("exception: ") + e.what());
        return c.finish(0.0);
    }
    return 2;
}
