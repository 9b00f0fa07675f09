#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "doctest.h"

#include "ambiroom/acoustics.hpp"
#include "ambiroom/error.hpp"
#include "ambiroom/rng.hpp"

using namespace ambiroom;

namespace {

constexpr double kFs = 16000.0;

// Exponential-envelope RIR with unit-magnitude random signs: per-sample
// energy equals the envelope exactly, so broadband energy ratios are
// deterministic.
Rir exp_sign_rir(double tau, double seconds, std::uint64_t seed, int direct = 0) {
    StreamRng rng(seed);
    Rir r;
    r.sample_rate = kFs;
    r.direct_index = direct;
    const int n = static_cast<int>(seconds * kFs);
    r.h.resize(n);
    for (int i = 0; i < n; ++i) {
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        r.h[i] = sign * std::exp(-i / (tau * kFs));
    }
    return r;
}

// Per-band exponential tonal RIR: one sinusoid per third-octave band
// under a shared exponential envelope. Band-filtered energy envelopes
// are smooth, so per-band labels match the analytic values tightly.
Rir tonal_rir(const std::array<double, 10>& tau, double seconds, int direct_index,
              double direct_amp, const std::array<double, 10>& amp) {
    Rir r;
    r.sample_rate = kFs;
    r.direct_index = direct_index;
    const int n = static_cast<int>(seconds * kFs);
    r.h.assign(n, 0.0);
    if (direct_amp != 0.0) r.h[direct_index] = direct_amp;
    const int start = direct_index;
    for (int b = 0; b < 10; ++b) {
        const double fc = b == 9 ? 7550.0 : 1000.0 * std::pow(2.0, b / 3.0);
        for (int i = start; i < n; ++i) {
            const double t = (i - start) / kFs;
            r.h[i] += amp[b] * std::exp(-t / tau[b]) * std::cos(2.0 * M_PI * fc * t);
        }
    }
    return r;
}

}  // namespace

TEST_CASE("EDC of a single impulse starts at 0 dB then floors") {
    Rir r;
    r.sample_rate = kFs;
    r.h = {1.0, 0.0, 0.0, 0.0};
    const EnergyDecayCurve edc = schroeder_edc(r);
    CHECK(edc.edc_db[0] == 0.0);
    for (std::size_t i = 1; i < edc.edc_db.size(); ++i) CHECK(edc.edc_db[i] == kEdcFloorDb);
}

TEST_CASE("EDC is monotone non-increasing and errors on silence") {
    StreamRng rng(51);
    Rir r;
    r.sample_rate = kFs;
    r.h.resize(4000);
    for (auto& v : r.h) v = rng.uniform(-1, 1);
    const EnergyDecayCurve edc = schroeder_edc(r);
    CHECK(edc.edc_db[0] == 0.0);
    for (std::size_t i = 1; i < edc.edc_db.size(); ++i) {
        CHECK(edc.edc_db[i] <= edc.edc_db[i - 1] + 1e-12);
    }

    Rir zero;
    zero.sample_rate = kFs;
    zero.h.assign(100, 0.0);
    CHECK_THROWS_AS(schroeder_edc(zero), Error);
}

TEST_CASE("EDC slope of an exponential envelope is -8.686/tau dB per second") {
    const double tau = 0.05;
    const Rir r = exp_sign_rir(tau, 0.8, 52);
    const EnergyDecayCurve edc = schroeder_edc(r);
    const int i1 = static_cast<int>(0.05 * kFs);
    const int i2 = static_cast<int>(0.25 * kFs);
    const double slope = (edc.edc_db[i2] - edc.edc_db[i1]) / ((i2 - i1) / kFs);
    CHECK(slope == doctest::Approx(-8.685889638 / tau).epsilon(0.02));
}

TEST_CASE("t60 recovers 6.9078*tau for exponential decays") {
    for (double tau : {0.05, 0.1}) {
        const Rir r = exp_sign_rir(tau, 10.0 * tau, static_cast<std::uint64_t>(tau * 1000));
        const double t60 = t60_from_rir(r);
        CHECK(t60 == doctest::Approx(6.907755 * tau).epsilon(0.05));
    }
}

TEST_CASE("t60 equals exactly twice the fitted T30") {
    const Rir r = exp_sign_rir(0.07, 0.8, 53);
    const double t60 = t60_from_rir(r);

    // Independent re-fit of the same definition.
    const EnergyDecayCurve edc = schroeder_edc(r);
    std::size_t i5 = edc.edc_db.size(), i35 = edc.edc_db.size();
    for (std::size_t i = 0; i < edc.edc_db.size(); ++i) {
        if (i5 == edc.edc_db.size() && edc.edc_db[i] <= -5.0) i5 = i;
        if (edc.edc_db[i] <= -35.0) {
            i35 = i;
            break;
        }
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
    for (std::size_t i = i5; i <= i35; ++i) {
        const double t = i / kFs;
        sx += t;
        sy += edc.edc_db[i];
        sxx += t * t;
        sxy += t * edc.edc_db[i];
        n += 1;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double t30 = -30.0 / slope;
    CHECK(t60 == doctest::Approx(2.0 * t30).epsilon(1e-12));
}

TEST_CASE("t60 rejects an RIR without 35 dB of decay") {
    Rir r;
    r.sample_rate = kFs;
    r.h.assign(1000, 0.5);  // flat, never decays
    CHECK_THROWS_AS(t60_from_rir(r), Error);
}

TEST_CASE("drr: equal windowed and tail energies give 0 dB") {
    Rir r;
    r.sample_rate = kFs;
    r.h.assign(4000, 0.0);
    r.direct_index = 100;
    r.h[100] = 1.0;  // direct energy 1 inside the +-2.5 ms window
    // 2.5 ms at 16 kHz = 40 samples; window covers [60, 140].
    const int tail_start = 141;
    const int tail_len = 1000;
    for (int i = 0; i < tail_len; ++i) r.h[tail_start + i] = 1.0 / std::sqrt(tail_len);
    bool capped = true;
    CHECK(drr_from_rir(r, &capped) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(!capped);
}

TEST_CASE("drr hits a constructed 10 dB ratio") {
    Rir r;
    r.sample_rate = kFs;
    r.h.assign(4000, 0.0);
    r.direct_index = 100;
    r.h[100] = 1.0;
    const int tail_start = 141, tail_len = 2000;
    const double tail_energy = 0.1;
    for (int i = 0; i < tail_len; ++i) {
        r.h[tail_start + i] = std::sqrt(tail_energy / tail_len);
    }
    CHECK(drr_from_rir(r) == doctest::Approx(10.0).epsilon(0.01));
}

TEST_CASE("drr caps on a pure impulse") {
    Rir r;
    r.sample_rate = kFs;
    r.h.assign(2000, 0.0);
    r.direct_index = 50;
    r.h[50] = 1.0;
    bool capped = false;
    CHECK(drr_from_rir(r, &capped) == kLevelCapDb);
    CHECK(capped);
}

TEST_CASE("c50 matches the closed-form exponential ratio") {
    for (double tau : {0.05, 0.1}) {
        const Rir r = exp_sign_rir(tau, 12.0 * tau, 54);
        const double want = 10.0 * std::log10(std::exp(0.1 / tau) - 1.0);
        CHECK(c50_from_rir(r) == doctest::Approx(want).epsilon(0.02));
    }
}

TEST_CASE("c50 of a flat 100 ms tail is 0 dB and caps without late energy") {
    Rir r;
    r.sample_rate = kFs;
    r.direct_index = 0;
    r.h.assign(static_cast<int>(0.1 * kFs), 0.25);  // exactly 100 ms
    CHECK(c50_from_rir(r) == doctest::Approx(0.0).epsilon(1e-9));

    Rir early;
    early.sample_rate = kFs;
    early.direct_index = 0;
    early.h.assign(static_cast<int>(0.2 * kFs), 0.0);
    for (int i = 0; i < 100; ++i) early.h[i] = 0.3;
    bool capped = false;
    CHECK(c50_from_rir(early, &capped) == kLevelCapDb);
    CHECK(capped);

    Rir too_short;
    too_short.sample_rate = kFs;
    too_short.direct_index = 0;
    too_short.h.assign(100, 0.1);
    CHECK_THROWS_AS(c50_from_rir(too_short), Error);
}

TEST_CASE("band labels: uniform tau gives 10 nearly equal T60 values") {
    const ThirdOctaveBank bank = build_third_octave_bank(kFs);
    std::array<double, 10> tau{};
    tau.fill(0.06);
    std::array<double, 10> amp{};
    amp.fill(0.05);
    const Rir r = tonal_rir(tau, 0.7, 64, 0.0, amp);
    const RirLabels labels = labels_from_rir(r, bank);

    double lo = 1e9, hi = -1e9;
    for (int b = 0; b < 10; ++b) {
        REQUIRE(!labels.t60.flags[b]);
        lo = std::min(lo, labels.t60.values[b]);
        hi = std::max(hi, labels.t60.values[b]);
        CHECK(labels.t60.values[b] == doctest::Approx(6.907755 * 0.06).epsilon(0.05));
    }
    CHECK((hi - lo) / lo < 0.10);
}

TEST_CASE("band labels: tau ramp gives monotone T60 across bands") {
    const ThirdOctaveBank bank = build_third_octave_bank(kFs);
    std::array<double, 10> tau{};
    std::array<double, 10> amp{};
    for (int b = 0; b < 10; ++b) {
        tau[b] = 0.03 * std::pow(1.18, b);
        amp[b] = 0.05;
    }
    const Rir r = tonal_rir(tau, 1.6, 64, 0.0, amp);
    const RirLabels labels = labels_from_rir(r, bank);
    for (int b = 1; b < 10; ++b) {
        CHECK(labels.t60.values[b] > labels.t60.values[b - 1]);
    }
}

TEST_CASE("labels are invariant to RIR gain") {
    const ThirdOctaveBank bank = build_third_octave_bank(kFs);
    std::array<double, 10> tau{};
    tau.fill(0.05);
    std::array<double, 10> amp{};
    amp.fill(0.03);
    Rir r = tonal_rir(tau, 0.6, 64, 0.4, amp);
    const RirLabels a = labels_from_rir(r, bank);
    for (auto& v : r.h) v *= 3.0;
    const RirLabels b = labels_from_rir(r, bank);
    for (int band = 0; band < 10; ++band) {
        CHECK(std::abs(a.t60.values[band] - b.t60.values[band]) < 1e-9);
        CHECK(std::abs(a.drr.values[band] - b.drr.values[band]) < 1e-9);
        CHECK(std::abs(a.c50.values[band] - b.c50.values[band]) < 1e-9);
    }
}

TEST_CASE("t60 is shift invariant within 1%") {
    const Rir r = exp_sign_rir(0.06, 0.7, 55);
    Rir shifted;
    shifted.sample_rate = kFs;
    shifted.direct_index = 16;
    shifted.h.assign(r.h.size() + 16, 0.0);
    std::copy(r.h.begin(), r.h.end(), shifted.h.begin() + 16);
    CHECK(t60_from_rir(shifted) == doctest::Approx(t60_from_rir(r)).epsilon(0.01));
}

TEST_CASE("scaling the tail up strictly lowers C50 and DRR") {
    Rir r;
    r.sample_rate = kFs;
    r.direct_index = 100;
    r.h.assign(6000, 0.0);
    r.h[100] = 1.0;
    StreamRng rng(56);
    for (std::size_t i = 150; i < r.h.size(); ++i) {
        r.h[i] = 0.01 * rng.normal() * std::exp(-static_cast<double>(i - 150) / (0.05 * kFs));
    }
    const double c50_a = c50_from_rir(r);
    const double drr_a = drr_from_rir(r);
    for (std::size_t i = 150; i < r.h.size(); ++i) r.h[i] *= 2.0;
    CHECK(c50_from_rir(r) < c50_a);
    CHECK(drr_from_rir(r) < drr_a);
}

TEST_CASE("labels JSON round trips including flags") {
    namespace fsys = std::filesystem;
    std::filesystem::create_directories("test_tmp/acoustics");
    RirLabels labels;
    for (int b = 0; b < 10; ++b) {
        labels.t60.values[b] = 0.1 + 0.01 * b;
        labels.drr.values[b] = -2.0 + b;
        labels.c50.values[b] = 1.0 + 0.5 * b;
    }
    labels.t60.values[3] = std::numeric_limits<double>::quiet_NaN();
    labels.t60.flags[3] = true;

    const std::string path = "test_tmp/acoustics/labels.json";
    {
        std::ofstream f(path);
        f << labels_to_json("room_x", labels);
    }
    const RirLabels back = labels_from_json_file(path);
    for (int b = 0; b < 10; ++b) {
        if (b == 3) {
            CHECK(std::isnan(back.t60.values[b]));
            CHECK(back.t60.flags[b]);
            continue;
        }
        CHECK(back.t60.values[b] == labels.t60.values[b]);
        CHECK(back.drr.values[b] == labels.drr.values[b]);
        CHECK(back.c50.values[b] == labels.c50.values[b]);
    }
}
