#include "ambiroom/acoustics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "ambiroom/error.hpp"

namespace ambiroom {

namespace {

double energy(std::span<const double> x) {
    double e = 0.0;
    for (double v : x) e += v * v;
    return e;
}

int direct_window_half(double sample_rate) {
    return static_cast<int>(std::lround(0.0025 * sample_rate));
}

}  // namespace

EnergyDecayCurve schroeder_edc(const Rir& rir) {
    const std::size_t n = rir.h.size();
    if (n == 0) fail_data("edc: empty RIR");

    std::vector<double> tail(n);
    double acc = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        acc += rir.h[i] * rir.h[i];
        tail[i] = acc;
    }
    const double total = acc;
    if (total <= 0.0) fail_data("edc: all-zero RIR");

    EnergyDecayCurve edc;
    edc.sample_rate = rir.sample_rate;
    edc.edc_db.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = tail[i] / total;
        edc.edc_db[i] = r > 0.0 ? std::max(10.0 * std::log10(r), kEdcFloorDb) : kEdcFloorDb;
    }
    return edc;
}

double t60_from_rir(const Rir& rir) {
    const EnergyDecayCurve edc = schroeder_edc(rir);
    const auto& db = edc.edc_db;
    const std::size_t n = db.size();

    std::size_t i5 = n, i35 = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (i5 == n && db[i] <= -5.0) i5 = i;
        if (db[i] <= -35.0) {
            i35 = i;
            break;
        }
    }
    if (i5 >= n || i35 >= n || i35 <= i5 + 1) {
        fail_numeric("t60: EDC never reaches -35 dB (insufficient decay range)");
    }

    // Least squares line over the [-5, -35] dB span.
    const double fs = rir.sample_rate;
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double count = static_cast<double>(i35 - i5 + 1);
    for (std::size_t i = i5; i <= i35; ++i) {
        const double t = static_cast<double>(i) / fs;
        sx += t;
        sy += db[i];
        sxx += t * t;
        sxy += t * db[i];
    }
    const double denom = count * sxx - sx * sx;
    if (denom <= 0.0) fail_numeric("t60: degenerate fit span");
    const double slope = (count * sxy - sx * sy) / denom;  // dB per second
    if (slope >= 0.0) fail_numeric("t60: non-decaying EDC fit");

    const double t30 = -30.0 / slope;
    return 2.0 * t30;
}

double drr_from_rir(const Rir& rir, bool* capped) {
    const int n = static_cast<int>(rir.h.size());
    if (rir.direct_index < 0 || rir.direct_index >= n) fail_data("drr: direct_index out of range");
    const int half = direct_window_half(rir.sample_rate);
    const int lo = std::max(0, rir.direct_index - half);
    const int hi = std::min(n - 1, rir.direct_index + half);

    const double e_direct = energy(std::span<const double>(rir.h.data() + lo, hi - lo + 1));
    const double e_reverb =
        hi + 1 < n ? energy(std::span<const double>(rir.h.data() + hi + 1, n - hi - 1)) : 0.0;

    if (capped != nullptr) *capped = false;
    if (e_reverb <= e_direct * 1e-30 || e_reverb == 0.0) {
        if (capped != nullptr) *capped = true;
        return kLevelCapDb;
    }
    return 10.0 * std::log10(e_direct / e_reverb);
}

double c50_from_rir(const Rir& rir, bool* capped) {
    const int n = static_cast<int>(rir.h.size());
    const int split = rir.direct_index + static_cast<int>(std::lround(0.050 * rir.sample_rate));
    if (rir.direct_index < 0 || split >= n) {
        fail_data("c50: RIR shorter than direct_index + 50 ms");
    }

    const double e_early = energy(
        std::span<const double>(rir.h.data() + rir.direct_index, split - rir.direct_index));
    const double e_late = energy(std::span<const double>(rir.h.data() + split, n - split));

    if (capped != nullptr) *capped = false;
    if (e_late <= e_early * 1e-30 || e_late == 0.0) {
        if (capped != nullptr) *capped = true;
        return kLevelCapDb;
    }
    return 10.0 * std::log10(e_early / e_late);
}

RirLabels labels_from_rir(const Rir& rir, const ThirdOctaveBank& bank) {
    RirLabels out;
    out.t60.param = AcousticParameter::T60;
    out.drr.param = AcousticParameter::Drr;
    out.c50.param = AcousticParameter::C50;

    for (int b = 0; b < ThirdOctaveBank::kBands; ++b) {
        Rir banded;
        banded.h = bandpass_filter(rir.h, b, bank);
        banded.sample_rate = rir.sample_rate;
        banded.direct_index = rir.direct_index;

        try {
            out.t60.values[b] = t60_from_rir(banded);
        } catch (const Error&) {
            out.t60.values[b] = std::numeric_limits<double>::quiet_NaN();
            out.t60.flags[b] = true;
        }
        bool capped = false;
        out.drr.values[b] = drr_from_rir(banded, &capped);
        out.drr.flags[b] = capped;
        out.c50.values[b] = c50_from_rir(banded, &capped);
        out.c50.flags[b] = capped;
    }
    return out;
}

namespace {

nlohmann::json band_json(const BandLabels& l) {
    nlohmann::json values = nlohmann::json::array();
    nlohmann::json flags = nlohmann::json::array();
    for (int b = 0; b < 10; ++b) {
        if (std::isnan(l.values[b])) {
            values.push_back(nullptr);
        } else {
            values.push_back(l.values[b]);
        }
        flags.push_back(l.flags[b]);
    }
    return {{"values", values}, {"flags", flags}};
}

void band_from_json(const nlohmann::json& j, BandLabels& l) {
    for (int b = 0; b < 10; ++b) {
        const auto& v = j.at("values").at(b);
        l.values[b] = v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
        l.flags[b] = j.at("flags").at(b).get<bool>();
    }
}

}  // namespace

std::string labels_to_json(const std::string& rir_id, const RirLabels& labels) {
    nlohmann::json j;
    j["rir_id"] = rir_id;
    j["band_centers_hz"] = {1000.0, 1250.0, 1600.0, 2000.0, 2500.0,
                            3150.0, 4000.0, 5000.0, 6300.0, 8000.0};
    j["t60_s"] = band_json(labels.t60);
    j["drr_db"] = band_json(labels.drr);
    j["c50_db"] = band_json(labels.c50);
    return j.dump();
}

RirLabels labels_from_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail_data("labels: cannot open: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        fail_data("labels: bad JSON in " + path + ": " + e.what());
    }
    RirLabels out;
    out.t60.param = AcousticParameter::T60;
    out.drr.param = AcousticParameter::Drr;
    out.c50.param = AcousticParameter::C50;
    band_from_json(j.at("t60_s"), out.t60);
    band_from_json(j.at("drr_db"), out.drr);
    band_from_json(j.at("c50_db"), out.c50);
    return out;
}

}  // namespace ambiroom
