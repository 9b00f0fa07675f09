#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "ambiroom/filterbank.hpp"

namespace ambiroom {

struct Rir {
    std::vector<double> h;
    double sample_rate = 16000.0;
    int direct_index = 0;
};

// Schroeder backward-integrated energy in dB relative to total energy;
// floored at -120 dB.
struct EnergyDecayCurve {
    std::vector<double> edc_db;
    double sample_rate = 16000.0;
};

inline constexpr double kEdcFloorDb = -120.0;
inline constexpr double kLevelCapDb = 100.0;  // DRR/C50 cap when late energy vanishes

enum class AcousticParameter { T60, Drr, C50 };

// Ten third-octave values for one parameter. A set flag marks a band
// whose value was capped or could not be estimated (NaN for T60 with
// insufficient decay range).
struct BandLabels {
    AcousticParameter param = AcousticParameter::T60;
    std::array<double, 10> values{};
    std::array<bool, 10> flags{};
};

struct RirLabels {
    BandLabels t60;
    BandLabels drr;
    BandLabels c50;
};

EnergyDecayCurve schroeder_edc(const Rir& rir);

// T30 from a least-squares line over the [-5, -35] dB span of the EDC,
// returned doubled. Throws a numeric error when the EDC never reaches
// -35 dB.
double t60_from_rir(const Rir& rir);

// 10*log10 of direct (+-2.5 ms around the direct arrival) over the
// energy after the window. `capped` reports the vanishing-tail guard.
double drr_from_rir(const Rir& rir, bool* capped = nullptr);

// 10*log10 of [direct, direct+50ms) over [direct+50ms, end).
double c50_from_rir(const Rir& rir, bool* capped = nullptr);

// Band-filters the (W-channel) RIR with each third-octave filter and
// applies the three scalar labels per band. Bands with insufficient
// decay get NaN + flag for T60 instead of aborting the whole set.
RirLabels labels_from_rir(const Rir& rir, const ThirdOctaveBank& bank);

std::string labels_to_json(const std::string& rir_id, const RirLabels& labels);
RirLabels labels_from_json_file(const std::string& path);

}  // namespace ambiroom
