#include "ambiroom/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "ambiroom/error.hpp"

namespace ambiroom {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void check_shapes(const BandMatrix& preds, const BandMatrix& targets, std::size_t min_n) {
    if (preds.size() != targets.size()) fail_usage("metrics: prediction/target count mismatch");
    if (preds.size() < min_n) fail_usage("metrics: need at least " + std::to_string(min_n) + " samples");
}

const std::array<double, 10> kBandCentersHz = {1000.0, 1250.0, 1600.0, 2000.0, 2500.0,
                                               3150.0, 4000.0, 5000.0, 6300.0, 8000.0};

}  // namespace

std::array<double, 10> mae_per_band(const BandMatrix& preds, const BandMatrix& targets) {
    check_shapes(preds, targets, 1);
    std::array<double, 10> out{};
    for (std::size_t i = 0; i < preds.size(); ++i) {
        for (int b = 0; b < 10; ++b) out[b] += std::abs(preds[i][b] - targets[i][b]);
    }
    for (double& v : out) v /= static_cast<double>(preds.size());
    return out;
}

std::array<double, 10> pov_per_band(const BandMatrix& preds, const BandMatrix& targets) {
    check_shapes(preds, targets, 2);
    const double n = static_cast<double>(preds.size());
    std::array<double, 10> out{};
    for (int b = 0; b < 10; ++b) {
        double mean = 0.0;
        for (const auto& t : targets) mean += t[b];
        mean /= n;
        double ss_res = 0.0, ss_tot = 0.0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            const double r = targets[i][b] - preds[i][b];
            const double d = targets[i][b] - mean;
            ss_res += r * r;
            ss_tot += d * d;
        }
        out[b] = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : kNan;
    }
    return out;
}

std::array<double, 10> pcc_per_band(const BandMatrix& preds, const BandMatrix& targets) {
    check_shapes(preds, targets, 2);
    const double n = static_cast<double>(preds.size());
    std::array<double, 10> out{};
    for (int b = 0; b < 10; ++b) {
        double mp = 0.0, mt = 0.0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            mp += preds[i][b];
            mt += targets[i][b];
        }
        mp /= n;
        mt /= n;
        double spt = 0.0, spp = 0.0, stt = 0.0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            const double dp = preds[i][b] - mp;
            const double dt = targets[i][b] - mt;
            spt += dp * dt;
            spp += dp * dp;
            stt += dt * dt;
        }
        out[b] = (spp > 0.0 && stt > 0.0) ? spt / std::sqrt(spp * stt) : kNan;
    }
    return out;
}

namespace {

nlohmann::json band_array(const std::array<double, 10>& a) {
    nlohmann::json out = nlohmann::json::array();
    for (double v : a) {
        if (std::isnan(v)) {
            out.push_back(nullptr);
        } else {
            out.push_back(v);
        }
    }
    return out;
}

}  // namespace

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["schema_version"] = schema_version;
    j["model_id"] = model_id;
    j["dataset_hash"] = dataset_hash;
    j["band_centers_hz"] = kBandCentersHz;
    j["groups"] = nlohmann::json::array();
    for (const auto& g : groups) {
        j["groups"].push_back({{"parameter", g.parameter},
                               {"n", g.n},
                               {"mae", band_array(g.mae)},
                               {"pov", band_array(g.pov)},
                               {"pcc", band_array(g.pcc)},
                               {"baseline_mae", band_array(g.baseline_mae)}});
    }
    return j.dump(2);
}

std::string EvalReport::to_csv() const {
    std::ostringstream os;
    os.precision(10);
    os << "schema_version,model_id,dataset_hash,parameter,band_index,band_center_hz,metric,value,n\n";
    for (const auto& g : groups) {
        auto emit = [&](const char* metric, const std::array<double, 10>& vals) {
            for (int b = 0; b < 10; ++b) {
                os << schema_version << "," << model_id << "," << dataset_hash << ","
                   << g.parameter << "," << b << "," << kBandCentersHz[b] << "," << metric << ",";
                if (std::isnan(vals[b])) {
                    os << "";
                } else {
                    os << vals[b];
                }
                os << "," << g.n << "\n";
            }
        };
        emit("mae", g.mae);
        emit("pov", g.pov);
        emit("pcc", g.pcc);
        emit("baseline_mae", g.baseline_mae);
    }
    return os.str();
}

}  // namespace ambiroom
