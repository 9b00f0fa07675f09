#include "ambiroom/model.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "json.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ambiroom {

namespace fs = std::filesystem;

std::string target_name(Target t) {
    switch (t) {
        case Target::T60: return "t60";
        case Target::Drr: return "drr";
        case Target::C50: return "c50";
    }
    fail_usage("unknown target");
}

Target target_from_name(const std::string& name) {
    if (name == "t60") return Target::T60;
    if (name == "drr") return Target::Drr;
    if (name == "c50") return Target::C50;
    fail_usage("target must be one of t60|drr|c50, got: " + name);
}

// --- Checkpoint binding ---------------------------------------------------

namespace {

nlohmann::json model_config_json(const ModelConfig& m) {
    return {{"frames", m.frames},   {"bands", m.bands},     {"depth", m.depth},
            {"block_widths", m.block_widths}, {"mlp_h1", m.mlp_h1}, {"mlp_h2", m.mlp_h2},
            {"out_dim", m.out_dim}, {"dropout", m.dropout}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig m;
    m.frames = j.at("frames").get<int>();
    m.bands = j.at("bands").get<int>();
    m.depth = j.at("depth").get<int>();
    m.block_widths = j.at("block_widths").get<std::vector<int>>();
    m.mlp_h1 = j.at("mlp_h1").get<int>();
    m.mlp_h2 = j.at("mlp_h2").get<int>();
    m.out_dim = j.at("out_dim").get<int>();
    m.dropout = j.at("dropout").get<double>();
    return m;
}

nlohmann::json feature_config_json(const FeatureConfig& f) {
    return {{"sample_rate", f.sample_rate}, {"frame_len", f.frame_len}, {"hop", f.hop},
            {"mel_bands", f.mel_bands},     {"mel_f_lo", f.mel_f_lo},   {"mel_f_hi", f.mel_f_hi}};
}

FeatureConfig feature_config_from_json(const nlohmann::json& j) {
    FeatureConfig f;
    f.sample_rate = j.at("sample_rate").get<double>();
    f.frame_len = j.at("frame_len").get<int>();
    f.hop = j.at("hop").get<int>();
    f.mel_bands = j.at("mel_bands").get<int>();
    f.mel_f_lo = j.at("mel_f_lo").get<double>();
    f.mel_f_hi = j.at("mel_f_hi").get<double>();
    return f;
}

}  // namespace

Checkpoint model_to_checkpoint(FoaConv3dNet<float>& net, const CheckpointMeta& meta) {
    Checkpoint ckpt;
    for (auto* p : net.parameters()) {
        TensorBlob blob;
        blob.name = p->name;
        blob.shape = p->tensor.shape();
        blob.data = p->tensor.values();
        ckpt.tensors.push_back(std::move(blob));
    }
    if (net.feat_mean && net.feat_inv_std) {
        const int n = static_cast<int>(net.feat_mean->size());
        ckpt.tensors.push_back({"feat_norm.mean", {n}, *net.feat_mean});
        ckpt.tensors.push_back({"feat_norm.inv_std", {n}, *net.feat_inv_std});
    }
    nlohmann::json j;
    j["model"] = model_config_json(meta.model);
    j["feature"] = feature_config_json(meta.feature);
    std::ostringstream hash_hex;
    hash_hex << std::hex << meta.feature.hash();
    j["feature_hash"] = hash_hex.str();
    j["target"] = target_name(meta.target);
    j["log_t60"] = meta.log_t60;
    j["seed"] = meta.seed;
    j["alpha"] = net.alpha();
    ckpt.meta_json = j.dump();
    return ckpt;
}

FoaConv3dNet<float> model_from_checkpoint(const Checkpoint& ckpt, CheckpointMeta* meta_out) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(ckpt.meta_json);
    } catch (const nlohmann::json::exception& e) {
        fail_data("checkpoint: bad meta JSON: " + std::string(e.what()));
    }
    CheckpointMeta meta;
    meta.model = model_config_from_json(j.at("model"));
    meta.feature = feature_config_from_json(j.at("feature"));
    meta.target = target_from_name(j.at("target").get<std::string>());
    meta.log_t60 = j.at("log_t60").get<bool>();
    meta.seed = j.at("seed").get<std::uint64_t>();

    if (meta.model.bands != meta.feature.mel_bands) {
        fail_data("checkpoint: alpha band count does not match filterbank band count");
    }

    FoaConv3dNet<float> net(meta.model, meta.seed);
    std::vector<float> norm_mean, norm_inv;
    for (const auto& blob : ckpt.tensors) {
        if (blob.name == "feat_norm.mean") {
            norm_mean = blob.data;
            continue;
        }
        if (blob.name == "feat_norm.inv_std") {
            norm_inv = blob.data;
            continue;
        }
        bool found = false;
        for (auto* p : net.parameters()) {
            if (p->name != blob.name) continue;
            if (p->tensor.shape() != blob.shape) {
                fail_data("checkpoint: shape mismatch for tensor " + blob.name);
            }
            p->tensor.values() = blob.data;
            found = true;
            break;
        }
        if (!found) fail_data("checkpoint: unknown tensor " + blob.name);
    }
    if (!norm_mean.empty()) net.set_feature_norm(std::move(norm_mean), std::move(norm_inv));
    if (meta_out != nullptr) *meta_out = meta;
    return net;
}

// --- Training data ----------------------------------------------------------

std::array<float, 10> target_vector(const RirLabels& labels, Target target, bool log_t60) {
    const BandLabels* src = nullptr;
    switch (target) {
        case Target::T60: src = &labels.t60; break;
        case Target::Drr: src = &labels.drr; break;
        case Target::C50: src = &labels.c50; break;
    }
    std::array<float, 10> out{};
    for (int b = 0; b < 10; ++b) {
        if (src->flags[b] || !std::isfinite(src->values[b])) {
            fail_data("labels: flagged/invalid band " + std::to_string(b) + " for target " +
                      target_name(target));
        }
        double v = src->values[b];
        if (target == Target::T60 && log_t60) {
            if (v <= 0.0) fail_data("labels: non-positive T60");
            v = std::log(v);
        }
        out[b] = static_cast<float>(v);
    }
    return out;
}

TrainingData load_training_data(const DatasetManifest& manifest, const std::string& manifest_dir,
                                const std::string& features_dir, Target target, bool log_t60) {
    TrainingData data;
    const fs::path root(manifest_dir);
    for (const auto& rec : manifest.records) {
        const std::string feat_path = (fs::path(features_dir) / (rec.utt_id + ".sscv")).string();
        LoadedFeature lf = load_feature_file(feat_path);
        if (lf.series.stage != FeatureStage::Linear) {
            fail_data("features: " + feat_path + " is not a linear-stage feature file");
        }
        if (data.frames == 0) {
            data.frames = lf.series.frames;
            data.bands = lf.series.bands;
            data.config_hash = lf.config_hash;
        } else if (lf.series.frames != data.frames || lf.series.bands != data.bands ||
                   lf.config_hash != data.config_hash) {
            fail_data("features: inconsistent shape or config hash at " + feat_path);
        }

        const RirLabels labels = labels_from_json_file((root / rec.label_path).string());

        TrainExample ex;
        ex.utt_id = rec.utt_id;
        ex.room_index = rec.room_index;
        ex.covvec.assign(lf.series.v.begin(), lf.series.v.end());
        ex.target = target_vector(labels, target, log_t60);

        if (rec.split == "train") {
            data.train.push_back(std::move(ex));
        } else if (rec.split == "val") {
            data.val.push_back(std::move(ex));
        } else {
            data.test.push_back(std::move(ex));
        }
    }
    return data;
}

// --- Training loop -----------------------------------------------------------

namespace {

engine::Tensor<float> covvec_leaf(const TrainExample& ex, int frames, int bands, int depth) {
    return engine::Tensor<float>::leaf({frames, bands, depth}, std::vector<float>(ex.covvec),
                                       false, "covvec");
}

// Mean / inverse-std of the smoothed, log-normalized feature per
// (band, coordinate) over the train split, at the net's current alpha.
void fit_feature_norm(FoaConv3dNet<float>& net, const std::vector<TrainExample>& train,
                      int frames, int bands) {
    const int depth = net.cfg.depth;
    const std::size_t row = static_cast<std::size_t>(bands) * depth;
    std::vector<double> sum(row, 0.0), sum_sq(row, 0.0);
    const std::vector<double> alpha = net.alpha();

    for (const auto& ex : train) {
        for (int b = 0; b < bands; ++b) {
            const double a = alpha[b];
            for (int e = 0; e < depth; ++e) {
                // Recurrence over frames for this (band, coord) lane, then
                // the same log/normalize the graph applies.
                double state0 = 0.0, state_e = 0.0;
                const std::size_t base = static_cast<std::size_t>(b) * depth;
                for (int n = 0; n < frames; ++n) {
                    const std::size_t idx = (static_cast<std::size_t>(n) * bands + b) * depth;
                    state_e = (1.0 - a) * ex.covvec[idx + e] + a * state_e;
                    state0 = (1.0 - a) * ex.covvec[idx] + a * state0;
                    const double r0 = std::max(state0, kSilenceFloor);
                    const double v = e == 0 ? std::log(r0) : state_e / r0;
                    sum[base + e] += v;
                    sum_sq[base + e] += v * v;
                }
            }
        }
    }
    const double count = static_cast<double>(train.size()) * frames;
    std::vector<float> mean(row), inv_std(row);
    for (std::size_t i = 0; i < row; ++i) {
        const double m = sum[i] / count;
        const double var = std::max(sum_sq[i] / count - m * m, 0.0);
        mean[i] = static_cast<float>(m);
        // Cap the gain so near-constant coordinates are not amplified
        // into the conv stack.
        inv_std[i] = static_cast<float>(1.0 / std::max(std::sqrt(var), 0.05));
    }
    net.set_feature_norm(std::move(mean), std::move(inv_std));
}

double eval_loss(FoaConv3dNet<float>& net, const std::vector<TrainExample>& set, int frames,
                 int bands) {
    double total = 0.0;
    for (const auto& ex : set) {
        auto x = covvec_leaf(ex, frames, bands, net.cfg.depth);
        auto y = net.forward(x, false, 0);
        auto l = engine::mse_loss(y, std::span<const float>(ex.target.data(), 10));
        total += static_cast<double>(l.values()[0]);
    }
    return total / static_cast<double>(set.size());
}

}  // namespace

TrainReport train_model(FoaConv3dNet<float>& net, const TrainingData& data,
                        const TrainConfig& cfg) {
    if (data.train.empty() || data.val.empty()) {
        fail_data("train: empty train or validation split");
    }
    if (cfg.lr <= 0.0 || cfg.lr_halve_patience <= 0 || cfg.early_stop_patience <= 0) {
        fail_usage("train: lr and patience values must be positive");
    }
#ifdef _OPENMP
    if (cfg.deterministic) omp_set_num_threads(1);
#endif

    auto params = net.parameters();
    double lr = cfg.lr;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    int since_improve_lr = 0;
    int since_improve_stop = 0;

    if (cfg.feature.hash() != data.config_hash) {
        fail_data("train: feature files were extracted under a different feature config");
    }

    Checkpoint best_ckpt;
    CheckpointMeta meta;
    meta.model = net.cfg;
    meta.feature = cfg.feature;
    meta.target = cfg.target;
    meta.log_t60 = cfg.log_t60;
    meta.seed = cfg.seed;

    TrainReport report;
    report.param_count = net.parameter_count();

    fit_feature_norm(net, data.train, data.frames, data.bands);

    std::vector<int> order(data.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        StreamRng shuffle_rng = StreamRng(cfg.seed).split(0x45504f43 + epoch);
        for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
            std::swap(order[i], order[shuffle_rng.uniform_int(0, i)]);
        }

        double train_loss = 0.0;
        std::size_t step = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++step) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const float inv_batch = 1.0f / static_cast<float>(end - start);
            for (auto* p : params) p->tensor.zero_grad();

            for (std::size_t i = start; i < end; ++i) {
                const TrainExample& ex = data.train[order[i]];
                const std::uint64_t drop_seed =
                    StreamRng(cfg.seed, (static_cast<std::uint64_t>(epoch) << 32) ^
                                            (step << 16) ^ static_cast<std::uint64_t>(order[i]))
                        .next_u64();
                try {
                    auto x = covvec_leaf(ex, data.frames, data.bands, net.cfg.depth);
                    auto y = net.forward(x, true, drop_seed);
                    auto loss = engine::mse_loss(y, std::span<const float>(ex.target.data(), 10));
                    train_loss += static_cast<double>(loss.values()[0]);
                    engine::scale(loss, inv_batch).backward();
                } catch (const Error& e) {
                    if (e.kind() == ErrorKind::Numeric) {
                        fail_numeric("train: aborted at epoch " + std::to_string(epoch) +
                                     ", utt " + ex.utt_id + ": " + e.what());
                    }
                    throw;
                }
            }
            engine::adam_step(std::span<engine::Parameter<float>* const>(params.data(),
                                                                         params.size()),
                              lr);
        }
        train_loss /= static_cast<double>(order.size());

        const double val_loss = eval_loss(net, data.val, data.frames, data.bands);
        if (!std::isfinite(val_loss)) {
            fail_numeric("train: non-finite validation loss at epoch " + std::to_string(epoch));
        }

        EpochLog log;
        log.epoch = epoch;
        log.train_loss = train_loss;
        log.val_loss = val_loss;
        log.lr = lr;

        if (val_loss < best_val) {
            best_val = val_loss;
            best_epoch = epoch;
            since_improve_lr = 0;
            since_improve_stop = 0;
            log.improved = true;
            best_ckpt = model_to_checkpoint(net, meta);
        } else {
            ++since_improve_lr;
            ++since_improve_stop;
            if (since_improve_lr >= cfg.lr_halve_patience) {
                lr *= 0.5;
                since_improve_lr = 0;
                log.lr_halved = true;
            }
        }
        report.epochs.push_back(log);
        if (since_improve_stop >= cfg.early_stop_patience) break;
    }

    report.best_epoch = best_epoch;
    report.best_val_loss = best_val;

    // Restore the best-validation weights.
    if (!best_ckpt.tensors.empty()) {
        for (const auto& blob : best_ckpt.tensors) {
            for (auto* p : params) {
                if (p->name == blob.name) {
                    p->tensor.values() = blob.data;
                    break;
                }
            }
        }
        if (!cfg.checkpoint_path.empty()) save_checkpoint(cfg.checkpoint_path, best_ckpt);
    }
    return report;
}

std::string TrainReport::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["param_count"] = param_count;
    j["best_epoch"] = best_epoch;
    j["best_val_loss"] = best_val_loss;
    j["stopped_epoch"] = epochs.empty() ? 0 : epochs.back().epoch;
    j["epochs"] = nlohmann::json::array();
    for (const auto& e : epochs) {
        j["epochs"].push_back({{"epoch", e.epoch},
                               {"train_loss", e.train_loss},
                               {"val_loss", e.val_loss},
                               {"lr", e.lr},
                               {"lr_halved", e.lr_halved},
                               {"improved", e.improved}});
    }
    return j.dump(2);
}

// --- Prediction ----------------------------------------------------------------

SscvSeries covvec_from_signal(const FoaSignal& x, const FeatureConfig& cfg) {
    const FrameSpec spec = cfg.frame_spec();
    const MelFilterbank fb = cfg.mel();
    const FramedSignal frames = frame_signal(x, spec);
    const SpectralFrames spectra = dft_frames(frames);
    const CovarianceSeries cov = banded_covariance(spectra, fb);
    return covariance_vectors(cov, RealDftBasis::standard());
}

PredictResult predict_wav(const std::string& checkpoint_base, const std::string& wav_path) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_base);
    CheckpointMeta meta;
    FoaConv3dNet<float> net = model_from_checkpoint(ckpt, &meta);

    FoaSignal x = read_foa_wav(wav_path);
    if (x.sample_rate != meta.feature.sample_rate) {
        fail_data("predict: sample rate " + std::to_string(x.sample_rate) +
                  " does not match checkpoint feature config");
    }
    x = conform_duration(std::move(x), 4.0);

    double peak = 0.0;
    for (const auto& ch : x.ch) {
        for (double v : ch) peak = std::max(peak, std::abs(v));
    }

    const SscvSeries covvec = covvec_from_signal(x, meta.feature);
    if (covvec.frames != meta.model.frames || covvec.bands != meta.model.bands) {
        fail_data("predict: extracted feature shape does not match checkpoint model config");
    }
    std::vector<float> vals(covvec.v.begin(), covvec.v.end());
    std::array<double, 10> out = net.predict_one(vals);
    if (meta.target == Target::T60 && meta.log_t60) {
        for (double& v : out) v = std::exp(v);
    }

    PredictResult res;
    res.values = out;
    res.target = meta.target;
    res.low_energy = peak < 1e-6;
    return res;
}

}  // namespace ambiroom
