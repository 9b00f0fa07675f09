#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ambiroom/acoustics.hpp"
#include "ambiroom/checkpoint.hpp"
#include "ambiroom/engine.hpp"
#include "ambiroom/sscv.hpp"
#include "ambiroom/synthroom.hpp"

namespace ambiroom {

enum class Target { T60, Drr, C50 };

std::string target_name(Target t);
Target target_from_name(const std::string& name);

struct ModelConfig {
    int frames = 82;
    int bands = 52;
    int depth = kSscvDim;
    std::vector<int> block_widths{32, 64, 128, 256};
    int mlp_h1 = 512;
    int mlp_h2 = 128;
    int out_dim = 10;
    double dropout = 0.2;

    int pooled_frames() const {
        int t = frames;
        for (std::size_t i = 0; i < block_widths.size(); ++i) t /= 2;
        return t;
    }
    int pooled_bands() const {
        int b = bands;
        for (std::size_t i = 0; i < block_widths.size(); ++i) b /= 2;
        return b;
    }
    int flatten_dim() const {
        return block_widths.back() * depth * pooled_frames() * pooled_bands();
    }
};

// The SSCV estimator: trainable per-band smoothing folded into the
// graph, a stack of channel-preserving + channel-expanding Conv3D pairs
// with (1,2,2) max pooling, and a three-layer MLP head emitting one
// value per label band. The 16 SSCV coordinates form the depth axis of
// a single-channel volume, so the 1x3x3 kernels convolve over time and
// band only; coordinate mixing happens through channel expansion.
template <typename T>
class FoaConv3dNet {
public:
    FoaConv3dNet(ModelConfig config, std::uint64_t init_seed) : cfg(std::move(config)) {
        if (cfg.pooled_frames() < 1 || cfg.pooled_bands() < 1) {
            fail_usage("model: input too small to survive " +
                       std::to_string(cfg.block_widths.size()) + " poolings (need frames and bands >= " +
                       std::to_string(1 << cfg.block_widths.size()) + ")");
        }
        StreamRng rng(init_seed, 0x494e4954);

        raw_alpha = make_param("alpha_raw", {cfg.bands}, std::vector<T>(cfg.bands, T(0)));

        int c_in = 1;
        for (std::size_t k = 0; k < cfg.block_widths.size(); ++k) {
            const int c_out = cfg.block_widths[k];
            Block blk;
            blk.c_in = c_in;
            blk.c_out = c_out;
            const std::string base = "block" + std::to_string(k);
            blk.w1 = make_param(base + ".conv1.w", {c_in, c_in, 1, 3, 3},
                                kaiming(rng, static_cast<std::size_t>(c_in) * c_in * 9, c_in * 9));
            blk.b1 = make_param(base + ".conv1.b", {c_in}, std::vector<T>(c_in, T(0)));
            blk.w2 = make_param(base + ".conv2.w", {c_out, c_in, 1, 3, 3},
                                kaiming(rng, static_cast<std::size_t>(c_out) * c_in * 9, c_in * 9));
            blk.b2 = make_param(base + ".conv2.b", {c_out}, std::vector<T>(c_out, T(0)));
            blocks.push_back(std::move(blk));
            c_in = c_out;
        }

        const int flat = cfg.flatten_dim();
        fc1_w = make_param("fc1.w", {cfg.mlp_h1, flat},
                           kaiming(rng, static_cast<std::size_t>(cfg.mlp_h1) * flat, flat));
        fc1_b = make_param("fc1.b", {cfg.mlp_h1}, std::vector<T>(cfg.mlp_h1, T(0)));
        fc2_w = make_param("fc2.w", {cfg.mlp_h2, cfg.mlp_h1},
                           kaiming(rng, static_cast<std::size_t>(cfg.mlp_h2) * cfg.mlp_h1, cfg.mlp_h1));
        fc2_b = make_param("fc2.b", {cfg.mlp_h2}, std::vector<T>(cfg.mlp_h2, T(0)));
        fc3_w = make_param("fc3.w", {cfg.out_dim, cfg.mlp_h2},
                           kaiming(rng, static_cast<std::size_t>(cfg.out_dim) * cfg.mlp_h2, cfg.mlp_h2));
        fc3_b = make_param("fc3.b", {cfg.out_dim}, std::vector<T>(cfg.out_dim, T(0)));
    }

    // Per-(band, coordinate) standardization constants applied after the
    // log/normalize stage; computed from the train split once and stored
    // in checkpoints. Absent by default (identity).
    void set_feature_norm(std::vector<T> mean, std::vector<T> inv_std) {
        const std::size_t want = static_cast<std::size_t>(cfg.bands) * cfg.depth;
        if (mean.size() != want || inv_std.size() != want) {
            fail_usage("model: feature norm size mismatch");
        }
        feat_mean = std::make_shared<const std::vector<T>>(std::move(mean));
        feat_inv_std = std::make_shared<const std::vector<T>>(std::move(inv_std));
    }

    // covvec: linear-stage feature [frames, bands, depth].
    engine::Tensor<T> forward(const engine::Tensor<T>& covvec, bool train,
                              std::uint64_t dropout_seed) {
        const auto& s = covvec.shape();
        if (s.size() != 3 || s[2] != cfg.depth) {
            fail_usage("model: expected input [frames, bands, " + std::to_string(cfg.depth) + "]");
        }
        if (s[0] < (1 << cfg.block_widths.size()) || s[1] < (1 << cfg.block_widths.size())) {
            fail_data("model: input too small to survive " +
                      std::to_string(cfg.block_widths.size()) + " poolings");
        }
        if (s[0] != cfg.frames || s[1] != cfg.bands) {
            fail_data("model: input is " + std::to_string(s[0]) + "x" + std::to_string(s[1]) +
                      " frames x bands, model was built for " + std::to_string(cfg.frames) + "x" +
                      std::to_string(cfg.bands));
        }

        using namespace engine;
        Tensor<T> alpha = sigmoid(raw_alpha.tensor);
        Tensor<T> sm = one_pole_smooth(covvec, alpha);
        Tensor<T> feat = log_normalize(sm, kSilenceFloor);
        if (feat_mean && feat_inv_std) feat = standardize(feat, feat_mean, feat_inv_std);
        Tensor<T> h = to_volume(feat);  // [1, depth, frames, bands]
        for (auto& blk : blocks) {
            h = relu(conv3d(h, blk.w1.tensor, blk.b1.tensor));
            h = relu(conv3d(h, blk.w2.tensor, blk.b2.tensor));
            h = maxpool3d_122(h);
        }
        Tensor<T> flat = flatten(h);
        flat = dropout(flat, train ? cfg.dropout : 0.0, train, dropout_seed);
        Tensor<T> m1 = relu(linear(flat, fc1_w.tensor, fc1_b.tensor));
        Tensor<T> m2 = relu(linear(m1, fc2_w.tensor, fc2_b.tensor));
        return linear(m2, fc3_w.tensor, fc3_b.tensor);
    }

    std::array<double, 10> predict_one(const std::vector<T>& covvec_values) {
        auto x = engine::Tensor<T>::leaf({cfg.frames, cfg.bands, cfg.depth},
                                         std::vector<T>(covvec_values), false, "covvec");
        auto y = forward(x, false, 0);
        std::array<double, 10> out{};
        for (int i = 0; i < cfg.out_dim && i < 10; ++i) out[i] = static_cast<double>(y.values()[i]);
        return out;
    }

    std::vector<engine::Parameter<T>*> parameters() {
        std::vector<engine::Parameter<T>*> ps{&raw_alpha};
        for (auto& b : blocks) {
            ps.push_back(&b.w1);
            ps.push_back(&b.b1);
            ps.push_back(&b.w2);
            ps.push_back(&b.b2);
        }
        for (auto* p : {&fc1_w, &fc1_b, &fc2_w, &fc2_b, &fc3_w, &fc3_b}) ps.push_back(p);
        return ps;
    }

    std::int64_t parameter_count() {
        std::int64_t n = 0;
        for (auto* p : parameters()) n += static_cast<std::int64_t>(p->tensor.size());
        return n;
    }

    std::vector<double> alpha() const {
        std::vector<double> a;
        for (T v : raw_alpha.tensor.values()) {
            a.push_back(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
        }
        return a;
    }

    ModelConfig cfg;
    struct Block {
        int c_in = 0, c_out = 0;
        engine::Parameter<T> w1, b1, w2, b2;
    };
    engine::Parameter<T> raw_alpha;
    std::vector<Block> blocks;
    engine::Parameter<T> fc1_w, fc1_b, fc2_w, fc2_b, fc3_w, fc3_b;
    std::shared_ptr<const std::vector<T>> feat_mean, feat_inv_std;

private:
    static engine::Parameter<T> make_param(std::string name, engine::Shape shape,
                                           std::vector<T> data) {
        engine::Parameter<T> p;
        p.name = std::move(name);
        p.tensor = engine::Tensor<T>::leaf(std::move(shape), std::move(data), true, p.name);
        return p;
    }

    static std::vector<T> kaiming(StreamRng& rng, std::size_t count, int fan_in) {
        const double bound = std::sqrt(6.0 / fan_in);
        std::vector<T> v(count);
        for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
        return v;
    }
};

// --- Checkpoint binding ---------------------------------------------------

struct CheckpointMeta {
    ModelConfig model;
    FeatureConfig feature;
    Target target = Target::T60;
    bool log_t60 = true;
    std::uint64_t seed = 0;
};

Checkpoint model_to_checkpoint(FoaConv3dNet<float>& net, const CheckpointMeta& meta);
FoaConv3dNet<float> model_from_checkpoint(const Checkpoint& ckpt, CheckpointMeta* meta_out);

// --- Training --------------------------------------------------------------

struct TrainConfig {
    double lr = 0.0005;
    int batch_size = 4;  // desk default; the published recipe used 128
    int max_epochs = 100;
    double dropout = 0.2;
    int lr_halve_patience = 5;
    int early_stop_patience = 10;
    Target target = Target::T60;
    bool log_t60 = true;  // train T60 in the log domain
    std::uint64_t seed = 0;
    bool deterministic = false;
    std::string checkpoint_path;  // base path; empty = keep best in memory only
    FeatureConfig feature;        // recorded in checkpoints, validated against features
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
    bool lr_halved = false;
    bool improved = false;
};

struct TrainReport {
    std::vector<EpochLog> epochs;
    int best_epoch = 0;
    double best_val_loss = 0.0;
    std::int64_t param_count = 0;
    std::string to_json() const;
};

struct TrainExample {
    std::string utt_id;
    int room_index = 0;
    std::vector<float> covvec;
    std::array<float, 10> target{};
};

struct TrainingData {
    int frames = 0;
    int bands = 0;
    std::uint64_t config_hash = 0;
    std::vector<TrainExample> train, val, test;
};

// Builds the target vector for one parameter (log-mapped T60 when
// log_t60 is set). Flagged bands are rejected.
std::array<float, 10> target_vector(const RirLabels& labels, Target target, bool log_t60);

// Loads linear-stage feature files (<features_dir>/<utt_id>.sscv) and
// per-room labels for every manifest record.
TrainingData load_training_data(const DatasetManifest& manifest, const std::string& manifest_dir,
                                const std::string& features_dir, Target target, bool log_t60);

// §-recipe training loop: Adam, MSE over bands, LR halving and early
// stopping on validation loss, best-validation checkpoint retained.
TrainReport train_model(FoaConv3dNet<float>& net, const TrainingData& data,
                        const TrainConfig& cfg);

// --- Prediction -------------------------------------------------------------

struct PredictResult {
    std::array<double, 10> values{};  // label domain (seconds for T60)
    Target target = Target::T60;
    bool low_energy = false;
};

// Extracts the linear-stage feature from a FOA signal under `cfg`.
SscvSeries covvec_from_signal(const FoaSignal& x, const FeatureConfig& cfg);

PredictResult predict_wav(const std::string& checkpoint_base, const std::string& wav_path);

}  // namespace ambiroom
