// ambiroom CLI: synth -> extract -> train -> eval pipeline plus label
// computation, single-file prediction, and report merging.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ambiroom/acoustics.hpp"
#include "ambiroom/error.hpp"
#include "ambiroom/hash.hpp"
#include "ambiroom/metrics.hpp"
#include "ambiroom/model.hpp"
#include "ambiroom/sscv.hpp"
#include "ambiroom/synthroom.hpp"
#include "ambiroom/wav.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;
using namespace ambiroom;
using nlohmann::json;

namespace {

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Usage: return 2;
        case ErrorKind::Data: return 3;
        case ErrorKind::Numeric: return 4;
    }
    return 4;
}

void report_error(const std::string& kind, const std::string& message) {
    json j = {{"error", kind}, {"message", message}};
    std::cerr << j.dump() << std::endl;
}

std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string file_hash_hex(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail_data("cannot open for hashing: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return hex64(fnv1a64(bytes));
}

// Optional JSON config document; explicit CLI flags override its keys.
class JsonDefaults {
public:
    explicit JsonDefaults(const std::string& path) {
        if (path.empty()) return;
        std::ifstream f(path);
        if (!f) fail_usage("config: cannot open " + path);
        try {
            f >> doc_;
        } catch (const json::exception& e) {
            fail_usage("config: bad JSON in " + path + ": " + e.what());
        }
    }

    template <typename T>
    T get(const std::string& key, T fallback) const {
        if (doc_.contains(key)) return doc_.at(key).get<T>();
        return fallback;
    }

private:
    json doc_ = json::object();
};

std::string find_config_path(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") return argv[i + 1];
    }
    return "";
}

FeatureConfig feature_config_for(double sample_rate) {
    FeatureConfig cfg;
    cfg.sample_rate = sample_rate;
    return cfg;
}

struct EvalArrays {
    BandMatrix preds;    // model/training domain
    BandMatrix targets;  // model/training domain
};

EvalArrays collect_predictions(FoaConv3dNet<float>& net, const std::vector<TrainExample>& set) {
    EvalArrays out;
    for (const auto& ex : set) {
        const auto p = net.predict_one(ex.covvec);
        std::array<double, 10> t{};
        for (int b = 0; b < 10; ++b) t[b] = ex.target[b];
        out.preds.push_back(p);
        out.targets.push_back(t);
    }
    return out;
}

std::array<double, 10> train_mean(const std::vector<TrainExample>& train) {
    std::array<double, 10> mean{};
    for (const auto& ex : train) {
        for (int b = 0; b < 10; ++b) mean[b] += ex.target[b];
    }
    for (double& v : mean) v /= static_cast<double>(train.size());
    return mean;
}

MetricGroup make_group(const std::string& name, const BandMatrix& preds,
                       const BandMatrix& targets, const std::array<double, 10>& baseline) {
    MetricGroup g;
    g.parameter = name;
    g.n = static_cast<int>(preds.size());
    g.mae = mae_per_band(preds, targets);
    g.pov = pov_per_band(preds, targets);
    g.pcc = pcc_per_band(preds, targets);
    BandMatrix base_preds(targets.size());
    for (auto& row : base_preds) row = baseline;
    g.baseline_mae = mae_per_band(base_preds, targets);
    return g;
}

// --- subcommands ----------------------------------------------------------

int run_synth(int rooms, int utts, std::uint64_t seed, const std::string& out,
              const std::string& dry, double sr) {
    BuildDatasetConfig cfg;
    cfg.n_rooms = rooms;
    cfg.utts_per_room = utts;
    cfg.seed = seed;
    cfg.out_dir = out;
    cfg.dry_source = dry;
    cfg.sample_rate = sr;
    const DatasetManifest m = build_dataset(cfg);
    json j = {{"rooms", rooms},
              {"utterances", m.records.size()},
              {"manifest", (fs::path(out) / "manifest.jsonl").string()}};
    std::cout << j.dump() << "\n";
    return 0;
}

int run_labels(const std::string& rir_dir, const std::string& out_dir, double sr) {
    fs::create_directories(out_dir);
    const ThirdOctaveBank bank = build_third_octave_bank(sr);
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(rir_dir)) {
        if (e.path().extension() == ".wav") files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) fail_data("labels: no .wav files in " + rir_dir);

    for (const auto& path : files) {
        const FoaSignal sig = read_foa_wav(path);
        Rir rir;
        rir.h = sig.ch[0];
        rir.sample_rate = sig.sample_rate;
        int peak_at = 0;
        double peak = 0.0;
        for (std::size_t i = 0; i < rir.h.size(); ++i) {
            if (std::abs(rir.h[i]) > peak) {
                peak = std::abs(rir.h[i]);
                peak_at = static_cast<int>(i);
            }
        }
        rir.direct_index = peak_at;
        const RirLabels labels = labels_from_rir(rir, bank);
        const std::string id = fs::path(path).stem().string();
        std::ofstream f((fs::path(out_dir) / (id + ".json")).string(), std::ios::trunc);
        f << labels_to_json(id, labels) << "\n";
    }
    std::cout << json{{"labelled", files.size()}, {"out", out_dir}}.dump() << "\n";
    return 0;
}

int run_extract(const std::string& manifest_path, const std::string& out_dir,
                const std::string& stage, double alpha) {
    const DatasetManifest manifest = read_manifest(manifest_path);
    const std::string root = fs::path(manifest_path).parent_path().string();
    fs::create_directories(out_dir);
    const FeatureConfig cfg = feature_config_for(manifest.sample_rate);
    const bool smoothed = stage == "sscv";
    if (!smoothed && stage != "linear") fail_usage("extract: stage must be linear|sscv");

    const MelFilterbank fb = cfg.mel();
    const FrameSpec spec = cfg.frame_spec();
    std::vector<std::string> errors(manifest.records.size());

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(manifest.records.size()); ++i) {
        const auto& rec = manifest.records[i];
        try {
            FoaSignal x = read_foa_wav((fs::path(root) / rec.audio_path).string());
            x = conform_duration(std::move(x), 4.0);
            const std::string out_path =
                (fs::path(out_dir) / (rec.utt_id + ".sscv")).string();
            if (smoothed) {
                const SmoothingParams p = SmoothingParams::constant(alpha, cfg.mel_bands);
                const SscvSeries s = sscv_pipeline(x, spec, fb, p);
                save_feature_file(out_path, s, cfg, &p.alpha);
            } else {
                const SscvSeries s = covvec_from_signal(x, cfg);
                save_feature_file(out_path, s, cfg);
            }
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }
    for (const auto& e : errors) {
        if (!e.empty()) fail_data("extract: " + e);
    }
    std::cout << json{{"extracted", manifest.records.size()},
                      {"stage", stage},
                      {"config_hash", hex64(cfg.hash())},
                      {"out", out_dir}}
                     .dump()
              << "\n";
    return 0;
}

int run_train(const std::string& manifest_path, const std::string& features_dir,
              const std::string& target_str, const std::string& out_base, int epochs, int batch,
              std::uint64_t seed, double lr, bool deterministic, const std::string& report_path) {
    const DatasetManifest manifest = read_manifest(manifest_path);
    const std::string root = fs::path(manifest_path).parent_path().string();
    const Target target = target_from_name(target_str);
    const bool log_t60 = target == Target::T60;

    const TrainingData data =
        load_training_data(manifest, root, features_dir, target, log_t60);

    ModelConfig mc;
    mc.frames = data.frames;
    mc.bands = data.bands;

    TrainConfig tc;
    tc.lr = lr;
    tc.batch_size = batch;
    tc.max_epochs = epochs;
    tc.target = target;
    tc.log_t60 = log_t60;
    tc.seed = seed;
    tc.deterministic = deterministic;
    tc.checkpoint_path = out_base;
    tc.feature = feature_config_for(manifest.sample_rate);

    FoaConv3dNet<float> net(mc, seed);
    const TrainReport report = train_model(net, data, tc);

    const std::string rp = report_path.empty() ? out_base + ".report.json" : report_path;
    std::ofstream rf(rp, std::ios::trunc);
    rf << report.to_json() << "\n";

    std::cout << json{{"target", target_str},
                      {"epochs_run", report.epochs.size()},
                      {"best_epoch", report.best_epoch},
                      {"best_val_loss", report.best_val_loss},
                      {"param_count", report.param_count},
                      {"checkpoint", out_base},
                      {"report", rp}}
                     .dump()
              << "\n";
    return 0;
}

int run_eval(const std::string& manifest_path, const std::string& features_dir,
             const std::string& checkpoint_base, const std::string& out_json,
             const std::string& out_csv, const std::string& split, bool deterministic) {
#ifdef _OPENMP
    if (deterministic) omp_set_num_threads(1);
#endif
    const DatasetManifest manifest = read_manifest(manifest_path);
    const std::string root = fs::path(manifest_path).parent_path().string();

    CheckpointMeta meta;
    FoaConv3dNet<float> net = model_from_checkpoint(load_checkpoint(checkpoint_base), &meta);

    const TrainingData data =
        load_training_data(manifest, root, features_dir, meta.target, meta.log_t60);
    if (data.config_hash != meta.feature.hash()) {
        fail_data("eval: features extracted under a different config than the checkpoint");
    }

    const std::vector<TrainExample>* set = nullptr;
    if (split == "test") {
        set = &data.test;
    } else if (split == "val") {
        set = &data.val;
    } else if (split == "train") {
        set = &data.train;
    } else {
        fail_usage("eval: split must be train|val|test");
    }
    if (set->empty()) fail_data("eval: split '" + split + "' is empty");
    if (data.train.empty()) fail_data("eval: train split is empty (needed for the baseline)");

    const EvalArrays arrays = collect_predictions(net, *set);
    const std::array<double, 10> baseline = train_mean(data.train);

    EvalReport report;
    report.model_id = fs::path(checkpoint_base).filename().string();
    report.dataset_hash = file_hash_hex(manifest_path);

    const std::string tname = target_name(meta.target);
    if (meta.target == Target::T60 && meta.log_t60) {
        report.groups.push_back(make_group("log_t60", arrays.preds, arrays.targets, baseline));
        EvalArrays seconds;
        seconds.preds.resize(arrays.preds.size());
        seconds.targets.resize(arrays.targets.size());
        for (std::size_t i = 0; i < arrays.preds.size(); ++i) {
            for (int b = 0; b < 10; ++b) {
                seconds.preds[i][b] = std::exp(arrays.preds[i][b]);
                seconds.targets[i][b] = std::exp(arrays.targets[i][b]);
            }
        }
        std::array<double, 10> baseline_s{};
        for (const auto& ex : data.train) {
            for (int b = 0; b < 10; ++b) baseline_s[b] += std::exp(ex.target[b]);
        }
        for (double& v : baseline_s) v /= static_cast<double>(data.train.size());
        report.groups.push_back(make_group("t60", seconds.preds, seconds.targets, baseline_s));
    } else {
        report.groups.push_back(make_group(tname, arrays.preds, arrays.targets, baseline));
    }

    std::ofstream jf(out_json, std::ios::trunc);
    if (!jf) fail_data("eval: cannot write " + out_json);
    jf << report.to_json() << "\n";
    if (!out_csv.empty()) {
        std::ofstream cf(out_csv, std::ios::trunc);
        if (!cf) fail_data("eval: cannot write " + out_csv);
        cf << report.to_csv();
    }

    json summary = {{"split", split}, {"n", set->size()}, {"report", out_json}};
    for (const auto& g : report.groups) {
        double mae = 0.0, base = 0.0;
        for (int b = 0; b < 10; ++b) {
            mae += g.mae[b] / 10.0;
            base += g.baseline_mae[b] / 10.0;
        }
        summary["mean_mae_" + g.parameter] = mae;
        summary["baseline_mae_" + g.parameter] = base;
    }
    std::cout << summary.dump() << "\n";
    return 0;
}

int run_predict(const std::string& checkpoint_base, const std::string& wav_path) {
    const PredictResult res = predict_wav(checkpoint_base, wav_path);
    json j;
    j["target"] = target_name(res.target);
    j["band_centers_hz"] = {1000.0, 1250.0, 1600.0, 2000.0, 2500.0,
                            3150.0, 4000.0, 5000.0, 6300.0, 8000.0};
    j["values"] = res.values;
    j["low_energy"] = res.low_energy;
    std::cout << j.dump() << "\n";
    return 0;
}

int run_report(const std::vector<std::string>& inputs, const std::string& out_csv) {
    if (inputs.empty()) fail_usage("report: need at least one eval JSON");
    std::ostringstream merged;
    bool first = true;
    for (const auto& path : inputs) {
        std::ifstream f(path);
        if (!f) fail_data("report: cannot open " + path);
        json j;
        try {
            f >> j;
        } catch (const json::exception& e) {
            fail_data("report: bad JSON in " + path + ": " + e.what());
        }
        EvalReport rep;
        rep.schema_version = j.at("schema_version").get<int>();
        rep.model_id = j.at("model_id").get<std::string>();
        rep.dataset_hash = j.at("dataset_hash").get<std::string>();
        for (const auto& jg : j.at("groups")) {
            MetricGroup g;
            g.parameter = jg.at("parameter").get<std::string>();
            g.n = jg.at("n").get<int>();
            for (int b = 0; b < 10; ++b) {
                auto pick = [&](const char* key) {
                    const auto& v = jg.at(key).at(b);
                    return v.is_null() ? std::numeric_limits<double>::quiet_NaN()
                                       : v.get<double>();
                };
                g.mae[b] = pick("mae");
                g.pov[b] = pick("pov");
                g.pcc[b] = pick("pcc");
                g.baseline_mae[b] = pick("baseline_mae");
            }
            rep.groups.push_back(g);
        }
        const std::string csv = rep.to_csv();
        if (first) {
            merged << csv;
            first = false;
        } else {
            merged << csv.substr(csv.find('\n') + 1);  // drop repeated header
        }
    }
    std::ofstream f(out_csv, std::ios::trunc);
    if (!f) fail_data("report: cannot write " + out_csv);
    f << merged.str();
    std::cout << json{{"merged", inputs.size()}, {"out", out_csv}}.dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        const JsonDefaults conf(find_config_path(argc, argv));

        CLI::App app{"ambiroom: frequency-varying room-acoustic parameter estimation "
                     "from first-order Ambisonics recordings"};
        app.require_subcommand(1);
        std::string config_path;
        app.add_option("--config", config_path, "JSON config file; flags override its keys");

        bool deterministic = conf.get<bool>("deterministic", false);
        app.add_flag("--deterministic", deterministic, "single-threaded, bit-reproducible mode");

        // synth
        auto* synth = app.add_subcommand("synth", "synthesize a FOA room dataset");
        int rooms = conf.get<int>("rooms", 50);
        int utts = conf.get<int>("utts_per_room", 1);
        std::uint64_t seed = conf.get<std::uint64_t>("seed", 0);
        std::string out_dir = conf.get<std::string>("out", "");
        std::string dry = conf.get<std::string>("dry", "synthetic");
        double sr = conf.get<double>("sample_rate", 16000.0);
        synth->add_option("--rooms", rooms, "number of rooms");
        synth->add_option("--utts-per-room", utts, "utterances per room");
        synth->add_option("--seed", seed, "dataset seed");
        synth->add_option("--out", out_dir, "output directory")->required();
        synth->add_option("--dry", dry, "'synthetic' or a directory of mono WAVs");
        synth->add_option("--sr", sr, "sample rate (Hz)");

        // labels
        auto* labels = app.add_subcommand("labels", "compute T60/DRR/C50 labels from RIR WAVs");
        std::string rir_dir;
        std::string label_out = conf.get<std::string>("out", "");
        labels->add_option("--rirs", rir_dir, "directory of 4-channel RIR WAVs")->required();
        labels->add_option("--out", label_out, "output directory")->required();
        labels->add_option("--sr", sr, "sample rate (Hz)");

        // extract
        auto* extract = app.add_subcommand("extract", "extract SSCV feature tensors");
        std::string manifest_path;
        std::string feat_out = conf.get<std::string>("out", "");
        std::string stage = conf.get<std::string>("stage", "linear");
        double alpha = conf.get<double>("alpha", 0.5);
        extract->add_option("--manifest", manifest_path, "dataset manifest.jsonl")->required();
        extract->add_option("--out", feat_out, "output directory")->required();
        extract->add_option("--stage", stage,
                            "linear (pre-smoothing, trainable) or sscv (fixed alpha)");
        extract->add_option("--alpha", alpha, "smoothing coefficient for --stage sscv");

        // train
        auto* train = app.add_subcommand("train", "train the estimator for one parameter");
        std::string features_dir;
        std::string target_str = conf.get<std::string>("target", "t60");
        std::string ckpt_out = conf.get<std::string>("checkpoint", "");
        std::string report_path = conf.get<std::string>("report", "");
        int epochs = conf.get<int>("epochs", 100);
        int batch = conf.get<int>("batch", 4);
        double lr = conf.get<double>("lr", 0.0005);
        train->add_option("--manifest", manifest_path, "dataset manifest.jsonl")->required();
        train->add_option("--features", features_dir, "directory of linear-stage features")
            ->required();
        train->add_option("--target", target_str, "t60 | drr | c50");
        train->add_option("--out", ckpt_out, "checkpoint base path")->required();
        train->add_option("--epochs", epochs, "max epochs");
        train->add_option("--batch", batch, "batch size");
        train->add_option("--seed", seed, "training seed");
        train->add_option("--lr", lr, "initial learning rate");
        train->add_option("--report", report_path, "training report JSON path");

        // eval
        auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
        std::string ckpt_in;
        std::string eval_json = conf.get<std::string>("out", "eval.json");
        std::string eval_csv = conf.get<std::string>("csv", "");
        std::string split = conf.get<std::string>("split", "test");
        eval->add_option("--manifest", manifest_path, "dataset manifest.jsonl")->required();
        eval->add_option("--features", features_dir, "directory of linear-stage features")
            ->required();
        eval->add_option("--checkpoint", ckpt_in, "checkpoint base path")->required();
        eval->add_option("--out", eval_json, "EvalReport JSON path");
        eval->add_option("--csv", eval_csv, "per-band CSV path");
        eval->add_option("--split", split, "train | val | test");

        // predict
        auto* predict = app.add_subcommand("predict", "estimate band labels for one FOA WAV");
        std::string wav_path;
        predict->add_option("--checkpoint", ckpt_in, "checkpoint base path")->required();
        predict->add_option("--wav", wav_path, "4-channel FOA WAV")->required();

        // report
        auto* report = app.add_subcommand("report", "merge eval JSONs into one CSV");
        std::vector<std::string> report_inputs;
        std::string report_csv = conf.get<std::string>("out", "report.csv");
        report->add_option("--inputs", report_inputs, "eval JSON files")->required();
        report->add_option("--out", report_csv, "merged CSV path");

        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            if (e.get_exit_code() == 0) return app.exit(e);  // --help
            report_error("usage", e.what());
            return 2;
        }

#ifdef _OPENMP
        if (deterministic) omp_set_num_threads(1);
#endif

        if (synth->parsed()) return run_synth(rooms, utts, seed, out_dir, dry, sr);
        if (labels->parsed()) return run_labels(rir_dir, label_out, sr);
        if (extract->parsed()) return run_extract(manifest_path, feat_out, stage, alpha);
        if (train->parsed()) {
            return run_train(manifest_path, features_dir, target_str, ckpt_out, epochs, batch,
                             seed, lr, deterministic, report_path);
        }
        if (eval->parsed()) {
            return run_eval(manifest_path, features_dir, ckpt_in, eval_json, eval_csv, split,
                            deterministic);
        }
        if (predict->parsed()) return run_predict(ckpt_in, wav_path);
        if (report->parsed()) return run_report(report_inputs, report_csv);
        report_error("usage", "no subcommand given");
        return 2;
    } catch (const Error& e) {
        const char* kind = e.kind() == ErrorKind::Usage    ? "usage"
                           : e.kind() == ErrorKind::Data   ? "data"
                                                           : "numeric";
        report_error(kind, e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        report_error("data", e.what());
        return 3;
    }
}
