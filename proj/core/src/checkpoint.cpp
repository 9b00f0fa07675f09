#include "ambiroom/checkpoint.hpp"

#include <fstream>

#include "json.hpp"

#include "ambiroom/error.hpp"

namespace ambiroom {

namespace {
constexpr int kCheckpointVersion = 1;
}

void save_checkpoint(const std::string& base_path, const Checkpoint& ckpt) {
    std::ofstream bin(base_path + ".bin", std::ios::binary | std::ios::trunc);
    if (!bin) fail_data("checkpoint: cannot open for writing: " + base_path + ".bin");

    nlohmann::json index;
    index["version"] = kCheckpointVersion;
    index["dtype"] = "f32";
    index["tensors"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& t : ckpt.tensors) {
        index["tensors"].push_back(
            {{"name", t.name}, {"shape", t.shape}, {"offset", offset}, {"numel", t.data.size()}});
        bin.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(float)));
        offset += t.data.size() * sizeof(float);
    }
    if (!bin) fail_data("checkpoint: short write: " + base_path + ".bin");
    bin.close();

    index["meta"] = ckpt.meta_json.empty() ? nlohmann::json::object()
                                           : nlohmann::json::parse(ckpt.meta_json);
    std::ofstream js(base_path + ".json", std::ios::trunc);
    if (!js) fail_data("checkpoint: cannot open for writing: " + base_path + ".json");
    js << index.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& base_path) {
    std::ifstream js(base_path + ".json");
    if (!js) fail_data("checkpoint: cannot open: " + base_path + ".json");
    nlohmann::json index;
    try {
        js >> index;
    } catch (const nlohmann::json::exception& e) {
        fail_data("checkpoint: bad index JSON: " + std::string(e.what()));
    }
    if (index.at("version").get<int>() != kCheckpointVersion) {
        fail_data("checkpoint: unsupported version in " + base_path + ".json");
    }

    std::ifstream bin(base_path + ".bin", std::ios::binary);
    if (!bin) fail_data("checkpoint: cannot open: " + base_path + ".bin");

    Checkpoint ckpt;
    ckpt.meta_json = index.at("meta").dump();
    for (const auto& jt : index.at("tensors")) {
        TensorBlob t;
        t.name = jt.at("name").get<std::string>();
        t.shape = jt.at("shape").get<std::vector<int>>();
        const auto numel = jt.at("numel").get<std::size_t>();
        const auto offset = jt.at("offset").get<std::uint64_t>();
        t.data.resize(numel);
        bin.seekg(static_cast<std::streamoff>(offset));
        bin.read(reinterpret_cast<char*>(t.data.data()),
                 static_cast<std::streamsize>(numel * sizeof(float)));
        if (!bin) fail_data("checkpoint: truncated binary: " + base_path + ".bin");
        ckpt.tensors.push_back(std::move(t));
    }
    return ckpt;
}

}  // namespace ambiroom
