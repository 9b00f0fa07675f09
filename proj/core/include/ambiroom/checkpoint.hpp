#pragma once

#include <string>
#include <vector>

namespace ambiroom {

// Named-parameter flat binary (<base>.bin, float32 LE) plus a JSON index
// (<base>.json) mapping name -> shape and byte offset, with a free-form
// metadata object. Versioned.
struct TensorBlob {
    std::string name;
    std::vector<int> shape;
    std::vector<float> data;
};

struct Checkpoint {
    std::vector<TensorBlob> tensors;
    std::string meta_json;  // metadata object, verbatim JSON
};

void save_checkpoint(const std::string& base_path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& base_path);

}  // namespace ambiroom
