#pragma once

#include <cstdint>
#include <string_view>

namespace ambiroom {

// FNV-1a, used for feature-config fingerprints embedded in feature files
// and checkpoints.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace ambiroom
