#pragma once

#include "ngsplat/triplane/triplane.hpp"

#include <filesystem>

namespace ngs {

// Flat binary container: "NGTP" magic, u32 little-endian JSON header length,
// JSON header (shape, plane order, layout, dtype, seed), then float32 plane
// data ordered scale-ascending, direction (xy, yz, zx), row, column,
// channel.
void save_triplane_stack(const std::filesystem::path& path, const TriplaneStack<float>& stack,
                         std::uint64_t seed);

struct LoadedTriplaneStack {
    TriplaneStack<float> stack;
    std::uint64_t seed = 0;
};

LoadedTriplaneStack load_triplane_stack(const std::filesystem::path& path);

}  // namespace ngs
