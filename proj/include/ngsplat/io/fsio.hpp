#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ngs {

// Write-temp-then-rename, so partially written artifacts never appear under
// the final name.
void atomic_write_file(const std::filesystem::path& path, const void* data, std::size_t size);

inline void atomic_write_file(const std::filesystem::path& path, const std::string& text) {
    atomic_write_file(path, text.data(), text.size());
}
inline void atomic_write_file(const std::filesystem::path& path,
                              const std::vector<std::uint8_t>& bytes) {
    atomic_write_file(path, bytes.data(), bytes.size());
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace ngs
