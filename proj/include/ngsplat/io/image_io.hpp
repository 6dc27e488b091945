#pragma once

#include "ngsplat/core/image.hpp"

#include <filesystem>

namespace ngs {

// RGB in [0,1] <-> 8-bit PNG (round to nearest).
void save_png_rgb8(const std::filesystem::path& path, const Image<float>& img);
Image<float> load_png_rgb8(const std::filesystem::path& path);

// Single channel in [0,1] <-> 8-bit grayscale PNG.
void save_png_gray8(const std::filesystem::path& path, const Image<float>& img);
Image<float> load_png_gray8(const std::filesystem::path& path);

// Normal maps in [-1,1] <-> 16-bit PNG with the n*0.5+0.5 encoding.
// The zero vector encodes to mid-gray.
void save_png_normal16(const std::filesystem::path& path, const Image<float>& normals);
Image<float> load_png_normal16(const std::filesystem::path& path);

}  // namespace ngs
