#pragma once

#include "ngsplat/core/gaussian.hpp"

#include <filesystem>
#include <vector>

namespace ngs {

// Gaussian fields serialize to binary little-endian PLY using the common
// splat layout: x,y,z, nx,ny,nz, f_dc_0..2, f_rest_0..8, opacity,
// scale_0..2, rot_0..3 (all float32, raw/log/pre-logistic values as stored;
// rot is (w,x,y,z); f_rest is channel-major). param_mode and sh_degree ride
// along as header comments, so load(save(f)) round-trips bit-exactly.
void save_field(const std::filesystem::path& path, const GaussianField<float>& field);
GaussianField<float> load_field(const std::filesystem::path& path);

// Plain point clouds (scene inputs): x,y,z, nx,ny,nz float32 plus
// red,green,blue uchar.
struct PointCloud {
    std::vector<Vec3<float>> positions;
    std::vector<Vec3<float>> normals;
    std::vector<Vec3<float>> colors;  // [0,1]
};

void save_point_cloud(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud load_point_cloud(const std::filesystem::path& path);

}  // namespace ngs
