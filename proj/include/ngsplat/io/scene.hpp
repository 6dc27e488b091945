#pragma once

#include "ngsplat/core/camera.hpp"
#include "ngsplat/core/gaussian.hpp"
#include "ngsplat/core/image.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ngs {

enum class ScenePreset { Sphere, Box, TwoToneSphere, TexturedSphere };

ScenePreset parse_preset(const std::string& name);
const char* preset_name(ScenePreset preset);

struct SceneView {
    Image<float> rgb;     // H x W x 3, [0,1]
    Image<float> normal;  // H x W x 3, world frame, [-1,1], zero off-object
    Image<float> alpha;   // H x W x 1, analytic hit mask
};

struct Scene {
    std::string id;
    std::vector<Vec3<float>> points;         // in [-1,1]^3 with margin
    std::vector<Vec3<float>> point_colors;   // [0,1]
    std::vector<Vec3<float>> point_normals;  // unit, analytic
    CameraRig<float> rig;
    std::vector<SceneView> views;
    Vec3<float> background = Vec3<float>::Zero();

    void validate() const;
};

struct SceneGenConfig {
    ScenePreset preset = ScenePreset::Sphere;
    int views = 12;
    int resolution = 64;
    int points = 2000;
    std::uint64_t seed = 1;
};

// Synthesizes a scene with analytic normals/alpha (ray-surface
// intersection) and RGB views rendered by the brute-force oracle from a
// hand-built Gaussian field on the sampled surface.
Scene gen_scene(const SceneGenConfig& config);

// The surface field the RGB ground truth is rendered from: one Gaussian per
// sampled point, rotation aligned to the analytic normal, tangential scales
// from the point spacing, near-opaque.
GaussianField<float> ground_truth_field(const std::vector<Vec3<float>>& points,
                                        const std::vector<Vec3<float>>& normals,
                                        const std::vector<Vec3<float>>& colors);

// Mean nearest-neighbor distance of a point set (brute force).
float mean_nn_distance(const std::vector<Vec3<float>>& points);

void save_scene(const Scene& scene, const std::filesystem::path& dir);
Scene load_scene(const std::filesystem::path& manifest_path);

}  // namespace ngs
