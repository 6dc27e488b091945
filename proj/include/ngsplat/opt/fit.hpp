#pragma once

#include "ngsplat/core/gaussian.hpp"
#include "ngsplat/io/scene.hpp"
#include "ngsplat/opt/adam.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace ngs {

struct FitConfig {
    ParamMode param_mode = ParamMode::Unconstrained;
    int iterations = 1000;
    int stage_a_iterations = 600;  // NormalGuided only: normal-map stage

    // Per-group Adam learning rates.
    float lr_position = 2e-4f;
    float lr_sh = 2.5e-3f;
    float lr_opacity = 5e-2f;
    float lr_scales = 5e-3f;
    float lr_rotation = 1e-3f;  // quaternions and normals

    float ssim_weight = 0.2f;    // lambda in (1-l)*L1 + l*(1-SSIM)
    int sh_degree_schedule = 300;  // iteration at which SH degree goes 0 -> 1
    std::uint64_t seed = 0;
    bool optimize_positions = true;
    std::vector<int> train_views;  // empty = all rig views
};

struct IterationMetrics {
    int iteration = 0;
    float loss = 0;
    float psnr = 0;
};

struct FitResult {
    GaussianField<float> field;
    // NormalGuided only: the auxiliary isotropic field whose optimized
    // normals define the main field's rotations.
    std::optional<GaussianField<float>> normal_field;
    std::vector<IterationMetrics> metrics;               // per RGB iteration
    std::vector<IterationMetrics> normal_stage_metrics;  // per stage-A iteration
    float final_psnr = 0;  // held-out views, object crop
    float final_ssim = 0;
    std::vector<int> eval_views;
};

// Crop covering the projected bounding box of the scene points plus a 10%
// margin, clamped to the image and to a minimum side of 16 px.
struct CropRect {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
};

CropRect object_crop(const std::vector<Vec3<float>>& points, const Camera<float>& cam,
                     float margin = 0.1f);
Image<float> crop_image(const Image<float>& img, const CropRect& rect);

// Standard initialization: positions from the point cloud, log-scales from
// half the mean nearest-neighbor distance, opacity 0.1, SH DC from point
// colors, random unit normals, identity quaternions.
GaussianField<float> init_field_from_points(const std::vector<Vec3<float>>& points,
                                            const std::vector<Vec3<float>>& colors,
                                            ParamMode mode, std::uint64_t seed);

// Re-randomizes every non-position parameter in place (used by refits).
void reinit_gaussian_parameters(GaussianField<float>& field,
                                const std::vector<Vec3<float>>& colors, std::uint64_t seed);

// Per-scene optimization under the configured parameterization. NormalGuided
// runs stage A (normals against the ground-truth normal maps through
// normal-mode rendering on an isotropic auxiliary field) and then stage B
// (RGB with rotations frozen to the optimized normals).
FitResult fit(const Scene& scene, const FitConfig& config);

// RGB stage only, on a caller-initialized field (used by refits that must
// keep positions bit-equal to a base field). The field's param_mode decides
// the optimized groups; config.optimize_positions still applies.
FitResult fit_initialized(GaussianField<float> field, const Scene& scene,
                          const FitConfig& config);

// Mean PSNR/SSIM over the listed views, object-cropped.
void evaluate_views(const Scene& scene, const GaussianField<float>& field,
                    const std::vector<int>& views, float& out_psnr, float& out_ssim);

}  // namespace ngs
