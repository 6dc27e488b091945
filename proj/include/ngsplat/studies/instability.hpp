#pragma once

#include "ngsplat/opt/fit.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ngs {

struct StudyRow {
    std::string label;
    double value = 0;
    double raw_value = 0;  // raw-parameter-space variant where it differs
};

struct StudyReport {
    std::string scene_id;
    std::string seed_hash;  // hex FNV-1a over the seed set and budget
    std::vector<StudyRow> rows;

    // Columns: label,value,raw_value,scene,seed_set_hash
    void save_csv(const std::filesystem::path& path) const;
};

std::string fnv1a_hex(const std::vector<std::uint64_t>& words);

// Ratio of the mean per-(location, channel) standard deviation across the M
// repeats to the standard deviation of all M*N*C values (population
// convention for both). Rows of `values` are the M repeats.
double instability_score(const Eigen::MatrixXd& values);

struct InstabilityConfig {
    int trials = 8;                       // M
    std::vector<std::uint64_t> seeds;     // one per refit; distinct
    std::uint64_t base_seed = 1;          // base fit init
    int point_limit = 0;                  // subsample the scene cloud (0 = all)
    FitConfig fit;                        // budget shared by base fit and refits
};

// Re-initializes every non-position parameter from `seed` and re-optimizes
// with the base field's positions frozen (bit-equal on output).
GaussianField<float> refit_fixed_locations(const Scene& scene, const GaussianField<float>& base,
                                           std::uint64_t seed, const FitConfig& config);

struct InstabilityStudyResult {
    StudyReport report;  // rows: rotation, scale, opacity, sh_dc, sh_rest
    double base_psnr = 0;
    std::vector<double> refit_psnr;  // train-view PSNR per refit
};

InstabilityStudyResult run_instability_study(const Scene& scene, const InstabilityConfig& config);

}  // namespace ngs
