#include "ngsplat/studies/instability.hpp"

#include "ngsplat/io/csv.hpp"
#include "ngsplat/opt/losses.hpp"
#include "ngsplat/render/rasterizer.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace ngs {

namespace {

double population_std(const Eigen::Ref<const Eigen::VectorXd>& v) {
    const double mean = v.mean();
    return std::sqrt((v.array() - mean).square().mean());
}

// Mean PSNR over the training views at full resolution.
double train_psnr(const Scene& scene, const GaussianField<float>& field,
                  const std::vector<int>& views) {
    double acc = 0;
    for (int v : views) {
        const auto out = render(field, scene.rig.cameras[v], RenderMode::Rgb, scene.background);
        acc += psnr(out.payload_image, scene.views[v].rgb);
    }
    return acc / views.size();
}

// Extracts the per-Gaussian values of one parameter type into a row of
// (activated, raw) matrices.
struct ParamExtract {
    std::string label;
    int channels;
    void (*fill)(const Gaussian3D<float>&, double* activated, double* raw);
};

void fill_rotation(const Gaussian3D<float>& g, double* a, double* r) {
    Vec4<float> q = g.rotation_raw.normalized();
    if (q[0] < 0) q = -q;  // q and -q are the same rotation
    for (int k = 0; k < 4; ++k) a[k] = r[k] = q[k];
}
void fill_scale(const Gaussian3D<float>& g, double* a, double* r) {
    for (int k = 0; k < 3; ++k) {
        a[k] = std::exp(g.scales_log[k]);
        r[k] = g.scales_log[k];
    }
}
void fill_opacity(const Gaussian3D<float>& g, double* a, double* r) {
    a[0] = logistic(g.opacity_raw);
    r[0] = g.opacity_raw;
}
void fill_sh_dc(const Gaussian3D<float>& g, double* a, double* r) {
    for (int c = 0; c < 3; ++c) a[c] = r[c] = g.sh(c, 0);
}
void fill_sh_rest(const Gaussian3D<float>& g, double* a, double* r) {
    int i = 0;
    for (int c = 0; c < 3; ++c)
        for (int k = 1; k < 4; ++k, ++i) a[i] = r[i] = g.sh(c, k);
}

const ParamExtract kExtracts[] = {
    {"rotation", 4, fill_rotation}, {"scale", 3, fill_scale},   {"opacity", 1, fill_opacity},
    {"sh_dc", 3, fill_sh_dc},       {"sh_rest", 9, fill_sh_rest},
};

}  // namespace

std::string fnv1a_hex(const std::vector<std::uint64_t>& words) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint64_t w : words)
        for (int b = 0; b < 8; ++b) {
            h ^= (w >> (b * 8)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

double instability_score(const Eigen::MatrixXd& values) {
    if (values.rows() < 2) throw std::invalid_argument("instability_score needs M >= 2 repeats");
    if (!values.allFinite()) throw std::invalid_argument("instability_score: non-finite input");

    double local_acc = 0;
    for (Eigen::Index c = 0; c < values.cols(); ++c) local_acc += population_std(values.col(c));
    const double local = local_acc / static_cast<double>(values.cols());
    if (local == 0.0) return 0.0;

    const Eigen::Map<const Eigen::VectorXd> flat(values.data(), values.size());
    const double global = population_std(flat);
    if (global < 1e-12)
        throw std::invalid_argument("instability_score: zero global scale with nonzero local");
    return local / global;
}

GaussianField<float> refit_fixed_locations(const Scene& scene, const GaussianField<float>& base,
                                           std::uint64_t seed, const FitConfig& config) {
    GaussianField<float> field = base;
    field.param_mode = ParamMode::Unconstrained;
    field.sh_degree = 0;
    reinit_gaussian_parameters(field, scene.point_colors, seed);

    FitConfig cfg = config;
    cfg.param_mode = ParamMode::Unconstrained;
    cfg.optimize_positions = false;  // locations stay bit-equal to the base field
    cfg.seed = seed;
    return fit_initialized(std::move(field), scene, cfg).field;
}

InstabilityStudyResult run_instability_study(const Scene& scene, const InstabilityConfig& config) {
    if (config.trials < 2) throw std::invalid_argument("instability study needs M >= 2");
    if (static_cast<int>(config.seeds.size()) != config.trials)
        throw std::invalid_argument("instability study: seed count must equal trials");
    std::set<std::uint64_t> distinct(config.seeds.begin(), config.seeds.end());
    if (static_cast<int>(distinct.size()) != config.trials)
        throw std::invalid_argument("instability study: seeds must be distinct");

    Scene working = scene;
    if (config.point_limit > 0 &&
        config.point_limit < static_cast<int>(scene.points.size())) {
        working.points.resize(config.point_limit);
        working.point_colors.resize(config.point_limit);
        working.point_normals.resize(config.point_limit);
    }

    FitConfig base_cfg = config.fit;
    base_cfg.param_mode = ParamMode::Unconstrained;
    base_cfg.seed = config.base_seed;
    const std::vector<int> train_views = [&] {
        if (!base_cfg.train_views.empty()) return base_cfg.train_views;
        std::vector<int> all(working.rig.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
        return all;
    }();

    const FitResult base = fit(working, base_cfg);

    InstabilityStudyResult result;
    result.base_psnr = train_psnr(working, base.field, train_views);

    std::vector<GaussianField<float>> refits;
    refits.reserve(config.trials);
    for (int m = 0; m < config.trials; ++m) {
        refits.push_back(refit_fixed_locations(working, base.field, config.seeds[m], config.fit));
        result.refit_psnr.push_back(train_psnr(working, refits.back(), train_views));
    }

    const std::size_t n = refits.front().size();
    result.report.scene_id = working.id;
    std::vector<std::uint64_t> hash_words = config.seeds;
    hash_words.push_back(config.base_seed);
    hash_words.push_back(static_cast<std::uint64_t>(config.fit.iterations));
    result.report.seed_hash = fnv1a_hex(hash_words);

    for (const auto& extract : kExtracts) {
        Eigen::MatrixXd activated(config.trials, n * extract.channels);
        Eigen::MatrixXd raw(config.trials, n * extract.channels);
        std::vector<double> abuf(extract.channels), rbuf(extract.channels);
        for (int m = 0; m < config.trials; ++m)
            for (std::size_t j = 0; j < n; ++j) {
                extract.fill(refits[m].gaussians[j], abuf.data(), rbuf.data());
                for (int c = 0; c < extract.channels; ++c) {
                    activated(m, j * extract.channels + c) = abuf[c];
                    raw(m, j * extract.channels + c) = rbuf[c];
                }
            }
        result.report.rows.push_back(
            {extract.label, instability_score(activated), instability_score(raw)});
    }
    return result;
}

void StudyReport::save_csv(const std::filesystem::path& path) const {
    CsvWriter csv({"label", "value", "raw_value", "scene", "seed_set_hash"});
    for (const auto& row : rows)
        csv.row({row.label, CsvWriter::format(row.value), CsvWriter::format(row.raw_value),
                 scene_id, seed_hash});
    csv.save(path);
}

}  // namespace ngs
