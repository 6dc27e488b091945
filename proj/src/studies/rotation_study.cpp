#include "ngsplat/studies/rotation_study.hpp"

#include "ngsplat/io/csv.hpp"
#include "ngsplat/studies/instability.hpp"

#include <stdexcept>

namespace ngs {

RotationStudyResult run_rotation_study(const Scene& scene, const RotationStudyConfig& config) {
    std::vector<int> train = config.train_views;
    std::vector<int> eval = config.eval_views;
    if (train.empty() && eval.empty()) {
        for (int v = 0; v < static_cast<int>(scene.rig.size()); ++v)
            (v % 2 == 0 ? train : eval).push_back(v);
    }
    if (train.empty() || eval.empty())
        throw std::invalid_argument("rotation study needs both train and eval views");
    for (int v : eval)
        if (std::find(train.begin(), train.end(), v) != train.end())
            throw std::invalid_argument("rotation study: eval views must be disjoint from train");

    RotationStudyResult result;
    result.scene_id = scene.id;
    result.seed_hash = fnv1a_hex({config.fit.seed, static_cast<std::uint64_t>(config.fit.iterations),
                                  static_cast<std::uint64_t>(train.size())});

    const struct {
        ParamMode mode;
        double reference;
    } entries[] = {
        {ParamMode::Unconstrained, kReferencePsnrUnconstrained},
        {ParamMode::Isotropic, kReferencePsnrIsotropic},
        {ParamMode::NormalGuided, kReferencePsnrNormalGuided},
    };

    for (const auto& entry : entries) {
        FitConfig cfg = config.fit;
        cfg.param_mode = entry.mode;
        cfg.train_views = train;
        const FitResult fitres = fit(scene, cfg);

        float p = 0, s = 0;
        evaluate_views(scene, fitres.field, eval, p, s);
        result.rows.push_back({entry.mode, p, s, entry.reference});
    }
    return result;
}

void RotationStudyResult::save_csv(const std::filesystem::path& path) const {
    CsvWriter csv({"mode", "psnr", "ssim", "reference_psnr", "scene", "seed_set_hash"});
    for (const auto& row : rows)
        csv.row({param_mode_name(row.mode), CsvWriter::format(row.psnr),
                 CsvWriter::format(row.ssim), CsvWriter::format(row.reference_psnr), scene_id,
                 seed_hash});
    csv.save(path);
}

}  // namespace ngs
