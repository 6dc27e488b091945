#include "ngsplat/io/scene.hpp"

#include "ngsplat/core/parallel.hpp"
#include "ngsplat/core/rng.hpp"
#include "ngsplat/io/fsio.hpp"
#include "ngsplat/io/image_io.hpp"
#include "ngsplat/io/ply.hpp"
#include "ngsplat/render/rasterizer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ngs {

namespace {

constexpr float kSphereRadius = 0.8f;
constexpr float kBoxHalfExtent = 0.62f;
constexpr float kRigRadius = 2.6f;
constexpr float kRigElevationDeg = 25.0f;
constexpr float kFocalPerPixel = 1.2f;  // fx = 1.2 * resolution

Vec3<float> preset_color(ScenePreset preset, const Vec3<float>& p, const Vec3<float>& n) {
    switch (preset) {
        case ScenePreset::Sphere:
            return Vec3<float>(0.55f + 0.30f * std::sin(3.0f * p.x()),
                               0.55f + 0.30f * std::sin(3.0f * p.y()),
                               0.55f + 0.30f * std::sin(3.0f * p.z()));
        case ScenePreset::TwoToneSphere:
            return p.x() > 0 ? Vec3<float>(0.85f, 0.30f, 0.20f) : Vec3<float>(0.20f, 0.35f, 0.85f);
        case ScenePreset::TexturedSphere:
            return Vec3<float>(
                0.5f + 0.42f * std::sin(7.0f * p.x()) * std::cos(5.0f * p.y()),
                0.5f + 0.42f * std::sin(7.0f * p.y()) * std::cos(5.0f * p.z()),
                0.5f + 0.42f * std::sin(7.0f * p.z()) * std::cos(5.0f * p.x()));
        case ScenePreset::Box: {
            // One color per face, picked by the dominant normal axis.
            static const Vec3<float> face_colors[6] = {
                {0.85f, 0.25f, 0.25f}, {0.25f, 0.75f, 0.30f}, {0.25f, 0.35f, 0.85f},
                {0.85f, 0.75f, 0.25f}, {0.75f, 0.30f, 0.80f}, {0.30f, 0.75f, 0.75f},
            };
            int axis = 0;
            n.cwiseAbs().maxCoeff(&axis);
            return face_colors[axis * 2 + (n[axis] > 0 ? 0 : 1)];
        }
    }
    return Vec3<float>(0.5f, 0.5f, 0.5f);
}

bool preset_is_sphere(ScenePreset preset) { return preset != ScenePreset::Box; }

void sample_surface(ScenePreset preset, int count, SeededRng& rng, std::vector<Vec3<float>>& points,
                    std::vector<Vec3<float>>& normals) {
    points.reserve(count);
    normals.reserve(count);
    if (preset_is_sphere(preset)) {
        for (int i = 0; i < count; ++i) {
            const Vec3<float> n = rng.unit_vec3<float>();
            points.push_back(n * kSphereRadius);
            normals.push_back(n);
        }
        return;
    }
    const float h = kBoxHalfExtent;
    for (int i = 0; i < count; ++i) {
        const int face = static_cast<int>(rng.uniform(0.0, 6.0));
        const int axis = face / 2;
        const float sign = face % 2 == 0 ? 1.0f : -1.0f;
        Vec3<float> p;
        p[axis] = sign * h;
        p[(axis + 1) % 3] = static_cast<float>(rng.uniform(-h, h));
        p[(axis + 2) % 3] = static_cast<float>(rng.uniform(-h, h));
        Vec3<float> n = Vec3<float>::Zero();
        n[axis] = sign;
        points.push_back(p);
        normals.push_back(n);
    }
}

// Analytic ray hit against the preset surface. Returns false on miss.
bool intersect(ScenePreset preset, const Vec3<float>& origin, const Vec3<float>& dir,
               Vec3<float>& hit_normal) {
    if (preset_is_sphere(preset)) {
        const float b = origin.dot(dir);
        const float c = origin.squaredNorm() - kSphereRadius * kSphereRadius;
        const float disc = b * b - c;
        if (disc < 0) return false;
        const float t = -b - std::sqrt(disc);
        if (t <= 0) return false;
        hit_normal = (origin + t * dir) / kSphereRadius;
        return true;
    }
    // Slab test on the axis-aligned box.
    const float h = kBoxHalfExtent;
    float tmin = -std::numeric_limits<float>::infinity();
    float tmax = std::numeric_limits<float>::infinity();
    int tmin_axis = -1;
    for (int a = 0; a < 3; ++a) {
        if (std::abs(dir[a]) < 1e-12f) {
            if (std::abs(origin[a]) > h) return false;
            continue;
        }
        float t0 = (-h - origin[a]) / dir[a];
        float t1 = (h - origin[a]) / dir[a];
        if (t0 > t1) std::swap(t0, t1);
        if (t0 > tmin) {
            tmin = t0;
            tmin_axis = a;
        }
        tmax = std::min(tmax, t1);
        if (tmin > tmax) return false;
    }
    if (tmin <= 0 || tmin_axis < 0) return false;
    const Vec3<float> hit = origin + tmin * dir;
    hit_normal = Vec3<float>::Zero();
    hit_normal[tmin_axis] = hit[tmin_axis] > 0 ? 1.0f : -1.0f;
    return true;
}

CameraRig<float> build_rig(int views, int resolution) {
    CameraRig<float> rig;
    const float elev = kRigElevationDeg * static_cast<float>(M_PI) / 180.0f;
    for (int i = 0; i < views; ++i) {
        const float az = 2.0f * static_cast<float>(M_PI) * i / views;
        const float el = (i % 2 == 0) ? elev : -elev;
        const Vec3<float> eye(kRigRadius * std::cos(el) * std::cos(az),
                              kRigRadius * std::cos(el) * std::sin(az),
                              kRigRadius * std::sin(el));
        rig.cameras.push_back(look_at_camera<float>(eye, Vec3<float>::Zero(),
                                                    kFocalPerPixel * resolution,
                                                    kFocalPerPixel * resolution, resolution,
                                                    resolution));
    }
    return rig;
}

nlohmann::json camera_to_json(const Camera<float>& cam) {
    nlohmann::json j;
    j["fx"] = cam.fx;
    j["fy"] = cam.fy;
    j["cx"] = cam.cx;
    j["cy"] = cam.cy;
    j["width"] = cam.width;
    j["height"] = cam.height;
    std::vector<float> rot(9);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) rot[r * 3 + c] = cam.rotation(r, c);
    j["rotation"] = rot;
    j["translation"] = std::vector<float>{cam.translation.x(), cam.translation.y(),
                                          cam.translation.z()};
    return j;
}

Camera<float> camera_from_json(const nlohmann::json& j) {
    Camera<float> cam;
    cam.fx = j.at("fx").get<float>();
    cam.fy = j.at("fy").get<float>();
    cam.cx = j.at("cx").get<float>();
    cam.cy = j.at("cy").get<float>();
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    const auto rot = j.at("rotation").get<std::vector<float>>();
    const auto trans = j.at("translation").get<std::vector<float>>();
    if (rot.size() != 9 || trans.size() != 3)
        throw std::runtime_error("manifest: malformed camera pose");
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) cam.rotation(r, c) = rot[r * 3 + c];
    cam.translation = {trans[0], trans[1], trans[2]};
    return cam;
}

}  // namespace

ScenePreset parse_preset(const std::string& name) {
    if (name == "sphere") return ScenePreset::Sphere;
    if (name == "box") return ScenePreset::Box;
    if (name == "two-tone-sphere") return ScenePreset::TwoToneSphere;
    if (name == "textured-sphere") return ScenePreset::TexturedSphere;
    throw std::invalid_argument("unknown preset: " + name);
}

const char* preset_name(ScenePreset preset) {
    switch (preset) {
        case ScenePreset::Sphere: return "sphere";
        case ScenePreset::Box: return "box";
        case ScenePreset::TwoToneSphere: return "two-tone-sphere";
        case ScenePreset::TexturedSphere: return "textured-sphere";
    }
    return "unknown";
}

void Scene::validate() const {
    if (points.empty()) throw std::runtime_error("scene has no points");
    if (rig.size() < 2) throw std::runtime_error("scene needs at least 2 views");
    if (views.size() != rig.size()) throw std::runtime_error("view/camera count mismatch");
    for (const auto& c : rig.cameras)
        if (!c.valid()) throw std::runtime_error("scene has an invalid camera");
    for (const auto& p : points)
        if (p.cwiseAbs().maxCoeff() > 0.95f + 1e-6f)
            throw std::runtime_error("points must lie in [-1,1]^3 with a 5% margin");
}

float mean_nn_distance(const std::vector<Vec3<float>>& points) {
    if (points.size() < 2) return 0.1f;
    std::vector<float> nn(points.size());
    parallel_for(points.size(), [&](std::size_t i) {
        float best = std::numeric_limits<float>::max();
        for (std::size_t k = 0; k < points.size(); ++k) {
            if (k == i) continue;
            best = std::min(best, (points[i] - points[k]).squaredNorm());
        }
        nn[i] = std::sqrt(best);
    });
    double acc = 0;
    for (float v : nn) acc += v;
    return static_cast<float>(acc / nn.size());
}

GaussianField<float> ground_truth_field(const std::vector<Vec3<float>>& points,
                                        const std::vector<Vec3<float>>& normals,
                                        const std::vector<Vec3<float>>& colors) {
    const float spacing = mean_nn_distance(points);
    const float tangential = 0.75f * spacing;
    const float along_normal = tangential / 4.0f;

    GaussianField<float> field;
    field.param_mode = ParamMode::Unconstrained;
    field.sh_degree = 0;
    field.gaussians.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        Gaussian3D<float>& g = field.gaussians[i];
        g.position = points[i];
        g.normal_raw = normals[i];
        g.rotation_raw = matrix_to_quat(normal_to_rotation(normals[i]));
        g.scales_log = Vec3<float>(std::log(tangential), std::log(tangential),
                                   std::log(along_normal));
        g.opacity_raw = logit(0.95f);
        for (int c = 0; c < 3; ++c)
            g.sh(c, 0) = (std::clamp(colors[i][c], 0.02f, 0.98f) - 0.5f) / static_cast<float>(kShC0);
    }
    return field;
}

Scene gen_scene(const SceneGenConfig& config) {
    if (config.views < 2) throw std::invalid_argument("scene needs at least 2 views");
    if (config.points < 1) throw std::invalid_argument("scene needs at least 1 point");
    if (config.resolution < 16) throw std::invalid_argument("resolution too small");

    SeededRng rng(config.seed);
    Scene scene;
    scene.id = preset_name(config.preset);
    scene.background = Vec3<float>::Zero();
    sample_surface(config.preset, config.points, rng, scene.points, scene.point_normals);
    scene.point_colors.reserve(scene.points.size());
    for (std::size_t i = 0; i < scene.points.size(); ++i)
        scene.point_colors.push_back(
            preset_color(config.preset, scene.points[i], scene.point_normals[i]));

    scene.rig = build_rig(config.views, config.resolution);

    const GaussianField<float> gt = ground_truth_field(scene.points, scene.point_normals,
                                                       scene.point_colors);
    scene.views.resize(scene.rig.size());
    for (std::size_t v = 0; v < scene.rig.size(); ++v) {
        const Camera<float>& cam = scene.rig.cameras[v];
        SceneView& view = scene.views[v];

        view.rgb = oracle_render(gt, cam, RenderMode::Rgb, scene.background).payload_image;

        view.normal = Image<float>(cam.width, cam.height, 3);
        view.alpha = Image<float>(cam.width, cam.height, 1);
        const Vec3<float> origin = cam.center_in_world();
        parallel_for(static_cast<std::size_t>(cam.height), [&](std::size_t iy) {
            for (int ix = 0; ix < cam.width; ++ix) {
                const Vec3<float> dir = cam.pixel_ray(ix, static_cast<int>(iy));
                Vec3<float> n;
                if (intersect(config.preset, origin, dir, n)) {
                    for (int c = 0; c < 3; ++c) view.normal.at(static_cast<int>(iy), ix, c) = n[c];
                    view.alpha.at(static_cast<int>(iy), ix, 0) = 1.0f;
                }
            }
        });
    }
    scene.validate();
    return scene;
}

void save_scene(const Scene& scene, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    PointCloud cloud{scene.points, scene.point_normals, scene.point_colors};
    save_point_cloud(dir / "points.ply", cloud);

    nlohmann::json manifest;
    manifest["version"] = 1;
    manifest["id"] = scene.id;
    manifest["background"] = std::vector<float>{scene.background.x(), scene.background.y(),
                                                scene.background.z()};
    manifest["points"] = "points.ply";
    manifest["views"] = nlohmann::json::array();
    for (std::size_t v = 0; v < scene.views.size(); ++v) {
        char rgb_name[32], normal_name[32], alpha_name[32];
        std::snprintf(rgb_name, sizeof(rgb_name), "rgb_%03zu.png", v);
        std::snprintf(normal_name, sizeof(normal_name), "normal_%03zu.png", v);
        std::snprintf(alpha_name, sizeof(alpha_name), "alpha_%03zu.png", v);
        save_png_rgb8(dir / rgb_name, scene.views[v].rgb);
        save_png_normal16(dir / normal_name, scene.views[v].normal);
        save_png_gray8(dir / alpha_name, scene.views[v].alpha);

        nlohmann::json view;
        view["camera"] = camera_to_json(scene.rig.cameras[v]);
        view["rgb"] = rgb_name;
        view["normal"] = normal_name;
        view["alpha"] = alpha_name;
        manifest["views"].push_back(view);
    }
    atomic_write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Scene load_scene(const std::filesystem::path& manifest_path) {
    namespace fs = std::filesystem;
    const auto bytes = read_file_bytes(manifest_path);
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("manifest parse error: " + std::string(e.what()));
    }
    if (!manifest.contains("version")) throw std::runtime_error("manifest: missing version");
    if (manifest.at("version").get<int>() != 1)
        throw std::runtime_error("manifest: unsupported version");

    const fs::path dir = manifest_path.parent_path();
    Scene scene;
    scene.id = manifest.at("id").get<std::string>();
    const auto bg = manifest.at("background").get<std::vector<float>>();
    if (bg.size() != 3) throw std::runtime_error("manifest: background must have 3 entries");
    scene.background = {bg[0], bg[1], bg[2]};

    const fs::path points_path = dir / manifest.at("points").get<std::string>();
    if (!fs::exists(points_path))
        throw std::runtime_error("manifest: missing file " + points_path.string());
    const PointCloud cloud = load_point_cloud(points_path);
    scene.points = cloud.positions;
    scene.point_normals = cloud.normals;
    scene.point_colors = cloud.colors;

    if (!manifest.contains("views") || manifest.at("views").size() < 2)
        throw std::runtime_error("manifest: needs at least 2 views");
    for (const auto& view_json : manifest.at("views")) {
        Camera<float> cam = camera_from_json(view_json.at("camera"));
        if (!cam.valid()) throw std::runtime_error("manifest: invalid camera parameters");
        scene.rig.cameras.push_back(cam);

        SceneView view;
        for (const char* key : {"rgb", "normal", "alpha"}) {
            const fs::path p = dir / view_json.at(key).get<std::string>();
            if (!fs::exists(p)) throw std::runtime_error("manifest: missing file " + p.string());
        }
        view.rgb = load_png_rgb8(dir / view_json.at("rgb").get<std::string>());
        view.normal = load_png_normal16(dir / view_json.at("normal").get<std::string>());
        view.alpha = load_png_gray8(dir / view_json.at("alpha").get<std::string>());
        scene.views.push_back(std::move(view));
    }
    scene.validate();
    return scene;
}

}  // namespace ngs
