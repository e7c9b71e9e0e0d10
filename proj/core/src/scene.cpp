#include "voxnav/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "voxnav/common.hpp"

namespace voxnav {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Rotation {
    // columns of the rotation matrix R = Rz(yaw) * Ry(-pitch)
    Vec3 col_x, col_y, col_z;

    static Rotation from_yaw_pitch(double yaw, double pitch) {
        const double cy = std::cos(yaw), sy = std::sin(yaw);
        const double cp = std::cos(pitch), sp = std::sin(pitch);
        // Ry(-pitch) maps (1,0,0) -> (cos p, 0, sin p): positive pitch looks up.
        Rotation r;
        r.col_x = {cy * cp, sy * cp, sp};
        r.col_y = {-sy, cy, 0.0};
        r.col_z = {-cy * sp, -sy * sp, cp};
        return r;
    }

    Vec3 apply(const Vec3& v) const {
        return col_x * v.x + col_y * v.y + col_z * v.z;
    }
};

// Slab intersection parametrized by t where point = origin + t * dir.
// Returns false on miss; on hit t_near <= t_far.
bool ray_box(const Vec3& origin, const Vec3& dir, const LabeledBox& box, double& t_near,
             double& t_far) {
    double lo = -1e300, hi = 1e300;
    const double o[3] = {origin.x, origin.y, origin.z};
    const double d[3] = {dir.x, dir.y, dir.z};
    const double c[3] = {box.center.x, box.center.y, box.center.z};
    const double h[3] = {box.half_extents.x, box.half_extents.y, box.half_extents.z};
    for (int a = 0; a < 3; ++a) {
        const double mn = c[a] - h[a], mx = c[a] + h[a];
        if (d[a] == 0.0) {
            if (o[a] < mn || o[a] > mx) return false;
            continue;
        }
        double t1 = (mn - o[a]) / d[a];
        double t2 = (mx - o[a]) / d[a];
        if (t1 > t2) std::swap(t1, t2);
        lo = std::max(lo, t1);
        hi = std::min(hi, t2);
        if (lo > hi) return false;
    }
    t_near = lo;
    t_far = hi;
    return true;
}

bool box_contains_box(const LabeledBox& outer, const LabeledBox& inner) {
    return inner.center.x - inner.half_extents.x >= outer.center.x - outer.half_extents.x &&
           inner.center.x + inner.half_extents.x <= outer.center.x + outer.half_extents.x &&
           inner.center.y - inner.half_extents.y >= outer.center.y - outer.half_extents.y &&
           inner.center.y + inner.half_extents.y <= outer.center.y + outer.half_extents.y &&
           inner.center.z - inner.half_extents.z >= outer.center.z - outer.half_extents.z &&
           inner.center.z + inner.half_extents.z <= outer.center.z + outer.half_extents.z;
}

}  // namespace

CameraPose make_camera(Vec3 position, double yaw, double pitch, int resolution) {
    CameraPose pose;
    pose.position = position;
    pose.yaw = yaw;
    pose.pitch = pitch;
    pose.width = resolution;
    pose.height = resolution;
    // 90-degree horizontal FOV: fx = (w/2) / tan(45 deg)
    pose.fx = resolution / 2.0;
    pose.fy = resolution / 2.0;
    pose.cx = resolution / 2.0;
    pose.cy = resolution / 2.0;
    return pose;
}

Vec3 pixel_ray_camera(const CameraPose& pose, int u, int v) {
    return {1.0, (pose.cx - (u + 0.5)) / pose.fx, (pose.cy - (v + 0.5)) / pose.fy};
}

Vec3 camera_to_world(const CameraPose& pose, const Vec3& p_cam) {
    return pose.position + Rotation::from_yaw_pitch(pose.yaw, pose.pitch).apply(p_cam);
}

std::array<double, 3> class_base_color(int class_id) {
    // golden-ratio hue spacing, converted from HSV with s=0.75, v=0.9
    const double hue = std::fmod(0.12 + 0.61803398875 * class_id, 1.0) * 6.0;
    const double s = 0.75, v = 0.9;
    const int i = static_cast<int>(hue);
    const double f = hue - i;
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (i % 6) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

SceneGraph generate_scene(std::uint64_t seed, const SceneGenConfig& config) {
    contract(config.class_count >= 2, "generate_scene: need at least floor and wall classes");
    contract(config.furniture_count >= 0, "generate_scene: negative furniture count");

    Rng rng(seed, "scene-gen");
    SceneGraph scene;
    scene.seed = seed;
    scene.class_count = config.class_count;

    const double w = config.room_half_extent;
    const double hgt = config.room_height;
    const double wall_t = 0.2;
    scene.bounds_min = {-w, -w, -0.2};
    scene.bounds_max = {w, w, hgt};

    auto jittered_color = [&rng](int class_id) {
        auto c = class_base_color(class_id);
        for (auto& ch : c) ch = std::clamp(ch + rng.uniform(-0.05, 0.05), 0.0, 1.0);
        return c;
    };

    // floor slab, top face at z = 0
    scene.boxes.push_back({{0, 0, -0.1}, {w, w, 0.1}, kFloorClass, jittered_color(kFloorClass)});
    // perimeter walls
    const double half_t = wall_t / 2.0;
    scene.boxes.push_back({{w - half_t, 0, hgt / 2}, {half_t, w, hgt / 2}, kWallClass, jittered_color(kWallClass)});
    scene.boxes.push_back({{-w + half_t, 0, hgt / 2}, {half_t, w, hgt / 2}, kWallClass, jittered_color(kWallClass)});
    scene.boxes.push_back({{0, w - half_t, hgt / 2}, {w - wall_t, half_t, hgt / 2}, kWallClass, jittered_color(kWallClass)});
    scene.boxes.push_back({{0, -w + half_t, hgt / 2}, {w - wall_t, half_t, hgt / 2}, kWallClass, jittered_color(kWallClass)});

    const int furniture_classes = config.class_count - kFirstFurnitureClass;
    for (int i = 0; i < config.furniture_count; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < config.max_retries && !placed; ++attempt) {
            LabeledBox box;
            box.half_extents.x = rng.uniform(config.min_half_xy, config.max_half_xy);
            box.half_extents.y = rng.uniform(config.min_half_xy, config.max_half_xy);
            box.half_extents.z = rng.uniform(config.min_half_z, config.max_half_z);
            const double margin_x = w - wall_t - box.half_extents.x;
            const double margin_y = w - wall_t - box.half_extents.y;
            if (margin_x <= 0 || margin_y <= 0) continue;
            box.center.x = rng.uniform(-margin_x, margin_x);
            box.center.y = rng.uniform(-margin_y, margin_y);
            box.center.z = box.half_extents.z;  // resting on the floor
            box.class_id = furniture_classes > 0
                               ? kFirstFurnitureClass + static_cast<int>(rng.bounded(
                                                            static_cast<std::uint64_t>(furniture_classes)))
                               : kWallClass;
            box.color = jittered_color(box.class_id);

            bool nested = false;
            for (const auto& other : scene.boxes)
                if (box_contains_box(other, box) || box_contains_box(box, other)) {
                    nested = true;
                    break;
                }
            if (!nested) {
                scene.boxes.push_back(box);
                placed = true;
            }
        }
        if (!placed)
            throw GenerationError("generate_scene: could not place furniture box " +
                                  std::to_string(i) + " after bounded retries");
    }
    return scene;
}

RenderedView render_view(const SceneGraph& scene, const CameraPose& pose) {
    contract(pose.fx > 0 && pose.fy > 0, "render_view: invalid intrinsics");
    contract(std::abs(pose.pitch) < kPi / 2, "render_view: |pitch| must be < pi/2");

    RenderedView view;
    view.width = pose.width;
    view.height = pose.height;
    const std::size_t n = static_cast<std::size_t>(pose.width) * pose.height;
    view.depth.assign(n, 0.0);
    view.labels.assign(n, kBackgroundLabel);
    view.color.assign(n, {0, 0, 0});

    const Rotation rot = Rotation::from_yaw_pitch(pose.yaw, pose.pitch);
    constexpr double kMinHit = 1e-9;

    for (int v = 0; v < pose.height; ++v) {
        for (int u = 0; u < pose.width; ++u) {
            // dir_cam.x == 1, so the ray parameter t is the optical-axis depth
            const Vec3 dir = rot.apply(pixel_ray_camera(pose, u, v));
            double best_t = 1e300;
            const LabeledBox* best_box = nullptr;
            for (const auto& box : scene.boxes) {
                double t_near, t_far;
                if (!ray_box(pose.position, dir, box, t_near, t_far)) continue;
                if (t_far <= kMinHit) continue;
                const double t_hit = t_near > kMinHit ? t_near : t_far;
                if (t_hit < best_t) {
                    best_t = t_hit;
                    best_box = &box;
                }
            }
            if (best_box) {
                const std::size_t p = view.pixel(v, u);
                view.depth[p] = best_t;
                view.labels[p] = best_box->class_id;
                view.color[p] = best_box->color;
            }
        }
    }
    return view;
}

Panorama render_panorama(const SceneGraph& scene, Vec3 position, int headings,
                         const std::vector<double>& pitches, int resolution) {
    contract(headings >= 1, "render_panorama: need at least one heading");
    Panorama pano;
    pano.views.reserve(pitches.size() * static_cast<std::size_t>(headings));
    pano.poses.reserve(pano.views.capacity());
    for (double pitch : pitches) {
        for (int i = 0; i < headings; ++i) {
            const double yaw = 2.0 * kPi * i / headings;
            CameraPose pose = make_camera(position, yaw, pitch, resolution);
            pano.views.push_back(render_view(scene, pose));
            pano.poses.push_back(pose);
        }
    }
    return pano;
}

void save_scene(const std::string& path, const SceneGraph& scene) {
    nlohmann::json j;
    j["format"] = "voxnav-scene-v1";
    j["seed"] = scene.seed;
    j["class_count"] = scene.class_count;
    j["bounds"]["min"] = {scene.bounds_min.x, scene.bounds_min.y, scene.bounds_min.z};
    j["bounds"]["max"] = {scene.bounds_max.x, scene.bounds_max.y, scene.bounds_max.z};
    auto& boxes = j["boxes"] = nlohmann::json::array();
    for (const auto& b : scene.boxes) {
        boxes.push_back({{"center", {b.center.x, b.center.y, b.center.z}},
                         {"half_extents", {b.half_extents.x, b.half_extents.y, b.half_extents.z}},
                         {"class_id", b.class_id},
                         {"color", {b.color[0], b.color[1], b.color[2]}}});
    }
    std::ofstream os(path);
    if (!os) throw IoError("cannot open scene file for writing: " + path);
    os << j.dump(2) << '\n';
}

SceneGraph load_scene(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open scene file: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed scene file " + path + ": " + e.what());
    }
    if (j.value("format", "") != std::string("voxnav-scene-v1"))
        throw IoError("unsupported scene format in " + path);

    SceneGraph scene;
    scene.seed = j.value("seed", 0ull);
    scene.class_count = j.at("class_count").get<int>();
    const auto& mn = j.at("bounds").at("min");
    const auto& mx = j.at("bounds").at("max");
    scene.bounds_min = {mn[0], mn[1], mn[2]};
    scene.bounds_max = {mx[0], mx[1], mx[2]};
    for (const auto& jb : j.at("boxes")) {
        LabeledBox b;
        const auto& c = jb.at("center");
        const auto& h = jb.at("half_extents");
        const auto& col = jb.at("color");
        b.center = {c[0], c[1], c[2]};
        b.half_extents = {h[0], h[1], h[2]};
        b.class_id = jb.at("class_id").get<int>();
        b.color = {col[0], col[1], col[2]};
        scene.boxes.push_back(b);
    }
    return scene;
}

}  // namespace voxnav
