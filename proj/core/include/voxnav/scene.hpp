#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "voxnav/rng.hpp"

namespace voxnav {

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

// Axis-aligned labeled box. Colors are rgb in [0,1].
struct LabeledBox {
    Vec3 center;
    Vec3 half_extents;
    int class_id = 0;
    std::array<double, 3> color{0, 0, 0};
};

struct SceneGraph {
    std::vector<LabeledBox> boxes;
    Vec3 bounds_min;
    Vec3 bounds_max;
    int class_count = 0;
    std::uint64_t seed = 0;
};

// World frame: right-handed, Z up. Camera looks along +X at zero yaw,
// yaw rotates about Z, positive pitch looks up. Pixel (u,v) rays pass
// through the pixel center (u+0.5, v+0.5).
struct CameraPose {
    Vec3 position;
    double yaw = 0;
    double pitch = 0;
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;
};

// 90-degree horizontal FOV square pinhole at the given resolution.
CameraPose make_camera(Vec3 position, double yaw, double pitch, int resolution = 64);

// Camera-frame ray direction through the center of pixel column u, row v.
// The x component is 1, so the ray parameter equals the optical-axis depth.
Vec3 pixel_ray_camera(const CameraPose& pose, int u, int v);

// Rigid transform of a camera-frame point into the world frame.
Vec3 camera_to_world(const CameraPose& pose, const Vec3& p_cam);

inline constexpr int kBackgroundLabel = -1;

// Depth is the distance along the optical axis (not ray length); 0 = no hit.
// labels hold kBackgroundLabel exactly where depth == 0.
struct RenderedView {
    int width = 0, height = 0;
    std::vector<double> depth;
    std::vector<int> labels;
    std::vector<std::array<double, 3>> color;

    std::size_t pixel(int v, int u) const {
        return static_cast<std::size_t>(v) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(u);
    }
};

struct SceneGenConfig {
    int class_count = 12;       // 0 = floor, 1 = wall, the rest furniture
    int furniture_count = 6;
    double room_half_extent = 4.0;  // world x,y in [-W, W]
    double room_height = 3.0;
    double min_half_xy = 0.2, max_half_xy = 0.8;
    double min_half_z = 0.2, max_half_z = 1.0;
    int max_retries = 64;
};

inline constexpr int kFloorClass = 0;
inline constexpr int kWallClass = 1;
inline constexpr int kFirstFurnitureClass = 2;

// Deterministic color palette: class-keyed base color plus a small
// per-box jitter, so color carries semantic signal for the RGB branch.
std::array<double, 3> class_base_color(int class_id);

// Deterministic in seed. Floor and perimeter walls plus furniture boxes
// resting on the floor; no furniture box fully inside another box.
SceneGraph generate_scene(std::uint64_t seed, const SceneGenConfig& config);

// Per-pixel ray vs axis-aligned box intersection, nearest hit wins.
RenderedView render_view(const SceneGraph& scene, const CameraPose& pose);

// Headings equally spaced over 2*pi at each pitch; pitch-major ordering,
// headings ascending. Returned poses parallel the views.
struct Panorama {
    std::vector<RenderedView> views;
    std::vector<CameraPose> poses;
};
Panorama render_panorama(const SceneGraph& scene, Vec3 position, int headings,
                         const std::vector<double>& pitches, int resolution = 64);

// Structured-text scene file (JSON, "format" field = voxnav-scene-v1).
void save_scene(const std::string& path, const SceneGraph& scene);
SceneGraph load_scene(const std::string& path);

}  // namespace voxnav
