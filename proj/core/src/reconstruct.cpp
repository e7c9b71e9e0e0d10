#include "voxnav/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "voxnav/common.hpp"

namespace voxnav {

namespace {

int checked_dim(double range, double size, const char* axis) {
    const double d = 2.0 * range / size;
    const double rounded = std::round(d);
    contract(std::abs(d - rounded) < 1e-9 && rounded >= 1.0,
             std::string("VoxelConfig: 2R/s must be a positive integer on axis ") + axis);
    return static_cast<int>(rounded);
}

}  // namespace

int VoxelConfig::dim_x() const { return checked_dim(range_x, size_x, "x"); }
int VoxelConfig::dim_y() const { return checked_dim(range_y, size_y, "y"); }
int VoxelConfig::dim_z() const { return checked_dim(range_z, size_z, "z"); }

VoxelConfig VoxelConfig::paper() {
    return {0.125, 0.125, 0.25, 8.0, 8.0, 4.0, 150};
}

VoxelConfig VoxelConfig::desk() {
    return {0.25, 0.25, 0.25, 4.0, 4.0, 2.0, 12};
}

bool SparseVoxelGrid::label_bit(std::size_t row, int class_id) const {
    const std::size_t byte = row * static_cast<std::size_t>(config.label_bytes()) +
                             static_cast<std::size_t>(class_id / 8);
    return (labels[byte] >> (class_id % 8)) & 1u;
}

void SparseVoxelGrid::set_label_bit(std::size_t row, int class_id) {
    const std::size_t byte = row * static_cast<std::size_t>(config.label_bytes()) +
                             static_cast<std::size_t>(class_id / 8);
    labels[byte] |= static_cast<std::uint8_t>(1u << (class_id % 8));
}

Vec3 SparseVoxelGrid::voxel_center(std::size_t row) const {
    const auto& idx = indices[row];
    return {-config.range_x + (idx.ix + 0.5) * config.size_x,
            -config.range_y + (idx.iy + 0.5) * config.size_y,
            -config.range_z + (idx.iz + 0.5) * config.size_z};
}

SemanticPointCloud unproject_view(const RenderedView& view, const CameraPose& pose) {
    contract(view.width == pose.width && view.height == pose.height,
             "unproject_view: view/pose resolution mismatch");
    SemanticPointCloud cloud;
    for (int v = 0; v < view.height; ++v) {
        for (int u = 0; u < view.width; ++u) {
            const std::size_t p = view.pixel(v, u);
            const double d = view.depth[p];
            if (d == 0.0) continue;
            const Vec3 p_world = camera_to_world(pose, pixel_ray_camera(pose, u, v) * d);
            cloud.points.push_back({p_world.x, p_world.y, p_world.z, view.labels[p]});
        }
    }
    return cloud;
}

SemanticPointCloud merge_panorama(const std::vector<RenderedView>& views,
                                  const std::vector<CameraPose>& poses, Vec3 agent_position) {
    contract(views.size() == poses.size(), "merge_panorama: views/poses length mismatch");
    SemanticPointCloud merged;
    for (std::size_t i = 0; i < views.size(); ++i) {
        SemanticPointCloud c = unproject_view(views[i], poses[i]);
        for (auto& pt : c.points) {
            pt.x -= agent_position.x;
            pt.y -= agent_position.y;
            pt.z -= agent_position.z;
            merged.points.push_back(pt);
        }
    }
    return merged;
}

SparseVoxelGrid voxelize(const SemanticPointCloud& cloud, const VoxelConfig& config,
                         std::uint32_t batch_index) {
    const int dx = config.dim_x(), dy = config.dim_y(), dz = config.dim_z();
    contract(config.class_count >= 1, "voxelize: class_count must be positive");

    // map keeps rows deduplicated and lexicographically ordered
    std::map<VoxelIndex, std::vector<std::uint8_t>> cells;
    const int lb = config.label_bytes();
    for (const auto& pt : cloud.points) {
        contract(pt.class_id >= 0 && pt.class_id < config.class_count,
                 "voxelize: class id out of range");
        const double fx = std::floor((pt.x + config.range_x) / config.size_x);
        const double fy = std::floor((pt.y + config.range_y) / config.size_y);
        const double fz = std::floor((pt.z + config.range_z) / config.size_z);
        if (fx < 0 || fx >= dx || fy < 0 || fy >= dy || fz < 0 || fz >= dz) continue;
        VoxelIndex idx{batch_index, static_cast<std::uint32_t>(fx), static_cast<std::uint32_t>(fy),
                       static_cast<std::uint32_t>(fz)};
        auto [it, inserted] = cells.try_emplace(idx);
        if (inserted) it->second.assign(static_cast<std::size_t>(lb), 0);
        it->second[static_cast<std::size_t>(pt.class_id / 8)] |=
            static_cast<std::uint8_t>(1u << (pt.class_id % 8));
    }

    SparseVoxelGrid grid;
    grid.config = config;
    grid.indices.reserve(cells.size());
    grid.labels.reserve(cells.size() * static_cast<std::size_t>(lb));
    for (const auto& [idx, bits] : cells) {
        grid.indices.push_back(idx);
        grid.labels.insert(grid.labels.end(), bits.begin(), bits.end());
    }
    return grid;
}

SparseVoxelGrid collate(const std::vector<SparseVoxelGrid>& grids) {
    contract(!grids.empty(), "collate: empty grid list");
    SparseVoxelGrid out;
    out.config = grids[0].config;
    for (std::size_t b = 0; b < grids.size(); ++b) {
        contract(grids[b].config == out.config, "collate: voxel config mismatch");
        for (std::size_t r = 0; r < grids[b].indices.size(); ++r) {
            VoxelIndex idx = grids[b].indices[r];
            idx.batch = static_cast<std::uint32_t>(b);
            out.indices.push_back(idx);
        }
        out.labels.insert(out.labels.end(), grids[b].labels.begin(), grids[b].labels.end());
    }
    return out;
}

std::vector<SparseVoxelGrid> split_batches(const SparseVoxelGrid& grid) {
    std::uint32_t batches = 0;
    for (const auto& idx : grid.indices) batches = std::max(batches, idx.batch + 1);
    std::vector<SparseVoxelGrid> out(batches);
    const int lb = grid.config.label_bytes();
    for (auto& g : out) g.config = grid.config;
    for (std::size_t r = 0; r < grid.indices.size(); ++r) {
        auto& g = out[grid.indices[r].batch];
        VoxelIndex idx = grid.indices[r];
        idx.batch = 0;
        g.indices.push_back(idx);
        const std::size_t off = r * static_cast<std::size_t>(lb);
        g.labels.insert(g.labels.end(), grid.labels.begin() + static_cast<std::ptrdiff_t>(off),
                        grid.labels.begin() + static_cast<std::ptrdiff_t>(off + lb));
    }
    return out;
}

SemanticPointCloud cloud_from_grid_centers(const SparseVoxelGrid& grid) {
    SemanticPointCloud cloud;
    for (std::size_t r = 0; r < grid.indices.size(); ++r) {
        const Vec3 c = grid.voxel_center(r);
        for (int cls = 0; cls < grid.config.class_count; ++cls)
            if (grid.label_bit(r, cls)) cloud.points.push_back({c.x, c.y, c.z, cls});
    }
    return cloud;
}

namespace {
constexpr char kGridMagic[4] = {'S', 'V', 'X', 'G'};
constexpr std::uint32_t kGridVersion = 1;
}  // namespace

void save_grid(const std::string& path, const SparseVoxelGrid& grid) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open grid file for writing: " + path);
    os.write(kGridMagic, 4);
    write_u32(os, kGridVersion);
    write_f64(os, grid.config.size_x);
    write_f64(os, grid.config.size_y);
    write_f64(os, grid.config.size_z);
    write_f64(os, grid.config.range_x);
    write_f64(os, grid.config.range_y);
    write_f64(os, grid.config.range_z);
    write_u32(os, static_cast<std::uint32_t>(grid.config.class_count));
    write_u64(os, grid.indices.size());
    const int lb = grid.config.label_bytes();
    for (std::size_t r = 0; r < grid.indices.size(); ++r) {
        const auto& idx = grid.indices[r];
        write_u32(os, idx.batch);
        write_u32(os, idx.ix);
        write_u32(os, idx.iy);
        write_u32(os, idx.iz);
        os.write(reinterpret_cast<const char*>(grid.labels.data() + r * static_cast<std::size_t>(lb)),
                 lb);
    }
    if (!os) throw IoError("write failure on grid file: " + path);
}

SparseVoxelGrid load_grid(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open grid file: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::string_view(magic, 4) != std::string_view(kGridMagic, 4))
        throw IoError("bad magic in grid file: " + path);
    const std::uint32_t version = read_u32(is);
    if (version != kGridVersion)
        throw IoError("unsupported grid version " + std::to_string(version));

    SparseVoxelGrid grid;
    grid.config.size_x = read_f64(is);
    grid.config.size_y = read_f64(is);
    grid.config.size_z = read_f64(is);
    grid.config.range_x = read_f64(is);
    grid.config.range_y = read_f64(is);
    grid.config.range_z = read_f64(is);
    grid.config.class_count = static_cast<int>(read_u32(is));
    const std::uint64_t k = read_u64(is);
    const int lb = grid.config.label_bytes();
    grid.indices.reserve(k);
    grid.labels.resize(k * static_cast<std::size_t>(lb));
    for (std::uint64_t r = 0; r < k; ++r) {
        VoxelIndex idx;
        idx.batch = read_u32(is);
        idx.ix = read_u32(is);
        idx.iy = read_u32(is);
        idx.iz = read_u32(is);
        grid.indices.push_back(idx);
        if (!is.read(reinterpret_cast<char*>(grid.labels.data() + r * static_cast<std::size_t>(lb)),
                     lb))
            throw IoError("truncated grid file: " + path);
    }
    return grid;
}

}  // namespace voxnav
