#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "voxnav/scene.hpp"

namespace voxnav {

struct SemanticPoint {
    double x = 0, y = 0, z = 0;
    int class_id = 0;
};

struct SemanticPointCloud {
    std::vector<SemanticPoint> points;
};

// Voxelization parameters: voxel size per axis and the symmetric range
// about the agent. Grid dims 2R/s must be integral per axis.
struct VoxelConfig {
    double size_x = 0.25, size_y = 0.25, size_z = 0.25;
    double range_x = 4.0, range_y = 4.0, range_z = 2.0;
    int class_count = 12;

    int dim_x() const;
    int dim_y() const;
    int dim_z() const;
    int label_bytes() const { return (class_count + 7) / 8; }

    // 0.125/0.125/0.25 m voxels, +-8 m horizontal / +-4 m vertical, 150
    // classes: dense dims 150 x 128 x 128 x 32.
    static VoxelConfig paper();
    // 0.25 m voxels, +-4/+-4/+-2 m, 12 classes: dims 32 x 32 x 16.
    static VoxelConfig desk();

    bool operator==(const VoxelConfig&) const = default;
};

struct VoxelIndex {
    std::uint32_t batch = 0;
    std::uint32_t ix = 0, iy = 0, iz = 0;

    auto operator<=>(const VoxelIndex&) const = default;
};

// COO-style sparse multi-hot occupancy: k index rows and k label rows of
// class_count bits each. Rows are unique and sorted lexicographically by
// (batch, ix, iy, iz); that canonical form makes equality bit-exact.
struct SparseVoxelGrid {
    VoxelConfig config;
    std::vector<VoxelIndex> indices;
    std::vector<std::uint8_t> labels;  // k * label_bytes(), bit c of byte c/8

    std::size_t occupied() const { return indices.size(); }
    bool label_bit(std::size_t row, int class_id) const;
    void set_label_bit(std::size_t row, int class_id);
    // Voxel center coordinates in the agent-centric frame.
    Vec3 voxel_center(std::size_t row) const;

    bool operator==(const SparseVoxelGrid&) const = default;
};

// Back-projects every non-background pixel through the camera model into
// a world-frame semantic point cloud.
SemanticPointCloud unproject_view(const RenderedView& view, const CameraPose& pose);

// Concatenates per-view clouds and re-centers on the agent position.
SemanticPointCloud merge_panorama(const std::vector<RenderedView>& views,
                                  const std::vector<CameraPose>& poses, Vec3 agent_position);

// index = floor((coord + R) / s) per axis; out-of-range points dropped;
// a class bit is set iff at least one point of that class maps to the voxel.
SparseVoxelGrid voxelize(const SemanticPointCloud& cloud, const VoxelConfig& config,
                         std::uint32_t batch_index = 0);

// Stacks grids into one batch; row batch column = position in the list.
SparseVoxelGrid collate(const std::vector<SparseVoxelGrid>& grids);

// Inverse of collate: splits a batched grid by batch column.
std::vector<SparseVoxelGrid> split_batches(const SparseVoxelGrid& grid);

// One point per set class bit, at the voxel center. Used to re-augment
// grids through the point-cloud pipeline.
SemanticPointCloud cloud_from_grid_centers(const SparseVoxelGrid& grid);

// Binary grid file, magic "SVXG", little-endian throughout.
void save_grid(const std::string& path, const SparseVoxelGrid& grid);
SparseVoxelGrid load_grid(const std::string& path);

}  // namespace voxnav
