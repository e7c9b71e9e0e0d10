#pragma once

#include <array>
#include <string>
#include <vector>

#include "voxnav/nn.hpp"
#include "voxnav/reconstruct.hpp"
#include "voxnav/tensor.hpp"

namespace voxnav {

// Sparse rank-3 feature map over a (possibly batched) voxel grid level.
// indices are unique and lexicographically sorted by (batch, ix, iy, iz);
// features row r belongs to indices[r]. k == 0 leaves features undefined.
struct SparseFeatureMap {
    std::vector<VoxelIndex> indices;
    Tensor features;  // [k, channels]
    std::array<int, 3> dims{0, 0, 0};

    std::size_t active_sites() const { return indices.size(); }
    bool empty() const { return indices.empty(); }
};

// Multi-hot grid labels as fp64 features, one row per occupied voxel.
SparseFeatureMap feature_map_from_grid(const SparseVoxelGrid& grid);

enum class ConvMode {
    // Computes outputs only at input-active sites; requires odd kernel
    // dims; active set is preserved exactly (no activity dilation).
    kSubmanifold,
    // Windowed downsampling: output site per cell receiving at least one
    // active input; out_dim = floor((dim - kernel) / stride) + 1.
    kStrided,
};

// Cross-correlation over active sites. weight is [kx,ky,kz,Din,Dout];
// values equal the dense convolution restricted to computed sites, and
// gradients flow to both weight and input features.
SparseFeatureMap sparse_conv3d(const SparseFeatureMap& input, const Tensor& weight,
                               std::array<int, 3> stride, ConvMode mode);

inline SparseFeatureMap sparse_conv3d(const SparseFeatureMap& input, const Tensor& weight,
                                      int stride, ConvMode mode) {
    return sparse_conv3d(input, weight, {stride, stride, stride}, mode);
}

// One conv layer with bias, as used by the scene encoder.
struct SparseConvLayer {
    Tensor weight;  // [kx,ky,kz,Din,Dout]
    Tensor bias;    // [1, Dout]
    std::array<int, 3> stride{1, 1, 1};
    ConvMode mode = ConvMode::kSubmanifold;

    SparseConvLayer() = default;
    SparseConvLayer(std::array<int, 3> kernel, int in_ch, int out_ch, std::array<int, 3> stride,
                    ConvMode mode, Rng& rng);
    SparseFeatureMap forward(const SparseFeatureMap& input) const;
    void collect(const std::string& prefix, NamedParams& out) const;
};

// Flattened spatial token grid produced by the encoder; tokens is
// [grid_h * grid_w, width] with token t = ix * grid_w + iy.
struct VisualTokens {
    Tensor tokens;
    int grid_h = 0;
    int grid_w = 0;
};

struct SceneEncoderConfig {
    VoxelConfig grid = VoxelConfig::desk();
    int feature_width = 64;  // D, divisible by 4
    int token_grid = 4;      // output spatial side

    static SceneEncoderConfig desk();
    static SceneEncoderConfig paper();
};

// Alternating submanifold 3x3x3 convs and 2x strided downsampling until
// the X/Y dims reach token_grid, channel schedule C -> D/4 -> D/2 -> D
// (then D), GELU after every conv, then Z mean pooling and densification
// with zeros at absent sites.
class SceneEncoder {
public:
    SceneEncoder() = default;
    SceneEncoder(SceneEncoderConfig cfg, Rng& rng);

    // Single-scene grid (batch column must be uniform) -> [T, D] tokens.
    VisualTokens encode(const SparseVoxelGrid& grid) const;
    Tensor tokens(const SparseVoxelGrid& grid) const { return encode(grid).tokens; }

    int stage_count() const { return static_cast<int>(subm_.size()); }
    const SceneEncoderConfig& config() const { return cfg_; }
    void collect(const std::string& prefix, NamedParams& out) const;
    NamedParams named_params(const std::string& prefix = "encoder") const;

private:
    SceneEncoderConfig cfg_;
    std::vector<SparseConvLayer> subm_;
    std::vector<SparseConvLayer> down_;
};

}  // namespace voxnav
