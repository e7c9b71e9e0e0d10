#include "voxnav/sparse_conv.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "voxnav/common.hpp"

namespace voxnav {

namespace {

std::uint64_t pack_coord(const VoxelIndex& idx) {
    return (static_cast<std::uint64_t>(idx.batch) << 48) |
           (static_cast<std::uint64_t>(idx.ix & 0xffffu) << 32) |
           (static_cast<std::uint64_t>(idx.iy & 0xffffu) << 16) |
           static_cast<std::uint64_t>(idx.iz & 0xffffu);
}

// (offset index, input row, output row) triples grouped by kernel offset.
struct KernelMap {
    int kernel_positions = 0;
    std::vector<std::vector<std::pair<int, int>>> pairs;  // per offset: (in_row, out_row)
};

}  // namespace

SparseFeatureMap feature_map_from_grid(const SparseVoxelGrid& grid) {
    SparseFeatureMap map;
    map.indices = grid.indices;
    map.dims = {grid.config.dim_x(), grid.config.dim_y(), grid.config.dim_z()};
    const std::size_t k = grid.indices.size();
    if (k == 0) return map;
    const int c = grid.config.class_count;
    std::vector<double> data(k * static_cast<std::size_t>(c), 0.0);
    for (std::size_t r = 0; r < k; ++r)
        for (int cls = 0; cls < c; ++cls)
            if (grid.label_bit(r, cls)) data[r * static_cast<std::size_t>(c) + cls] = 1.0;
    map.features = Tensor::from_data({static_cast<int>(k), c}, std::move(data));
    return map;
}

SparseFeatureMap sparse_conv3d(const SparseFeatureMap& input, const Tensor& weight,
                               std::array<int, 3> stride, ConvMode mode) {
    contract(weight.ndim() == 5, "sparse_conv3d: weight must be [kx,ky,kz,Din,Dout]");
    const int kx = weight.dim(0), ky = weight.dim(1), kz = weight.dim(2);
    const int d_in = weight.dim(3), d_out = weight.dim(4);
    if (mode == ConvMode::kSubmanifold) {
        contract(kx % 2 == 1 && ky % 2 == 1 && kz % 2 == 1,
                 "sparse_conv3d: submanifold mode requires odd kernel dims");
        contract(stride == (std::array<int, 3>{1, 1, 1}),
                 "sparse_conv3d: submanifold mode requires stride 1");
    }

    SparseFeatureMap out;
    if (mode == ConvMode::kSubmanifold) {
        out.dims = input.dims;
    } else {
        for (int a = 0; a < 3; ++a) {
            const int kdim = a == 0 ? kx : (a == 1 ? ky : kz);
            contract(stride[a] >= 1, "sparse_conv3d: stride must be >= 1");
            out.dims[a] = (input.dims[a] - kdim) / stride[a] + 1;
            contract(out.dims[a] >= 1, "sparse_conv3d: kernel larger than input dims");
        }
    }
    if (input.empty()) return out;
    contract(input.features.dim(1) == d_in, "sparse_conv3d: input channel mismatch");

    std::unordered_map<std::uint64_t, int> in_rows;
    in_rows.reserve(input.indices.size() * 2);
    for (std::size_t r = 0; r < input.indices.size(); ++r)
        in_rows.emplace(pack_coord(input.indices[r]), static_cast<int>(r));

    // output active set
    if (mode == ConvMode::kSubmanifold) {
        out.indices = input.indices;
    } else {
        std::vector<VoxelIndex> sites;
        for (const auto& idx : input.indices) {
            // input site p contributes to outputs q with q*s <= p < q*s + k
            const int p[3] = {static_cast<int>(idx.ix), static_cast<int>(idx.iy),
                              static_cast<int>(idx.iz)};
            const int kdim[3] = {kx, ky, kz};
            int q_lo[3], q_hi[3];
            for (int a = 0; a < 3; ++a) {
                q_lo[a] = std::max(0, (p[a] - kdim[a] + stride[a]) / stride[a] +
                                          ((p[a] - kdim[a] + stride[a]) % stride[a] < 0 ? -1 : 0));
                // ceil((p - k + 1) / s) without negative-division surprises
                q_lo[a] = std::max(0, (p[a] - kdim[a] + 1 + stride[a] - 1) / stride[a]);
                if (p[a] - kdim[a] + 1 < 0) q_lo[a] = 0;
                q_hi[a] = std::min(out.dims[a] - 1, p[a] / stride[a]);
            }
            for (int qx = q_lo[0]; qx <= q_hi[0]; ++qx)
                for (int qy = q_lo[1]; qy <= q_hi[1]; ++qy)
                    for (int qz = q_lo[2]; qz <= q_hi[2]; ++qz)
                        sites.push_back({idx.batch, static_cast<std::uint32_t>(qx),
                                         static_cast<std::uint32_t>(qy),
                                         static_cast<std::uint32_t>(qz)});
        }
        std::sort(sites.begin(), sites.end());
        sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
        out.indices = std::move(sites);
    }

    // kernel map: deterministic order (output rows ascending within offset)
    KernelMap kmap;
    kmap.kernel_positions = kx * ky * kz;
    kmap.pairs.assign(static_cast<std::size_t>(kmap.kernel_positions), {});
    const int cx = kx / 2, cy = ky / 2, cz = kz / 2;
    for (std::size_t ro = 0; ro < out.indices.size(); ++ro) {
        const auto& q = out.indices[ro];
        for (int ox = 0; ox < kx; ++ox)
            for (int oy = 0; oy < ky; ++oy)
                for (int oz = 0; oz < kz; ++oz) {
                    int px, py, pz;
                    if (mode == ConvMode::kSubmanifold) {
                        px = static_cast<int>(q.ix) + ox - cx;
                        py = static_cast<int>(q.iy) + oy - cy;
                        pz = static_cast<int>(q.iz) + oz - cz;
                    } else {
                        px = static_cast<int>(q.ix) * stride[0] + ox;
                        py = static_cast<int>(q.iy) * stride[1] + oy;
                        pz = static_cast<int>(q.iz) * stride[2] + oz;
                    }
                    if (px < 0 || py < 0 || pz < 0 || px >= input.dims[0] ||
                        py >= input.dims[1] || pz >= input.dims[2])
                        continue;
                    const auto it = in_rows.find(pack_coord(
                        {q.batch, static_cast<std::uint32_t>(px), static_cast<std::uint32_t>(py),
                         static_cast<std::uint32_t>(pz)}));
                    if (it == in_rows.end()) continue;
                    const int offset = (ox * ky + oy) * kz + oz;
                    kmap.pairs[static_cast<std::size_t>(offset)].emplace_back(it->second,
                                                                              static_cast<int>(ro));
                }
    }

    const int k_out = static_cast<int>(out.indices.size());
    auto pairs = std::make_shared<KernelMap>(std::move(kmap));
    Tensor result = make_op_result(
        {k_out, d_out}, {input.features, weight},
        [pairs, d_in, d_out](TensorNode& node) {
            TensorNode* feat = node.parents[0].get();
            TensorNode* w = node.parents[1].get();
            const std::size_t w_stride = static_cast<std::size_t>(d_in) * d_out;
            if (feat->requires_grad) {
                feat->ensure_grad();
                for (std::size_t o = 0; o < pairs->pairs.size(); ++o) {
                    const double* wo = w->data.data() + o * w_stride;
                    for (const auto& [ri, ro] : pairs->pairs[o]) {
                        const double* go = node.grad.data() + static_cast<std::size_t>(ro) * d_out;
                        double* gi = feat->grad.data() + static_cast<std::size_t>(ri) * d_in;
                        for (int ci = 0; ci < d_in; ++ci) {
                            const double* wrow = wo + static_cast<std::size_t>(ci) * d_out;
                            double acc = 0.0;
                            for (int co = 0; co < d_out; ++co) acc += go[co] * wrow[co];
                            gi[ci] += acc;
                        }
                    }
                }
            }
            if (w->requires_grad) {
                w->ensure_grad();
                for (std::size_t o = 0; o < pairs->pairs.size(); ++o) {
                    double* gw = w->grad.data() + o * w_stride;
                    for (const auto& [ri, ro] : pairs->pairs[o]) {
                        const double* xin = feat->data.data() + static_cast<std::size_t>(ri) * d_in;
                        const double* go = node.grad.data() + static_cast<std::size_t>(ro) * d_out;
                        for (int ci = 0; ci < d_in; ++ci) {
                            const double a = xin[ci];
                            if (a == 0.0) continue;
                            double* grow = gw + static_cast<std::size_t>(ci) * d_out;
                            for (int co = 0; co < d_out; ++co) grow[co] += a * go[co];
                        }
                    }
                }
            }
        });

    // forward: out[ro] += in[ri] * W[offset]
    {
        auto& o = result.data();
        const auto& x = input.features.data();
        const auto& w = weight.data();
        const std::size_t w_stride = static_cast<std::size_t>(d_in) * d_out;
        const auto& pr = *pairs;
        for (std::size_t off = 0; off < pr.pairs.size(); ++off) {
            const double* wo = w.data() + off * w_stride;
            for (const auto& [ri, ro] : pr.pairs[off]) {
                const double* xin = x.data() + static_cast<std::size_t>(ri) * d_in;
                double* orow = o.data() + static_cast<std::size_t>(ro) * d_out;
                for (int ci = 0; ci < d_in; ++ci) {
                    const double a = xin[ci];
                    if (a == 0.0) continue;
                    const double* wrow = wo + static_cast<std::size_t>(ci) * d_out;
                    for (int co = 0; co < d_out; ++co) orow[co] += a * wrow[co];
                }
            }
        }
    }
    out.features = result;
    return out;
}

SparseConvLayer::SparseConvLayer(std::array<int, 3> kernel, int in_ch, int out_ch,
                                 std::array<int, 3> stride, ConvMode mode, Rng& rng)
    : stride(stride), mode(mode) {
    const int fan = kernel[0] * kernel[1] * kernel[2] * in_ch;
    const double limit = std::sqrt(6.0 / static_cast<double>(fan + out_ch));
    weight = Tensor::uniform({kernel[0], kernel[1], kernel[2], in_ch, out_ch}, limit, rng);
    bias = Tensor::zeros({1, out_ch}, true);
}

SparseFeatureMap SparseConvLayer::forward(const SparseFeatureMap& input) const {
    SparseFeatureMap out = sparse_conv3d(input, weight, stride, mode);
    if (!out.empty()) out.features = add_rowvec(out.features, bias);
    return out;
}

void SparseConvLayer::collect(const std::string& prefix, NamedParams& out) const {
    out.emplace_back(prefix + ".weight", weight);
    out.emplace_back(prefix + ".bias", bias);
}

SceneEncoderConfig SceneEncoderConfig::desk() { return {VoxelConfig::desk(), 64, 4}; }

SceneEncoderConfig SceneEncoderConfig::paper() { return {VoxelConfig::paper(), 2048, 4}; }

SceneEncoder::SceneEncoder(SceneEncoderConfig cfg, Rng& rng) : cfg_(cfg) {
    const int dx = cfg.grid.dim_x(), dy = cfg.grid.dim_y();
    if (dx != dy) throw ConfigError("scene encoder requires square X/Y grid dims");
    if (cfg.feature_width % 4 != 0) throw ConfigError("feature width must be divisible by 4");
    int side = dx;
    int stages = 0;
    while (side > cfg.token_grid) {
        if (side % 2 != 0) throw ConfigError("grid side must reduce to token_grid by halving");
        side /= 2;
        ++stages;
    }
    if (side != cfg.token_grid) throw ConfigError("grid side incompatible with token grid");
    if (stages == 0) throw ConfigError("grid already at token resolution; nothing to encode");

    // channel schedule C -> D/4 -> D/2 -> D -> D ...
    const int d = cfg.feature_width;
    int in_ch = cfg.grid.class_count;
    int dz = cfg.grid.dim_z();
    for (int s = 0; s < stages; ++s) {
        const int out_ch = s == 0 ? d / 4 : (s == 1 ? d / 2 : d);
        subm_.emplace_back(std::array<int, 3>{3, 3, 3}, in_ch, out_ch,
                           std::array<int, 3>{1, 1, 1}, ConvMode::kSubmanifold, rng);
        const int sz = dz > 1 ? 2 : 1;
        down_.emplace_back(std::array<int, 3>{2, 2, sz}, out_ch, out_ch,
                           std::array<int, 3>{2, 2, sz}, ConvMode::kStrided, rng);
        dz = dz > 1 ? dz / 2 : 1;
        in_ch = out_ch;
    }
    // widen to D if the schedule ended early (shallow grids)
    if (in_ch != d) {
        subm_.emplace_back(std::array<int, 3>{1, 1, 1}, in_ch, d, std::array<int, 3>{1, 1, 1},
                           ConvMode::kSubmanifold, rng);
        down_.emplace_back(std::array<int, 3>{1, 1, 1}, d, d, std::array<int, 3>{1, 1, 1},
                           ConvMode::kStrided, rng);
    }
}

VisualTokens SceneEncoder::encode(const SparseVoxelGrid& grid) const {
    if (!(grid.config == cfg_.grid))
        throw ConfigError("scene encoder: grid voxel config does not match encoder preset");
    for (const auto& idx : grid.indices)
        if (idx.batch != 0) throw ConfigError("scene encoder: encode() takes a single-scene grid");

    SparseFeatureMap map = feature_map_from_grid(grid);
    for (std::size_t s = 0; s < subm_.size(); ++s) {
        map = subm_[s].forward(map);
        if (!map.empty()) map.features = gelu(map.features);
        map = down_[s].forward(map);
        if (!map.empty()) map.features = gelu(map.features);
    }

    const int g = cfg_.token_grid;
    const int zr = map.dims[2];
    const int d = cfg_.feature_width;
    const int t = g * g;
    VisualTokens out;
    out.grid_h = g;
    out.grid_w = g;
    if (map.empty()) {
        out.tokens = Tensor::zeros({t, d});
        return out;
    }

    // densify (absent sites = 0) then mean over Z
    std::vector<int> rows;
    rows.reserve(map.indices.size());
    for (const auto& idx : map.indices)
        rows.push_back((static_cast<int>(idx.ix) * g + static_cast<int>(idx.iy)) * zr +
                       static_cast<int>(idx.iz));
    Tensor dense = scatter_rows(map.features, rows, t * zr);
    std::vector<double> pool(static_cast<std::size_t>(t) * (t * zr), 0.0);
    for (int ti = 0; ti < t; ++ti)
        for (int z = 0; z < zr; ++z)
            pool[static_cast<std::size_t>(ti) * (t * zr) + ti * zr + z] = 1.0 / zr;
    out.tokens = matmul(Tensor::from_data({t, t * zr}, std::move(pool)), dense);
    return out;
}

void SceneEncoder::collect(const std::string& prefix, NamedParams& out) const {
    for (std::size_t s = 0; s < subm_.size(); ++s) {
        subm_[s].collect(prefix + ".stage" + std::to_string(s) + ".subm", out);
        down_[s].collect(prefix + ".stage" + std::to_string(s) + ".down", out);
    }
}

NamedParams SceneEncoder::named_params(const std::string& prefix) const {
    NamedParams out;
    collect(prefix, out);
    return out;
}

}  // namespace voxnav
