#pragma once

#include <string>
#include <utility>
#include <vector>

#include "voxnav/rng.hpp"
#include "voxnav/tensor.hpp"

namespace voxnav {

// Ordered (name, parameter) pairs; ordering defines checkpoint layout.
using NamedParams = std::vector<std::pair<std::string, Tensor>>;

inline std::vector<Tensor> param_list(const NamedParams& named) {
    std::vector<Tensor> out;
    out.reserve(named.size());
    for (const auto& [name, p] : named) out.push_back(p);
    return out;
}

// y = x W + b
struct Linear {
    Tensor weight;  // [in, out]
    Tensor bias;    // [1, out]

    Linear() = default;
    Linear(int in, int out, Rng& rng);

    Tensor forward(const Tensor& x) const;
    void collect(const std::string& prefix, NamedParams& out) const;
};

// Standard scaled dot-product multi-head attention with learned per-head
// projections and an output projection. K and V share the row count.
struct MultiHeadAttention {
    int heads = 1;
    int width = 0;
    Linear proj_q, proj_k, proj_v, proj_out;

    MultiHeadAttention() = default;
    MultiHeadAttention(int width, int heads, Rng& rng);

    // Q:[nq,d] K:[nk,d] V:[nk,d] -> [nq,d]
    Tensor forward(const Tensor& q, const Tensor& k, const Tensor& v) const;
    void collect(const std::string& prefix, NamedParams& out) const;
};

// Two-layer MLP with GELU, output added to the residual argument.
struct PsiBlock {
    Linear fc1, fc2;

    PsiBlock() = default;
    PsiBlock(int width, Rng& rng);

    Tensor forward(const Tensor& x, const Tensor& residual) const;
    void collect(const std::string& prefix, NamedParams& out) const;
};

// LSTM cell; gate layout along columns is [input, forget, candidate, output].
struct LSTMCell {
    int input_width = 0;
    int hidden_width = 0;
    Tensor w_input;   // [di, 4*dh]
    Tensor w_hidden;  // [dh, 4*dh]
    Tensor bias;      // [1, 4*dh]

    LSTMCell() = default;
    LSTMCell(int input_width, int hidden_width, Rng& rng);

    struct State {
        Tensor h;
        Tensor c;
    };
    State forward(const Tensor& x, const Tensor& h, const Tensor& c) const;
    void collect(const std::string& prefix, NamedParams& out) const;
};

}  // namespace voxnav
