#include "voxnav/nn.hpp"

#include <cmath>

#include "voxnav/common.hpp"

namespace voxnav {

namespace {
double xavier_limit(int fan_in, int fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}
}  // namespace

Linear::Linear(int in, int out, Rng& rng)
    : weight(Tensor::uniform({in, out}, xavier_limit(in, out), rng)),
      bias(Tensor::zeros({1, out}, true)) {}

Tensor Linear::forward(const Tensor& x) const { return add_rowvec(matmul(x, weight), bias); }

void Linear::collect(const std::string& prefix, NamedParams& out) const {
    out.emplace_back(prefix + ".weight", weight);
    out.emplace_back(prefix + ".bias", bias);
}

MultiHeadAttention::MultiHeadAttention(int width, int heads, Rng& rng)
    : heads(heads),
      width(width),
      proj_q(width, width, rng),
      proj_k(width, width, rng),
      proj_v(width, width, rng),
      proj_out(width, width, rng) {
    if (heads < 1 || width % heads != 0)
        throw ConfigError("attention width must be divisible by head count");
}

Tensor MultiHeadAttention::forward(const Tensor& q, const Tensor& k, const Tensor& v) const {
    contract(q.ndim() == 2 && q.dim(1) == width, "attention: bad Q shape");
    contract(k.ndim() == 2 && k.dim(1) == width, "attention: bad K shape");
    contract(v.ndim() == 2 && v.dim(1) == width, "attention: bad V shape");
    contract(k.dim(0) == v.dim(0) && k.dim(0) >= 1, "attention: K/V row mismatch");

    const Tensor qp = proj_q.forward(q);
    const Tensor kp = proj_k.forward(k);
    const Tensor vp = proj_v.forward(v);

    const int dh = width / heads;
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Tensor> head_outs;
    head_outs.reserve(static_cast<std::size_t>(heads));
    for (int hi = 0; hi < heads; ++hi) {
        const int c0 = hi * dh, c1 = (hi + 1) * dh;
        Tensor qh = col_slice(qp, c0, c1);
        Tensor kh = col_slice(kp, c0, c1);
        Tensor vh = col_slice(vp, c0, c1);
        Tensor attn = softmax_rows(scale(matmul(qh, transpose(kh)), inv_scale));
        head_outs.push_back(matmul(attn, vh));
    }
    return proj_out.forward(heads == 1 ? head_outs[0] : concat_cols(head_outs));
}

void MultiHeadAttention::collect(const std::string& prefix, NamedParams& out) const {
    proj_q.collect(prefix + ".q", out);
    proj_k.collect(prefix + ".k", out);
    proj_v.collect(prefix + ".v", out);
    proj_out.collect(prefix + ".out", out);
}

PsiBlock::PsiBlock(int width, Rng& rng) : fc1(width, width, rng), fc2(width, width, rng) {}

Tensor PsiBlock::forward(const Tensor& x, const Tensor& residual) const {
    contract(x.shape() == residual.shape(), "psi block: width mismatch");
    return add(fc2.forward(gelu(fc1.forward(x))), residual);
}

void PsiBlock::collect(const std::string& prefix, NamedParams& out) const {
    fc1.collect(prefix + ".fc1", out);
    fc2.collect(prefix + ".fc2", out);
}

LSTMCell::LSTMCell(int input_width, int hidden_width, Rng& rng)
    : input_width(input_width),
      hidden_width(hidden_width),
      w_input(Tensor::uniform({input_width, 4 * hidden_width},
                              xavier_limit(input_width, hidden_width), rng)),
      w_hidden(Tensor::uniform({hidden_width, 4 * hidden_width},
                               xavier_limit(hidden_width, hidden_width), rng)),
      bias(Tensor::zeros({1, 4 * hidden_width}, true)) {}

LSTMCell::State LSTMCell::forward(const Tensor& x, const Tensor& h, const Tensor& c) const {
    contract(x.ndim() == 2 && x.dim(1) == input_width, "lstm: bad input shape");
    contract(h.ndim() == 2 && h.dim(1) == hidden_width, "lstm: bad hidden shape");
    contract(c.shape() == h.shape(), "lstm: h/c shape mismatch");
    contract(x.dim(0) == h.dim(0), "lstm: batch mismatch");

    const int dh = hidden_width;
    Tensor gates = add_rowvec(add(matmul(x, w_input), matmul(h, w_hidden)), bias);
    Tensor ig = sigmoid(col_slice(gates, 0, dh));
    Tensor fg = sigmoid(col_slice(gates, dh, 2 * dh));
    Tensor gg = tanh_op(col_slice(gates, 2 * dh, 3 * dh));
    Tensor og = sigmoid(col_slice(gates, 3 * dh, 4 * dh));
    Tensor c_next = add(mul(fg, c), mul(ig, gg));
    Tensor h_next = mul(og, tanh_op(c_next));
    return {h_next, c_next};
}

void LSTMCell::collect(const std::string& prefix, NamedParams& out) const {
    out.emplace_back(prefix + ".w_input", w_input);
    out.emplace_back(prefix + ".w_hidden", w_hidden);
    out.emplace_back(prefix + ".bias", bias);
}

}  // namespace voxnav
