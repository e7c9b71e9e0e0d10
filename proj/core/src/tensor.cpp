#include "voxnav/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "voxnav/common.hpp"

namespace voxnav {

std::int64_t numel(const Shape& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        contract(d > 0, "shape dims must be positive");
        n *= d;
    }
    return n;
}

void TensorNode::ensure_grad() {
    if (requires_grad && grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

// --- Tensor handle ---

namespace {
std::shared_ptr<TensorNode> make_leaf(Shape shape, std::vector<double> data, bool requires_grad) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    node->ensure_grad();
    return node;
}
}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto n = numel(shape);
    return Tensor(make_leaf(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0),
                            requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    auto n = numel(shape);
    return Tensor(make_leaf(std::move(shape),
                            std::vector<double>(static_cast<std::size_t>(n), value), requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    contract(static_cast<std::int64_t>(data.size()) == numel(shape),
             "from_data: data length does not match shape");
    return Tensor(make_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::uniform(Shape shape, double limit, Rng& rng, bool requires_grad) {
    auto n = numel(shape);
    std::vector<double> data(static_cast<std::size_t>(n));
    for (auto& x : data) x = rng.uniform(-limit, limit);
    return Tensor(make_leaf(std::move(shape), std::move(data), requires_grad));
}

const Shape& Tensor::shape() const { return node_->shape; }
std::int64_t Tensor::size() const { return static_cast<std::int64_t>(node_->data.size()); }
int Tensor::dim(int i) const { return node_->shape.at(static_cast<std::size_t>(i)); }
int Tensor::ndim() const { return static_cast<int>(node_->shape.size()); }
bool Tensor::requires_grad() const { return node_->requires_grad; }

std::vector<double>& Tensor::data() { return node_->data; }
const std::vector<double>& Tensor::data() const { return node_->data; }

std::vector<double>& Tensor::grad() {
    contract(node_->requires_grad, "grad() on a tensor without requires_grad");
    node_->ensure_grad();
    return node_->grad;
}

const std::vector<double>& Tensor::grad() const {
    contract(node_->requires_grad, "grad() on a tensor without requires_grad");
    node_->ensure_grad();
    return node_->grad;
}

double Tensor::value() const {
    contract(size() == 1, "value() requires a scalar tensor");
    return node_->data[0];
}

double Tensor::at(std::initializer_list<int> idx) const {
    contract(idx.size() == node_->shape.size(), "at(): index rank mismatch");
    std::int64_t flat = 0;
    std::size_t k = 0;
    for (int i : idx) {
        contract(i >= 0 && i < node_->shape[k], "at(): index out of range");
        flat = flat * node_->shape[k] + i;
        ++k;
    }
    return node_->data[static_cast<std::size_t>(flat)];
}

void Tensor::zero_grad() {
    if (node_->requires_grad) node_->grad.assign(node_->data.size(), 0.0);
}

Tensor Tensor::detached() const { return from_data(node_->shape, node_->data, false); }

Tensor make_op_result(Shape shape, std::vector<Tensor> parents,
                      std::function<void(TensorNode&)> backward_fn) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->data.assign(static_cast<std::size_t>(numel(node->shape)), 0.0);
    bool req = false;
    node->parents.reserve(parents.size());
    for (const auto& p : parents) {
        req = req || p.requires_grad();
        node->parents.push_back(p.shared_node());
    }
    node->requires_grad = req;
    if (req) {
        node->ensure_grad();
        node->backward_fn = std::move(backward_fn);
    }
    return Tensor(node);
}

// --- backward ---

void backward(const Tensor& loss) {
    contract(loss.defined() && loss.size() == 1, "backward: loss must be a scalar tensor");
    TensorNode* root = loss.node();
    if (!root->requires_grad) return;  // no parameters reachable

    // Iterative DFS post-order; children (parents in tape terms) first.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, next_child] = stack.back();
        if (next_child < node->parents.size()) {
            TensorNode* child = node->parents[next_child].get();
            ++next_child;
            if (child->requires_grad && visited.insert(child).second) {
                stack.emplace_back(child, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
    }
}

// --- op helpers ---

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    contract(a.shape() == b.shape(), std::string(op) + ": shape mismatch");
}

void check_2d(const Tensor& a, const char* op) {
    contract(a.ndim() == 2, std::string(op) + ": tensor must be 2-D");
}

void accum(TensorNode* p, const std::vector<double>& g) {
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) p->grad[i] += g[i];
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

// --- elementwise ---

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out = make_op_result(a.shape(), {a, b}, [](TensorNode& n) {
        accum(n.parents[0].get(), n.grad);
        accum(n.parents[1].get(), n.grad);
    });
    auto& o = out.data();
    const auto& x = a.data();
    const auto& y = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out = make_op_result(a.shape(), {a, b}, [](TensorNode& n) {
        accum(n.parents[0].get(), n.grad);
        TensorNode* p = n.parents[1].get();
        if (p->requires_grad) {
            p->ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) p->grad[i] -= n.grad[i];
        }
    });
    auto& o = out.data();
    const auto& x = a.data();
    const auto& y = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor out = make_op_result(a.shape(), {a, b}, [](TensorNode& n) {
        TensorNode* pa = n.parents[0].get();
        TensorNode* pb = n.parents[1].get();
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i] * pb->data[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) pb->grad[i] += n.grad[i] * pa->data[i];
        }
    });
    auto& o = out.data();
    const auto& x = a.data();
    const auto& y = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
    return out;
}

Tensor scale(const Tensor& a, double c) {
    Tensor out = make_op_result(a.shape(), {a}, [c](TensorNode& n) {
        TensorNode* p = n.parents[0].get();
        if (p->requires_grad) {
            p->ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) p->grad[i] += c * n.grad[i];
        }
    });
    auto& o = out.data();
    const auto& x = a.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = c * x[i];
    return out;
}

Tensor add_scalar(const Tensor& a, double c) {
    Tensor out = make_op_result(a.shape(), {a},
                                [](TensorNode& n) { accum(n.parents[0].get(), n.grad); });
    auto& o = out.data();
    const auto& x = a.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + c;
    return out;
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

// --- linear algebra ---

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_2d(a, "matmul");
    check_2d(b, "matmul");
    const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    contract(k == k2, "matmul: inner dimensions differ");
    Tensor out = make_op_result({m, n}, {a, b}, [m, k, n](TensorNode& node) {
        TensorNode* pa = node.parents[0].get();
        TensorNode* pb = node.parents[1].get();
        if (pa->requires_grad) {
            pa->ensure_grad();  // dA += dC * B^T
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const double g = node.grad[static_cast<std::size_t>(i) * n + j];
                    if (g == 0.0) continue;
                    for (int t = 0; t < k; ++t)
                        pa->grad[static_cast<std::size_t>(i) * k + t] +=
                            g * pb->data[static_cast<std::size_t>(t) * n + j];
                }
        }
        if (pb->requires_grad) {
            pb->ensure_grad();  // dB += A^T * dC
            for (int i = 0; i < m; ++i)
                for (int t = 0; t < k; ++t) {
                    const double av = pa->data[static_cast<std::size_t>(i) * k + t];
                    if (av == 0.0) continue;
                    for (int j = 0; j < n; ++j)
                        pb->grad[static_cast<std::size_t>(t) * n + j] +=
                            av * node.grad[static_cast<std::size_t>(i) * n + j];
                }
        }
    });
    auto& o = out.data();
    const auto& x = a.data();
    const auto& y = b.data();
    for (int i = 0; i < m; ++i)
        for (int t = 0; t < k; ++t) {
            const double av = x[static_cast<std::size_t>(i) * k + t];
            if (av == 0.0) continue;
            for (int j = 0; j < n; ++j)
                o[static_cast<std::size_t>(i) * n + j] += av * y[static_cast<std::size_t>(t) * n + j];
        }
    return out;
}

Tensor transpose(const Tensor& a) {
    check_2d(a, "transpose");
    const int m = a.dim(0), n = a.dim(1);
    Tensor out = make_op_result({n, m}, {a}, [m, n](TensorNode& node) {
        TensorNode* p = node.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j)
                p->grad[static_cast<std::size_t>(j) * n + i] +=
                    node.grad[static_cast<std::size_t>(i) * m + j];
    });
    auto& o = out.data();
    const auto& x = a.data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            o[static_cast<std::size_t>(j) * m + i] = x[static_cast<std::size_t>(i) * n + j];
    return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
    contract(numel(shape) == a.size(), "reshape: numel mismatch");
    Tensor out = make_op_result(std::move(shape), {a},
                                [](TensorNode& n) { accum(n.parents[0].get(), n.grad); });
    out.data() = a.data();
    return out;
}

Tensor concat_cols(const std::vector<Tensor>& xs) {
    contract(!xs.empty(), "concat_cols: empty input");
    const int m = xs[0].dim(0);
    int total = 0;
    for (const auto& x : xs) {
        check_2d(x, "concat_cols");
        contract(x.dim(0) == m, "concat_cols: row count mismatch");
        total += x.dim(1);
    }
    std::vector<int> widths;
    widths.reserve(xs.size());
    for (const auto& x : xs) widths.push_back(x.dim(1));
    Tensor out = make_op_result({m, total}, xs, [m, total, widths](TensorNode& node) {
        int c0 = 0;
        for (std::size_t pi = 0; pi < node.parents.size(); ++pi) {
            TensorNode* p = node.parents[pi].get();
            const int w = widths[pi];
            if (p->requires_grad) {
                p->ensure_grad();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < w; ++j)
                        p->grad[static_cast<std::size_t>(i) * w + j] +=
                            node.grad[static_cast<std::size_t>(i) * total + c0 + j];
            }
            c0 += w;
        }
    });
    auto& o = out.data();
    int c0 = 0;
    for (const auto& x : xs) {
        const int w = x.dim(1);
        const auto& d = x.data();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < w; ++j)
                o[static_cast<std::size_t>(i) * total + c0 + j] = d[static_cast<std::size_t>(i) * w + j];
        c0 += w;
    }
    return out;
}

Tensor concat_rows(const std::vector<Tensor>& xs) {
    contract(!xs.empty(), "concat_rows: empty input");
    const int n = xs[0].dim(1);
    int total = 0;
    for (const auto& x : xs) {
        check_2d(x, "concat_rows");
        contract(x.dim(1) == n, "concat_rows: column count mismatch");
        total += x.dim(0);
    }
    std::vector<int> heights;
    heights.reserve(xs.size());
    for (const auto& x : xs) heights.push_back(x.dim(0));
    Tensor out = make_op_result({total, n}, xs, [n, heights](TensorNode& node) {
        std::size_t r0 = 0;
        for (std::size_t pi = 0; pi < node.parents.size(); ++pi) {
            TensorNode* p = node.parents[pi].get();
            const std::size_t elems = static_cast<std::size_t>(heights[pi]) * n;
            if (p->requires_grad) {
                p->ensure_grad();
                for (std::size_t i = 0; i < elems; ++i) p->grad[i] += node.grad[r0 + i];
            }
            r0 += elems;
        }
    });
    auto& o = out.data();
    std::size_t r0 = 0;
    for (const auto& x : xs) {
        const auto& d = x.data();
        std::copy(d.begin(), d.end(), o.begin() + static_cast<std::ptrdiff_t>(r0));
        r0 += d.size();
    }
    return out;
}

Tensor col_slice(const Tensor& a, int c0, int c1) {
    check_2d(a, "col_slice");
    const int m = a.dim(0), n = a.dim(1);
    contract(0 <= c0 && c0 < c1 && c1 <= n, "col_slice: bad column range");
    const int w = c1 - c0;
    Tensor out = make_op_result({m, w}, {a}, [m, n, c0, w](TensorNode& node) {
        TensorNode* p = node.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < w; ++j)
                p->grad[static_cast<std::size_t>(i) * n + c0 + j] +=
                    node.grad[static_cast<std::size_t>(i) * w + j];
    });
    auto& o = out.data();
    const auto& x = a.data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < w; ++j)
            o[static_cast<std::size_t>(i) * w + j] = x[static_cast<std::size_t>(i) * n + c0 + j];
    return out;
}

Tensor row_slice(const Tensor& a, int r0, int r1) {
    check_2d(a, "row_slice");
    const int m = a.dim(0), n = a.dim(1);
    contract(0 <= r0 && r0 < r1 && r1 <= m, "row_slice: bad row range");
    const int h = r1 - r0;
    Tensor out = make_op_result({h, n}, {a}, [n, r0, h](TensorNode& node) {
        TensorNode* p = node.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        const std::size_t base = static_cast<std::size_t>(r0) * n;
        for (std::size_t i = 0; i < static_cast<std::size_t>(h) * n; ++i)
            p->grad[base + i] += node.grad[i];
    });
    auto& o = out.data();
    const auto& x = a.data();
    const std::size_t base = static_cast<std::size_t>(r0) * n;
    std::copy(x.begin() + static_cast<std::ptrdiff_t>(base),
              x.begin() + static_cast<std::ptrdiff_t>(base + static_cast<std::size_t>(h) * n),
              o.begin());
    return out;
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
    check_2d(a, "add_rowvec");
    check_2d(v, "add_rowvec");
    const int m = a.dim(0), n = a.dim(1);
    contract(v.dim(0) == 1 && v.dim(1) == n, "add_rowvec: vector must be [1,n]");
    Tensor out = make_op_result({m, n}, {a, v}, [m, n](TensorNode& node) {
        accum(node.parents[0].get(), node.grad);
        TensorNode* pv = node.parents[1].get();
        if (pv->requires_grad) {
            pv->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    pv->grad[static_cast<std::size_t>(j)] +=
                        node.grad[static_cast<std::size_t>(i) * n + j];
        }
    });
    auto& o = out.data();
    const auto& x = a.data();
    const auto& y = v.data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            o[static_cast<std::size_t>(i) * n + j] = x[static_cast<std::size_t>(i) * n + j] + y[static_cast<std::size_t>(j)];
    return out;
}

// --- nonlinearities ---

Tensor tanh_op(const Tensor& a) {
    Tensor out = make_op_result(a.shape(), {a}, [](TensorNode& node) {
        TensorNode* p = node.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (std::size_t i = 0; i < node.grad.size(); ++i) {
            const double t = node.data[i];
            p->grad[i] += node.grad[i] * (1.0 - t * t);
        }
    });
    auto& o = out.data();
    const auto& x = a.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::tanh(x[i]);
    return out;
}

Tensor sigmoid(const Tensor& a) {
    Tensor out = make_op_result(a.shape(), {a}, [](TensorNode& node) {
        TensorNode* p = node.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (std::size_t i = 0; i < node.grad.size(); ++i) {
            const double s = node.data[i];
            p->grad[i] += node.grad[i] * s * (1.0 - s);
        }
    });
    auto& o = out.data();
    const auto& x = a.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = 1.0 / (1.0 + std::exp(-x[i]));
    return out;
}

Tensor gelu(const Tensor& a) {
    Tensor out = make_op_result(a.shape(), {a}, [](TensorNode& node) {
        TensorNode* p = node.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (std::size_t i = 0; i < node.grad.size(); ++i) {
            const double x = p->data[i];
            const double u = kGeluC * (x + kGeluA * x * x * x);
            const double t = std::tanh(u);
            const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
            const double d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
            p->grad[i] += node.grad[i] * d;
        }
    });
    auto& o = out.data();
    const auto& x = a.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
        const double u = kGeluC * (x[i] + kGeluA * x[i] * x[i] * x[i]);
        o[i] = 0.5 * x[i] * (1.0 + std::tanh(u));
    }
    return out;
}

Tensor softmax_rows(const Tensor& a) {
    check_2d(a, "softmax_rows");
    const int m = a.dim(0), n = a.dim(1);
    Tensor out = make_op_result({m, n}, {a}, [m, n](TensorNode& node) {
        TensorNode* p = node.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (int i = 0; i < m; ++i) {
            const std::size_t base = static_cast<std::size_t>(i) * n;
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += node.grad[base + j] * node.data[base + j];
            for (int j = 0; j < n; ++j)
                p->grad[base + j] += node.data[base + j] * (node.grad[base + j] - dot);
        }
    });
    auto& o = out.data();
    const auto& x = a.data();
    for (int i = 0; i < m; ++i) {
        const std::size_t base = static_cast<std::size_t>(i) * n;
        double mx = x[base];
        for (int j = 1; j < n; ++j) mx = std::max(mx, x[base + j]);
        double z = 0.0;
        for (int j = 0; j < n; ++j) {
            o[base + j] = std::exp(x[base + j] - mx);
            z += o[base + j];
        }
        for (int j = 0; j < n; ++j) o[base + j] /= z;
    }
    return out;
}

// --- reductions ---

Tensor sum(const Tensor& a) {
    Tensor out = make_op_result({1}, {a}, [](TensorNode& node) {
        TensorNode* p = node.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (auto& g : p->grad) g += node.grad[0];
    });
    double s = 0.0;
    for (double x : a.data()) s += x;
    out.data()[0] = s;
    return out;
}

Tensor mean_rows(const Tensor& a) {
    check_2d(a, "mean_rows");
    const int m = a.dim(0), n = a.dim(1);
    Tensor out = make_op_result({1, n}, {a}, [m, n](TensorNode& node) {
        TensorNode* p = node.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        const double inv = 1.0 / m;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                p->grad[static_cast<std::size_t>(i) * n + j] += node.grad[static_cast<std::size_t>(j)] * inv;
    });
    auto& o = out.data();
    const auto& x = a.data();
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = 0; i < m; ++i) s += x[static_cast<std::size_t>(i) * n + j];
        o[static_cast<std::size_t>(j)] = s / m;
    }
    return out;
}

Tensor square(const Tensor& a) { return mul(a, a); }

Tensor mse(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mse");
    Tensor d = sub(a, b);
    return scale(sum(square(d)), 1.0 / static_cast<double>(a.size()));
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets) {
    check_2d(logits, "cross_entropy");
    const int n = logits.dim(0), k = logits.dim(1);
    contract(static_cast<int>(targets.size()) == n, "cross_entropy: target count mismatch");
    for (int t : targets) contract(t >= 0 && t < k, "cross_entropy: target out of range");
    Tensor out = make_op_result({1}, {logits}, [n, k, targets](TensorNode& node) {
        TensorNode* p = node.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        const double g = node.grad[0] / n;
        for (int i = 0; i < n; ++i) {
            const std::size_t base = static_cast<std::size_t>(i) * k;
            double mx = p->data[base];
            for (int j = 1; j < k; ++j) mx = std::max(mx, p->data[base + j]);
            double z = 0.0;
            for (int j = 0; j < k; ++j) z += std::exp(p->data[base + j] - mx);
            for (int j = 0; j < k; ++j) {
                const double prob = std::exp(p->data[base + j] - mx) / z;
                p->grad[base + j] += g * (prob - (j == targets[static_cast<std::size_t>(i)] ? 1.0 : 0.0));
            }
        }
    });
    const auto& x = logits.data();
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const std::size_t base = static_cast<std::size_t>(i) * k;
        double mx = x[base];
        for (int j = 1; j < k; ++j) mx = std::max(mx, x[base + j]);
        double z = 0.0;
        for (int j = 0; j < k; ++j) z += std::exp(x[base + j] - mx);
        loss += mx + std::log(z) - x[base + static_cast<std::size_t>(targets[static_cast<std::size_t>(i)])];
    }
    out.data()[0] = loss / n;
    return out;
}

Tensor embedding(const Tensor& table, const std::vector<int>& ids) {
    check_2d(table, "embedding");
    const int v = table.dim(0), d = table.dim(1);
    for (int id : ids) contract(id >= 0 && id < v, "embedding: id out of range");
    const int n = static_cast<int>(ids.size());
    contract(n > 0, "embedding: empty id list");
    Tensor out = make_op_result({n, d}, {table}, [d, ids](TensorNode& node) {
        TensorNode* p = node.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const std::size_t src = i * static_cast<std::size_t>(d);
            const std::size_t dst = static_cast<std::size_t>(ids[i]) * d;
            for (int j = 0; j < d; ++j) p->grad[dst + j] += node.grad[src + j];
        }
    });
    auto& o = out.data();
    const auto& t = table.data();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const std::size_t src = static_cast<std::size_t>(ids[i]) * d;
        const std::size_t dst = i * static_cast<std::size_t>(d);
        for (int j = 0; j < d; ++j) o[dst + j] = t[src + j];
    }
    return out;
}

Tensor scatter_rows(const Tensor& src, const std::vector<int>& row_ids, int out_rows) {
    check_2d(src, "scatter_rows");
    const int k = src.dim(0), d = src.dim(1);
    contract(static_cast<int>(row_ids.size()) == k, "scatter_rows: row id count mismatch");
    for (int r : row_ids) contract(r >= 0 && r < out_rows, "scatter_rows: row id out of range");
    Tensor out = make_op_result({out_rows, d}, {src}, [d, row_ids](TensorNode& node) {
        TensorNode* p = node.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (std::size_t i = 0; i < row_ids.size(); ++i) {
            const std::size_t src_off = static_cast<std::size_t>(row_ids[i]) * d;
            const std::size_t dst_off = i * static_cast<std::size_t>(d);
            for (int j = 0; j < d; ++j) p->grad[dst_off + j] += node.grad[src_off + j];
        }
    });
    auto& o = out.data();
    const auto& x = src.data();
    for (std::size_t i = 0; i < row_ids.size(); ++i) {
        const std::size_t dst = static_cast<std::size_t>(row_ids[i]) * d;
        const std::size_t s = i * static_cast<std::size_t>(d);
        for (int j = 0; j < d; ++j) o[dst + j] += x[s + j];
    }
    return out;
}

// --- AdamW ---

AdamW::AdamW(std::vector<Tensor> params, AdamWConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        contract(p.requires_grad(), "AdamW: parameter without requires_grad");
        m_.emplace_back(p.data().size(), 0.0);
        v_.emplace_back(p.data().size(), 0.0);
    }
}

void AdamW::step() {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        auto& p = params_[pi].data();
        const auto& g = params_[pi].grad();
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            // decoupled weight decay, applied directly to the parameter
            p[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * p[i]);
        }
    }
}

void AdamW::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

// --- gradient checking ---

double grad_check(const std::function<Tensor()>& build_loss, const std::vector<Tensor>& params,
                  double h, int max_coords_per_param, std::uint64_t probe_seed) {
    // analytic gradients at the probe point
    for (const auto& p : params) const_cast<Tensor&>(p).zero_grad();
    Tensor loss = build_loss();
    backward(loss);

    Rng rng(probe_seed, "grad-check");
    double max_rel = 0.0;
    for (const auto& p : params) {
        auto& data = const_cast<Tensor&>(p).data();
        const auto& grad = p.grad();
        const std::int64_t n = p.size();
        std::vector<std::int64_t> coords;
        if (n <= max_coords_per_param) {
            coords.resize(static_cast<std::size_t>(n));
            for (std::int64_t i = 0; i < n; ++i) coords[static_cast<std::size_t>(i)] = i;
        } else {
            for (int i = 0; i < max_coords_per_param; ++i)
                coords.push_back(static_cast<std::int64_t>(rng.bounded(static_cast<std::uint64_t>(n))));
        }
        for (std::int64_t c : coords) {
            const std::size_t ci = static_cast<std::size_t>(c);
            const double saved = data[ci];
            data[ci] = saved + h;
            const double f_plus = build_loss().value();
            data[ci] = saved - h;
            const double f_minus = build_loss().value();
            data[ci] = saved;
            const double numeric = (f_plus - f_minus) / (2.0 * h);
            const double analytic = grad[ci];
            const double rel =
                std::abs(analytic - numeric) / (std::abs(analytic) + std::abs(numeric) + 1e-12);
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace voxnav
