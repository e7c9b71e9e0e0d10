#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "voxnav/rng.hpp"

namespace voxnav {

using Shape = std::vector<int>;

std::int64_t numel(const Shape& shape);

struct TensorNode;

// Value-semantic handle onto a node of the gradient tape. Copying a Tensor
// aliases the node. All data is fp64, row-major. Graph construction and
// backward are single-threaded per graph instance.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    // Uniform init in [-limit, limit]; Xavier-style limits are computed by callers.
    static Tensor uniform(Shape shape, double limit, Rng& rng, bool requires_grad = true);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::int64_t size() const;
    int dim(int i) const;
    int ndim() const;
    bool requires_grad() const;

    std::vector<double>& data();
    const std::vector<double>& data() const;
    std::vector<double>& grad();
    const std::vector<double>& grad() const;

    double value() const;  // scalar tensors only
    double at(std::initializer_list<int> idx) const;

    void zero_grad();
    // Fresh constant copy of the values, disconnected from the tape.
    Tensor detached() const;

    TensorNode* node() const { return node_.get(); }
    std::shared_ptr<TensorNode> shared_node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}
    std::shared_ptr<TensorNode> node_;

    friend Tensor make_op_result(Shape shape, std::vector<Tensor> parents,
                                 std::function<void(TensorNode&)> backward_fn);
};

struct TensorNode {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // sized like data iff requires_grad
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;

    void ensure_grad();
};

// Creates the result node of a recorded op. requires_grad propagates from
// parents; backward_fn reads node.grad and accumulates into parent grads.
Tensor make_op_result(Shape shape, std::vector<Tensor> parents,
                      std::function<void(TensorNode&)> backward_fn);

// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
// reachable requires_grad node; call zero_grad between optimizer steps.
void backward(const Tensor& loss);

// --- elementwise and structural ops ---

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);    // [m,k]x[k,n] -> [m,n]
Tensor transpose(const Tensor& a);                  // 2-D
Tensor reshape(const Tensor& a, Shape shape);       // same numel, copies data
Tensor concat_cols(const std::vector<Tensor>& xs);  // same row count
Tensor concat_rows(const std::vector<Tensor>& xs);  // same col count
Tensor col_slice(const Tensor& a, int c0, int c1);  // columns [c0, c1)
Tensor row_slice(const Tensor& a, int r0, int r1);  // rows [r0, r1)
Tensor add_rowvec(const Tensor& a, const Tensor& v);  // [m,n] + [1,n]

Tensor tanh_op(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor gelu(const Tensor& a);  // tanh approximation, the project-wide definition
Tensor softmax_rows(const Tensor& a);

Tensor sum(const Tensor& a);       // -> scalar
Tensor mean_rows(const Tensor& a); // [m,n] -> [1,n]
Tensor square(const Tensor& a);
Tensor mse(const Tensor& a, const Tensor& b);  // mean squared difference -> scalar

// Mean negative log softmax probability of the target classes.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets);

// Row gather: out[i,:] = table[ids[i],:]. Gradient scatter-adds into table.
Tensor embedding(const Tensor& table, const std::vector<int>& ids);

// Row scatter into a dense zero matrix: out[row_ids[i],:] += src[i,:].
Tensor scatter_rows(const Tensor& src, const std::vector<int>& row_ids, int out_rows);

// --- optimizer ---

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// Decoupled weight decay Adam with bias correction.
class AdamW {
public:
    AdamW(std::vector<Tensor> params, AdamWConfig cfg);
    void step();
    void zero_grad();
    std::int64_t step_count() const { return step_count_; }
    const AdamWConfig& config() const { return cfg_; }
    AdamWConfig& config() { return cfg_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    AdamWConfig cfg_;
    std::int64_t step_count_ = 0;
};

// Max relative error between analytic gradients and central finite
// differences over sampled coordinates of params. build_loss must be a
// deterministic function of the current parameter values.
double grad_check(const std::function<Tensor()>& build_loss, const std::vector<Tensor>& params,
                  double h = 1e-5, int max_coords_per_param = 24, std::uint64_t probe_seed = 17);

}  // namespace voxnav
