#pragma once

// Minimal tape-based reverse-mode automatic differentiation over dense
// double-precision tensors. Only the primitives the segmentation model and
// its losses need are provided; there is no broadcasting beyond the
// tensor-by-scalar case of scale().

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace crg::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Tensor {
    Shape shape;
    std::vector<double> values;

    Tensor() = default;
    explicit Tensor(Shape s);
    Tensor(Shape s, std::vector<double> v);

    static Tensor scalar(double v) { return Tensor({}, {v}); }
    static Tensor filled(Shape s, double v);

    std::size_t size() const { return values.size(); }
    bool is_scalar() const { return values.size() == 1; }
    double item() const;

    bool operator==(const Tensor&) const = default;
};

class Tape;

// Handle to a node recorded on a tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape; }
};

class Tape {
public:
    // Accumulates into the gradients of a node's inputs, given the adjoint of
    // the node's output. `grads` is indexed by node id.
    using Adjoint = std::function<void(const Tensor& out_grad, std::vector<Tensor>& grads)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Constant input; backward never produces a gradient for it.
    Var constant(Tensor value);
    // Differentiable leaf; backward returns its gradient.
    Var parameter(Tensor value);

    Var record(Tensor value, std::vector<std::size_t> inputs, Adjoint adjoint);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    std::size_t size() const { return nodes_.size(); }

    // Gradient of a scalar `loss` with respect to every parameter, in the
    // order the parameters were created.
    std::vector<Tensor> backward(Var loss) const;

private:
    struct Node {
        Tensor value;
        std::vector<std::size_t> inputs;
        Adjoint adjoint;
        bool is_parameter = false;
        bool needs_grad = false;
    };

    std::deque<Node> nodes_;  // stable references while recording
    std::vector<std::size_t> parameters_;
};

// Elementwise.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var relu(Var a);
Var square(Var a);
// Natural log of max(a, floor); the gradient is zero where the floor is hit.
Var log(Var a, double floor = 0.0);

// [m, n] x [n, p] -> [m, p].
Var matmul(Var a, Var b);

// Stride-1 2-D convolution with zero padding (kernel/2) and per-channel bias.
// input [H, W, Cin], weight [K, K, Cin, Cout] with K odd, bias [Cout].
Var conv2d(Var input, Var weight, Var bias);

// Softmax over the last dimension.
Var softmax(Var a);

Var sum(Var a);
Var mean(Var a);

// Flat-index gather: out[j] = a.values[indices[j]], shape [indices.size()].
Var gather(Var a, std::vector<std::size_t> indices);

struct Sorted {
    Var values;
    // values[j] == input[permutation[j]]
    std::vector<std::size_t> permutation;
};

// Stable descending sort of a 1-D tensor. The permutation is treated as
// locally constant: gradients scatter back through it.
Sorted sort_descending(Var a);

// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double eps);

// max_i |a_i - b_i| / max(max_i |a_i|, max_i |b_i|, floor): the worst
// deviation relative to the tensor's own scale, so that near-zero entries
// next to large ones do not measure finite-difference rounding.
double max_relative_error(const Tensor& a, const Tensor& b, double floor = 1e-6);

}  // namespace crg::ad
