// Copyright 2026 The evopt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EVOPT_TENSOR_HPP
#define EVOPT_TENSOR_HPP

#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace evopt {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

namespace detail {
struct TensorNode;
}

/// Dense row-major tensor of doubles. Copies share storage; ops never modify
/// their operands. Most ops work on rank-2 tensors; a scalar is {1, 1}.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor filled(Shape shape, double value);
    static Tensor constant(Shape shape, std::vector<double> values);
    static Tensor scalar(double value);
    /// Leaf with requires_grad set.
    static Tensor parameter(Shape shape, std::vector<double> values);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t size() const;
    /// Rank-2 extents.
    std::size_t rows() const;
    std::size_t cols() const;

    const std::vector<double>& values() const;
    /// In-place write access for optimizers and perturbation checks.
    std::vector<double>& mutable_values();
    double item() const;
    double at(std::size_t r, std::size_t c) const;

    bool requires_grad() const;
    /// Zero-length until a backward pass reaches the tensor.
    const std::vector<double>& grad() const;
    void zero_grad();

    bool same_node(const Tensor& other) const { return node_ == other.node_; }

private:
    friend struct TensorAccess;
    explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::TensorNode> node_;
};

/// Record of differentiable ops for one forward pass. Ops append to the tape
/// that is active on the calling thread; with no active tape ops only compute
/// values.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    /// Populates grads of every requires_grad tensor reachable from `loss`.
    /// Leaf grads accumulate across calls; intermediate grads are recomputed.
    void backward(const Tensor& loss);

    static Tape* active();

private:
    friend struct TensorAccess;
    std::vector<std::shared_ptr<detail::TensorNode>> nodes_;
};

/// Makes `tape` the active tape of this thread for the scope's lifetime.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

/// Disables recording for the scope's lifetime.
class NoGradScope {
public:
    NoGradScope();
    ~NoGradScope();
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

private:
    Tape* previous_;
};

Tensor matmul(const Tensor& a, const Tensor& b);
/// Elementwise; either operand may be a {1,1} scalar.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor neg(const Tensor& a);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length);
Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose(const Tensor& a);
/// Row `row` of a rank-2 tensor reinterpreted as `shape`.
Tensor row_reshape(const Tensor& a, std::size_t row, Shape shape);
/// Stacks `n` copies of a 1×m row.
Tensor repeat_rows(const Tensor& row, std::size_t n);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
/// relu'(0) = 0.
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
/// max(a, lo); gradient passes only where a > lo.
Tensor clamp_min(const Tensor& a, double lo);

/// Fused LSTM cell update. `pre` is N×4d (gate pre-activations in i, f, g, o
/// order before the bias), `bias` is 1×4d and `c_prev` is N×d. Returns N×2d
/// holding [h | c].
Tensor lstm_gates(const Tensor& pre, const Tensor& bias, const Tensor& c_prev);

/// Multi-head attention pooling over the rows of `u` (N×d). Head j owns the
/// column block [j·dh, (j+1)·dh) with dh = d / M for `wa` of shape dh×M:
/// α[:,j] = softmax_n(tanh(u_j)·wa[:,j]) and the result's block j is Σ_n α[n,j]·u_j[n].
/// Returns 1×d.
Tensor attention_pool(const Tensor& u, const Tensor& wa);

/// Softmax along axis 0 (within each column) or axis 1 (within each row).
Tensor softmax(const Tensor& a, std::size_t axis);
/// Sum of all entries as a {1,1} scalar.
Tensor sum(const Tensor& a);
/// Sum along one axis of a rank-2 tensor (axis 0 -> 1×m, axis 1 -> n×1).
Tensor sum(const Tensor& a, std::size_t axis);
Tensor mean(const Tensor& a);

/// Per-channel symmetric-normalized propagation over an undirected graph:
/// out[:,k] = D_k^{-1/2} (A_k + I) D_k^{-1/2} z[:,k] where A_k has weight
/// w[e,k] on edge e (both directions) and D_k holds the row sums of A_k + I.
/// `z` is n×m, `w` is |edges|×m with positive entries.
Tensor graph_propagate(const Tensor& z, const Tensor& w, std::shared_ptr<const std::vector<std::pair<int, int>>> edges);

/// graph_propagate specialised to a disjoint union of cliques whose edges all
/// carry the clique's weight row: `w` is |cliques|×m, each clique lists its
/// member rows. Nodes outside every clique pass through unchanged.
Tensor clique_propagate(const Tensor& z, const Tensor& w, std::shared_ptr<const std::vector<std::vector<int>>> cliques);

/// Max over coordinates of |analytic - numeric| / max(1e-5, |analytic| + |numeric|)
/// with central differences of step eps. Below the floor the error is absolute,
/// since finite differences cannot resolve smaller gradients. `f` builds the
/// scalar loss from the current parameter values. Throws on non-finite values.
double grad_check(const std::function<Tensor()>& f, std::span<const Tensor> params, double eps);

using NamedTensors = std::map<std::string, Tensor>;

/// JSON object name -> {"shape": [...], "values": [...]}.
void write_checkpoint(std::ostream& out, const NamedTensors& tensors);
NamedTensors read_checkpoint(std::istream& in);
/// Copies stored values into `target`; names and shapes must match exactly.
void load_into(NamedTensors& target, const NamedTensors& stored);

} // namespace evopt

#endif // EVOPT_TENSOR_HPP
