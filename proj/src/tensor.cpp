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

#include "evopt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <Eigen/Core>
#include <json.hpp>

namespace evopt {

namespace detail {

struct TensorNode {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::function<void(TensorNode&)> backward;
};

} // namespace detail

using detail::TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

struct TensorAccess {
    static const NodePtr& node(const Tensor& t) { return t.node_; }
    static Tensor wrap(NodePtr n) { return Tensor(std::move(n)); }
    static std::vector<NodePtr>& nodes(Tape& tape) { return tape.nodes_; }
};

namespace {

thread_local Tape* active_tape = nullptr;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using RowVecMap = Eigen::Map<Eigen::RowVectorXd>;
using ConstRowVecMap = Eigen::Map<const Eigen::RowVectorXd>;

const NodePtr& node_of(const Tensor& t)
{
    if (!t.defined())
        throw std::invalid_argument("tensor op on an undefined tensor");
    return TensorAccess::node(t);
}

std::vector<double>& grad_of(TensorNode& n)
{
    if (n.grad.empty())
        n.grad.assign(n.value.size(), 0.0);
    return n.grad;
}

bool recording(std::initializer_list<const NodePtr*> inputs)
{
    if (!active_tape)
        return false;
    return std::any_of(inputs.begin(), inputs.end(), [](const NodePtr* p) { return (*p)->requires_grad; });
}

Tensor make_result(Shape shape, std::vector<double> value, bool record, std::function<void(TensorNode&)> backward)
{
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    if (record) {
        n->requires_grad = true;
        n->backward = std::move(backward);
        TensorAccess::nodes(*active_tape).push_back(n);
    }
    return TensorAccess::wrap(std::move(n));
}

void require_rank2(const TensorNode& n, const char* op)
{
    if (n.shape.size() != 2)
        throw ShapeError(std::string(op) + ": expected a rank-2 tensor, got " + shape_to_string(n.shape));
}

ConstMatMap as_matrix(const TensorNode& n)
{
    return ConstMatMap(n.value.data(), static_cast<Eigen::Index>(n.shape[0]), static_cast<Eigen::Index>(n.shape[1]));
}

MatMap as_matrix(std::vector<double>& v, const Shape& shape)
{
    return MatMap(v.data(), static_cast<Eigen::Index>(shape[0]), static_cast<Eigen::Index>(shape[1]));
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv)
{
    const NodePtr& x = node_of(a);
    std::vector<double> out(x->value.size());
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = fwd(x->value[k]);
    const bool rec = recording({&x});
    return make_result(x->shape, std::move(out), rec, [x, deriv](TensorNode& self) {
        auto& gx = grad_of(*x);
        for (std::size_t k = 0; k < gx.size(); ++k)
            gx[k] += self.grad[k] * deriv(x->value[k], self.value[k]);
    });
}

enum class BinaryKind { add, sub, mul };

Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind)
{
    const NodePtr& x = node_of(a);
    const NodePtr& y = node_of(b);
    const bool x_scalar = x->value.size() == 1 && y->value.size() != 1;
    const bool y_scalar = y->value.size() == 1 && x->value.size() != 1;
    if (!x_scalar && !y_scalar && x->shape != y->shape)
        throw ShapeError("elementwise op: shape mismatch " + shape_to_string(x->shape) + " vs " + shape_to_string(y->shape));
    const Shape& shape = x_scalar ? y->shape : x->shape;
    const std::size_t n = shape_size(shape);
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double u = x->value[x_scalar ? 0 : k];
        const double v = y->value[y_scalar ? 0 : k];
        out[k] = kind == BinaryKind::add ? u + v : kind == BinaryKind::sub ? u - v : u * v;
    }
    const bool rec = recording({&x, &y});
    return make_result(shape, std::move(out), rec, [x, y, x_scalar, y_scalar, kind](TensorNode& self) {
        const std::size_t n = self.grad.size();
        if (x->requires_grad) {
            auto& gx = grad_of(*x);
            for (std::size_t k = 0; k < n; ++k) {
                const double d = kind == BinaryKind::mul ? y->value[y_scalar ? 0 : k] : 1.0;
                gx[x_scalar ? 0 : k] += self.grad[k] * d;
            }
        }
        if (y->requires_grad) {
            auto& gy = grad_of(*y);
            for (std::size_t k = 0; k < n; ++k) {
                const double d = kind == BinaryKind::mul ? x->value[x_scalar ? 0 : k] : kind == BinaryKind::sub ? -1.0 : 1.0;
                gy[y_scalar ? 0 : k] += self.grad[k] * d;
            }
        }
    });
}

} // namespace

std::string shape_to_string(const Shape& shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t k = 0; k < shape.size(); ++k)
        os << (k ? "," : "") << shape[k];
    os << ']';
    return os.str();
}

std::size_t shape_size(const Shape& shape)
{
    std::size_t n = 1;
    for (auto d : shape)
        n *= d;
    return n;
}

Tensor Tensor::zeros(Shape shape)
{
    return filled(std::move(shape), 0.0);
}

Tensor Tensor::filled(Shape shape, double value)
{
    const std::size_t n = shape_size(shape);
    return constant(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::constant(Shape shape, std::vector<double> values)
{
    if (shape_size(shape) != values.size())
        throw ShapeError("tensor: " + std::to_string(values.size()) + " values for shape " + shape_to_string(shape));
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value)
{
    return constant({1, 1}, {value});
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values)
{
    Tensor t = constant(std::move(shape), std::move(values));
    t.node_->requires_grad = true;
    return t;
}

const Shape& Tensor::shape() const
{
    return node_of(*this)->shape;
}

std::size_t Tensor::size() const
{
    return node_of(*this)->value.size();
}

std::size_t Tensor::rows() const
{
    require_rank2(*node_of(*this), "rows");
    return node_->shape[0];
}

std::size_t Tensor::cols() const
{
    require_rank2(*node_of(*this), "cols");
    return node_->shape[1];
}

const std::vector<double>& Tensor::values() const
{
    return node_of(*this)->value;
}

std::vector<double>& Tensor::mutable_values()
{
    return node_of(*this)->value;
}

double Tensor::item() const
{
    if (size() != 1)
        throw ShapeError("item: tensor of shape " + shape_to_string(shape()) + " is not a scalar");
    return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const
{
    return node_of(*this)->value.at(r * cols() + c);
}

bool Tensor::requires_grad() const
{
    return node_of(*this)->requires_grad;
}

const std::vector<double>& Tensor::grad() const
{
    return node_of(*this)->grad;
}

void Tensor::zero_grad()
{
    auto& n = *node_of(*this);
    if (!n.grad.empty())
        std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

Tape* Tape::active()
{
    return active_tape;
}

void Tape::backward(const Tensor& loss)
{
    const NodePtr& root = node_of(loss);
    if (root->value.size() != 1)
        throw ShapeError("backward: loss must be a scalar, got " + shape_to_string(root->shape));
    if (!root->requires_grad)
        return;
    for (auto& n : nodes_)
        n->grad.assign(n->value.size(), 0.0);
    root->grad.assign(1, 1.0);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        TensorNode& n = **it;
        if (n.backward)
            n.backward(n);
    }
}

TapeScope::TapeScope(Tape& tape) : previous_(active_tape)
{
    active_tape = &tape;
}

TapeScope::~TapeScope()
{
    active_tape = previous_;
}

NoGradScope::NoGradScope() : previous_(active_tape)
{
    active_tape = nullptr;
}

NoGradScope::~NoGradScope()
{
    active_tape = previous_;
}

Tensor matmul(const Tensor& a, const Tensor& b)
{
    const NodePtr& x = node_of(a);
    const NodePtr& y = node_of(b);
    require_rank2(*x, "matmul");
    require_rank2(*y, "matmul");
    if (x->shape[1] != y->shape[0])
        throw ShapeError("matmul: " + shape_to_string(x->shape) + " x " + shape_to_string(y->shape));
    Shape shape{x->shape[0], y->shape[1]};
    std::vector<double> out(shape[0] * shape[1]);
    const auto k = static_cast<Eigen::Index>(x->shape[1]);
    const auto m = static_cast<Eigen::Index>(y->shape[1]);
    // Row-vector products go through gemv and rank-1 updates instead of the
    // blocked GEMM kernel, which packs its operands on every call.
    if (shape[0] == 1)
        RowVecMap(out.data(), m).noalias() = ConstRowVecMap(x->value.data(), k) * as_matrix(*y);
    else
        as_matrix(out, shape).noalias() = as_matrix(*x) * as_matrix(*y);
    const bool rec = recording({&x, &y});
    return make_result(std::move(shape), std::move(out), rec, [x, y, k, m](TensorNode& self) {
        if (self.shape[0] == 1) {
            const ConstRowVecMap g(self.grad.data(), m);
            if (x->requires_grad)
                RowVecMap(grad_of(*x).data(), k).noalias() += g * as_matrix(*y).transpose();
            if (y->requires_grad)
                as_matrix(grad_of(*y), y->shape).noalias() += ConstRowVecMap(x->value.data(), k).transpose() * g;
            return;
        }
        const ConstMatMap g(self.grad.data(), static_cast<Eigen::Index>(self.shape[0]), m);
        if (x->requires_grad)
            as_matrix(grad_of(*x), x->shape).noalias() += g * as_matrix(*y).transpose();
        if (y->requires_grad)
            as_matrix(grad_of(*y), y->shape).noalias() += as_matrix(*x).transpose() * g;
    });
}

Tensor add(const Tensor& a, const Tensor& b)
{
    return binary(a, b, BinaryKind::add);
}

Tensor sub(const Tensor& a, const Tensor& b)
{
    return binary(a, b, BinaryKind::sub);
}

Tensor mul(const Tensor& a, const Tensor& b)
{
    return binary(a, b, BinaryKind::mul);
}

Tensor scale(const Tensor& a, double factor)
{
    return unary(
        a, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor neg(const Tensor& a)
{
    return scale(a, -1.0);
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis)
{
    if (parts.empty())
        throw ShapeError("concat: no inputs");
    if (axis > 1)
        throw ShapeError("concat: axis must be 0 or 1");
    std::vector<NodePtr> nodes;
    nodes.reserve(parts.size());
    const std::size_t other = 1 - axis;
    std::size_t extent = 0;
    bool any_grad = false;
    for (const auto& p : parts) {
        const NodePtr& n = node_of(p);
        require_rank2(*n, "concat");
        if (n->shape[other] != node_of(parts[0])->shape[other])
            throw ShapeError("concat: incompatible shapes " + shape_to_string(n->shape) + " and " +
                shape_to_string(node_of(parts[0])->shape));
        extent += n->shape[axis];
        any_grad = any_grad || n->requires_grad;
        nodes.push_back(n);
    }
    Shape shape = nodes[0]->shape;
    shape[axis] = extent;
    std::vector<double> out(shape[0] * shape[1]);
    const std::size_t cols = shape[1];
    std::size_t offset = 0;
    for (const auto& n : nodes) {
        const std::size_t r = n->shape[0], c = n->shape[1];
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) {
                const std::size_t oi = axis == 0 ? i + offset : i;
                const std::size_t oj = axis == 1 ? j + offset : j;
                out[oi * cols + oj] = n->value[i * c + j];
            }
        offset += n->shape[axis];
    }
    const bool rec = active_tape && any_grad;
    return make_result(std::move(shape), std::move(out), rec, [nodes = std::move(nodes), axis](TensorNode& self) {
        const std::size_t cols = self.shape[1];
        std::size_t offset = 0;
        for (const auto& n : nodes) {
            const std::size_t r = n->shape[0], c = n->shape[1];
            if (n->requires_grad) {
                auto& g = grad_of(*n);
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) {
                        const std::size_t oi = axis == 0 ? i + offset : i;
                        const std::size_t oj = axis == 1 ? j + offset : j;
                        g[i * c + j] += self.grad[oi * cols + oj];
                    }
            }
            offset += n->shape[axis];
        }
    });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis)
{
    return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length)
{
    const NodePtr& x = node_of(a);
    require_rank2(*x, "slice");
    if (axis > 1)
        throw ShapeError("slice: axis must be 0 or 1");
    if (start + length > x->shape[axis])
        throw ShapeError("slice: range exceeds extent of " + shape_to_string(x->shape));
    Shape shape = x->shape;
    shape[axis] = length;
    const std::size_t in_cols = x->shape[1];
    const std::size_t r0 = axis == 0 ? start : 0;
    const std::size_t c0 = axis == 1 ? start : 0;
    std::vector<double> out(shape[0] * shape[1]);
    for (std::size_t i = 0; i < shape[0]; ++i)
        for (std::size_t j = 0; j < shape[1]; ++j)
            out[i * shape[1] + j] = x->value[(i + r0) * in_cols + j + c0];
    const bool rec = recording({&x});
    return make_result(std::move(shape), std::move(out), rec, [x, r0, c0](TensorNode& self) {
        auto& g = grad_of(*x);
        const std::size_t in_cols = x->shape[1];
        for (std::size_t i = 0; i < self.shape[0]; ++i)
            for (std::size_t j = 0; j < self.shape[1]; ++j)
                g[(i + r0) * in_cols + j + c0] += self.grad[i * self.shape[1] + j];
    });
}

Tensor reshape(const Tensor& a, Shape shape)
{
    const NodePtr& x = node_of(a);
    if (shape_size(shape) != x->value.size())
        throw ShapeError("reshape: " + shape_to_string(x->shape) + " -> " + shape_to_string(shape));
    const bool rec = recording({&x});
    return make_result(std::move(shape), x->value, rec, [x](TensorNode& self) {
        auto& g = grad_of(*x);
        for (std::size_t k = 0; k < g.size(); ++k)
            g[k] += self.grad[k];
    });
}

Tensor row_reshape(const Tensor& a, std::size_t row, Shape shape)
{
    const NodePtr& x = node_of(a);
    require_rank2(*x, "row_reshape");
    if (row >= x->shape[0] || shape_size(shape) != x->shape[1])
        throw ShapeError("row_reshape: row " + std::to_string(row) + " of " + shape_to_string(x->shape) + " -> " + shape_to_string(shape));
    const std::size_t offset = row * x->shape[1];
    std::vector<double> out(x->value.begin() + static_cast<std::ptrdiff_t>(offset),
        x->value.begin() + static_cast<std::ptrdiff_t>(offset + x->shape[1]));
    const bool rec = recording({&x});
    return make_result(std::move(shape), std::move(out), rec, [x, offset](TensorNode& self) {
        double* g = grad_of(*x).data() + offset;
        for (std::size_t k = 0; k < self.grad.size(); ++k)
            g[k] += self.grad[k];
    });
}

Tensor transpose(const Tensor& a)
{
    const NodePtr& x = node_of(a);
    require_rank2(*x, "transpose");
    Shape shape{x->shape[1], x->shape[0]};
    std::vector<double> out(x->value.size());
    as_matrix(out, shape) = as_matrix(*x).transpose();
    const bool rec = recording({&x});
    return make_result(std::move(shape), std::move(out), rec, [x](TensorNode& self) {
        as_matrix(grad_of(*x), x->shape) += ConstMatMap(self.grad.data(), static_cast<Eigen::Index>(self.shape[0]),
            static_cast<Eigen::Index>(self.shape[1]))
                                                  .transpose();
    });
}

Tensor repeat_rows(const Tensor& row, std::size_t n)
{
    const NodePtr& x = node_of(row);
    require_rank2(*x, "repeat_rows");
    if (x->shape[0] != 1)
        throw ShapeError("repeat_rows: expected a single row, got " + shape_to_string(x->shape));
    const std::size_t m = x->shape[1];
    std::vector<double> out(n * m);
    for (std::size_t i = 0; i < n; ++i)
        std::copy(x->value.begin(), x->value.end(), out.begin() + static_cast<std::ptrdiff_t>(i * m));
    const bool rec = recording({&x});
    return make_result({n, m}, std::move(out), rec, [x, n, m](TensorNode& self) {
        auto& g = grad_of(*x);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j)
                g[j] += self.grad[i * m + j];
    });
}

Tensor tanh(const Tensor& a)
{
    return unary(
        a, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a)
{
    return unary(
        a, [](double v) { return 1.0 / (1.0 + std::exp(-v)); }, [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a)
{
    return unary(
        a, [](double v) { return v > 0.0 ? v : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a)
{
    return unary(
        a, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a)
{
    return unary(
        a, [](double v) { return std::log(v); }, [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a)
{
    return unary(
        a, [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; });
}

Tensor clamp_min(const Tensor& a, double lo)
{
    return unary(
        a, [lo](double v) { return v > lo ? v : lo; }, [lo](double x, double) { return x > lo ? 1.0 : 0.0; });
}

Tensor lstm_gates(const Tensor& pre, const Tensor& bias, const Tensor& c_prev)
{
    const NodePtr& a = node_of(pre);
    const NodePtr& b = node_of(bias);
    const NodePtr& cp = node_of(c_prev);
    require_rank2(*a, "lstm_gates");
    const std::size_t n = a->shape[0];
    const std::size_t d = a->shape[1] / 4;
    if (a->shape[1] != 4 * d || b->shape != Shape{1, 4 * d} || cp->shape != Shape{n, d})
        throw ShapeError("lstm_gates: pre " + shape_to_string(a->shape) + ", bias " + shape_to_string(b->shape) + ", cell " +
            shape_to_string(cp->shape));
    // Activated gates i, f, g, o and tanh(c), kept for the backward pass.
    auto act = std::make_shared<std::vector<double>>(n * 5 * d);
    std::vector<double> out(n * 2 * d);
    const auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    for (std::size_t r = 0; r < n; ++r) {
        const double* p = a->value.data() + r * 4 * d;
        double* s = act->data() + r * 5 * d;
        double* o = out.data() + r * 2 * d;
        for (std::size_t k = 0; k < d; ++k) {
            const double gi = sig(p[k] + b->value[k]);
            const double gf = sig(p[d + k] + b->value[d + k]);
            const double gg = std::tanh(p[2 * d + k] + b->value[2 * d + k]);
            const double go = sig(p[3 * d + k] + b->value[3 * d + k]);
            const double c = gf * cp->value[r * d + k] + gi * gg;
            const double tc = std::tanh(c);
            s[k] = gi;
            s[d + k] = gf;
            s[2 * d + k] = gg;
            s[3 * d + k] = go;
            s[4 * d + k] = tc;
            o[k] = go * tc;
            o[d + k] = c;
        }
    }
    const bool rec = recording({&a, &b, &cp});
    return make_result({n, 2 * d}, std::move(out), rec, [a, b, cp, act, n, d](TensorNode& self) {
        std::vector<double> da(n * 4 * d);
        double* gc = cp->requires_grad ? grad_of(*cp).data() : nullptr;
        for (std::size_t r = 0; r < n; ++r) {
            const double* s = act->data() + r * 5 * d;
            const double* g = self.grad.data() + r * 2 * d;
            double* q = da.data() + r * 4 * d;
            for (std::size_t k = 0; k < d; ++k) {
                const double gi = s[k], gf = s[d + k], gg = s[2 * d + k], go = s[3 * d + k], tc = s[4 * d + k];
                const double dc = g[d + k] + g[k] * go * (1 - tc * tc);
                q[k] = dc * gg * gi * (1 - gi);
                q[d + k] = dc * cp->value[r * d + k] * gf * (1 - gf);
                q[2 * d + k] = dc * gi * (1 - gg * gg);
                q[3 * d + k] = g[k] * tc * go * (1 - go);
                if (gc)
                    gc[r * d + k] += dc * gf;
            }
        }
        if (a->requires_grad) {
            auto& ga = grad_of(*a);
            for (std::size_t k = 0; k < da.size(); ++k)
                ga[k] += da[k];
        }
        if (b->requires_grad) {
            auto& gb = grad_of(*b);
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t k = 0; k < 4 * d; ++k)
                    gb[k] += da[r * 4 * d + k];
        }
    });
}

Tensor attention_pool(const Tensor& u, const Tensor& wa)
{
    const NodePtr& x = node_of(u);
    const NodePtr& w = node_of(wa);
    require_rank2(*x, "attention_pool");
    require_rank2(*w, "attention_pool");
    const std::size_t n = x->shape[0];
    const std::size_t d = x->shape[1];
    const std::size_t dh = w->shape[0];
    const std::size_t heads = w->shape[1];
    if (n == 0 || dh * heads != d)
        throw ShapeError("attention_pool: vectors " + shape_to_string(x->shape) + " with head weights " + shape_to_string(w->shape));
    // tanh(u) followed by the attention weights α (N×M).
    auto cache = std::make_shared<std::vector<double>>(n * d + n * heads);
    double* t = cache->data();
    double* alpha = t + n * d;
    for (std::size_t k = 0; k < n * d; ++k)
        t[k] = std::tanh(x->value[k]);
    std::vector<double> out(d, 0.0);
    for (std::size_t j = 0; j < heads; ++j) {
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < n; ++r) {
            double s = 0;
            for (std::size_t k = 0; k < dh; ++k)
                s += t[r * d + j * dh + k] * w->value[k * heads + j];
            alpha[r * heads + j] = s;
            top = std::max(top, s);
        }
        double z = 0;
        for (std::size_t r = 0; r < n; ++r)
            z += alpha[r * heads + j] = std::exp(alpha[r * heads + j] - top);
        for (std::size_t r = 0; r < n; ++r) {
            alpha[r * heads + j] /= z;
            for (std::size_t k = 0; k < dh; ++k)
                out[j * dh + k] += alpha[r * heads + j] * x->value[r * d + j * dh + k];
        }
    }
    const bool rec = recording({&x, &w});
    return make_result({1, d}, std::move(out), rec, [x, w, cache, n, d, dh, heads](TensorNode& self) {
        const double* t = cache->data();
        const double* alpha = t + n * d;
        const double* g = self.grad.data();
        std::vector<double> ds(n);
        double* gx = x->requires_grad ? grad_of(*x).data() : nullptr;
        double* gw = w->requires_grad ? grad_of(*w).data() : nullptr;
        for (std::size_t j = 0; j < heads; ++j) {
            double mean = 0;
            for (std::size_t r = 0; r < n; ++r) {
                double da = 0;
                for (std::size_t k = 0; k < dh; ++k)
                    da += g[j * dh + k] * x->value[r * d + j * dh + k];
                ds[r] = da;
                mean += alpha[r * heads + j] * da;
            }
            for (std::size_t r = 0; r < n; ++r) {
                const double a = alpha[r * heads + j];
                const double s = a * (ds[r] - mean);
                for (std::size_t k = 0; k < dh; ++k) {
                    const std::size_t idx = r * d + j * dh + k;
                    if (gw)
                        gw[k * heads + j] += s * t[idx];
                    if (gx)
                        gx[idx] += a * g[j * dh + k] + s * w->value[k * heads + j] * (1 - t[idx] * t[idx]);
                }
            }
        }
    });
}

Tensor softmax(const Tensor& a, std::size_t axis)
{
    const NodePtr& x = node_of(a);
    require_rank2(*x, "softmax");
    if (axis > 1)
        throw ShapeError("softmax: axis must be 0 or 1");
    const std::size_t rows = x->shape[0], cols = x->shape[1];
    // Groups are columns (axis 0) or rows (axis 1).
    const std::size_t groups = axis == 0 ? cols : rows;
    const std::size_t len = axis == 0 ? rows : cols;
    auto index = [=](std::size_t g, std::size_t k) { return axis == 0 ? k * cols + g : g * cols + k; };
    std::vector<double> out(x->value.size());
    for (std::size_t g = 0; g < groups; ++g) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < len; ++k)
            mx = std::max(mx, x->value[index(g, k)]);
        double total = 0.0;
        for (std::size_t k = 0; k < len; ++k) {
            const double e = std::exp(x->value[index(g, k)] - mx);
            out[index(g, k)] = e;
            total += e;
        }
        for (std::size_t k = 0; k < len; ++k)
            out[index(g, k)] /= total;
    }
    const bool rec = recording({&x});
    return make_result(x->shape, std::move(out), rec, [x, groups, len, index](TensorNode& self) {
        auto& gx = grad_of(*x);
        for (std::size_t g = 0; g < groups; ++g) {
            double dot = 0.0;
            for (std::size_t k = 0; k < len; ++k)
                dot += self.grad[index(g, k)] * self.value[index(g, k)];
            for (std::size_t k = 0; k < len; ++k)
                gx[index(g, k)] += self.value[index(g, k)] * (self.grad[index(g, k)] - dot);
        }
    });
}

Tensor sum(const Tensor& a)
{
    const NodePtr& x = node_of(a);
    double total = 0.0;
    for (double v : x->value)
        total += v;
    const bool rec = recording({&x});
    return make_result({1, 1}, {total}, rec, [x](TensorNode& self) {
        auto& g = grad_of(*x);
        for (auto& v : g)
            v += self.grad[0];
    });
}

Tensor sum(const Tensor& a, std::size_t axis)
{
    const NodePtr& x = node_of(a);
    require_rank2(*x, "sum");
    if (axis > 1)
        throw ShapeError("sum: axis must be 0 or 1");
    const std::size_t rows = x->shape[0], cols = x->shape[1];
    Shape shape = axis == 0 ? Shape{1, cols} : Shape{rows, 1};
    std::vector<double> out(shape[0] * shape[1], 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            out[axis == 0 ? j : i] += x->value[i * cols + j];
    const bool rec = recording({&x});
    return make_result(std::move(shape), std::move(out), rec, [x, axis](TensorNode& self) {
        auto& g = grad_of(*x);
        const std::size_t rows = x->shape[0], cols = x->shape[1];
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j)
                g[i * cols + j] += self.grad[axis == 0 ? j : i];
    });
}

Tensor mean(const Tensor& a)
{
    const std::size_t n = a.size();
    if (n == 0)
        throw ShapeError("mean: empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(n));
}

Tensor graph_propagate(const Tensor& z_in, const Tensor& w_in, std::shared_ptr<const std::vector<std::pair<int, int>>> edges)
{
    const NodePtr& z = node_of(z_in);
    const NodePtr& w = node_of(w_in);
    require_rank2(*z, "graph_propagate");
    require_rank2(*w, "graph_propagate");
    if (!edges)
        throw std::invalid_argument("graph_propagate: missing edge list");
    const std::size_t n = z->shape[0], m = z->shape[1];
    if (w->shape[0] != edges->size() || w->shape[1] != m)
        throw ShapeError("graph_propagate: edge weights " + shape_to_string(w->shape) + " for " +
            std::to_string(edges->size()) + " edges and " + std::to_string(m) + " channels");
    for (const auto& [a, b] : *edges)
        if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= n || static_cast<std::size_t>(b) >= n || a == b)
            throw std::invalid_argument("graph_propagate: edge index out of range or self loop");

    // deg = 1 + incident weights, s = deg^-1/2, y = s*z, p = (A + I) y.
    std::vector<double> s(n * m, 1.0);
    for (std::size_t e = 0; e < edges->size(); ++e) {
        const auto [a, b] = (*edges)[e];
        for (std::size_t k = 0; k < m; ++k) {
            s[a * m + k] += w->value[e * m + k];
            s[b * m + k] += w->value[e * m + k];
        }
    }
    for (auto& v : s) {
        if (!(v > 0.0))
            throw std::domain_error("graph_propagate: non-positive degree");
        v = 1.0 / std::sqrt(v);
    }
    std::vector<double> y(n * m), p(n * m);
    for (std::size_t k = 0; k < n * m; ++k)
        y[k] = s[k] * z->value[k];
    p = y;
    for (std::size_t e = 0; e < edges->size(); ++e) {
        const auto [a, b] = (*edges)[e];
        for (std::size_t k = 0; k < m; ++k) {
            p[a * m + k] += w->value[e * m + k] * y[b * m + k];
            p[b * m + k] += w->value[e * m + k] * y[a * m + k];
        }
    }
    std::vector<double> out(n * m);
    for (std::size_t k = 0; k < n * m; ++k)
        out[k] = s[k] * p[k];

    const bool rec = recording({&z, &w});
    return make_result({n, m}, std::move(out), rec,
        [z, w, edges, s = std::move(s), y = std::move(y), p = std::move(p), n, m](TensorNode& self) {
            const auto& g = self.grad;
            std::vector<double> u(n * m), r(n * m);
            for (std::size_t k = 0; k < n * m; ++k)
                u[k] = s[k] * g[k];
            r = u;
            for (std::size_t e = 0; e < edges->size(); ++e) {
                const auto [a, b] = (*edges)[e];
                for (std::size_t k = 0; k < m; ++k) {
                    r[a * m + k] += w->value[e * m + k] * u[b * m + k];
                    r[b * m + k] += w->value[e * m + k] * u[a * m + k];
                }
            }
            if (z->requires_grad) {
                auto& gz = grad_of(*z);
                for (std::size_t k = 0; k < n * m; ++k)
                    gz[k] += s[k] * r[k];
            }
            if (w->requires_grad) {
                // d loss / d deg = -1/2 s^3 (g*p + z*r)
                std::vector<double> dd(n * m);
                for (std::size_t k = 0; k < n * m; ++k)
                    dd[k] = -0.5 * s[k] * s[k] * s[k] * (g[k] * p[k] + z->value[k] * r[k]);
                auto& gw = grad_of(*w);
                for (std::size_t e = 0; e < edges->size(); ++e) {
                    const auto [a, b] = (*edges)[e];
                    for (std::size_t k = 0; k < m; ++k)
                        gw[e * m + k] += u[a * m + k] * y[b * m + k] + u[b * m + k] * y[a * m + k] + dd[a * m + k] + dd[b * m + k];
                }
            }
        });
}

Tensor clique_propagate(const Tensor& z_in, const Tensor& w_in, std::shared_ptr<const std::vector<std::vector<int>>> cliques)
{
    const NodePtr& z = node_of(z_in);
    const NodePtr& w = node_of(w_in);
    require_rank2(*z, "clique_propagate");
    require_rank2(*w, "clique_propagate");
    if (!cliques)
        throw std::invalid_argument("clique_propagate: missing clique list");
    const std::size_t n = z->shape[0], m = z->shape[1];
    if (w->shape[0] != cliques->size() || w->shape[1] != m)
        throw ShapeError("clique_propagate: clique weights " + shape_to_string(w->shape) + " for " +
            std::to_string(cliques->size()) + " cliques and " + std::to_string(m) + " channels");
    std::vector<char> seen(n, 0);
    for (const auto& members : *cliques)
        for (int a : members) {
            if (a < 0 || static_cast<std::size_t>(a) >= n || seen[a])
                throw std::invalid_argument("clique_propagate: cliques must be disjoint and in range");
            seen[a] = 1;
        }

    // Within clique C of size k and weight w: deg = 1 + w(k-1), identical for
    // every member, and (A + I)y = y + w(Y_C - y) with Y_C the member sum.
    std::vector<double> s(n * m, 1.0), y(z->value), p(z->value), total(cliques->size() * m, 0.0);
    for (std::size_t ci = 0; ci < cliques->size(); ++ci) {
        const auto& members = (*cliques)[ci];
        const double extra = static_cast<double>(members.size()) - 1.0;
        for (std::size_t k = 0; k < m; ++k) {
            const double deg = 1.0 + w->value[ci * m + k] * extra;
            if (!(deg > 0.0))
                throw std::domain_error("clique_propagate: non-positive degree");
            const double sk = 1.0 / std::sqrt(deg);
            double acc = 0.0;
            for (int a : members) {
                s[a * m + k] = sk;
                y[a * m + k] = sk * z->value[a * m + k];
                acc += y[a * m + k];
            }
            total[ci * m + k] = acc;
            for (int a : members)
                p[a * m + k] = y[a * m + k] + w->value[ci * m + k] * (acc - y[a * m + k]);
        }
    }
    std::vector<double> out(n * m);
    for (std::size_t k = 0; k < n * m; ++k)
        out[k] = s[k] * p[k];

    const bool rec = recording({&z, &w});
    return make_result({n, m}, std::move(out), rec,
        [z, w, cliques, s = std::move(s), y = std::move(y), p = std::move(p), total = std::move(total), n, m](TensorNode& self) {
            const auto& g = self.grad;
            std::vector<double> u(n * m), r(n * m);
            for (std::size_t k = 0; k < n * m; ++k)
                u[k] = s[k] * g[k];
            r = u;
            for (std::size_t ci = 0; ci < cliques->size(); ++ci)
                for (std::size_t k = 0; k < m; ++k) {
                    double acc = 0.0;
                    for (int a : (*cliques)[ci])
                        acc += u[a * m + k];
                    for (int a : (*cliques)[ci])
                        r[a * m + k] = u[a * m + k] + w->value[ci * m + k] * (acc - u[a * m + k]);
                }
            if (z->requires_grad) {
                auto& gz = grad_of(*z);
                for (std::size_t k = 0; k < n * m; ++k)
                    gz[k] += s[k] * r[k];
            }
            if (w->requires_grad) {
                auto& gw = grad_of(*w);
                for (std::size_t ci = 0; ci < cliques->size(); ++ci) {
                    const auto& members = (*cliques)[ci];
                    const double extra = static_cast<double>(members.size()) - 1.0;
                    for (std::size_t k = 0; k < m; ++k) {
                        double acc = 0.0;
                        for (int a : members) {
                            const std::size_t i = a * m + k;
                            const double dd = -0.5 * s[i] * s[i] * s[i] * (g[i] * p[i] + z->value[i] * r[i]);
                            acc += u[i] * (total[ci * m + k] - y[i]) + extra * dd;
                        }
                        gw[ci * m + k] += acc;
                    }
                }
            }
        });
}

double grad_check(const std::function<Tensor()>& f, std::span<const Tensor> params, double eps)
{
    if (!(eps > 0.0))
        throw std::invalid_argument("grad_check: eps must be positive");
    std::vector<Tensor> ps(params.begin(), params.end());
    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        TapeScope scope(tape);
        for (auto& p : ps)
            p.zero_grad();
        Tensor loss = f();
        if (!std::isfinite(loss.item()))
            throw std::domain_error("grad_check: non-finite loss");
        tape.backward(loss);
        for (const auto& p : ps) {
            auto g = p.grad();
            if (g.empty())
                g.assign(p.size(), 0.0);
            analytic.push_back(std::move(g));
        }
    }
    NoGradScope no_grad;
    double worst = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        auto& values = ps[i].mutable_values();
        for (std::size_t k = 0; k < values.size(); ++k) {
            const double saved = values[k];
            values[k] = saved + eps;
            const double fp = f().item();
            values[k] = saved - eps;
            const double fm = f().item();
            values[k] = saved;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double a = analytic[i][k];
            if (!std::isfinite(numeric) || !std::isfinite(a))
                throw std::domain_error("grad_check: non-finite gradient");
            const double err = std::abs(a - numeric) / std::max(1e-5, std::abs(a) + std::abs(numeric));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

void write_checkpoint(std::ostream& out, const NamedTensors& tensors)
{
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [name, t] : tensors)
        j[name] = {{"shape", t.shape()}, {"values", t.values()}};
    out << j.dump() << '\n';
}

NamedTensors read_checkpoint(std::istream& in)
{
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("checkpoint: ") + e.what());
    }
    if (!j.is_object())
        throw std::runtime_error("checkpoint: expected a JSON object");
    NamedTensors out;
    for (const auto& [name, entry] : j.items()) {
        try {
            auto shape = entry.at("shape").get<Shape>();
            auto values = entry.at("values").get<std::vector<double>>();
            out.emplace(name, Tensor::constant(std::move(shape), std::move(values)));
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("checkpoint: entry '" + name + "': " + e.what());
        } catch (const ShapeError& e) {
            throw std::runtime_error("checkpoint: entry '" + name + "': " + e.what());
        }
    }
    return out;
}

void load_into(NamedTensors& target, const NamedTensors& stored)
{
    for (const auto& [name, t] : stored)
        if (!target.count(name))
            throw std::runtime_error("checkpoint: unexpected tensor '" + name + "'");
    for (auto& [name, t] : target) {
        auto it = stored.find(name);
        if (it == stored.end())
            throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
        if (it->second.shape() != t.shape())
            throw std::runtime_error("checkpoint: tensor '" + name + "' has shape " + shape_to_string(it->second.shape()) +
                ", expected " + shape_to_string(t.shape()));
        t.mutable_values() = it->second.values();
    }
}

} // namespace evopt
