#pragma once

// Reverse-mode automatic differentiation over dense 64-bit tensors. Tape
// style: each op records a backward closure; backward() runs the closures in
// reverse topological order and then frees the tape (graphs are single-use).
// A graph is confined to one thread; separate runs may use independent tapes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "stdk/common.hpp"

namespace stdk {

// Overflow-safe scalar activations, shared with the non-tensor code paths.
inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

namespace ad {

using Shape = std::vector<size_t>;

inline size_t shape_size(const Shape& s) {
    size_t n = 1;
    for (size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += " x ";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated iff requires_grad
    bool requires_grad = false;
    bool visited = false;  // scratch for the topo sort
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // accumulates into parents' grads
};

namespace detail {
inline bool& no_grad_flag() {
    thread_local bool flag = false;
    return flag;
}
}  // namespace detail

// Disables tape recording in scope (pure inference, finite differences).
struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(detail::no_grad_flag()) { detail::no_grad_flag() = true; }
    ~NoGradGuard() { detail::no_grad_flag() = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

class Tensor {
  public:
    Tensor() = default;

    static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false) {
        if (shape_size(shape) != data.size())
            throw shape_error(strf("tensor data length %zu does not match shape %s", data.size(),
                                   shape_str(shape).c_str()));
        auto n = std::make_shared<Node>();
        n->shape = std::move(shape);
        n->value = std::move(data);
        n->requires_grad = requires_grad;
        if (requires_grad) n->grad.assign(n->value.size(), 0.0);
        return Tensor(std::move(n));
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        std::vector<double> d(shape_size(shape), 0.0);
        return from(std::move(shape), std::move(d), requires_grad);
    }

    static Tensor scalar(double v) { return from({1}, {v}); }

    const Shape& shape() const { return node_->shape; }
    size_t size() const { return node_->value.size(); }
    std::vector<double>& data() { return node_->value; }
    const std::vector<double>& data() const { return node_->value; }
    bool requires_grad() const { return node_->requires_grad; }

    std::vector<double>& grad() {
        if (!node_->requires_grad) throw invalid_argument_error("tensor does not hold gradients");
        return node_->grad;
    }
    const std::vector<double>& grad() const {
        if (!node_->requires_grad) throw invalid_argument_error("tensor does not hold gradients");
        return node_->grad;
    }

    void zero_grad() {
        if (node_->requires_grad) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
    }

    double item() const {
        if (size() != 1) throw shape_error("item() requires a scalar tensor, got " + shape_str(shape()));
        return node_->value[0];
    }

    bool defined() const { return node_ != nullptr; }
    const std::shared_ptr<Node>& node() const { return node_; }

    explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  private:
    std::shared_ptr<Node> node_;
};

namespace detail {

inline Tensor make_op(Shape shape, std::vector<double> value,
                      std::vector<std::shared_ptr<Node>> parents,
                      std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    bool track = !no_grad_flag();
    if (track) {
        track = false;
        for (const auto& p : parents)
            if (p->requires_grad) {
                track = true;
                break;
            }
    }
    if (track) {
        n->requires_grad = true;
        n->grad.assign(n->value.size(), 0.0);
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
    }
    return Tensor(std::move(n));
}

// b broadcasts against a when its shape equals a trailing suffix of a's
// shape; element i of the output then pairs with b[i % b.size].
inline void check_broadcast(const Tensor& a, const Tensor& b, const char* op) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sb.size() > sa.size() ||
        !std::equal(sb.rbegin(), sb.rend(), sa.rbegin()))
        throw shape_error(strf("%s: shape %s does not broadcast against %s", op,
                               shape_str(sb).c_str(), shape_str(sa).c_str()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic.

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::check_broadcast(a, b, "add");
    size_t nb = b.size();
    std::vector<double> out(a.size());
    const auto& av = a.data();
    const auto& bv = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i % nb];
    auto an = a.node(), bn = b.node();
    return detail::make_op(a.shape(), std::move(out), {an, bn}, [an, bn, nb](Node& self) {
        if (an->requires_grad)
            for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        if (bn->requires_grad)
            for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i % nb] += self.grad[i];
    });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::check_broadcast(a, b, "sub");
    size_t nb = b.size();
    std::vector<double> out(a.size());
    const auto& av = a.data();
    const auto& bv = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i % nb];
    auto an = a.node(), bn = b.node();
    return detail::make_op(a.shape(), std::move(out), {an, bn}, [an, bn, nb](Node& self) {
        if (an->requires_grad)
            for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        if (bn->requires_grad)
            for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i % nb] -= self.grad[i];
    });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::check_broadcast(a, b, "mul");
    size_t nb = b.size();
    std::vector<double> out(a.size());
    const auto& av = a.data();
    const auto& bv = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i % nb];
    auto an = a.node(), bn = b.node();
    return detail::make_op(a.shape(), std::move(out), {an, bn}, [an, bn, nb](Node& self) {
        if (an->requires_grad)
            for (size_t i = 0; i < self.grad.size(); ++i)
                an->grad[i] += self.grad[i] * bn->value[i % nb];
        if (bn->requires_grad)
            for (size_t i = 0; i < self.grad.size(); ++i)
                bn->grad[i % nb] += self.grad[i] * an->value[i];
    });
}

inline Tensor scale(const Tensor& a, double c) {
    std::vector<double> out(a.size());
    const auto& av = a.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c;
    auto an = a.node();
    return detail::make_op(a.shape(), std::move(out), {an}, [an, c](Node& self) {
        for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * c;
    });
}

inline Tensor neg(const Tensor& a) { return scale(a, -1.0); }

// ---------------------------------------------------------------------------
// Activations. relu'(0) = 0 by convention (pinball loss composes with it).

inline Tensor relu(const Tensor& a) {
    std::vector<double> out(a.size());
    const auto& av = a.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
    auto an = a.node();
    return detail::make_op(a.shape(), std::move(out), {an}, [an](Node& self) {
        for (size_t i = 0; i < self.grad.size(); ++i)
            if (an->value[i] > 0.0) an->grad[i] += self.grad[i];
    });
}

inline Tensor softplus(const Tensor& a) {
    std::vector<double> out(a.size());
    const auto& av = a.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = stdk::softplus(av[i]);
    auto an = a.node();
    return detail::make_op(a.shape(), std::move(out), {an}, [an](Node& self) {
        for (size_t i = 0; i < self.grad.size(); ++i)
            an->grad[i] += self.grad[i] * stdk::sigmoid(an->value[i]);
    });
}

inline Tensor sigmoid(const Tensor& a) {
    std::vector<double> out(a.size());
    const auto& av = a.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = stdk::sigmoid(av[i]);
    auto an = a.node();
    return detail::make_op(a.shape(), std::move(out), {an}, [an](Node& self) {
        for (size_t i = 0; i < self.grad.size(); ++i)
            an->grad[i] += self.grad[i] * self.value[i] * (1.0 - self.value[i]);
    });
}

inline Tensor tanh(const Tensor& a) {
    std::vector<double> out(a.size());
    const auto& av = a.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(av[i]);
    auto an = a.node();
    return detail::make_op(a.shape(), std::move(out), {an}, [an](Node& self) {
        for (size_t i = 0; i < self.grad.size(); ++i)
            an->grad[i] += self.grad[i] * (1.0 - self.value[i] * self.value[i]);
    });
}

// ---------------------------------------------------------------------------
// Reductions and slicing.

inline Tensor sum(const Tensor& a) {
    double s = std::accumulate(a.data().begin(), a.data().end(), 0.0);
    auto an = a.node();
    return detail::make_op({1}, {s}, {an}, [an](Node& self) {
        for (double& g : an->grad) g += self.grad[0];
    });
}

// Column j of a [m x n] matrix as a length-m vector.
inline Tensor column(const Tensor& a, size_t j) {
    if (a.shape().size() != 2) throw shape_error("column: expected a rank-2 tensor, got " +
                                                 shape_str(a.shape()));
    size_t m = a.shape()[0], n = a.shape()[1];
    if (j >= n) throw shape_error(strf("column: index %zu out of range for %s", j,
                                       shape_str(a.shape()).c_str()));
    std::vector<double> out(m);
    const auto& av = a.data();
    for (size_t i = 0; i < m; ++i) out[i] = av[i * n + j];
    auto an = a.node();
    return detail::make_op({m}, std::move(out), {an}, [an, n, j](Node& self) {
        for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i * n + j] += self.grad[i];
    });
}

// Channel c of a [C x H x W] tensor as an [H x W] plane.
inline Tensor slice_channel(const Tensor& a, size_t c) {
    if (a.shape().size() != 3) throw shape_error("slice_channel: expected a rank-3 tensor, got " +
                                                 shape_str(a.shape()));
    size_t C = a.shape()[0], H = a.shape()[1], W = a.shape()[2];
    if (c >= C) throw shape_error(strf("slice_channel: channel %zu out of range for %s", c,
                                       shape_str(a.shape()).c_str()));
    size_t plane = H * W, off = c * plane;
    std::vector<double> out(a.data().begin() + off, a.data().begin() + off + plane);
    auto an = a.node();
    return detail::make_op({H, W}, std::move(out), {an}, [an, off](Node& self) {
        for (size_t i = 0; i < self.grad.size(); ++i) an->grad[off + i] += self.grad[i];
    });
}

// ---------------------------------------------------------------------------
// Matrix multiply [m x k] @ [k x n] -> [m x n].

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
        throw shape_error(strf("matmul: incompatible shapes %s and %s",
                               shape_str(a.shape()).c_str(), shape_str(b.shape()).c_str()));
    size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    std::vector<double> out(m * n, 0.0);
    const auto& av = a.data();
    const auto& bv = b.data();
    for (size_t i = 0; i < m; ++i)
        for (size_t l = 0; l < k; ++l) {
            double ail = av[i * k + l];
            if (ail == 0.0) continue;
            const double* brow = bv.data() + l * n;
            double* orow = out.data() + i * n;
            for (size_t j = 0; j < n; ++j) orow[j] += ail * brow[j];
        }
    auto an = a.node(), bn = b.node();
    return detail::make_op({m, n}, std::move(out), {an, bn}, [an, bn, m, k, n](Node& self) {
        const auto& g = self.grad;
        if (an->requires_grad) {
            // dA = g @ B^T
            for (size_t i = 0; i < m; ++i)
                for (size_t j = 0; j < n; ++j) {
                    double gij = g[i * n + j];
                    if (gij == 0.0) continue;
                    const double* brow = bn->value.data() + j;
                    double* arow = an->grad.data() + i * k;
                    for (size_t l = 0; l < k; ++l) arow[l] += gij * brow[l * n];
                }
        }
        if (bn->requires_grad) {
            // dB = A^T @ g
            for (size_t i = 0; i < m; ++i)
                for (size_t l = 0; l < k; ++l) {
                    double ail = an->value[i * k + l];
                    if (ail == 0.0) continue;
                    const double* grow = g.data() + i * n;
                    double* brow = bn->grad.data() + l * n;
                    for (size_t j = 0; j < n; ++j) brow[j] += ail * grow[j];
                }
        }
    });
}

// ---------------------------------------------------------------------------
// 2-D convolution, stride 1, same (zero) padding, odd kernels.
// input [C_in x H x W], kernels [C_out x C_in x kh x kw] -> [C_out x H x W].

inline Tensor conv2d(const Tensor& input, const Tensor& kernels) {
    const Shape& xs = input.shape();
    const Shape& ws = kernels.shape();
    if (xs.size() != 3 || ws.size() != 4 || ws[1] != xs[0])
        throw shape_error(strf("conv2d: incompatible shapes %s and %s", shape_str(xs).c_str(),
                               shape_str(ws).c_str()));
    size_t cin = xs[0], H = xs[1], W = xs[2];
    size_t cout = ws[0], kh = ws[2], kw = ws[3];
    if (kh % 2 == 0 || kw % 2 == 0)
        throw invalid_argument_error("conv2d: same padding requires odd kernel sizes");
    size_t ph = kh / 2, pw = kw / 2;

    std::vector<double> out(cout * H * W, 0.0);
    const auto& xv = input.data();
    const auto& wv = kernels.data();
    for (size_t co = 0; co < cout; ++co)
        for (size_t ci = 0; ci < cin; ++ci)
            for (size_t ky = 0; ky < kh; ++ky)
                for (size_t kx = 0; kx < kw; ++kx) {
                    double wgt = wv[((co * cin + ci) * kh + ky) * kw + kx];
                    if (wgt == 0.0) continue;
                    // out[co,y,x] += wgt * x[ci, y+ky-ph, x+kx-pw]
                    long dy = static_cast<long>(ky) - static_cast<long>(ph);
                    long dx = static_cast<long>(kx) - static_cast<long>(pw);
                    size_t y0 = dy < 0 ? static_cast<size_t>(-dy) : 0;
                    size_t y1 = dy > 0 ? H - static_cast<size_t>(dy) : H;
                    size_t x0 = dx < 0 ? static_cast<size_t>(-dx) : 0;
                    size_t x1 = dx > 0 ? W - static_cast<size_t>(dx) : W;
                    for (size_t y = y0; y < y1; ++y) {
                        const double* xrow =
                            xv.data() + (ci * H + (y + dy)) * W + dx;
                        double* orow = out.data() + (co * H + y) * W;
                        for (size_t x = x0; x < x1; ++x) orow[x] += wgt * xrow[x];
                    }
                }

    auto xn = input.node(), wn = kernels.node();
    return detail::make_op({cout, H, W}, std::move(out), {xn, wn},
                           [xn, wn, cin, cout, H, W, kh, kw, ph, pw](Node& self) {
        const auto& g = self.grad;
        for (size_t co = 0; co < cout; ++co)
            for (size_t ci = 0; ci < cin; ++ci)
                for (size_t ky = 0; ky < kh; ++ky)
                    for (size_t kx = 0; kx < kw; ++kx) {
                        size_t widx = ((co * cin + ci) * kh + ky) * kw + kx;
                        long dy = static_cast<long>(ky) - static_cast<long>(ph);
                        long dx = static_cast<long>(kx) - static_cast<long>(pw);
                        size_t y0 = dy < 0 ? static_cast<size_t>(-dy) : 0;
                        size_t y1 = dy > 0 ? H - static_cast<size_t>(dy) : H;
                        size_t x0 = dx < 0 ? static_cast<size_t>(-dx) : 0;
                        size_t x1 = dx > 0 ? W - static_cast<size_t>(dx) : W;
                        if (xn->requires_grad) {
                            double wgt = wn->value[widx];
                            if (wgt != 0.0)
                                for (size_t y = y0; y < y1; ++y) {
                                    double* xrow = xn->grad.data() + (ci * H + (y + dy)) * W + dx;
                                    const double* grow = g.data() + (co * H + y) * W;
                                    for (size_t x = x0; x < x1; ++x) xrow[x] += wgt * grow[x];
                                }
                        }
                        if (wn->requires_grad) {
                            double acc = 0.0;
                            for (size_t y = y0; y < y1; ++y) {
                                const double* xrow = xn->value.data() + (ci * H + (y + dy)) * W + dx;
                                const double* grow = g.data() + (co * H + y) * W;
                                for (size_t x = x0; x < x1; ++x) acc += xrow[x] * grow[x];
                            }
                            wn->grad[widx] += acc;
                        }
                    }
    });
}

// Per-channel bias add: [C x H x W] + [C].
inline Tensor add_channel_bias(const Tensor& x, const Tensor& b) {
    const Shape& xs = x.shape();
    if (xs.size() != 3 || b.shape().size() != 1 || b.shape()[0] != xs[0])
        throw shape_error(strf("add_channel_bias: incompatible shapes %s and %s",
                               shape_str(xs).c_str(), shape_str(b.shape()).c_str()));
    size_t C = xs[0], plane = xs[1] * xs[2];
    std::vector<double> out(x.size());
    const auto& xv = x.data();
    const auto& bv = b.data();
    for (size_t c = 0; c < C; ++c)
        for (size_t i = 0; i < plane; ++i) out[c * plane + i] = xv[c * plane + i] + bv[c];
    auto xnode = x.node(), bnode = b.node();
    return detail::make_op(xs, std::move(out), {xnode, bnode}, [xnode, bnode, C, plane](Node& self) {
        if (xnode->requires_grad)
            for (size_t i = 0; i < self.grad.size(); ++i) xnode->grad[i] += self.grad[i];
        if (bnode->requires_grad)
            for (size_t c = 0; c < C; ++c) {
                double acc = 0.0;
                for (size_t i = 0; i < plane; ++i) acc += self.grad[c * plane + i];
                bnode->grad[c] += acc;
            }
    });
}

// ---------------------------------------------------------------------------
// Backward pass.

inline void backward(const Tensor& loss) {
    if (loss.size() != 1)
        throw invalid_argument_error("backward: loss must be scalar, got " +
                                     shape_str(loss.shape()));
    if (!loss.requires_grad()) return;  // nothing reachable holds gradients

    // Iterative post-order DFS; children end up after their parents' inputs.
    std::vector<Node*> order;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.push_back({loss.node().get(), 0});
    loss.node()->visited = true;
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (!p->visited) {
                p->visited = true;
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backprop) (*it)->backprop(**it);

    // Free the tape; leaves (parameters) keep their grads.
    for (Node* n : order) {
        n->visited = false;
        n->backprop = nullptr;
        n->parents.clear();
    }
}

// ---------------------------------------------------------------------------
// Parameters and Adam.

struct Parameter {
    std::string name;
    Tensor value;           // leaf tensor, requires_grad
    std::vector<double> m;  // first-moment accumulator
    std::vector<double> v;  // second-moment accumulator
    size_t steps = 0;

    static Parameter make(std::string name, Shape shape, std::vector<double> data) {
        Parameter p;
        p.name = std::move(name);
        p.value = Tensor::from(std::move(shape), std::move(data), true);
        p.m.assign(p.value.size(), 0.0);
        p.v.assign(p.value.size(), 0.0);
        return p;
    }
};

// Standard Adam with bias correction; zeroes gradients afterwards.
inline void adam_step(std::span<Parameter* const> params, double lr, double beta1 = 0.9,
                      double beta2 = 0.999, double eps = 1e-8) {
    if (lr <= 0.0) throw invalid_argument_error("adam_step: lr must be > 0");
    for (Parameter* p : params) {
        p->steps += 1;
        double c1 = 1.0 - std::pow(beta1, static_cast<double>(p->steps));
        double c2 = 1.0 - std::pow(beta2, static_cast<double>(p->steps));
        auto& x = p->value.data();
        auto& g = p->value.grad();
        for (size_t i = 0; i < x.size(); ++i) {
            p->m[i] = beta1 * p->m[i] + (1.0 - beta1) * g[i];
            p->v[i] = beta2 * p->v[i] + (1.0 - beta2) * g[i] * g[i];
            double mhat = p->m[i] / c1;
            double vhat = p->v[i] / c2;
            x[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            g[i] = 0.0;
        }
    }
}

inline void adam_step(std::vector<Parameter*>& params, double lr, double beta1 = 0.9,
                      double beta2 = 0.999, double eps = 1e-8) {
    adam_step(std::span<Parameter* const>(params.data(), params.size()), lr, beta1, beta2, eps);
}

// Glorot-uniform init for a weight block with the given fan counts.
inline std::vector<double> glorot_uniform(size_t count, size_t fan_in, size_t fan_out, Rng& rng) {
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> w(count);
    for (double& x : w) x = rng.uniform(-bound, bound);
    return w;
}

// ---------------------------------------------------------------------------
// Gradient checking against central finite differences.

struct GradCheckOptions {
    double h = 1e-5;
    size_t max_checks_per_block = 0;  // 0 = every element
    uint64_t seed = 7;                // sampling seed when capped
};

struct GradCheckBlock {
    std::string name;
    double max_rel_err = 0.0;
    size_t checked = 0;
};

struct GradCheckReport {
    std::vector<GradCheckBlock> blocks;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool numeric_failure = false;  // NaN in an analytic gradient
    bool pass = false;
};

// Relative error with a floor so near-zero gradients are compared absolutely:
// |a - n| / max(|a| + |n|, 1e-2).
inline double grad_rel_err(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), 1e-2);
}

// build_loss must construct the forward graph from the current parameter
// values and return the scalar loss; it is re-invoked per finite-difference
// probe with tape recording disabled.
inline GradCheckReport grad_check(const std::function<Tensor()>& build_loss,
                                  std::span<Parameter* const> params, double tolerance,
                                  GradCheckOptions opts = {}) {
    GradCheckReport report;
    report.tolerance = tolerance;

    for (Parameter* p : params) p->value.zero_grad();
    backward(build_loss());
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (Parameter* p : params) {
        analytic.push_back(p->value.grad());
        for (double g : analytic.back())
            if (!std::isfinite(g)) report.numeric_failure = true;
    }
    if (report.numeric_failure) {
        report.pass = false;
        return report;
    }

    NoGradGuard no_grad;
    Rng rng(opts.seed);
    for (size_t bi = 0; bi < params.size(); ++bi) {
        Parameter* p = params[bi];
        GradCheckBlock block;
        block.name = p->name;

        std::vector<size_t> idx(p->value.size());
        std::iota(idx.begin(), idx.end(), 0);
        if (opts.max_checks_per_block && idx.size() > opts.max_checks_per_block) {
            rng.shuffle(idx);
            idx.resize(opts.max_checks_per_block);
        }

        auto& x = p->value.data();
        for (size_t i : idx) {
            double saved = x[i];
            x[i] = saved + opts.h;
            double fp = build_loss().item();
            x[i] = saved - opts.h;
            double fm = build_loss().item();
            x[i] = saved;
            double numeric = (fp - fm) / (2.0 * opts.h);
            block.max_rel_err = std::max(block.max_rel_err, grad_rel_err(analytic[bi][i], numeric));
            ++block.checked;
        }
        report.max_rel_err = std::max(report.max_rel_err, block.max_rel_err);
        report.blocks.push_back(std::move(block));
    }
    report.pass = report.max_rel_err < tolerance;
    return report;
}

inline GradCheckReport grad_check(const std::function<Tensor()>& build_loss,
                                  const std::vector<Parameter*>& params, double tolerance,
                                  GradCheckOptions opts = {}) {
    return grad_check(build_loss, std::span<Parameter* const>(params.data(), params.size()),
                      tolerance, opts);
}

}  // namespace ad
}  // namespace stdk
