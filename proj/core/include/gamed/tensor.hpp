#pragma once

// Dense row-major tensors with reverse-mode autodiff on an explicit tape.
// The scalar type is a template parameter: the shipped library works on
// 32-bit floats (`Tensor`, `Tape`, ...), while tests instantiate the same
// ops at 64-bit precision for finite-difference oracles.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gamed/errors.hpp"

namespace gamed {

template <class S>
class BasicTape;

template <class S>
class BasicGradients;

inline std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

inline int shape_numel(const std::vector<int>& shape) {
    int n = 1;
    for (int e : shape) {
        if (e <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
        n *= e;
    }
    return n;
}

template <class S>
class BasicTensor {
public:
    BasicTensor() = default;

    BasicTensor(std::vector<int> shape, std::vector<S> values)
        : shape_(std::move(shape)), values_(std::move(values)) {
        if (shape_numel(shape_) != static_cast<int>(values_.size())) {
            throw ShapeError("value count " + std::to_string(values_.size()) +
                             " does not match shape " + shape_str(shape_));
        }
    }

    static BasicTensor zeros(std::vector<int> shape) {
        int n = shape_numel(shape);
        return BasicTensor(std::move(shape), std::vector<S>(static_cast<std::size_t>(n), S(0)));
    }

    static BasicTensor full(std::vector<int> shape, S v) {
        int n = shape_numel(shape);
        return BasicTensor(std::move(shape), std::vector<S>(static_cast<std::size_t>(n), v));
    }

    static BasicTensor scalar(S v) { return BasicTensor({1}, {v}); }

    const std::vector<int>& shape() const { return shape_; }
    const std::vector<S>& values() const { return values_; }
    std::vector<S>& values() { return values_; }
    int size() const { return static_cast<int>(values_.size()); }
    int rank() const { return static_cast<int>(shape_.size()); }
    bool empty() const { return values_.empty(); }

    S at(int i) const { return values_[static_cast<std::size_t>(i)]; }
    S at(int i, int j) const { return values_[static_cast<std::size_t>(i * shape_[1] + j)]; }
    S& at(int i) { return values_[static_cast<std::size_t>(i)]; }
    S& at(int i, int j) { return values_[static_cast<std::size_t>(i * shape_[1] + j)]; }

    // Scalar read; the tensor must hold exactly one value.
    S item() const {
        if (size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape_));
        return values_[0];
    }

    bool attached() const { return node_ >= 0; }
    int node() const { return node_; }
    BasicTape<S>* tape() const { return tape_; }

    BasicTensor detached() const { return BasicTensor(shape_, values_); }

private:
    std::vector<int> shape_{};
    std::vector<S> values_{};
    BasicTape<S>* tape_ = nullptr;
    int node_ = -1;

    friend class BasicTape<S>;
};

template <class S>
class BasicGradients {
public:
    bool has(int node) const {
        return node >= 0 && node < static_cast<int>(bufs_.size()) && !bufs_[node].empty();
    }

    // Gradient tensor for a node; zeros when the node was never reached.
    BasicTensor<S> at(int node) const {
        check(node);
        if (!has(node)) return BasicTensor<S>::zeros(shapes_[node]);
        return BasicTensor<S>(shapes_[node], bufs_[node]);
    }

    const std::vector<S>& flat(int node) {
        check(node);
        auto& b = bufs_[static_cast<std::size_t>(node)];
        if (b.empty()) b.assign(static_cast<std::size_t>(shape_numel(shapes_[node])), S(0));
        return b;
    }

    std::vector<S>& accum(int node) {
        check(node);
        auto& b = bufs_[static_cast<std::size_t>(node)];
        if (b.empty()) b.assign(static_cast<std::size_t>(shape_numel(shapes_[node])), S(0));
        return b;
    }

private:
    explicit BasicGradients(std::vector<std::vector<int>> shapes)
        : shapes_(std::move(shapes)), bufs_(shapes_.size()) {}

    void check(int node) const {
        if (node < 0 || node >= static_cast<int>(shapes_.size())) {
            throw ShapeError("gradient lookup for unknown node " + std::to_string(node));
        }
    }

    std::vector<std::vector<int>> shapes_;
    std::vector<std::vector<S>> bufs_;

    friend class BasicTape<S>;
};

template <class S>
class BasicTape {
public:
    using BackwardFn = std::function<void(const std::vector<S>&, BasicGradients<S>&)>;

    BasicTape() : uid_(next_uid()) {}
    BasicTape(const BasicTape&) = delete;
    BasicTape& operator=(const BasicTape&) = delete;

    std::uint64_t uid() const { return uid_; }
    int num_nodes() const { return static_cast<int>(nodes_.size()); }

    // Record a leaf; returns a copy of `t` attached to this tape.
    BasicTensor<S> leaf(const BasicTensor<S>& t) {
        BasicTensor<S> out = t.detached();
        out.tape_ = this;
        out.node_ = push(t.shape(), {}, nullptr);
        return out;
    }

    // Record an op node over already-computed values.
    BasicTensor<S> make(std::vector<int> shape, std::vector<S> values, std::vector<int> parents,
                        BackwardFn fn) {
        BasicTensor<S> out(std::move(shape), std::move(values));
        out.tape_ = this;
        out.node_ = push(out.shape(), std::move(parents), std::move(fn));
        return out;
    }

    // Reverse sweep from a scalar loss. Node ids are topologically ordered
    // by construction, so one reverse pass visits every reachable node.
    BasicGradients<S> backward(const BasicTensor<S>& loss) {
        if (loss.size() != 1) {
            throw ShapeError("backward() needs a scalar loss, got " + shape_str(loss.shape()));
        }
        if (!loss.attached() || loss.tape() != this) {
            throw ShapeError("backward() loss is not attached to this tape");
        }
        std::vector<std::vector<int>> shapes;
        shapes.reserve(nodes_.size());
        for (const auto& n : nodes_) shapes.push_back(n.shape);
        BasicGradients<S> grads(std::move(shapes));
        grads.accum(loss.node())[0] = S(1);
        for (int id = loss.node(); id >= 0; --id) {
            const Node& n = nodes_[static_cast<std::size_t>(id)];
            if (!n.backward || !grads.has(id)) continue;
            n.backward(grads.accum(id), grads);
        }
        return grads;
    }

private:
    struct Node {
        std::vector<int> shape;
        std::vector<int> parents;
        BackwardFn backward;
    };

    int push(std::vector<int> shape, std::vector<int> parents, BackwardFn fn) {
        nodes_.push_back(Node{std::move(shape), std::move(parents), std::move(fn)});
        return static_cast<int>(nodes_.size()) - 1;
    }

    static std::uint64_t next_uid() {
        static std::atomic<std::uint64_t> counter{1};
        return counter.fetch_add(1);
    }

    std::vector<Node> nodes_;
    std::uint64_t uid_;
};

namespace detail {

// Tape an op result lands on: whichever operand is attached. Two attached
// operands must share a tape.
template <class S>
BasicTape<S>* result_tape(const BasicTensor<S>& a, const BasicTensor<S>& b) {
    BasicTape<S>* ta = a.attached() ? a.tape() : nullptr;
    BasicTape<S>* tb = b.attached() ? b.tape() : nullptr;
    if (ta && tb && ta != tb) throw ShapeError("operands recorded on different tapes");
    return ta ? ta : tb;
}

template <class S>
BasicTape<S>* result_tape(const BasicTensor<S>& a) {
    return a.attached() ? a.tape() : nullptr;
}

enum class Broadcast { kSame, kScalar, kLastAxis };

template <class S>
Broadcast broadcast_mode(const BasicTensor<S>& a, const BasicTensor<S>& b, const char* op) {
    if (a.shape() == b.shape()) return Broadcast::kSame;
    if (b.size() == 1) return Broadcast::kScalar;
    if (b.rank() == 1 && a.rank() >= 1 && a.shape().back() == b.shape()[0]) {
        return Broadcast::kLastAxis;
    }
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " do not match or broadcast");
}

// Index of b's element aligned with a's flat index i.
inline int bcast_index(Broadcast mode, int i, int last_extent) {
    switch (mode) {
        case Broadcast::kSame: return i;
        case Broadcast::kScalar: return 0;
        case Broadcast::kLastAxis: return i % last_extent;
    }
    return 0;
}

template <class S>
S stable_sigmoid(S x) {
    if (x >= S(0)) {
        return S(1) / (S(1) + std::exp(-x));
    }
    S e = std::exp(x);
    return e / (S(1) + e);
}

template <class S>
S stable_softplus(S x) {
    // max(x,0) + log1p(exp(-|x|)); exact tail for |x| > 30 where exp under/overflows.
    if (x > S(30)) return x;
    if (x < S(-30)) return std::exp(x);
    return std::max(x, S(0)) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Binary elementwise ops (same shape, scalar b, or b broadcast on last axis)
// ---------------------------------------------------------------------------

template <class S>
BasicTensor<S> add(const BasicTensor<S>& a, const BasicTensor<S>& b) {
    auto mode = detail::broadcast_mode(a, b, "add");
    const int last = a.shape().empty() ? 1 : a.shape().back();
    std::vector<S> out(a.values());
    for (int i = 0; i < a.size(); ++i) out[i] += b.at(detail::bcast_index(mode, i, last));
    BasicTape<S>* tape = detail::result_tape(a, b);
    if (!tape) return BasicTensor<S>(a.shape(), std::move(out));
    int pa = a.node(), pb = b.node(), n = a.size();
    return tape->make(a.shape(), std::move(out), {pa, pb},
                      [pa, pb, mode, last, n](const std::vector<S>& up, BasicGradients<S>& g) {
                          if (pa >= 0) {
                              auto& ga = g.accum(pa);
                              for (int i = 0; i < n; ++i) ga[i] += up[i];
                          }
                          if (pb >= 0) {
                              auto& gb = g.accum(pb);
                              for (int i = 0; i < n; ++i)
                                  gb[detail::bcast_index(mode, i, last)] += up[i];
                          }
                      });
}

template <class S>
BasicTensor<S> sub(const BasicTensor<S>& a, const BasicTensor<S>& b) {
    auto mode = detail::broadcast_mode(a, b, "sub");
    const int last = a.shape().empty() ? 1 : a.shape().back();
    std::vector<S> out(a.values());
    for (int i = 0; i < a.size(); ++i) out[i] -= b.at(detail::bcast_index(mode, i, last));
    BasicTape<S>* tape = detail::result_tape(a, b);
    if (!tape) return BasicTensor<S>(a.shape(), std::move(out));
    int pa = a.node(), pb = b.node(), n = a.size();
    return tape->make(a.shape(), std::move(out), {pa, pb},
                      [pa, pb, mode, last, n](const std::vector<S>& up, BasicGradients<S>& g) {
                          if (pa >= 0) {
                              auto& ga = g.accum(pa);
                              for (int i = 0; i < n; ++i) ga[i] += up[i];
                          }
                          if (pb >= 0) {
                              auto& gb = g.accum(pb);
                              for (int i = 0; i < n; ++i)
                                  gb[detail::bcast_index(mode, i, last)] -= up[i];
                          }
                      });
}

template <class S>
BasicTensor<S> mul(const BasicTensor<S>& a, const BasicTensor<S>& b) {
    auto mode = detail::broadcast_mode(a, b, "mul");
    const int last = a.shape().empty() ? 1 : a.shape().back();
    std::vector<S> out(a.values());
    for (int i = 0; i < a.size(); ++i) out[i] *= b.at(detail::bcast_index(mode, i, last));
    BasicTape<S>* tape = detail::result_tape(a, b);
    if (!tape) return BasicTensor<S>(a.shape(), std::move(out));
    int pa = a.node(), pb = b.node(), n = a.size();
    std::vector<S> av = a.values(), bv = b.values();
    return tape->make(
        a.shape(), std::move(out), {pa, pb},
        [pa, pb, mode, last, n, av = std::move(av),
         bv = std::move(bv)](const std::vector<S>& up, BasicGradients<S>& g) {
            if (pa >= 0) {
                auto& ga = g.accum(pa);
                for (int i = 0; i < n; ++i)
                    ga[i] += up[i] * bv[detail::bcast_index(mode, i, last)];
            }
            if (pb >= 0) {
                auto& gb = g.accum(pb);
                for (int i = 0; i < n; ++i)
                    gb[detail::bcast_index(mode, i, last)] += up[i] * av[i];
            }
        });
}

template <class S>
BasicTensor<S> div(const BasicTensor<S>& a, const BasicTensor<S>& b) {
    auto mode = detail::broadcast_mode(a, b, "div");
    const int last = a.shape().empty() ? 1 : a.shape().back();
    for (S v : b.values()) {
        if (std::abs(v) < S(1e-12)) {
            throw NumericDomainError("div: divisor magnitude below 1e-12");
        }
    }
    std::vector<S> out(a.values());
    for (int i = 0; i < a.size(); ++i) out[i] /= b.at(detail::bcast_index(mode, i, last));
    BasicTape<S>* tape = detail::result_tape(a, b);
    if (!tape) return BasicTensor<S>(a.shape(), std::move(out));
    int pa = a.node(), pb = b.node(), n = a.size();
    std::vector<S> av = a.values(), bv = b.values();
    return tape->make(
        a.shape(), std::move(out), {pa, pb},
        [pa, pb, mode, last, n, av = std::move(av),
         bv = std::move(bv)](const std::vector<S>& up, BasicGradients<S>& g) {
            if (pa >= 0) {
                auto& ga = g.accum(pa);
                for (int i = 0; i < n; ++i)
                    ga[i] += up[i] / bv[detail::bcast_index(mode, i, last)];
            }
            if (pb >= 0) {
                auto& gb = g.accum(pb);
                for (int i = 0; i < n; ++i) {
                    S d = bv[detail::bcast_index(mode, i, last)];
                    gb[detail::bcast_index(mode, i, last)] -= up[i] * av[i] / (d * d);
                }
            }
        });
}

template <class S>
BasicTensor<S> scale(const BasicTensor<S>& a, S k) {
    std::vector<S> out(a.values());
    for (S& v : out) v *= k;
    BasicTape<S>* tape = detail::result_tape(a);
    if (!tape) return BasicTensor<S>(a.shape(), std::move(out));
    int pa = a.node(), n = a.size();
    return tape->make(a.shape(), std::move(out), {pa},
                      [pa, k, n](const std::vector<S>& up, BasicGradients<S>& g) {
                          auto& ga = g.accum(pa);
                          for (int i = 0; i < n; ++i) ga[i] += k * up[i];
                      });
}

template <class S>
BasicTensor<S> add_scalar(const BasicTensor<S>& a, S k) {
    std::vector<S> out(a.values());
    for (S& v : out) v += k;
    BasicTape<S>* tape = detail::result_tape(a);
    if (!tape) return BasicTensor<S>(a.shape(), std::move(out));
    int pa = a.node(), n = a.size();
    return tape->make(a.shape(), std::move(out), {pa},
                      [pa, n](const std::vector<S>& up, BasicGradients<S>& g) {
                          auto& ga = g.accum(pa);
                          for (int i = 0; i < n; ++i) ga[i] += up[i];
                      });
}

template <class S>
BasicTensor<S> div_scalar(const BasicTensor<S>& a, S k) {
    if (std::abs(k) < S(1e-12)) throw NumericDomainError("div: divisor magnitude below 1e-12");
    return scale(a, S(1) / k);
}

template <class S>
BasicTensor<S> neg(const BasicTensor<S>& a) {
    return scale(a, S(-1));
}

// ---------------------------------------------------------------------------
// Matrix product
// ---------------------------------------------------------------------------

template <class S>
BasicTensor<S> matmul(const BasicTensor<S>& a, const BasicTensor<S>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    const int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    std::vector<S> out(static_cast<std::size_t>(m) * n, S(0));
    const S* ap = a.values().data();
    const S* bp = b.values().data();
    for (int i = 0; i < m; ++i) {
        for (int l = 0; l < k; ++l) {
            const S av = ap[i * k + l];
            const S* brow = bp + l * n;
            S* orow = out.data() + i * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    BasicTape<S>* tape = detail::result_tape(a, b);
    if (!tape) return BasicTensor<S>({m, n}, std::move(out));
    int pa = a.node(), pb = b.node();
    std::vector<S> av = a.values(), bv = b.values();
    return tape->make(
        {m, n}, std::move(out), {pa, pb},
        [pa, pb, m, k, n, av = std::move(av),
         bv = std::move(bv)](const std::vector<S>& up, BasicGradients<S>& g) {
            if (pa >= 0) {
                auto& ga = g.accum(pa);  // up[m,n] * b^T -> [m,k]
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) {
                        const S u = up[i * n + j];
                        for (int l = 0; l < k; ++l) ga[i * k + l] += u * bv[l * n + j];
                    }
            }
            if (pb >= 0) {
                auto& gb = g.accum(pb);  // a^T * up -> [k,n]
                for (int i = 0; i < m; ++i)
                    for (int l = 0; l < k; ++l) {
                        const S aval = av[i * k + l];
                        for (int j = 0; j < n; ++j) gb[l * n + j] += aval * up[i * n + j];
                    }
            }
        });
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

template <class S>
BasicTensor<S> sigmoid(const BasicTensor<S>& x) {
    std::vector<S> out(x.values());
    for (S& v : out) v = detail::stable_sigmoid(v);
    BasicTape<S>* tape = detail::result_tape(x);
    if (!tape) return BasicTensor<S>(x.shape(), std::move(out));
    int px = x.node(), n = x.size();
    std::vector<S> y = out;
    return tape->make(x.shape(), std::move(out), {px},
                      [px, n, y = std::move(y)](const std::vector<S>& up, BasicGradients<S>& g) {
                          auto& gx = g.accum(px);
                          for (int i = 0; i < n; ++i) gx[i] += up[i] * y[i] * (S(1) - y[i]);
                      });
}

template <class S>
BasicTensor<S> silu(const BasicTensor<S>& x) {
    std::vector<S> out(x.values());
    for (S& v : out) v = v * detail::stable_sigmoid(v);
    BasicTape<S>* tape = detail::result_tape(x);
    if (!tape) return BasicTensor<S>(x.shape(), std::move(out));
    int px = x.node(), n = x.size();
    std::vector<S> xv = x.values();
    return tape->make(x.shape(), std::move(out), {px},
                      [px, n, xv = std::move(xv)](const std::vector<S>& up, BasicGradients<S>& g) {
                          auto& gx = g.accum(px);
                          for (int i = 0; i < n; ++i) {
                              S s = detail::stable_sigmoid(xv[i]);
                              gx[i] += up[i] * (s + xv[i] * s * (S(1) - s));
                          }
                      });
}

template <class S>
BasicTensor<S> softplus(const BasicTensor<S>& x) {
    std::vector<S> out(x.values());
    for (S& v : out) v = detail::stable_softplus(v);
    BasicTape<S>* tape = detail::result_tape(x);
    if (!tape) return BasicTensor<S>(x.shape(), std::move(out));
    int px = x.node(), n = x.size();
    std::vector<S> xv = x.values();
    return tape->make(x.shape(), std::move(out), {px},
                      [px, n, xv = std::move(xv)](const std::vector<S>& up, BasicGradients<S>& g) {
                          auto& gx = g.accum(px);
                          for (int i = 0; i < n; ++i)
                              gx[i] += up[i] * detail::stable_sigmoid(xv[i]);
                      });
}

// 1-D softmax, shift-stabilized. Used only by the classic-MMoE gating mode.
template <class S>
BasicTensor<S> softmax(const BasicTensor<S>& x) {
    if (x.rank() != 1) throw ShapeError("softmax expects a 1-D tensor, got " + shape_str(x.shape()));
    S mx = *std::max_element(x.values().begin(), x.values().end());
    std::vector<S> out(x.values());
    S sum = S(0);
    for (S& v : out) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (S& v : out) v /= sum;
    BasicTape<S>* tape = detail::result_tape(x);
    if (!tape) return BasicTensor<S>(x.shape(), std::move(out));
    int px = x.node(), n = x.size();
    std::vector<S> y = out;
    return tape->make(x.shape(), std::move(out), {px},
                      [px, n, y = std::move(y)](const std::vector<S>& up, BasicGradients<S>& g) {
                          S dot = S(0);
                          for (int i = 0; i < n; ++i) dot += up[i] * y[i];
                          auto& gx = g.accum(px);
                          for (int i = 0; i < n; ++i) gx[i] += y[i] * (up[i] - dot);
                      });
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

template <class S>
BasicTensor<S> reshape(const BasicTensor<S>& x, std::vector<int> shape) {
    if (shape_numel(shape) != x.size()) {
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(shape));
    }
    BasicTape<S>* tape = detail::result_tape(x);
    if (!tape) return BasicTensor<S>(std::move(shape), x.values());
    int px = x.node(), n = x.size();
    return tape->make(std::move(shape), x.values(), {px},
                      [px, n](const std::vector<S>& up, BasicGradients<S>& g) {
                          auto& gx = g.accum(px);
                          for (int i = 0; i < n; ++i) gx[i] += up[i];
                      });
}

template <class S>
BasicTensor<S> transpose(const BasicTensor<S>& x) {
    if (x.rank() != 2) throw ShapeError("transpose expects a 2-D tensor, got " + shape_str(x.shape()));
    const int m = x.shape()[0], n = x.shape()[1];
    std::vector<S> out(static_cast<std::size_t>(m) * n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[j * m + i] = x.at(i, j);
    BasicTape<S>* tape = detail::result_tape(x);
    if (!tape) return BasicTensor<S>({n, m}, std::move(out));
    int px = x.node();
    return tape->make({n, m}, std::move(out), {px},
                      [px, m, n](const std::vector<S>& up, BasicGradients<S>& g) {
                          auto& gx = g.accum(px);
                          for (int j = 0; j < n; ++j)
                              for (int i = 0; i < m; ++i) gx[i * n + j] += up[j * m + i];
                      });
}

// Concatenate 1-D tensors into one 1-D tensor.
template <class S>
BasicTensor<S> concat(const std::vector<BasicTensor<S>>& parts) {
    if (parts.empty()) throw ShapeError("concat of zero tensors");
    int total = 0;
    BasicTape<S>* tape = nullptr;
    for (const auto& p : parts) {
        if (p.rank() != 1) throw ShapeError("concat expects 1-D parts, got " + shape_str(p.shape()));
        total += p.size();
        if (p.attached()) {
            if (tape && p.tape() != tape) throw ShapeError("concat parts on different tapes");
            tape = p.tape();
        }
    }
    std::vector<S> out;
    out.reserve(static_cast<std::size_t>(total));
    std::vector<int> ids;
    std::vector<int> sizes;
    for (const auto& p : parts) {
        out.insert(out.end(), p.values().begin(), p.values().end());
        ids.push_back(p.node());
        sizes.push_back(p.size());
    }
    if (!tape) return BasicTensor<S>({total}, std::move(out));
    return tape->make({total}, std::move(out), ids,
                      [ids, sizes](const std::vector<S>& up, BasicGradients<S>& g) {
                          int off = 0;
                          for (std::size_t k = 0; k < ids.size(); ++k) {
                              if (ids[k] >= 0) {
                                  auto& gp = g.accum(ids[k]);
                                  for (int i = 0; i < sizes[k]; ++i) gp[i] += up[off + i];
                              }
                              off += sizes[k];
                          }
                      });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <class S>
BasicTensor<S> sum_all(const BasicTensor<S>& x) {
    S total = std::accumulate(x.values().begin(), x.values().end(), S(0));
    BasicTape<S>* tape = detail::result_tape(x);
    if (!tape) return BasicTensor<S>::scalar(total);
    int px = x.node(), n = x.size();
    return tape->make({1}, {total}, {px},
                      [px, n](const std::vector<S>& up, BasicGradients<S>& g) {
                          auto& gx = g.accum(px);
                          for (int i = 0; i < n; ++i) gx[i] += up[0];
                      });
}

template <class S>
BasicTensor<S> mean_all(const BasicTensor<S>& x) {
    return div_scalar(sum_all(x), S(x.size()));
}

// Sum along one axis of a 1-D or 2-D tensor.
template <class S>
BasicTensor<S> sum_axis(const BasicTensor<S>& x, int axis) {
    if (axis < 0 || axis >= x.rank()) {
        throw ShapeError("sum_axis: axis " + std::to_string(axis) + " invalid for " +
                         shape_str(x.shape()));
    }
    if (x.rank() == 1) return sum_all(x);
    if (x.rank() != 2) throw ShapeError("sum_axis supports rank <= 2, got " + shape_str(x.shape()));
    const int m = x.shape()[0], n = x.shape()[1];
    if (axis == 0) {
        std::vector<S> out(static_cast<std::size_t>(n), S(0));
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) out[j] += x.at(i, j);
        BasicTape<S>* tape = detail::result_tape(x);
        if (!tape) return BasicTensor<S>({n}, std::move(out));
        int px = x.node();
        return tape->make({n}, std::move(out), {px},
                          [px, m, n](const std::vector<S>& up, BasicGradients<S>& g) {
                              auto& gx = g.accum(px);
                              for (int i = 0; i < m; ++i)
                                  for (int j = 0; j < n; ++j) gx[i * n + j] += up[j];
                          });
    }
    std::vector<S> out(static_cast<std::size_t>(m), S(0));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[i] += x.at(i, j);
    BasicTape<S>* tape = detail::result_tape(x);
    if (!tape) return BasicTensor<S>({m}, std::move(out));
    int px = x.node();
    return tape->make({m}, std::move(out), {px},
                      [px, m, n](const std::vector<S>& up, BasicGradients<S>& g) {
                          auto& gx = g.accum(px);
                          for (int i = 0; i < m; ++i)
                              for (int j = 0; j < n; ++j) gx[i * n + j] += up[i];
                      });
}

template <class S>
BasicTensor<S> mean_axis(const BasicTensor<S>& x, int axis) {
    int extent = x.shape()[static_cast<std::size_t>(axis < 0 ? 0 : axis)];
    if (axis < 0 || axis >= x.rank()) {
        throw ShapeError("mean_axis: axis " + std::to_string(axis) + " invalid for " +
                         shape_str(x.shape()));
    }
    return div_scalar(sum_axis(x, axis), S(extent));
}

template <class S>
BasicTensor<S> sqrt(const BasicTensor<S>& x) {
    std::vector<S> out(x.values());
    for (S& v : out) v = std::sqrt(v);
    BasicTape<S>* tape = detail::result_tape(x);
    if (!tape) return BasicTensor<S>(x.shape(), std::move(out));
    int px = x.node(), n = x.size();
    std::vector<S> y = out;
    return tape->make(x.shape(), std::move(out), {px},
                      [px, n, y = std::move(y)](const std::vector<S>& up, BasicGradients<S>& g) {
                          auto& gx = g.accum(px);
                          for (int i = 0; i < n; ++i) gx[i] += up[i] * S(0.5) / y[i];
                      });
}

template <class S>
BasicTensor<S> clamp_min(const BasicTensor<S>& x, S lo) {
    std::vector<S> out(x.values());
    for (S& v : out) v = std::max(v, lo);
    BasicTape<S>* tape = detail::result_tape(x);
    if (!tape) return BasicTensor<S>(x.shape(), std::move(out));
    int px = x.node(), n = x.size();
    std::vector<S> xv = x.values();
    return tape->make(x.shape(), std::move(out), {px},
                      [px, n, lo, xv = std::move(xv)](const std::vector<S>& up, BasicGradients<S>& g) {
                          auto& gx = g.accum(px);
                          for (int i = 0; i < n; ++i)
                              if (xv[i] > lo) gx[i] += up[i];
                      });
}

// Population mean and std along `axis` (divide by n). Std is floored at 1e-6
// via sqrt(max(var, 1e-12)), which keeps the gradient finite on constant
// inputs. Rank-2 axis-1 stats go through a transpose.
template <class S>
std::pair<BasicTensor<S>, BasicTensor<S>> reduce_stats(const BasicTensor<S>& x, int axis) {
    if (axis < 0 || axis >= x.rank()) {
        throw ShapeError("reduce_stats: axis " + std::to_string(axis) + " invalid for " +
                         shape_str(x.shape()));
    }
    if (x.rank() == 2 && axis == 1) return reduce_stats(transpose(x), 0);
    if (x.rank() > 2) throw ShapeError("reduce_stats supports rank <= 2, got " + shape_str(x.shape()));
    BasicTensor<S> m = mean_axis(x, axis);
    BasicTensor<S> centered = sub(x, m);  // scalar or last-axis broadcast
    BasicTensor<S> var = mean_axis(mul(centered, centered), axis);
    BasicTensor<S> sd = sqrt(clamp_min(var, S(1e-12)));
    return {std::move(m), std::move(sd)};
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// Binary cross-entropy on a logit, in the log-sum-exp-stable form
// max(o,0) - o*t + log1p(exp(-|o|)).
template <class S>
BasicTensor<S> bce_with_logits(const BasicTensor<S>& logit, double target) {
    if (logit.size() != 1) {
        throw ShapeError("bce_with_logits expects a scalar logit, got " + shape_str(logit.shape()));
    }
    if (target != 0.0 && target != 1.0) {
        throw NumericDomainError("bce_with_logits: target must be 0 or 1");
    }
    const S o = logit.at(0);
    const S t = S(target);
    const S loss = std::max(o, S(0)) - o * t + std::log1p(std::exp(-std::abs(o)));
    BasicTape<S>* tape = detail::result_tape(logit);
    if (!tape) return BasicTensor<S>::scalar(loss);
    int po = logit.node();
    return tape->make({1}, {loss}, {po},
                      [po, o, t](const std::vector<S>& up, BasicGradients<S>& g) {
                          g.accum(po)[0] += up[0] * (detail::stable_sigmoid(o) - t);
                      });
}

// ---------------------------------------------------------------------------
// Embedding lookup
// ---------------------------------------------------------------------------

// Gather rows of `table` [V,d] by index; gradients scatter-add back.
template <class S>
BasicTensor<S> gather_rows(const BasicTensor<S>& table, const std::vector<int>& ids) {
    if (table.rank() != 2) {
        throw ShapeError("gather_rows expects a 2-D table, got " + shape_str(table.shape()));
    }
    const int v = table.shape()[0], d = table.shape()[1];
    const int l = static_cast<int>(ids.size());
    if (l == 0) throw ShapeError("gather_rows: empty id list");
    std::vector<S> out(static_cast<std::size_t>(l) * d);
    for (int i = 0; i < l; ++i) {
        if (ids[i] < 0 || ids[i] >= v) {
            throw NumericDomainError("gather_rows: id " + std::to_string(ids[i]) +
                                     " out of range [0, " + std::to_string(v) + ")");
        }
        std::copy_n(table.values().begin() + static_cast<std::size_t>(ids[i]) * d, d,
                    out.begin() + static_cast<std::size_t>(i) * d);
    }
    BasicTape<S>* tape = detail::result_tape(table);
    if (!tape) return BasicTensor<S>({l, d}, std::move(out));
    int pt = table.node();
    std::vector<int> idcopy = ids;
    return tape->make({l, d}, std::move(out), {pt},
                      [pt, d, l, idcopy](const std::vector<S>& up, BasicGradients<S>& g) {
                          auto& gt = g.accum(pt);
                          for (int i = 0; i < l; ++i)
                              for (int j = 0; j < d; ++j) gt[idcopy[i] * d + j] += up[i * d + j];
                      });
}

// Shipped precision: 32-bit floats. Tests additionally instantiate the
// double versions as oracles.
using Tensor = BasicTensor<float>;
using Tape = BasicTape<float>;
using Gradients = BasicGradients<float>;

}  // namespace gamed
