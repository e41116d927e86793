#pragma once

// AdamW with decoupled weight decay.

#include <cmath>
#include <cstdint>
#include <vector>

#include "gamed/nn.hpp"
#include "gamed/tensor.hpp"

namespace gamed {

struct AdamWOptions {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

template <class S>
struct BasicAdamWState {
    std::int64_t step = 0;
    std::vector<S> m;  // first moment, parameter-shaped
    std::vector<S> v;  // second moment, parameter-shaped

    explicit BasicAdamWState(int size = 0)
        : m(static_cast<std::size_t>(size), S(0)), v(static_cast<std::size_t>(size), S(0)) {}
};

// One AdamW update: m,v moment update, bias correction, then
// param -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * param).
template <class S>
void adamw_step(BasicAdamWState<S>& state, const AdamWOptions& opt, BasicTensor<S>& param,
                const BasicTensor<S>& grad) {
    if (param.shape() != grad.shape()) {
        throw ShapeError("adamw_step: param " + shape_str(param.shape()) + " vs grad " +
                         shape_str(grad.shape()));
    }
    if (static_cast<int>(state.m.size()) != param.size()) {
        throw ShapeError("adamw_step: optimizer state size " + std::to_string(state.m.size()) +
                         " vs param " + shape_str(param.shape()));
    }
    state.step += 1;
    const S b1 = S(opt.beta1), b2 = S(opt.beta2);
    const S corr1 = S(1) - std::pow(b1, S(state.step));
    const S corr2 = S(1) - std::pow(b2, S(state.step));
    auto& p = param.values();
    const auto& g = grad.values();
    for (int i = 0; i < param.size(); ++i) {
        state.m[i] = b1 * state.m[i] + (S(1) - b1) * g[i];
        state.v[i] = b2 * state.v[i] + (S(1) - b2) * g[i] * g[i];
        const S mhat = state.m[i] / corr1;
        const S vhat = state.v[i] / corr2;
        p[i] -= S(opt.lr) * (mhat / (std::sqrt(vhat) + S(opt.eps)) + S(opt.weight_decay) * p[i]);
    }
}

// Optimizer over a fixed parameter list.
template <class S>
class BasicAdamW {
public:
    BasicAdamW(BasicParamRefs<S> params, AdamWOptions opt = {})
        : params_(std::move(params)), opt_(opt) {
        states_.reserve(params_.size());
        for (auto* p : params_) states_.emplace_back(p->value.size());
    }

    // Applies one step from the gradients of the given tape. Parameters
    // never attached to that tape are skipped.
    void step(BasicGradients<S>& grads, const BasicTape<S>& tape) {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            int node = params_[i]->node_on(tape);
            if (node < 0) continue;
            BasicTensor<S> g(params_[i]->value.shape(), grads.flat(node));
            adamw_step(states_[i], opt_, params_[i]->value, g);
        }
    }

    const AdamWOptions& options() const { return opt_; }

private:
    BasicParamRefs<S> params_;
    AdamWOptions opt_;
    std::vector<BasicAdamWState<S>> states_;
};

using AdamWState = BasicAdamWState<float>;
using AdamW = BasicAdamW<float>;

}  // namespace gamed
