#pragma once

// MMoE-Pro: token-attention aggregation, softmax-free per-task gating, and
// the expert mixture r_t = sum_i w_{t,i}(f_tilde) * E_i(f). The classic-MMoE
// mode (mean pooling + softmax gates) is kept for the ablation study.

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gamed/errors.hpp"
#include "gamed/nn.hpp"
#include "gamed/tensor.hpp"

namespace gamed {

// Shared-weight scorer: one raw importance score per token.
template <class S>
struct BasicTokenAttention {
    BasicMlp<S> score;  // [d] -> 1, applied to every token row

    BasicTokenAttention() = default;

    BasicTokenAttention(const std::string& name, int d, int hidden, std::mt19937& rng)
        : score(name, d, hidden, 1, rng) {}

    void collect(BasicParamRefs<S>& out) { score.collect(out); }
};

// Normalized importance weights and the aggregated representation.
// Raw scores pass through softplus before normalizing, so beta is a proper
// distribution even when the scorer emits mixed signs.
template <class S>
std::pair<BasicTensor<S>, BasicTensor<S>> token_attention(BasicTape<S>* tape,
                                                          const BasicTensor<S>& tokens,
                                                          BasicTokenAttention<S>& att) {
    if (tokens.rank() != 2 || tokens.shape()[0] < 1) {
        throw ShapeError("token_attention: expected a non-empty [L,d] sequence, got " +
                         shape_str(tokens.shape()));
    }
    const int l = tokens.shape()[0];
    BasicTensor<S> alpha = softplus(reshape(att.score.forward(tape, tokens), {l}));
    BasicTensor<S> denom = add_scalar(sum_all(alpha), S(1e-8));
    BasicTensor<S> beta = div(alpha, denom);
    BasicTensor<S> f_tilde = reshape(matmul(reshape(beta, {1, l}), tokens), {tokens.shape()[1]});
    return {std::move(beta), std::move(f_tilde)};
}

// Per-task affine gate. No softmax, no clamp: weights may be negative or
// exceed one.
template <class S>
struct BasicGateHead {
    std::vector<BasicLinear<S>> task_gates;  // one [in, n_experts] map per task

    BasicGateHead() = default;

    BasicGateHead(const std::string& name, int in, int n_experts, int n_tasks, std::mt19937& rng) {
        for (int t = 0; t < n_tasks; ++t) {
            task_gates.emplace_back(name + ".task" + std::to_string(t), in, n_experts, rng);
        }
    }

    int n_tasks() const { return static_cast<int>(task_gates.size()); }

    BasicTensor<S> forward(BasicTape<S>* tape, const BasicTensor<S>& f_tilde, int task) {
        if (task < 0 || task >= n_tasks()) {
            throw ShapeError("gate_weights: task " + std::to_string(task) + " out of range [0, " +
                             std::to_string(n_tasks()) + ")");
        }
        return task_gates[static_cast<std::size_t>(task)].forward(tape, f_tilde);
    }

    void collect(BasicParamRefs<S>& out) {
        for (auto& g : task_gates) g.collect(out);
    }
};

template <class S>
BasicTensor<S> gate_weights(BasicTape<S>* tape, const BasicTensor<S>& f_tilde, int task,
                            BasicGateHead<S>& gate) {
    return gate.forward(tape, f_tilde, task);
}

template <class S>
struct BasicExpertBank {
    std::vector<BasicMlp<S>> experts;  // each in -> hidden -> d

    BasicExpertBank() = default;

    BasicExpertBank(const std::string& name, int in, int hidden, int d, int n, std::mt19937& rng) {
        for (int i = 0; i < n; ++i) {
            experts.emplace_back(name + ".expert" + std::to_string(i), in, hidden, d, rng);
        }
    }

    int n_experts() const { return static_cast<int>(experts.size()); }

    void collect(BasicParamRefs<S>& out) {
        for (auto& e : experts) e.collect(out);
    }
};

template <class S>
struct BasicMoeOutputs {
    BasicTensor<S> r0, r1;      // per-task mixtures
    BasicTensor<S> beta;        // token weights (empty for vector inputs)
    BasicTensor<S> f_tilde;     // gating input
};

// One MMoE-Pro instance. Token inputs are aggregated by attention for the
// gates and mean-flattened for the experts; vector inputs feed both as-is.
template <class S>
struct BasicMmoePro {
    BasicTokenAttention<S> attention;
    BasicGateHead<S> gates;
    BasicExpertBank<S> bank;
    bool classic_mode = false;  // ablation: mean pooling + softmax gates

    BasicMmoePro() = default;

    BasicMmoePro(const std::string& name, int in, int d, int n_experts, int attn_hidden,
                 std::mt19937& rng)
        : attention(name + ".attention", in, attn_hidden, rng),
          gates(name + ".gates", in, n_experts, 2, rng),
          bank(name + ".experts", in, d, d, n_experts, rng) {}

    BasicMoeOutputs<S> forward(BasicTape<S>* tape, const BasicTensor<S>& f) {
        BasicMoeOutputs<S> out;
        BasicTensor<S> expert_in;
        if (f.rank() == 2) {
            if (classic_mode) {
                out.f_tilde = mean_axis(f, 0);
            } else {
                auto [beta, ft] = token_attention(tape, f, attention);
                out.beta = std::move(beta);
                out.f_tilde = std::move(ft);
            }
            expert_in = mean_axis(f, 0);
        } else if (f.rank() == 1) {
            out.f_tilde = f;
            expert_in = f;
        } else {
            throw ShapeError("mmoe_pro_forward: expected [L,d] or [d], got " + shape_str(f.shape()));
        }

        const int n = bank.n_experts();
        const int d = bank.experts[0].fc2.out_dim();
        std::vector<BasicTensor<S>> expert_rows;
        expert_rows.reserve(static_cast<std::size_t>(n));
        for (auto& e : bank.experts) expert_rows.push_back(e.forward(tape, expert_in));
        BasicTensor<S> stacked = reshape(concat(expert_rows), {n, d});

        for (int task = 0; task < 2; ++task) {
            BasicTensor<S> w = gates.forward(tape, out.f_tilde, task);
            if (classic_mode) w = softmax(w);
            BasicTensor<S> r = reshape(matmul(reshape(w, {1, n}), stacked), {d});
            (task == 0 ? out.r0 : out.r1) = std::move(r);
        }
        return out;
    }

    void collect(BasicParamRefs<S>& out) {
        attention.collect(out);
        gates.collect(out);
        bank.collect(out);
    }
};

using TokenAttention = BasicTokenAttention<float>;
using GateHead = BasicGateHead<float>;
using ExpertBank = BasicExpertBank<float>;
using MoeOutputs = BasicMoeOutputs<float>;
using MmoePro = BasicMmoePro<float>;

}  // namespace gamed
