#pragma once

// Trainable parameters and the two layer shapes everything here is made of:
// a linear map and a one-hidden-layer SiLU MLP.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gamed/tensor.hpp"

namespace gamed {

// A named trainable tensor. The master copy lives detached; `use()` attaches
// it to the current tape once and hands back the attached view so every use
// within one batch shares a single leaf node.
template <class S>
struct BasicParam {
    std::string name;
    BasicTensor<S> value;

    BasicTensor<S> use(BasicTape<S>* tape) {
        if (!tape) return value;
        if (tape_uid_ != tape->uid()) {
            attached_ = tape->leaf(value);
            tape_uid_ = tape->uid();
        }
        return attached_;
    }

    bool attached_to(const BasicTape<S>& tape) const { return tape_uid_ == tape.uid(); }

    // Node id on the given tape, -1 when this parameter never joined it.
    int node_on(const BasicTape<S>& tape) const {
        return attached_to(tape) ? attached_.node() : -1;
    }

    void set(BasicTensor<S> v) {
        value = std::move(v);
        tape_uid_ = 0;
    }

private:
    BasicTensor<S> attached_{};
    std::uint64_t tape_uid_ = 0;
};

template <class S>
using BasicParamRefs = std::vector<BasicParam<S>*>;

namespace init {

// Xavier-uniform weight matrix [in, out].
template <class S>
BasicTensor<S> xavier(std::mt19937& rng, int in, int out) {
    double bound = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<S> w(static_cast<std::size_t>(in) * out);
    for (S& v : w) v = S(dist(rng));
    return BasicTensor<S>({in, out}, std::move(w));
}

template <class S>
BasicTensor<S> normal(std::mt19937& rng, std::vector<int> shape, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    int n = shape_numel(shape);
    std::vector<S> w(static_cast<std::size_t>(n));
    for (S& v : w) v = S(dist(rng));
    return BasicTensor<S>(std::move(shape), std::move(w));
}

}  // namespace init

template <class S>
struct BasicLinear {
    BasicParam<S> weight;  // [in, out]
    BasicParam<S> bias;    // [out]

    BasicLinear() = default;

    BasicLinear(std::string name, int in, int out, std::mt19937& rng) {
        weight.name = name + ".weight";
        weight.value = init::xavier<S>(rng, in, out);
        bias.name = name + ".bias";
        bias.value = BasicTensor<S>::zeros({out});
    }

    int in_dim() const { return weight.value.shape()[0]; }
    int out_dim() const { return weight.value.shape()[1]; }

    // Accepts [L, in] (row batch) or [in] (single vector).
    BasicTensor<S> forward(BasicTape<S>* tape, const BasicTensor<S>& x) {
        BasicTensor<S> w = weight.use(tape);
        BasicTensor<S> b = bias.use(tape);
        if (x.rank() == 1) {
            auto y = add(matmul(reshape(x, {1, x.size()}), w), b);
            return reshape(y, {out_dim()});
        }
        return add(matmul(x, w), b);
    }

    void collect(BasicParamRefs<S>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }
};

// One hidden layer, SiLU activation, linear output.
template <class S>
struct BasicMlp {
    BasicLinear<S> fc1, fc2;

    BasicMlp() = default;

    BasicMlp(std::string name, int in, int hidden, int out, std::mt19937& rng)
        : fc1(name + ".fc1", in, hidden, rng), fc2(name + ".fc2", hidden, out, rng) {}

    BasicTensor<S> forward(BasicTape<S>* tape, const BasicTensor<S>& x) {
        return fc2.forward(tape, silu(fc1.forward(tape, x)));
    }

    void collect(BasicParamRefs<S>& out) {
        fc1.collect(out);
        fc2.collect(out);
    }
};

using Param = BasicParam<float>;
using ParamRefs = BasicParamRefs<float>;
using Linear = BasicLinear<float>;
using Mlp = BasicMlp<float>;

}  // namespace gamed
