#pragma once

// Coarse prediction heads, logit-conditioned style parameters, and the AdaIN
// feature-distribution adjustment, including the inverted consistency branch
// and the fusion-module pass-through.

#include <random>
#include <string>
#include <utility>

#include "gamed/nn.hpp"
#include "gamed/tensor.hpp"

namespace gamed {

// 64-dimensional reduction + SiLU, then a scalar classifier logit.
// The reduction width stays 64 for every configured d.
template <class S>
struct BasicCoarseHead {
    static constexpr int kReducedDim = 64;

    BasicLinear<S> reducer;     // [d, 64]
    BasicLinear<S> classifier;  // [64, 1]

    BasicCoarseHead() = default;

    BasicCoarseHead(const std::string& name, int d, std::mt19937& rng)
        : reducer(name + ".reducer", d, kReducedDim, rng),
          classifier(name + ".classifier", kReducedDim, 1, rng) {}

    // 64-dim reduced representation (pre-classifier), e.g. for similarity
    // inspection between modules.
    BasicTensor<S> reduce(BasicTape<S>* tape, const BasicTensor<S>& r) {
        return silu(reducer.forward(tape, r));
    }

    // Scalar logit; no sigmoid here.
    BasicTensor<S> forward(BasicTape<S>* tape, const BasicTensor<S>& r) {
        return classifier.forward(tape, reduce(tape, r));
    }

    void collect(BasicParamRefs<S>& out) {
        reducer.collect(out);
        classifier.collect(out);
    }
};

template <class S>
BasicTensor<S> coarse_predict(BasicTape<S>* tape, const BasicTensor<S>& r,
                              BasicCoarseHead<S>& head) {
    return head.forward(tape, r);
}

template <class S>
struct BasicStyleParams {
    BasicTensor<S> mu;     // [d]
    BasicTensor<S> sigma;  // [d], strictly positive
};

// The MLP pair generating AdaIN statistics from a coarse logit.
template <class S>
struct BasicStyleNet {
    BasicMlp<S> mlp_mu;     // scalar -> [d]
    BasicMlp<S> mlp_sigma;  // scalar -> [d]

    BasicStyleNet() = default;

    BasicStyleNet(const std::string& name, int d, int hidden, std::mt19937& rng)
        : mlp_mu(name + ".mu", 1, hidden, d, rng), mlp_sigma(name + ".sigma", 1, hidden, d, rng) {}

    void collect(BasicParamRefs<S>& out) {
        mlp_mu.collect(out);
        mlp_sigma.collect(out);
    }
};

// mu = MLP_mu(s), sigma = softplus(MLP_sigma(s)) + 1e-4 with s = sigmoid(O).
// The inverted branch feeds 1 - sigmoid(O), computed as sigmoid(-O) so that
// style_from_output(O, invert=true) == style_from_output(-O, invert=false)
// bit for bit.
template <class S>
BasicStyleParams<S> style_from_output(BasicTape<S>* tape, const BasicTensor<S>& logit, bool invert,
                                      BasicStyleNet<S>& net) {
    BasicTensor<S> s = sigmoid(invert ? neg(logit) : logit);
    BasicStyleParams<S> style;
    style.mu = net.mlp_mu.forward(tape, s);
    style.sigma = add_scalar(softplus(net.mlp_sigma.forward(tape, s)), S(1e-4));
    return style;
}

// Ablation hook: a fixed style input s (detached) severing the logit->AdaIN
// path while keeping the style MLPs in the graph.
template <class S>
BasicStyleParams<S> style_from_constant(BasicTape<S>* tape, S s, BasicStyleNet<S>& net) {
    BasicTensor<S> in = BasicTensor<S>::scalar(s);
    BasicStyleParams<S> style;
    style.mu = net.mlp_mu.forward(tape, in);
    style.sigma = add_scalar(softplus(net.mlp_sigma.forward(tape, in)), S(1e-4));
    return style;
}

// e = sigma (.) (r - mu_r) / sigma_r + mu, with mu_r/sigma_r the population
// stats across the feature entries of r (sigma_r floored at 1e-6).
template <class S>
BasicTensor<S> adain(const BasicTensor<S>& r, const BasicStyleParams<S>& style) {
    if (r.rank() != 1 || r.size() < 2) {
        throw ShapeError("adain: expected a feature vector with >= 2 entries, got " +
                         shape_str(r.shape()));
    }
    auto [mu_r, sigma_r] = reduce_stats(r, 0);
    BasicTensor<S> z = div(sub(r, mu_r), sigma_r);
    return add(mul(z, style.sigma), style.mu);
}

template <class S>
struct BasicAdjustedSet {
    BasicTensor<S> e_ip, e_is, e_t, e_x, e_mm;
};

// Full-model adjustment: every unimodal branch styled by its own coarse
// logit, the irrelevant branch (r_mm task 1) styled by the inverted
// consistency logit, and e_mm passed through unchanged.
template <class S>
BasicAdjustedSet<S> adjust_all(BasicTape<S>* tape, const BasicTensor<S>& r_ip,
                               const BasicTensor<S>& r_is, const BasicTensor<S>& r_t,
                               const BasicTensor<S>& r_mm0, const BasicTensor<S>& r_mm1,
                               const BasicTensor<S>& o_ip, const BasicTensor<S>& o_is,
                               const BasicTensor<S>& o_t, const BasicTensor<S>& o_cons,
                               BasicStyleNet<S>& style_ip, BasicStyleNet<S>& style_is,
                               BasicStyleNet<S>& style_t, BasicStyleNet<S>& style_x) {
    BasicAdjustedSet<S> out;
    out.e_ip = adain(r_ip, style_from_output(tape, o_ip, false, style_ip));
    out.e_is = adain(r_is, style_from_output(tape, o_is, false, style_is));
    out.e_t = adain(r_t, style_from_output(tape, o_t, false, style_t));
    out.e_x = adain(r_mm1, style_from_output(tape, o_cons, true, style_x));
    out.e_mm = r_mm0;
    return out;
}

using CoarseHead = BasicCoarseHead<float>;
using StyleParams = BasicStyleParams<float>;
using StyleNet = BasicStyleNet<float>;
using AdjustedSet = BasicAdjustedSet<float>;

}  // namespace gamed
