#pragma once

// Toy modality encoders: token embedding + MLP for text, patch embedding +
// MLP for image semantics, and a constrained-kernel residual convolution for
// image patterns. They keep the shape of the real extractors (token
// sequences in, fixed-width features out) at desk scale.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "gamed/errors.hpp"
#include "gamed/nn.hpp"
#include "gamed/tensor.hpp"

namespace gamed {

struct EncoderConfig {
    int d = 64;        // shared feature width
    int l_t = 16;      // text tokens after pad/truncate
    int l_is = 16;     // image patch tokens (must be a perfect square)
    int vocab = 64;    // token id space, pad id included
    int pad_id = 0;
    int grid = 32;     // image is grid x grid
    int d_ip = 32;     // image-pattern feature width
    int kernel = 3;    // constrained conv kernel extent (odd)
    int conv_channels = 4;
    bool aug_hflip = true;
    bool aug_rot90 = true;
    bool aug_scale = true;

    void validate() const {
        if (d <= 0) throw ConfigError("encoder.d must be positive");
        if (l_t <= 0) throw ConfigError("encoder.l_t must be positive");
        if (l_is <= 0) throw ConfigError("encoder.l_is must be positive");
        if (vocab <= 1) throw ConfigError("encoder.vocab must exceed the pad id");
        if (pad_id < 0 || pad_id >= vocab) throw ConfigError("encoder.pad_id out of vocab range");
        if (grid <= 0) throw ConfigError("encoder.grid must be positive");
        if (d_ip <= 0) throw ConfigError("encoder.d_ip must be positive");
        if (kernel < 3 || kernel % 2 == 0) throw ConfigError("encoder.kernel must be odd and >= 3");
        if (conv_channels <= 0) throw ConfigError("encoder.conv_channels must be positive");
        int pps = patches_per_side();
        if (pps * pps != l_is) throw ConfigError("encoder.l_is must be a perfect square");
        if (grid % pps != 0) throw ConfigError("encoder.grid must divide into l_is patches");
        if (kernel > grid) throw ConfigError("encoder.kernel exceeds the image grid");
    }

    int patches_per_side() const { return static_cast<int>(std::lround(std::sqrt(double(l_is)))); }
};

// ---------------------------------------------------------------------------
// Constrained kernel (residual/tamper-trace filter)
// ---------------------------------------------------------------------------

// Project one [k,k] kernel onto the constraint set: center exactly -1,
// non-center entries summing to 1. Rescale runs in double; a short repair
// loop then nudges the stored values so the float sum lands within 1e-6 of
// one wherever the magnitudes make that representable. A near-zero surround
// sum (|sum| <= 1e-8) resets the surround to uniform 1/(k^2-1).
template <class S>
void constrain_kernel(S* kernel, int k) {
    if (k < 3 || k % 2 == 0) throw ShapeError("constrain_kernel: kernel extent must be odd >= 3");
    const int n = k * k;
    const int center = (k / 2) * k + (k / 2);
    kernel[center] = S(-1);
    double s = 0.0;
    for (int i = 0; i < n; ++i)
        if (i != center) s += double(kernel[i]);
    if (std::abs(s) <= 1e-8) {
        const S uniform = S(1.0 / (n - 1));
        for (int i = 0; i < n; ++i)
            if (i != center) kernel[i] = uniform;
        return;
    }
    // Already on the constraint set: leave the values bit-identical so the
    // projection is a true fixed point.
    if (std::abs(s - 1.0) > 1e-7) {
        for (int i = 0; i < n; ++i)
            if (i != center) kernel[i] = S(double(kernel[i]) / s);
    }
    for (int pass = 0; pass < 8; ++pass) {
        double total = 0.0;
        for (int i = 0; i < n; ++i)
            if (i != center) total += double(kernel[i]);
        double residual = 1.0 - total;
        if (std::abs(residual) <= 1e-7) break;
        int target = -1;
        double best = 0.0;
        for (int i = 0; i < n; ++i) {
            if (i == center) continue;
            double mag = std::abs(double(kernel[i]));
            if (target < 0 || mag < best) {
                target = i;
                best = mag;
            }
        }
        S patched = S(double(kernel[target]) + residual);
        if (patched == kernel[target]) break;  // below ulp, not representable
        kernel[target] = patched;
    }
}

template <class S>
BasicTensor<S> constrain_kernel(BasicTensor<S> kernels) {
    if (kernels.rank() == 2) {
        if (kernels.shape()[0] != kernels.shape()[1]) {
            throw ShapeError("constrain_kernel: kernel must be square, got " +
                             shape_str(kernels.shape()));
        }
        constrain_kernel(kernels.values().data(), kernels.shape()[0]);
        return kernels;
    }
    if (kernels.rank() == 3) {
        const int c = kernels.shape()[0], k = kernels.shape()[1];
        if (k != kernels.shape()[2]) {
            throw ShapeError("constrain_kernel: kernel must be square, got " +
                             shape_str(kernels.shape()));
        }
        for (int ch = 0; ch < c; ++ch) constrain_kernel(kernels.values().data() + ch * k * k, k);
        return kernels;
    }
    throw ShapeError("constrain_kernel expects [k,k] or [C,k,k], got " + shape_str(kernels.shape()));
}

// Valid-padding convolution of a [H,W] image with constrained kernels
// [C,k,k], computed in residual form: each tap contributes
// w_ij * (x[y+i][x+j] - x[center]), the center weight being implicitly -1.
// A constant image therefore produces exactly zero response.
template <class S>
BasicTensor<S> conv2d_constrained(const BasicTensor<S>& image, const BasicTensor<S>& kernels) {
    if (image.rank() != 2) throw ShapeError("conv2d: image must be [H,W], got " + shape_str(image.shape()));
    if (kernels.rank() != 3 || kernels.shape()[1] != kernels.shape()[2]) {
        throw ShapeError("conv2d: kernels must be [C,k,k], got " + shape_str(kernels.shape()));
    }
    const int h = image.shape()[0], w = image.shape()[1];
    const int c = kernels.shape()[0], k = kernels.shape()[1];
    if (k > h || k > w) {
        throw ShapeError("conv2d: kernel " + std::to_string(k) + "x" + std::to_string(k) +
                         " larger than image " + shape_str(image.shape()));
    }
    const int oh = h - k + 1, ow = w - k + 1;
    const int kc = k / 2;
    std::vector<S> out(static_cast<std::size_t>(c) * oh * ow, S(0));
    const S* img = image.values().data();
    const S* ker = kernels.values().data();
    for (int ch = 0; ch < c; ++ch) {
        const S* kch = ker + ch * k * k;
        S* och = out.data() + ch * oh * ow;
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                const S centerpix = img[(y + kc) * w + (x + kc)];
                S acc = S(0);
                for (int i = 0; i < k; ++i) {
                    for (int j = 0; j < k; ++j) {
                        if (i == kc && j == kc) continue;
                        acc += kch[i * k + j] * (img[(y + i) * w + (x + j)] - centerpix);
                    }
                }
                och[y * ow + x] = acc;
            }
        }
    }
    BasicTape<S>* tape = detail::result_tape(image, kernels);
    if (!tape) return BasicTensor<S>({c, oh, ow}, std::move(out));
    int pi = image.node(), pk = kernels.node();
    std::vector<S> iv = image.values(), kv = kernels.values();
    return tape->make(
        {c, oh, ow}, std::move(out), {pi, pk},
        [pi, pk, h, w, c, k, oh, ow, kc, iv = std::move(iv),
         kv = std::move(kv)](const std::vector<S>& up, BasicGradients<S>& g) {
            if (pk >= 0) {
                auto& gk = g.accum(pk);
                for (int ch = 0; ch < c; ++ch)
                    for (int y = 0; y < oh; ++y)
                        for (int x = 0; x < ow; ++x) {
                            const S u = up[(ch * oh + y) * ow + x];
                            const S centerpix = iv[(y + kc) * w + (x + kc)];
                            for (int i = 0; i < k; ++i)
                                for (int j = 0; j < k; ++j) {
                                    if (i == kc && j == kc) continue;
                                    gk[(ch * k + i) * k + j] +=
                                        u * (iv[(y + i) * w + (x + j)] - centerpix);
                                }
                        }
            }
            if (pi >= 0) {
                auto& gi = g.accum(pi);
                for (int ch = 0; ch < c; ++ch)
                    for (int y = 0; y < oh; ++y)
                        for (int x = 0; x < ow; ++x) {
                            const S u = up[(ch * oh + y) * ow + x];
                            S wsum = S(0);
                            for (int i = 0; i < k; ++i)
                                for (int j = 0; j < k; ++j) {
                                    if (i == kc && j == kc) continue;
                                    const S wv = kv[(ch * k + i) * k + j];
                                    gi[(y + i) * w + (x + j)] += u * wv;
                                    wsum += wv;
                                }
                            gi[(y + kc) * w + (x + kc)] -= u * wsum;
                        }
            }
        });
}

// ---------------------------------------------------------------------------
// Image augmentation (IS branch, train time only)
// ---------------------------------------------------------------------------

enum class Augment { kIdentity, kHFlip, kRot90, kScale };

template <class S>
BasicTensor<S> hflip_image(const BasicTensor<S>& image) {
    const int h = image.shape()[0], w = image.shape()[1];
    std::vector<S> out(image.values().size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out[y * w + x] = image.at(y, w - 1 - x);
    return BasicTensor<S>({h, w}, std::move(out));
}

template <class S>
BasicTensor<S> rot90_image(const BasicTensor<S>& image) {
    const int h = image.shape()[0], w = image.shape()[1];
    std::vector<S> out(image.values().size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out[x * h + (h - 1 - y)] = image.at(y, x);
    return BasicTensor<S>({w, h}, std::move(out));
}

// Picks one augmentation per call from the enabled set, the run RNG driving
// both the choice and the scale factor.
template <class S>
BasicTensor<S> augment_image(const BasicTensor<S>& image, const EncoderConfig& cfg,
                             std::mt19937& rng) {
    std::vector<Augment> options{Augment::kIdentity};
    if (cfg.aug_hflip) options.push_back(Augment::kHFlip);
    if (cfg.aug_rot90 && image.shape()[0] == image.shape()[1]) options.push_back(Augment::kRot90);
    if (cfg.aug_scale) options.push_back(Augment::kScale);
    std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
    switch (options[pick(rng)]) {
        case Augment::kIdentity: return image.detached();
        case Augment::kHFlip: return hflip_image(image);
        case Augment::kRot90: return rot90_image(image);
        case Augment::kScale: {
            std::uniform_real_distribution<double> jitter(0.9, 1.1);
            S f = S(jitter(rng));
            BasicTensor<S> out = image.detached();
            for (S& v : out.values()) v *= f;
            return out;
        }
    }
    return image.detached();
}

// ---------------------------------------------------------------------------
// Encoders
// ---------------------------------------------------------------------------

// Text branch: embedding lookup then a shared per-token MLP.
template <class S>
struct BasicTextEncoder {
    EncoderConfig cfg;
    BasicParam<S> embedding;  // [vocab, d]
    BasicMlp<S> token_mlp;    // d -> d -> d, shared across positions

    BasicTextEncoder() = default;

    BasicTextEncoder(const EncoderConfig& c, std::mt19937& rng)
        : cfg(c), token_mlp("text.token_mlp", c.d, c.d, c.d, rng) {
        embedding.name = "text.embedding";
        embedding.value = init::normal<S>(rng, {c.vocab, c.d}, 0.1);
    }

    // Pads/truncates to l_t; ids must be inside the vocab.
    BasicTensor<S> forward(BasicTape<S>* tape, const std::vector<int>& tokens) {
        std::vector<int> ids(static_cast<std::size_t>(cfg.l_t), cfg.pad_id);
        for (std::size_t i = 0; i < tokens.size() && i < ids.size(); ++i) {
            if (tokens[i] < 0 || tokens[i] >= cfg.vocab) {
                throw NumericDomainError("encode_text: token id " + std::to_string(tokens[i]) +
                                         " outside vocab of " + std::to_string(cfg.vocab));
            }
            ids[i] = tokens[i];
        }
        return token_mlp.forward(tape, gather_rows(embedding.use(tape), ids));
    }

    void collect(BasicParamRefs<S>& out) {
        out.push_back(&embedding);
        token_mlp.collect(out);
    }
};

// Image-semantics branch: non-overlapping patches are low-pass reduced
// (2x2 mean pooling, the semantic analogue of a downsampling front end),
// flattened, linearly embedded and passed through a shared MLP. The pooling
// makes this branch blind to pixel-level residues by construction; those
// belong to the pattern branch. Optional augmentation applies to the raw
// grid first.
template <class S>
struct BasicImageSemanticEncoder {
    EncoderConfig cfg;
    BasicLinear<S> patch_embed;  // [pooled_patch_dim, d]
    BasicMlp<S> patch_mlp;       // d -> d -> d

    BasicImageSemanticEncoder() = default;

    static int pool_extent(const EncoderConfig& c) {
        return (c.grid / c.patches_per_side()) % 2 == 0 ? 2 : 1;
    }

    static int patch_dim(const EncoderConfig& c) {
        const int ph = c.grid / c.patches_per_side() / pool_extent(c);
        return ph * ph;
    }

    BasicImageSemanticEncoder(const EncoderConfig& c, std::mt19937& rng)
        : cfg(c),
          patch_embed("is.patch_embed", patch_dim(c), c.d, rng),
          patch_mlp("is.patch_mlp", c.d, c.d, c.d, rng) {}

    BasicTensor<S> extract_patches(const BasicTensor<S>& image) const {
        const int h = image.shape()[0], w = image.shape()[1];
        const int pps = cfg.patches_per_side();
        if (h % pps != 0 || w % pps != 0) {
            throw ShapeError("encode_image_semantic: grid " + shape_str(image.shape()) +
                             " not divisible into " + std::to_string(cfg.l_is) + " patches");
        }
        const int ph = h / pps, pw = w / pps;
        const int pk = (ph % 2 == 0 && pw % 2 == 0) ? 2 : 1;
        const int oh = ph / pk, ow = pw / pk;
        const S norm = S(1) / S(pk * pk);
        std::vector<S> out(static_cast<std::size_t>(cfg.l_is) * oh * ow, S(0));
        int row = 0;
        for (int p = 0; p < pps; ++p)
            for (int q = 0; q < pps; ++q, ++row) {
                S* dst = out.data() + row * oh * ow;
                for (int y = 0; y < ph; ++y)
                    for (int x = 0; x < pw; ++x) {
                        dst[(y / pk) * ow + (x / pk)] +=
                            image.at(p * ph + y, q * pw + x) * norm;
                    }
            }
        return BasicTensor<S>({cfg.l_is, oh * ow}, std::move(out));
    }

    // `aug_rng` non-null enables one random augmentation (train time).
    BasicTensor<S> forward(BasicTape<S>* tape, const BasicTensor<S>& image,
                           std::mt19937* aug_rng = nullptr) {
        BasicTensor<S> img = aug_rng ? augment_image(image, cfg, *aug_rng) : image.detached();
        BasicTensor<S> patches = extract_patches(img);
        return patch_mlp.forward(tape, patch_embed.forward(tape, patches));
    }

    void collect(BasicParamRefs<S>& out) {
        patch_embed.collect(out);
        patch_mlp.collect(out);
    }
};

// Image-pattern branch: constrained residual conv, SiLU, global mean pool
// per channel, MLP to d_ip. The kernel is re-projected onto the constraint
// set before every forward pass.
template <class S>
struct BasicImagePatternEncoder {
    EncoderConfig cfg;
    BasicParam<S> kernels;  // [C, k, k]
    BasicMlp<S> head;       // C -> d_ip -> d_ip
    // Projection runs before every pass (projected-gradient training).
    // Curvature probes that treat the projected kernel as the free variable
    // switch it off.
    bool reproject = true;

    BasicImagePatternEncoder() = default;

    BasicImagePatternEncoder(const EncoderConfig& c, std::mt19937& rng)
        : cfg(c), head("ip.head", c.conv_channels, c.d_ip, c.d_ip, rng) {
        kernels.name = "ip.kernels";
        // Surround starts near uniform 1/(k^2-1) so the initial projection is benign.
        BasicTensor<S> init = init::normal<S>(rng, {c.conv_channels, c.kernel, c.kernel}, 0.05);
        for (S& v : init.values()) v += S(1.0 / (c.kernel * c.kernel - 1));
        kernels.value = constrain_kernel(std::move(init));
    }

    BasicTensor<S> forward(BasicTape<S>* tape, const BasicTensor<S>& image) {
        // Re-project before the pass. Within one tape the values are frozen
        // after the first attach so every sample of a batch shares the leaf.
        if (reproject && (!tape || !kernels.attached_to(*tape))) {
            kernels.set(constrain_kernel(kernels.value));
        }
        BasicTensor<S> k = kernels.use(tape);
        BasicTensor<S> resp = silu(conv2d_constrained(image, k));
        const int c = cfg.conv_channels;
        const int per = resp.size() / c;
        BasicTensor<S> pooled = mean_axis(reshape(resp, {c, per}), 1);
        return head.forward(tape, pooled);
    }

    void collect(BasicParamRefs<S>& out) {
        out.push_back(&kernels);
        head.collect(out);
    }
};

// Single linear + SiLU taking f_ip to the shared width; the IP module's
// refined representation (IP bypasses the expert network).
template <class S>
struct BasicIpProjection {
    BasicLinear<S> proj;

    BasicIpProjection() = default;

    BasicIpProjection(const EncoderConfig& c, std::mt19937& rng)
        : proj("ip.proj", c.d_ip, c.d, rng) {}

    BasicTensor<S> forward(BasicTape<S>* tape, const BasicTensor<S>& f_ip) {
        return silu(proj.forward(tape, f_ip));
    }

    void collect(BasicParamRefs<S>& out) { proj.collect(out); }
};

using TextEncoder = BasicTextEncoder<float>;
using ImageSemanticEncoder = BasicImageSemanticEncoder<float>;
using ImagePatternEncoder = BasicImagePatternEncoder<float>;
using IpProjection = BasicIpProjection<float>;

}  // namespace gamed
