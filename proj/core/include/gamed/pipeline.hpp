#pragma once

// Full-model assembly: encoders feed per-modality expert networks, coarse
// heads drive AdaIN adjustment, the adjusted concatenation goes through the
// mix expert network, and veto voting produces the final label.

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gamed/encoders.hpp"
#include "gamed/errors.hpp"
#include "gamed/metrics.hpp"
#include "gamed/moe.hpp"
#include "gamed/nn.hpp"
#include "gamed/optim.hpp"
#include "gamed/refine.hpp"
#include "gamed/rng.hpp"
#include "gamed/synthdata.hpp"
#include "gamed/tensor.hpp"
#include "gamed/veto.hpp"

namespace gamed {

struct AblationConfig {
    bool disable_adain = false;
    bool disable_veto = false;             // decide by the concatenated head alone
    bool disable_coarse_constraint = false;  // fixed style input s = 0.5
    bool disable_consistency = false;      // drop the consistency loss, e_x passes through
    bool classic_mmoe_gating = false;      // softmax gates + mean pooling
    std::vector<ModuleId> module_subset = {ModuleId::kIp, ModuleId::kIs, ModuleId::kT,
                                           ModuleId::kMm};

    bool has(ModuleId id) const {
        for (ModuleId m : module_subset)
            if (m == id) return true;
        return false;
    }

    void validate() const {
        if (module_subset.empty()) throw ConfigError("ablation.module_subset must be non-empty");
        int prev = -1;
        for (ModuleId m : module_subset) {
            if (static_cast<int>(m) <= prev) {
                throw ConfigError("ablation.module_subset must list ip, is, t, mm in order, once each");
            }
            prev = static_cast<int>(m);
        }
    }
};

struct ModelConfig {
    EncoderConfig enc;
    int n_experts = 4;
    int attn_hidden = 16;
    int style_hidden = 16;
    double theta_high = 0.9;
    double theta_low = 0.1;
    // Fusion input: refined task-1 vectors (default) or raw token features
    // summed before the fusion experts.
    bool fusion_raw_features = false;
    AblationConfig ablation;

    // Concatenation slots: one per active module plus the irrelevant branch
    // when the fusion module is active.
    int mix_slots() const {
        int slots = static_cast<int>(ablation.module_subset.size());
        if (ablation.has(ModuleId::kMm)) slots += 1;
        return slots;
    }

    void validate() const {
        enc.validate();
        if (n_experts <= 0) throw ConfigError("model.n_experts must be positive");
        if (attn_hidden <= 0) throw ConfigError("model.attn_hidden must be positive");
        if (style_hidden <= 0) throw ConfigError("model.style_hidden must be positive");
        if (!(theta_low > 0.0 && theta_low < theta_high && theta_high < 1.0)) {
            throw ConfigError("model.theta thresholds must satisfy 0 < theta_low < theta_high < 1");
        }
        if (fusion_raw_features && enc.l_t != enc.l_is) {
            throw ConfigError("model.fusion_raw_features requires encoder.l_t == encoder.l_is");
        }
        ablation.validate();
    }
};

template <class S>
struct BasicForwardOutputs {
    // Logits of the active heads; tensors stay empty for inactive modules.
    BasicTensor<S> o_ip, o_is, o_t, o_mm, o_cons, o_mix;
    BasicTensor<S> r_ip, r_is0, r_is1, r_t0, r_t1, r_mm0, r_mm1, r_mix;
    BasicTensor<S> e_ip, e_is, e_t, e_x, e_mm, e_mix;
    VoteResult vote;
};

template <class S>
struct BasicGamedModel {
    ModelConfig cfg;
    BasicTextEncoder<S> text_enc;
    BasicImageSemanticEncoder<S> is_enc;
    BasicImagePatternEncoder<S> ip_enc;
    BasicIpProjection<S> ip_proj;
    BasicMmoePro<S> moe_is, moe_t, moe_mm, moe_mix;
    BasicCoarseHead<S> head_ip, head_is, head_t, head_mm, head_mix, head_cons;
    BasicStyleNet<S> style_ip, style_is, style_t, style_x;

    BasicGamedModel(const ModelConfig& config, std::uint64_t seed) : cfg(config) {
        cfg.validate();
        std::mt19937 rng = make_rng(mix64(seed, fnv1a("model-init")));
        const int d = cfg.enc.d;
        text_enc = BasicTextEncoder<S>(cfg.enc, rng);
        is_enc = BasicImageSemanticEncoder<S>(cfg.enc, rng);
        ip_enc = BasicImagePatternEncoder<S>(cfg.enc, rng);
        ip_proj = BasicIpProjection<S>(cfg.enc, rng);
        moe_is = BasicMmoePro<S>("moe_is", d, d, cfg.n_experts, cfg.attn_hidden, rng);
        moe_t = BasicMmoePro<S>("moe_t", d, d, cfg.n_experts, cfg.attn_hidden, rng);
        moe_mm = BasicMmoePro<S>("moe_mm", d, d, cfg.n_experts, cfg.attn_hidden, rng);
        moe_mix = BasicMmoePro<S>("moe_mix", cfg.mix_slots() * d, d, cfg.n_experts,
                                  cfg.attn_hidden, rng);
        head_ip = BasicCoarseHead<S>("head_ip", d, rng);
        head_is = BasicCoarseHead<S>("head_is", d, rng);
        head_t = BasicCoarseHead<S>("head_t", d, rng);
        head_mm = BasicCoarseHead<S>("head_mm", d, rng);
        head_mix = BasicCoarseHead<S>("head_mix", d, rng);
        head_cons = BasicCoarseHead<S>("head_cons", d, rng);
        style_ip = BasicStyleNet<S>("style_ip", d, cfg.style_hidden, rng);
        style_is = BasicStyleNet<S>("style_is", d, cfg.style_hidden, rng);
        style_t = BasicStyleNet<S>("style_t", d, cfg.style_hidden, rng);
        style_x = BasicStyleNet<S>("style_x", d, cfg.style_hidden, rng);
        const bool classic = cfg.ablation.classic_mmoe_gating;
        moe_is.classic_mode = classic;
        moe_t.classic_mode = classic;
        moe_mm.classic_mode = classic;
        moe_mix.classic_mode = classic;
    }

    std::vector<std::pair<std::string, BasicParamRefs<S>>> param_groups() {
        std::vector<std::pair<std::string, BasicParamRefs<S>>> groups;
        auto grab = [&groups](const std::string& name, auto& component) {
            BasicParamRefs<S> refs;
            component.collect(refs);
            groups.emplace_back(name, std::move(refs));
        };
        grab("text_enc", text_enc);
        grab("is_enc", is_enc);
        grab("ip_enc", ip_enc);
        grab("ip_proj", ip_proj);
        grab("moe_is", moe_is);
        grab("moe_t", moe_t);
        grab("moe_mm", moe_mm);
        grab("moe_mix", moe_mix);
        grab("head_ip", head_ip);
        grab("head_is", head_is);
        grab("head_t", head_t);
        grab("head_mm", head_mm);
        grab("head_mix", head_mix);
        grab("head_cons", head_cons);
        grab("style_ip", style_ip);
        grab("style_is", style_is);
        grab("style_t", style_t);
        grab("style_x", style_x);
        return groups;
    }

    BasicParamRefs<S> params() {
        BasicParamRefs<S> all;
        for (auto& [name, refs] : param_groups()) {
            (void)name;
            all.insert(all.end(), refs.begin(), refs.end());
        }
        return all;
    }
};

template <class S>
BasicTensor<S> image_tensor(const NewsRecord& rec) {
    std::vector<S> vals(rec.image.size());
    for (std::size_t i = 0; i < rec.image.size(); ++i) vals[i] = S(rec.image[i]);
    return BasicTensor<S>({rec.height, rec.width}, std::move(vals));
}

// One end-to-end forward pass. `aug_rng` non-null enables train-time
// augmentation on the image-semantics branch.
template <class S>
BasicForwardOutputs<S> forward(BasicGamedModel<S>& model, const NewsRecord& rec,
                               BasicTape<S>* tape, std::mt19937* aug_rng = nullptr) {
    const ModelConfig& cfg = model.cfg;
    const AblationConfig& ab = cfg.ablation;
    BasicForwardOutputs<S> out;

    const bool want_ip = ab.has(ModuleId::kIp);
    const bool want_is = ab.has(ModuleId::kIs);
    const bool want_t = ab.has(ModuleId::kT);
    const bool want_mm = ab.has(ModuleId::kMm);
    const bool need_text = want_t || want_mm;
    const bool need_is = want_is || want_mm;

    BasicTensor<S> image = image_tensor<S>(rec);

    // Stage 1-2: extraction and expert review.
    BasicTensor<S> f_t, f_is;
    if (need_text) {
        f_t = model.text_enc.forward(tape, rec.tokens);
        if (want_t || !cfg.fusion_raw_features) {
            auto moe = model.moe_t.forward(tape, f_t);
            out.r_t0 = std::move(moe.r0);
            out.r_t1 = std::move(moe.r1);
        }
    }
    if (need_is) {
        f_is = model.is_enc.forward(tape, image, aug_rng);
        if (want_is || !cfg.fusion_raw_features) {
            auto moe = model.moe_is.forward(tape, f_is);
            out.r_is0 = std::move(moe.r0);
            out.r_is1 = std::move(moe.r1);
        }
    }
    if (want_ip) {
        out.r_ip = model.ip_proj.forward(tape, model.ip_enc.forward(tape, image));
    }

    // Stage 3: fusion. Default feeds the refined task-1 vectors; the raw
    // variant sums the token features instead.
    if (want_mm) {
        BasicTensor<S> f_mm =
            cfg.fusion_raw_features ? add(f_t, f_is) : add(out.r_is1, out.r_t1);
        auto moe = model.moe_mm.forward(tape, f_mm);
        out.r_mm0 = std::move(moe.r0);
        out.r_mm1 = std::move(moe.r1);
    }

    // Stage 4: coarse predictions and the consistency head.
    if (want_ip) out.o_ip = model.head_ip.forward(tape, out.r_ip);
    if (want_is) out.o_is = model.head_is.forward(tape, out.r_is0);
    if (want_t) out.o_t = model.head_t.forward(tape, out.r_t0);
    if (want_mm) {
        out.o_mm = model.head_mm.forward(tape, out.r_mm0);
        if (!ab.disable_consistency) out.o_cons = model.head_cons.forward(tape, out.r_mm0);
    }

    // Stage 5: distribution adjustment.
    auto adjust = [&](const BasicTensor<S>& r, const BasicTensor<S>& o, bool invert,
                      BasicStyleNet<S>& net) -> BasicTensor<S> {
        if (ab.disable_adain) return r;
        BasicStyleParams<S> style = ab.disable_coarse_constraint
                                        ? style_from_constant(tape, S(0.5), net)
                                        : style_from_output(tape, o, invert, net);
        return adain(r, style);
    };
    if (want_ip) out.e_ip = adjust(out.r_ip, out.o_ip, false, model.style_ip);
    if (want_is) out.e_is = adjust(out.r_is0, out.o_is, false, model.style_is);
    if (want_t) out.e_t = adjust(out.r_t0, out.o_t, false, model.style_t);
    if (want_mm) {
        out.e_x = ab.disable_consistency ? out.r_mm1
                                         : adjust(out.r_mm1, out.o_cons, true, model.style_x);
        out.e_mm = out.r_mm0;  // fusion exception: no adjustment
    }

    // Stage 6-7: concatenation and the mix expert network.
    std::vector<BasicTensor<S>> slots;
    if (want_ip) slots.push_back(out.e_ip);
    if (want_is) slots.push_back(out.e_is);
    if (want_t) slots.push_back(out.e_t);
    if (want_mm) {
        slots.push_back(out.e_x);
        slots.push_back(out.e_mm);
    }
    out.e_mix = concat(slots);
    out.r_mix = model.moe_mix.forward(tape, out.e_mix).r0;
    out.o_mix = model.head_mix.forward(tape, out.r_mix);

    // Stage 8: veto voting over the active module logits.
    VoteInput vote_in;
    if (want_ip) vote_in.module_logits.emplace_back(ModuleId::kIp, double(out.o_ip.item()));
    if (want_is) vote_in.module_logits.emplace_back(ModuleId::kIs, double(out.o_is.item()));
    if (want_t) vote_in.module_logits.emplace_back(ModuleId::kT, double(out.o_t.item()));
    if (want_mm) vote_in.module_logits.emplace_back(ModuleId::kMm, double(out.o_mm.item()));
    vote_in.mix_logit = double(out.o_mix.item());
    vote_in.theta_high = cfg.theta_high;
    vote_in.theta_low = cfg.theta_low;
    out.vote = veto_vote(vote_in);
    return out;
}

// Eval-mode pass: detached, no augmentation.
template <class S>
BasicForwardOutputs<S> forward(BasicGamedModel<S>& model, const NewsRecord& rec) {
    return forward(model, rec, static_cast<BasicTape<S>*>(nullptr), nullptr);
}

// Multi-head BCE: every active veracity head against y, plus
// lambda * BCE(o_cons, c) when consistency learning is on. The veto decision
// itself takes no gradient.
template <class S>
BasicTensor<S> compute_loss(const BasicGamedModel<S>& model, const BasicForwardOutputs<S>& out,
                            int y, int c, double lambda_consistency = 1.0) {
    if (y != 0 && y != 1) throw NumericDomainError("compute_loss: label must be 0 or 1");
    if (c != 0 && c != 1) throw NumericDomainError("compute_loss: consistency must be 0 or 1");
    const AblationConfig& ab = model.cfg.ablation;
    BasicTensor<S> loss = bce_with_logits(out.o_mix, double(y));
    if (ab.has(ModuleId::kIp)) loss = add(loss, bce_with_logits(out.o_ip, double(y)));
    if (ab.has(ModuleId::kIs)) loss = add(loss, bce_with_logits(out.o_is, double(y)));
    if (ab.has(ModuleId::kT)) loss = add(loss, bce_with_logits(out.o_t, double(y)));
    if (ab.has(ModuleId::kMm)) {
        loss = add(loss, bce_with_logits(out.o_mm, double(y)));
        if (!ab.disable_consistency && lambda_consistency != 0.0) {
            loss = add(loss, scale(bce_with_logits(out.o_cons, double(c)), S(lambda_consistency)));
        }
    }
    return loss;
}

using ForwardOutputs = BasicForwardOutputs<float>;
using GamedModel = BasicGamedModel<float>;

// ---------------------------------------------------------------------------
// Training and evaluation (32-bit product path)
// ---------------------------------------------------------------------------

struct TrainConfig {
    int epochs = 10;
    int batch = 32;
    double lr = 1e-4;
    double weight_decay = 0.01;
    double lambda_consistency = 1.0;
    std::uint64_t seed = 17;
    bool augment = true;

    void validate() const {
        if (epochs < 1) throw ConfigError("train.epochs must be at least 1");
        if (batch < 1) throw ConfigError("train.batch must be at least 1");
        if (lr < 0.0) throw ConfigError("train.lr must be non-negative");
        if (weight_decay < 0.0) throw ConfigError("train.weight_decay must be non-negative");
    }
};

struct EpochRow {
    int epoch = 0;
    std::string split;   // "train" or "val"
    std::string module;  // "full", "ip", "is", "t", "mm"
    double loss = 0.0;
    Metrics metrics;
};

struct TrainingLog {
    std::vector<EpochRow> rows;
};

// Per-split evaluation detail: veto-based full-model metrics plus one row
// per active module head.
struct SplitEval {
    double full_loss = 0.0;
    Metrics full;
    std::vector<std::pair<std::string, std::pair<double, Metrics>>> per_module;
};

TrainingLog train(GamedModel& model, const std::vector<NewsRecord>& train_set,
                  const std::vector<NewsRecord>& val_set, const TrainConfig& cfg);

Metrics evaluate(GamedModel& model, const std::vector<NewsRecord>& records, bool use_veto);

SplitEval evaluate_split(GamedModel& model, const std::vector<NewsRecord>& records,
                         double lambda_consistency);

std::string metrics_csv(const TrainingLog& log);

// ---------------------------------------------------------------------------
// Ablation harness
// ---------------------------------------------------------------------------

struct AblationVariant {
    std::string name;
    AblationConfig ablation;
};

struct AblationRow {
    std::string variant;
    Metrics test;
};

// Token forms: "none", "no-adain", "no-veto", "no-coarse", "no-consistency",
// "classic-mmoe", "subset=ip+is+t".
AblationVariant ablation_variant_from_token(const std::string& token);

std::vector<AblationRow> run_ablation(const ModelConfig& base, const TrainConfig& tcfg,
                                      const GenSplits& data,
                                      const std::vector<AblationVariant>& variants,
                                      std::uint64_t model_seed);

std::string ablation_csv(std::vector<AblationRow> rows);

}  // namespace gamed
