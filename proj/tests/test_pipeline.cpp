#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "gamed/explain.hpp"
#include "gamed/pipeline.hpp"
#include "json.hpp"  // vendored nlohmann/json
#include "support/oracles.hpp"

using gamed::AblationConfig;
using gamed::GamedModel;
using gamed::GenSpec;
using gamed::Metrics;
using gamed::ModelConfig;
using gamed::ModuleId;
using gamed::NewsRecord;
using gamed::Tape;
using gamed::Tensor;
using gamed::TrainConfig;
using gamed::VetoRule;

namespace {

ModelConfig micro_cfg() {
    ModelConfig cfg;
    cfg.enc.d = 8;
    cfg.enc.l_t = 4;
    cfg.enc.l_is = 4;
    cfg.enc.vocab = 12;
    cfg.enc.grid = 8;
    cfg.enc.d_ip = 6;
    cfg.enc.kernel = 3;
    cfg.enc.conv_channels = 2;
    cfg.n_experts = 2;
    cfg.attn_hidden = 4;
    cfg.style_hidden = 4;
    return cfg;
}

GenSpec micro_gen(int n_train = 60) {
    GenSpec spec;
    spec.n_train = n_train;
    spec.n_val = 20;
    spec.n_test = 20;
    spec.topics = 2;
    spec.vocab = 12;
    spec.grid = 8;
    spec.max_tokens = 4;
    spec.text_signal = 0.5;
    spec.pattern_signal = 0.2;
    spec.seed = 3;
    return spec;
}

void zero_params(GamedModel& model) {
    for (auto* p : model.params()) p->set(Tensor::zeros(p->value.shape()));
}

bool group_has_nonzero_grad(gamed::ParamRefs& refs, gamed::Gradients& grads, const Tape& tape) {
    for (auto* p : refs) {
        const int node = p->node_on(tape);
        if (node < 0) continue;
        for (float g : grads.flat(node))
            if (g != 0.0f) return true;
    }
    return false;
}

bool group_attached(gamed::ParamRefs& refs, const Tape& tape) {
    for (auto* p : refs)
        if (p->node_on(tape) >= 0) return true;
    return false;
}

}  // namespace

TEST_CASE("zero parameters give the all-R4 fixed point") {
    GamedModel model(micro_cfg(), 1);
    zero_params(model);
    auto splits = gamed::generate(micro_gen());
    auto out = gamed::forward(model, splits.train[0]);
    CHECK(out.o_ip.item() == 0.0f);
    CHECK(out.o_is.item() == 0.0f);
    CHECK(out.o_t.item() == 0.0f);
    CHECK(out.o_mm.item() == 0.0f);
    CHECK(out.o_mix.item() == 0.0f);
    for (const auto& step : out.vote.trace.steps) {
        CHECK(step.p == doctest::Approx(0.5));
        CHECK(step.rule == VetoRule::kR4);
    }
    CHECK(out.vote.p_final == doctest::Approx(0.5));
    CHECK(out.vote.label == 0);  // 0.5 is not > 0.5
}

TEST_CASE("the zero fixed point loss is six bits of log two") {
    GamedModel model(micro_cfg(), 2);
    zero_params(model);
    auto splits = gamed::generate(micro_gen());
    auto out = gamed::forward(model, splits.train[0]);
    auto loss = gamed::compute_loss(model, out, 1, 1, 1.0);
    CHECK(double(loss.item()) == doctest::Approx(6.0 * std::log(2.0)).epsilon(1e-5));
}

TEST_CASE("loss equals the sum of independently computed head losses") {
    GamedModel model(micro_cfg(), 3);
    auto splits = gamed::generate(micro_gen());
    for (int i = 0; i < 10; ++i) {
        const auto& rec = splits.train[static_cast<std::size_t>(i)];
        auto out = gamed::forward(model, rec);
        auto loss = gamed::compute_loss(model, out, rec.label, rec.consistency, 0.7);
        auto bce = [](double o, double t) {
            return std::max(o, 0.0) - o * t + std::log1p(std::exp(-std::abs(o)));
        };
        double expect = bce(double(out.o_mix.item()), rec.label) +
                        bce(double(out.o_ip.item()), rec.label) +
                        bce(double(out.o_is.item()), rec.label) +
                        bce(double(out.o_t.item()), rec.label) +
                        bce(double(out.o_mm.item()), rec.label) +
                        0.7 * bce(double(out.o_cons.item()), rec.consistency);
        CHECK(double(loss.item()) == doctest::Approx(expect).epsilon(1e-5));
    }
}

TEST_CASE("a text-only subset ignores the image entirely") {
    auto cfg = micro_cfg();
    cfg.ablation.module_subset = {ModuleId::kT};
    GamedModel model(cfg, 4);
    auto splits = gamed::generate(micro_gen());
    NewsRecord a = splits.train[0];
    NewsRecord b = a;
    for (auto& v : b.image) v = 1.0f - v;  // different image, same text
    auto oa = gamed::forward(model, a);
    auto ob = gamed::forward(model, b);
    CHECK(oa.o_t.item() == ob.o_t.item());
    CHECK(oa.o_mix.item() == ob.o_mix.item());
    CHECK(oa.vote.label == ob.vote.label);
    CHECK(oa.vote.trace.steps.size() == 1);
    CHECK(oa.e_mix.size() == cfg.enc.d);
}

TEST_CASE("e_mix width follows the active slots") {
    auto splits = gamed::generate(micro_gen());
    {
        GamedModel model(micro_cfg(), 5);
        auto out = gamed::forward(model, splits.train[0]);
        CHECK(out.e_mix.size() == 5 * micro_cfg().enc.d);
    }
    {
        auto cfg = micro_cfg();
        cfg.ablation.module_subset = {ModuleId::kMm};
        GamedModel model(cfg, 5);
        auto out = gamed::forward(model, splits.train[0]);
        CHECK(out.e_mix.size() == 2 * cfg.enc.d);  // e_x and e_mm
    }
}

TEST_CASE("forward replays bit-identically for one seed") {
    auto splits = gamed::generate(micro_gen());
    GamedModel m1(micro_cfg(), 6);
    GamedModel m2(micro_cfg(), 6);
    auto a = gamed::forward(m1, splits.train[1]);
    auto b = gamed::forward(m2, splits.train[1]);
    CHECK(a.o_mix.values() == b.o_mix.values());
    CHECK(a.e_mix.values() == b.e_mix.values());
    CHECK(a.vote.p_final == b.vote.p_final);
}

TEST_CASE("the fusion branch passes r_mm0 through unchanged") {
    GamedModel model(micro_cfg(), 7);
    auto splits = gamed::generate(micro_gen());
    auto out = gamed::forward(model, splits.train[2]);
    CHECK(out.e_mm.values() == out.r_mm0.values());
}

TEST_CASE("forward matches the standalone adjustment composition") {
    GamedModel model(micro_cfg(), 8);
    auto splits = gamed::generate(micro_gen());
    auto out = gamed::forward(model, splits.train[3]);
    auto adj = gamed::adjust_all<float>(nullptr, out.r_ip, out.r_is0, out.r_t0, out.r_mm0,
                                        out.r_mm1, out.o_ip, out.o_is, out.o_t, out.o_cons,
                                        model.style_ip, model.style_is, model.style_t,
                                        model.style_x);
    CHECK(out.e_ip.values() == adj.e_ip.values());
    CHECK(out.e_is.values() == adj.e_is.values());
    CHECK(out.e_t.values() == adj.e_t.values());
    CHECK(out.e_x.values() == adj.e_x.values());
    CHECK(out.e_mm.values() == adj.e_mm.values());
}

TEST_CASE("disable_adain passes refined features through bit-equal") {
    auto cfg = micro_cfg();
    cfg.ablation.disable_adain = true;
    GamedModel model(cfg, 9);
    auto splits = gamed::generate(micro_gen());
    auto out = gamed::forward(model, splits.train[0]);
    CHECK(out.e_ip.values() == out.r_ip.values());
    CHECK(out.e_is.values() == out.r_is0.values());
    CHECK(out.e_t.values() == out.r_t0.values());
    CHECK(out.e_x.values() == out.r_mm1.values());
    CHECK(out.e_mm.values() == out.r_mm0.values());
}

TEST_CASE("every parameter group receives gradient on a random batch") {
    GamedModel model(micro_cfg(), 10);
    auto splits = gamed::generate(micro_gen());
    Tape tape;
    Tensor total;
    for (int i = 0; i < 6; ++i) {
        const auto& rec = splits.train[static_cast<std::size_t>(i)];
        auto out = gamed::forward(model, rec, &tape, nullptr);
        auto loss = gamed::compute_loss(model, out, rec.label, rec.consistency, 1.0);
        total = total.empty() ? loss : gamed::add(total, loss);
    }
    auto grads = tape.backward(total);
    for (auto& [name, refs] : model.param_groups()) {
        gamed::ParamRefs r = refs;
        INFO("group " << name);
        CHECK(group_has_nonzero_grad(r, grads, tape));
    }
}

TEST_CASE("disable_adain leaves the style nets out of the graph") {
    auto cfg = micro_cfg();
    cfg.ablation.disable_adain = true;
    GamedModel model(cfg, 11);
    auto splits = gamed::generate(micro_gen());
    Tape tape;
    auto out = gamed::forward(model, splits.train[0], &tape, nullptr);
    auto loss = gamed::compute_loss(model, out, 1, 1, 1.0);
    auto grads = tape.backward(loss);
    for (auto& [name, refs] : model.param_groups()) {
        gamed::ParamRefs r = refs;
        if (name.rfind("style_", 0) == 0) {
            INFO("group " << name);
            CHECK_FALSE(group_attached(r, tape));
        }
    }
}

TEST_CASE("a zero consistency weight removes the consistency loss term") {
    GamedModel model(micro_cfg(), 12);
    auto splits = gamed::generate(micro_gen());
    const auto& rec = splits.train[0];
    auto out = gamed::forward(model, rec);
    const double with = double(gamed::compute_loss(model, out, 1, 0, 1.0).item());
    const double without = double(gamed::compute_loss(model, out, 1, 0, 0.0).item());
    const double o = double(out.o_cons.item());
    const double cons_term = std::max(o, 0.0) + std::log1p(std::exp(-std::abs(o)));
    CHECK(with - without == doctest::Approx(cons_term).epsilon(1e-5));
}

TEST_CASE("the consistency head goes silent once both its routes are cut") {
    // With lambda = 0 the BCE term vanishes; o_cons still styles e_x, so the
    // head keeps a gradient route through the mix branch. Severing AdaIN as
    // well removes that route and the gradients drop to zero.
    auto cfg = micro_cfg();
    cfg.ablation.disable_adain = true;
    GamedModel model(cfg, 12);
    auto splits = gamed::generate(micro_gen());
    Tape tape;
    auto out = gamed::forward(model, splits.train[0], &tape, nullptr);
    auto loss = gamed::compute_loss(model, out, 1, 1, 0.0);
    auto grads = tape.backward(loss);
    for (auto& [name, refs] : model.param_groups()) {
        gamed::ParamRefs r = refs;
        if (name == "head_cons") {
            INFO("group " << name);
            CHECK_FALSE(group_has_nonzero_grad(r, grads, tape));
        }
    }

    // With AdaIN active the style route keeps the head trainable even at
    // lambda = 0.
    GamedModel full(micro_cfg(), 12);
    Tape tape2;
    auto out2 = gamed::forward(full, splits.train[0], &tape2, nullptr);
    auto loss2 = gamed::compute_loss(full, out2, 1, 1, 0.0);
    auto grads2 = tape2.backward(loss2);
    for (auto& [name, refs] : full.param_groups()) {
        gamed::ParamRefs r = refs;
        if (name == "head_cons") CHECK(group_has_nonzero_grad(r, grads2, tape2));
    }
}

TEST_CASE("metrics closed form and oracle agreement") {
    auto m = gamed::metrics_from_counts(3, 1, 5, 1);
    CHECK(m.precision == doctest::Approx(0.75));
    CHECK(m.recall == doctest::Approx(0.75));
    CHECK(m.f1 == doctest::Approx(0.75));
    CHECK(m.accuracy == doctest::Approx(0.8));

    std::mt19937 rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<int> pred(50), truth(50);
        for (auto& v : pred) v = int(rng() % 2);
        for (auto& v : truth) v = int(rng() % 2);
        auto got = gamed::compute_metrics(pred, truth);
        auto want = oracles::count_metrics(pred, truth);
        CHECK(got.tp == want.tp);
        CHECK(got.fp == want.fp);
        CHECK(got.tn == want.tn);
        CHECK(got.fn == want.fn);
        CHECK(got.accuracy == doctest::Approx(want.acc));
        CHECK(got.precision == doctest::Approx(want.precision));
        CHECK(got.recall == doctest::Approx(want.recall));
        CHECK(got.f1 == doctest::Approx(want.f1));
    }

    std::vector<int> same = {1, 0, 1, 1};
    auto perfect = gamed::compute_metrics(same, same);
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f1 == 1.0);

    CHECK_THROWS_AS(gamed::compute_metrics({}, {}), gamed::DataError);
}

TEST_CASE("evaluate agrees with a manual prediction loop") {
    GamedModel model(micro_cfg(), 14);
    auto splits = gamed::generate(micro_gen());
    auto metrics = gamed::evaluate(model, splits.test, true);
    std::vector<int> pred, truth;
    for (const auto& rec : splits.test) {
        pred.push_back(gamed::forward(model, rec).vote.label);
        truth.push_back(rec.label);
    }
    auto want = oracles::count_metrics(pred, truth);
    CHECK(metrics.tp == want.tp);
    CHECK(metrics.fp == want.fp);
    CHECK(metrics.tn == want.tn);
    CHECK(metrics.fn == want.fn);
}

TEST_CASE("a pinned high mix logit predicts fake everywhere without veto") {
    GamedModel model(micro_cfg(), 15);
    model.head_mix.classifier.weight.set(
        Tensor::zeros(model.head_mix.classifier.weight.value.shape()));
    model.head_mix.classifier.bias.set(Tensor({1}, {10.0f}));
    auto splits = gamed::generate(micro_gen());
    auto metrics = gamed::evaluate(model, splits.test, false);
    CHECK(metrics.tp + metrics.fp == metrics.total());  // everything predicted 1
    CHECK(metrics.fn == 0);
    CHECK(metrics.tn == 0);
}

TEST_CASE("training with zero learning rate is a no-op on parameters") {
    GamedModel model(micro_cfg(), 16);
    auto splits = gamed::generate(micro_gen(24));
    std::vector<std::vector<float>> before;
    for (auto* p : model.params()) before.push_back(p->value.values());
    TrainConfig tcfg;
    tcfg.epochs = 1;
    tcfg.batch = 8;
    tcfg.lr = 0.0;
    tcfg.weight_decay = 0.0;
    tcfg.seed = 1;
    gamed::train(model, splits.train, splits.val, tcfg);
    auto params = model.params();
    for (std::size_t i = 0; i < params.size(); ++i) CHECK(params[i]->value.values() == before[i]);
}

TEST_CASE("one epoch on planted data lowers the training loss") {
    GamedModel model(micro_cfg(), 17);
    auto splits = gamed::generate(micro_gen(120));
    const double loss0 = gamed::evaluate_split(model, splits.train, 1.0).full_loss;
    TrainConfig tcfg;
    tcfg.epochs = 1;
    tcfg.batch = 16;
    tcfg.lr = 2e-3;
    tcfg.seed = 2;
    auto log = gamed::train(model, splits.train, splits.val, tcfg);
    const double loss1 = gamed::evaluate_split(model, splits.train, 1.0).full_loss;
    INFO("loss " << loss0 << " -> " << loss1);
    CHECK(loss1 < loss0);
    CHECK(!log.rows.empty());
}

TEST_CASE("training is reproducible for one seed") {
    auto splits = gamed::generate(micro_gen(48));
    TrainConfig tcfg;
    tcfg.epochs = 2;
    tcfg.batch = 8;
    tcfg.lr = 1e-3;
    tcfg.seed = 9;

    GamedModel m1(micro_cfg(), 18);
    GamedModel m2(micro_cfg(), 18);
    auto l1 = gamed::train(m1, splits.train, splits.val, tcfg);
    auto l2 = gamed::train(m2, splits.train, splits.val, tcfg);
    CHECK(gamed::metrics_csv(l1) == gamed::metrics_csv(l2));

    auto p1 = m1.params();
    auto p2 = m2.params();
    for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i]->value.values() == p2[i]->value.values());
}

TEST_CASE("metrics csv carries the documented header and row grid") {
    GamedModel model(micro_cfg(), 19);
    auto splits = gamed::generate(micro_gen(24));
    TrainConfig tcfg;
    tcfg.epochs = 2;
    tcfg.batch = 8;
    tcfg.lr = 1e-3;
    tcfg.seed = 4;
    auto log = gamed::train(model, splits.train, splits.val, tcfg);
    // epochs x splits x (full + 4 modules)
    CHECK(log.rows.size() == 2u * 2u * 5u);
    auto csv = gamed::metrics_csv(log);
    CHECK(csv.rfind("epoch,split,module,loss,accuracy,precision,recall,f1\n", 0) == 0);
}

TEST_CASE("train rejects an empty dataset") {
    GamedModel model(micro_cfg(), 20);
    TrainConfig tcfg;
    CHECK_THROWS_AS(gamed::train(model, {}, {}, tcfg), gamed::DataError);
    CHECK_THROWS_AS(gamed::evaluate(model, {}, true), gamed::DataError);
}

TEST_CASE("ablation tokens parse into the documented variants") {
    CHECK(gamed::ablation_variant_from_token("none").name == "full");
    CHECK(gamed::ablation_variant_from_token("no-adain").ablation.disable_adain);
    CHECK(gamed::ablation_variant_from_token("no-veto").ablation.disable_veto);
    CHECK(gamed::ablation_variant_from_token("no-coarse").ablation.disable_coarse_constraint);
    CHECK(gamed::ablation_variant_from_token("no-consistency").ablation.disable_consistency);
    CHECK(gamed::ablation_variant_from_token("classic-mmoe").ablation.classic_mmoe_gating);
    auto subset = gamed::ablation_variant_from_token("subset=mm");
    CHECK(subset.ablation.module_subset == std::vector<ModuleId>{ModuleId::kMm});
    auto multi = gamed::ablation_variant_from_token("subset=ip+t");
    CHECK(multi.ablation.module_subset == (std::vector<ModuleId>{ModuleId::kIp, ModuleId::kT}));
    CHECK_THROWS_AS(gamed::ablation_variant_from_token("bogus"), gamed::ConfigError);
}

TEST_CASE("the no-op ablation reproduces the direct run") {
    auto splits = gamed::generate(micro_gen(48));
    TrainConfig tcfg;
    tcfg.epochs = 1;
    tcfg.batch = 8;
    tcfg.lr = 1e-3;
    tcfg.seed = 5;

    auto rows = gamed::run_ablation(micro_cfg(), tcfg, splits,
                                    {gamed::ablation_variant_from_token("none"),
                                     gamed::ablation_variant_from_token("subset=mm")},
                                    21);
    REQUIRE(rows.size() == 2);

    GamedModel direct(micro_cfg(), 21);
    gamed::train(direct, splits.train, splits.val, tcfg);
    auto want = gamed::evaluate(direct, splits.test, true);
    CHECK(rows[0].test.accuracy == want.accuracy);
    CHECK(rows[0].test.f1 == want.f1);

    // The csv is sorted by accuracy and carries both variants.
    auto csv = gamed::ablation_csv(rows);
    CHECK(csv.find("full") != std::string::npos);
    CHECK(csv.find("subset=mm") != std::string::npos);
}

TEST_CASE("disabling veto only moves records where veto overrode the mix head") {
    GamedModel model(micro_cfg(), 24);
    auto splits = gamed::generate(micro_gen());

    // Per-record decisions for both modes, recomputed independently.
    std::vector<int> veto_pred, mix_pred, labels;
    for (const auto& rec : splits.test) {
        auto out = gamed::forward(model, rec);
        veto_pred.push_back(out.vote.label);
        mix_pred.push_back(gamed::confidence(double(out.o_mix.item())) > 0.5 ? 1 : 0);
        labels.push_back(rec.label);
    }
    auto veto_manual = gamed::compute_metrics(veto_pred, labels);
    auto mix_manual = gamed::compute_metrics(mix_pred, labels);

    auto veto_m = gamed::evaluate(model, splits.test, true);
    auto mix_m = gamed::evaluate(model, splits.test, false);
    CHECK(veto_m.tp == veto_manual.tp);
    CHECK(veto_m.fp == veto_manual.fp);
    CHECK(mix_m.tp == mix_manual.tp);
    CHECK(mix_m.fp == mix_manual.fp);

    // So the two modes can differ only on records where the veto overrode
    // the concatenated decision.
    long overrides = 0;
    for (std::size_t i = 0; i < veto_pred.size(); ++i)
        if (veto_pred[i] != mix_pred[i]) ++overrides;
    const long flipped = std::abs((veto_m.tp + veto_m.fp) - (mix_m.tp + mix_m.fp));
    CHECK(flipped <= overrides);
}

TEST_CASE("a boosted text head fires rule 2 in the explain trace") {
    GamedModel model(micro_cfg(), 25);
    // Pin the text head to a confident logit while the rest stays near zero.
    model.head_t.classifier.weight.set(
        Tensor::zeros(model.head_t.classifier.weight.value.shape()));
    model.head_t.classifier.bias.set(Tensor({1}, {5.0f}));
    auto splits = gamed::generate(micro_gen());
    auto res = gamed::explain_record(model, splits.test[0]);
    auto doc = nlohmann::json::parse(res.trace_json);
    REQUIRE(doc["steps"].size() == 4);
    CHECK(doc["steps"][2]["module"].get<std::string>() == "t");
    CHECK(doc["steps"][2]["rule"].get<std::string>() == "R2");
    CHECK(doc["steps"][2]["p"].get<double>() > 0.9);
    bool has_r2_line = false;
    for (const auto& line : res.summary) {
        if (line.find("(R2)") != std::string::npos && line.find("module t") != std::string::npos) {
            has_r2_line = true;
        }
    }
    CHECK(has_r2_line);
}

TEST_CASE("classic gating changes the forward pass") {
    auto splits = gamed::generate(micro_gen());
    auto cfg = micro_cfg();
    GamedModel plain(cfg, 22);
    cfg.ablation.classic_mmoe_gating = true;
    GamedModel classic(cfg, 22);
    auto a = gamed::forward(plain, splits.train[0]);
    auto b = gamed::forward(classic, splits.train[0]);
    CHECK(a.o_mix.item() != b.o_mix.item());
}

TEST_CASE("raw-feature fusion is available behind the config switch") {
    auto splits = gamed::generate(micro_gen());
    auto cfg = micro_cfg();
    cfg.fusion_raw_features = true;
    GamedModel model(cfg, 23);
    auto out = gamed::forward(model, splits.train[0]);
    CHECK(out.o_mm.item() != 0.0f);

    GamedModel prose(micro_cfg(), 23);
    auto out2 = gamed::forward(prose, splits.train[0]);
    CHECK(out.o_mm.item() != out2.o_mm.item());
}
