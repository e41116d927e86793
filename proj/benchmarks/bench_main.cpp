#include <benchmark/benchmark.h>

#include <random>

#include "gamed/pipeline.hpp"
#include "gamed/rng.hpp"

namespace {

gamed::Tensor random_tensor(std::mt19937& rng, std::vector<int> shape) {
    std::uniform_real_distribution<float> dist(-1.f, 1.f);
    std::vector<float> vals(static_cast<std::size_t>(gamed::shape_numel(shape)));
    for (auto& v : vals) v = dist(rng);
    return gamed::Tensor(std::move(shape), std::move(vals));
}

void BM_Matmul64(benchmark::State& state) {
    std::mt19937 rng(1);
    auto a = random_tensor(rng, {64, 64});
    auto b = random_tensor(rng, {64, 64});
    for (auto _ : state) {
        auto c = gamed::matmul(a, b);
        benchmark::DoNotOptimize(c.values().data());
    }
}
BENCHMARK(BM_Matmul64);

void BM_ConstrainedConv32(benchmark::State& state) {
    std::mt19937 rng(2);
    auto img = random_tensor(rng, {32, 32});
    auto kernels = gamed::constrain_kernel(random_tensor(rng, {4, 3, 3}));
    for (auto _ : state) {
        auto r = gamed::conv2d_constrained(img, kernels);
        benchmark::DoNotOptimize(r.values().data());
    }
}
BENCHMARK(BM_ConstrainedConv32);

void BM_VetoVote(benchmark::State& state) {
    gamed::VoteInput in;
    in.module_logits = {{gamed::ModuleId::kIp, 0.3},
                        {gamed::ModuleId::kIs, -0.2},
                        {gamed::ModuleId::kT, 2.5},
                        {gamed::ModuleId::kMm, -0.1}};
    in.mix_logit = 0.4;
    for (auto _ : state) {
        auto res = gamed::veto_vote(in);
        benchmark::DoNotOptimize(&res);
    }
}
BENCHMARK(BM_VetoVote);

gamed::NewsRecord sample_record() {
    gamed::GenSpec spec;
    spec.n_train = 1;
    spec.n_val = 1;
    spec.n_test = 1;
    return gamed::generate(spec).train[0];
}

void BM_ForwardEval(benchmark::State& state) {
    gamed::ModelConfig cfg;
    gamed::GamedModel model(cfg, 7);
    auto rec = sample_record();
    for (auto _ : state) {
        auto out = gamed::forward(model, rec);
        benchmark::DoNotOptimize(&out);
    }
}
BENCHMARK(BM_ForwardEval);

void BM_TrainStep(benchmark::State& state) {
    gamed::ModelConfig cfg;
    gamed::GamedModel model(cfg, 8);
    auto rec = sample_record();
    gamed::AdamW optimizer(model.params(), {});
    for (auto _ : state) {
        gamed::Tape tape;
        auto out = gamed::forward(model, rec, &tape, nullptr);
        auto loss = gamed::compute_loss(model, out, rec.label, rec.consistency, 1.0);
        auto grads = tape.backward(loss);
        optimizer.step(grads, tape);
        benchmark::DoNotOptimize(&grads);
    }
}
BENCHMARK(BM_TrainStep);

}  // namespace

BENCHMARK_MAIN();
