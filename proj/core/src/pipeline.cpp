#include "gamed/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace gamed {

namespace {

// Per-head logit losses and predictions for one record, eval mode.
struct RecordEval {
    ForwardOutputs out;
    int y = 0;
    int c = 1;
};

double head_bce(double logit, int target) {
    const double o = logit;
    const double t = double(target);
    return std::max(o, 0.0) - o * t + std::log1p(std::exp(-std::abs(o)));
}

void append_module_rows(SplitEval& eval, const std::vector<RecordEval>& evals,
                        const AblationConfig& ab) {
    struct Slot {
        ModuleId id;
        const char* name;
    };
    static constexpr Slot kSlots[] = {{ModuleId::kIp, "ip"},
                                      {ModuleId::kIs, "is"},
                                      {ModuleId::kT, "t"},
                                      {ModuleId::kMm, "mm"}};
    for (const auto& slot : kSlots) {
        if (!ab.has(slot.id)) continue;
        double loss = 0.0;
        std::vector<int> preds, labels;
        preds.reserve(evals.size());
        labels.reserve(evals.size());
        for (const auto& re : evals) {
            const Tensor* o = nullptr;
            switch (slot.id) {
                case ModuleId::kIp: o = &re.out.o_ip; break;
                case ModuleId::kIs: o = &re.out.o_is; break;
                case ModuleId::kT: o = &re.out.o_t; break;
                case ModuleId::kMm: o = &re.out.o_mm; break;
            }
            const double logit = double(o->item());
            loss += head_bce(logit, re.y);
            preds.push_back(confidence(logit) > 0.5 ? 1 : 0);
            labels.push_back(re.y);
        }
        loss /= double(evals.size());
        eval.per_module.emplace_back(slot.name,
                                     std::make_pair(loss, compute_metrics(preds, labels)));
    }
}

}  // namespace

SplitEval evaluate_split(GamedModel& model, const std::vector<NewsRecord>& records,
                         double lambda_consistency) {
    if (records.empty()) throw DataError("evaluate: empty dataset");
    const bool use_veto = !model.cfg.ablation.disable_veto;
    std::vector<RecordEval> evals;
    evals.reserve(records.size());
    std::vector<int> preds, labels;
    preds.reserve(records.size());
    labels.reserve(records.size());
    double total_loss = 0.0;
    for (const auto& rec : records) {
        RecordEval re;
        re.out = forward(model, rec);
        re.y = rec.label;
        re.c = rec.consistency;
        Tensor loss = compute_loss(model, re.out, re.y, re.c, lambda_consistency);
        total_loss += double(loss.item());
        const int pred = use_veto ? re.out.vote.label
                                  : (confidence(double(re.out.o_mix.item())) > 0.5 ? 1 : 0);
        preds.push_back(pred);
        labels.push_back(re.y);
        evals.push_back(std::move(re));
    }
    SplitEval eval;
    eval.full_loss = total_loss / double(records.size());
    eval.full = compute_metrics(preds, labels);
    append_module_rows(eval, evals, model.cfg.ablation);
    return eval;
}

Metrics evaluate(GamedModel& model, const std::vector<NewsRecord>& records, bool use_veto) {
    if (records.empty()) throw DataError("evaluate: empty dataset");
    std::vector<int> preds, labels;
    preds.reserve(records.size());
    labels.reserve(records.size());
    for (const auto& rec : records) {
        ForwardOutputs out = forward(model, rec);
        const int pred =
            use_veto ? out.vote.label : (confidence(double(out.o_mix.item())) > 0.5 ? 1 : 0);
        preds.push_back(pred);
        labels.push_back(rec.label);
    }
    return compute_metrics(preds, labels);
}

TrainingLog train(GamedModel& model, const std::vector<NewsRecord>& train_set,
                  const std::vector<NewsRecord>& val_set, const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.empty()) throw DataError("train: empty dataset");

    AdamWOptions opts;
    opts.lr = cfg.lr;
    opts.weight_decay = cfg.weight_decay;
    AdamW optimizer(model.params(), opts);

    TrainingLog log;
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fixed shuffle per epoch, derived from seed and epoch.
        std::mt19937 shuffle_rng = make_rng(mix64(cfg.seed, static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch)) {
            const std::size_t stop = std::min(order.size(), start + std::size_t(cfg.batch));
            Tape tape;
            Tensor batch_loss;
            for (std::size_t k = start; k < stop; ++k) {
                const NewsRecord& rec = train_set[order[k]];
                std::mt19937 aug_rng = make_rng(
                    mix64(cfg.seed, static_cast<std::uint64_t>(epoch) + 0x415547, order[k]));
                ForwardOutputs out =
                    forward(model, rec, &tape, cfg.augment ? &aug_rng : nullptr);
                Tensor loss =
                    compute_loss(model, out, rec.label, rec.consistency, cfg.lambda_consistency);
                batch_loss = batch_loss.empty() ? loss : add(batch_loss, loss);
            }
            batch_loss = scale(batch_loss, 1.0f / float(stop - start));
            if (!std::isfinite(double(batch_loss.item()))) {
                throw DivergenceError("train: non-finite loss in epoch " + std::to_string(epoch));
            }
            Gradients grads = tape.backward(batch_loss);
            optimizer.step(grads, tape);
        }

        auto log_split = [&](const char* split, const std::vector<NewsRecord>& records) {
            if (records.empty()) return;
            SplitEval eval = evaluate_split(model, records, cfg.lambda_consistency);
            log.rows.push_back({epoch, split, "full", eval.full_loss, eval.full});
            for (const auto& [module, lm] : eval.per_module) {
                log.rows.push_back({epoch, split, module, lm.first, lm.second});
            }
        };
        log_split("train", train_set);
        log_split("val", val_set);
    }
    return log;
}

std::string metrics_csv(const TrainingLog& log) {
    std::ostringstream os;
    os << "epoch,split,module,loss,accuracy,precision,recall,f1\n";
    char buf[160];
    for (const auto& row : log.rows) {
        std::snprintf(buf, sizeof(buf), "%d,%s,%s,%.8g,%.8g,%.8g,%.8g,%.8g\n", row.epoch,
                      row.split.c_str(), row.module.c_str(), row.loss, row.metrics.accuracy,
                      row.metrics.precision, row.metrics.recall, row.metrics.f1);
        os << buf;
    }
    return os.str();
}

AblationVariant ablation_variant_from_token(const std::string& token) {
    AblationVariant v;
    v.name = token;
    if (token == "none" || token == "full") {
        v.name = "full";
        return v;
    }
    if (token == "no-adain") {
        v.ablation.disable_adain = true;
        return v;
    }
    if (token == "no-veto") {
        v.ablation.disable_veto = true;
        return v;
    }
    if (token == "no-coarse") {
        v.ablation.disable_coarse_constraint = true;
        return v;
    }
    if (token == "no-consistency") {
        v.ablation.disable_consistency = true;
        return v;
    }
    if (token == "classic-mmoe") {
        v.ablation.classic_mmoe_gating = true;
        return v;
    }
    if (token.rfind("subset=", 0) == 0) {
        std::vector<ModuleId> subset;
        std::string rest = token.substr(7);
        std::size_t pos = 0;
        while (pos <= rest.size()) {
            std::size_t plus = rest.find('+', pos);
            if (plus == std::string::npos) plus = rest.size();
            std::string part = rest.substr(pos, plus - pos);
            if (!part.empty()) subset.push_back(module_from_name(part));
            pos = plus + 1;
        }
        std::sort(subset.begin(), subset.end());
        subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
        v.ablation.module_subset = std::move(subset);
        v.ablation.validate();
        return v;
    }
    throw ConfigError("unknown ablation token '" + token + "'");
}

std::vector<AblationRow> run_ablation(const ModelConfig& base, const TrainConfig& tcfg,
                                      const GenSplits& data,
                                      const std::vector<AblationVariant>& variants,
                                      std::uint64_t model_seed) {
    std::vector<AblationRow> rows;
    for (const auto& variant : variants) {
        ModelConfig cfg = base;
        cfg.ablation = variant.ablation;
        GamedModel model(cfg, model_seed);
        train(model, data.train, data.val, tcfg);
        const bool use_veto = !cfg.ablation.disable_veto;
        rows.push_back({variant.name, evaluate(model, data.test, use_veto)});
    }
    return rows;
}

std::string ablation_csv(std::vector<AblationRow> rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const AblationRow& a, const AblationRow& b) {
        return a.test.accuracy > b.test.accuracy;
    });
    std::ostringstream os;
    os << "variant,accuracy,precision,recall,f1\n";
    char buf[160];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.8g,%.8g,%.8g,%.8g\n", row.variant.c_str(),
                      row.test.accuracy, row.test.precision, row.test.recall, row.test.f1);
        os << buf;
    }
    return os.str();
}

}  // namespace gamed
