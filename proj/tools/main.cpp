// gamed: synthetic-data generation, training, evaluation, ablation sweeps
// and decision-trace explanations for the modality-decoupled detector.
//
// Exit codes: 0 ok, 1 unexpected, 2 config, 3 data, 4 numeric divergence,
// 5 model-version mismatch, 6 failed lookup.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gamed/config.hpp"
#include "gamed/errors.hpp"
#include "gamed/explain.hpp"
#include "gamed/pipeline.hpp"
#include "gamed/serialize.hpp"
#include "gamed/synthdata.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw gamed::DataError("cannot open " + path + " for writing");
    f << text;
    if (!f) throw gamed::DataError("write failed for " + path);
}

gamed::RunConfig load_config(const std::optional<std::string>& path,
                             const std::vector<std::string>& sets,
                             const std::optional<std::uint64_t>& seed) {
    gamed::RunConfig cfg;
    if (path) {
        for (const auto& [k, v] : gamed::parse_kv_file(*path)) gamed::apply_config_entry(cfg, k, v);
    }
    for (const auto& kv : sets) {  // flags win over the file
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw gamed::ConfigError("--set expects key=value, got '" + kv + "'");
        }
        gamed::apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) cfg.seed = *seed;
    cfg.finalize();
    return cfg;
}

std::string split_path(const std::string& dir, const char* name) {
    const fs::path plain = fs::path(dir) / (std::string(name) + ".jsonl");
    const fs::path gz = fs::path(dir) / (std::string(name) + ".jsonl.gz");
    if (fs::exists(plain)) return plain.string();
    if (fs::exists(gz)) return gz.string();
    throw gamed::DataError("data dir '" + dir + "' is missing the " + name + " split");
}

gamed::GenSplits load_splits(const std::string& dir) {
    gamed::GenSplits splits;
    splits.train = gamed::read_jsonl(split_path(dir, "train"));
    splits.val = gamed::read_jsonl(split_path(dir, "val"));
    splits.test = gamed::read_jsonl(split_path(dir, "test"));
    return splits;
}

json metrics_json(const gamed::Metrics& m) {
    return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall},
            {"f1", m.f1},             {"tp", m.tp},               {"fp", m.fp},
            {"tn", m.tn},             {"fn", m.fn}};
}

int cmd_gen_data(const std::string& spec_path, const std::string& out_dir,
                 const std::optional<std::uint64_t>& seed, const std::vector<std::string>& sets) {
    gamed::RunConfig cfg = load_config(spec_path, sets, seed);
    fs::create_directories(out_dir);
    auto splits = gamed::generate(cfg.gen);
    gamed::write_jsonl(splits.train, (fs::path(out_dir) / "train.jsonl").string());
    gamed::write_jsonl(splits.val, (fs::path(out_dir) / "val.jsonl").string());
    gamed::write_jsonl(splits.test, (fs::path(out_dir) / "test.jsonl").string());

    json manifest;
    manifest["seed"] = cfg.seed;
    manifest["spec"] = {{"n_train", cfg.gen.n_train},
                        {"n_val", cfg.gen.n_val},
                        {"n_test", cfg.gen.n_test},
                        {"balance", cfg.gen.balance},
                        {"text_signal", cfg.gen.text_signal},
                        {"pattern_signal", cfg.gen.pattern_signal},
                        {"p_inconsistent_fake", cfg.gen.p_inconsistent_fake},
                        {"p_inconsistent_real", cfg.gen.p_inconsistent_real},
                        {"topics", cfg.gen.topics},
                        {"vocab", cfg.gen.vocab},
                        {"grid", cfg.gen.grid},
                        {"max_tokens", cfg.gen.max_tokens}};
    manifest["counts"] = {{"train", splits.train.size()},
                          {"val", splits.val.size()},
                          {"test", splits.test.size()}};
    write_file((fs::path(out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
    std::cout << "wrote " << splits.train.size() + splits.val.size() + splits.test.size()
              << " records to " << out_dir << "\n";
    return 0;
}

int cmd_train(const std::optional<std::string>& config_path, const std::string& data_dir,
              const std::string& out_dir, const std::optional<std::uint64_t>& seed,
              const std::vector<std::string>& sets) {
    gamed::RunConfig cfg = load_config(config_path, sets, seed);
    auto splits = load_splits(data_dir);
    fs::create_directories(out_dir);

    const auto t0 = std::chrono::steady_clock::now();
    gamed::GamedModel model(cfg.model, cfg.seed);
    auto log = gamed::train(model, splits.train, splits.val, cfg.train);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    write_file((fs::path(out_dir) / "metrics.csv").string(), gamed::metrics_csv(log));
    gamed::save_model((fs::path(out_dir) / "model.bin").string(), model);

    const bool use_veto = !cfg.model.ablation.disable_veto;
    auto val = gamed::evaluate(model, splits.val, use_veto);
    auto test = gamed::evaluate(model, splits.test, use_veto);

    json run;
    run["seed"] = cfg.seed;
    run["epochs"] = cfg.train.epochs;
    run["batch"] = cfg.train.batch;
    run["lr"] = cfg.train.lr;
    run["use_veto"] = use_veto;
    run["train_seconds"] = seconds;
    run["val"] = metrics_json(val);
    run["test"] = metrics_json(test);
    write_file((fs::path(out_dir) / "run.json").string(), run.dump(2) + "\n");

    std::printf("val  acc=%.4f p=%.4f r=%.4f f1=%.4f\n", val.accuracy, val.precision, val.recall,
                val.f1);
    std::printf("test acc=%.4f p=%.4f r=%.4f f1=%.4f\n", test.accuracy, test.precision,
                test.recall, test.f1);
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_path, bool no_veto,
             const std::string& out_path) {
    gamed::GamedModel model = gamed::load_model(model_path);
    auto records = gamed::read_jsonl(data_path);
    const bool use_veto = !no_veto && !model.cfg.ablation.disable_veto;
    auto metrics = gamed::evaluate(model, records, use_veto);
    write_file(out_path, gamed::eval_json(metrics, use_veto, model_path, data_path));
    std::printf("acc=%.4f p=%.4f r=%.4f f1=%.4f (n=%lld)\n", metrics.accuracy, metrics.precision,
                metrics.recall, metrics.f1, static_cast<long long>(metrics.total()));
    return 0;
}

int cmd_explain(const std::string& model_path, const std::string& data_path,
                const std::string& id, const std::string& out_path) {
    gamed::GamedModel model = gamed::load_model(model_path);
    auto records = gamed::read_jsonl(data_path);
    const gamed::NewsRecord* hit = nullptr;
    for (const auto& rec : records) {
        if (rec.id == id) {
            hit = &rec;
            break;
        }
    }
    if (!hit) throw gamed::LookupError("record id '" + id + "' not found in " + data_path);
    auto res = gamed::explain_record(model, *hit);
    write_file(out_path, res.trace_json);
    for (const auto& line : res.summary) std::cout << line << "\n";
    return 0;
}

int cmd_ablate(const std::optional<std::string>& config_path, const std::string& data_dir,
               const std::string& grid, const std::string& out_dir,
               const std::optional<std::uint64_t>& seed, const std::vector<std::string>& sets) {
    gamed::RunConfig cfg = load_config(config_path, sets, seed);
    auto splits = load_splits(data_dir);
    fs::create_directories(out_dir);

    std::vector<gamed::AblationVariant> variants;
    std::size_t pos = 0;
    while (pos <= grid.size()) {
        std::size_t comma = grid.find(',', pos);
        if (comma == std::string::npos) comma = grid.size();
        std::string token = grid.substr(pos, comma - pos);
        if (!token.empty()) variants.push_back(gamed::ablation_variant_from_token(token));
        pos = comma + 1;
    }
    if (variants.empty()) throw gamed::ConfigError("--grid lists no ablation variants");

    auto rows = gamed::run_ablation(cfg.model, cfg.train, splits, variants, cfg.seed);
    const std::string csv = gamed::ablation_csv(rows);
    write_file((fs::path(out_dir) / "ablation.csv").string(), csv);
    std::cout << csv;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gamed: modality-decoupled fake-news detection on synthetic data"};
    app.require_subcommand(1);

    std::optional<std::string> config_path;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
    std::string spec_path, out_dir, data_dir, data_path, model_path, record_id;
    std::string eval_out = "eval.json";
    std::string trace_out = "trace.json";
    std::string grid = "none";
    bool no_veto = false;

    auto* gen = app.add_subcommand("gen-data", "generate synthetic train/val/test splits");
    gen->add_option("--spec", spec_path, "generation spec file")->required();
    gen->add_option("--out", out_dir, "output directory")->required();
    gen->add_option("--seed", seed, "seed override");
    gen->add_option("--set", sets, "override spec entries (key=value)");

    auto* train = app.add_subcommand("train", "train a model on generated splits");
    train->add_option("--config", config_path, "run config file");
    train->add_option("--data", data_dir, "directory holding train/val/test.jsonl")->required();
    train->add_option("--out", out_dir, "output directory")->required();
    train->add_option("--seed", seed, "seed override");
    train->add_option("--set", sets, "override config entries (key=value)");

    auto* eval = app.add_subcommand("eval", "evaluate a trained model on one split");
    eval->add_option("--model", model_path, "model.bin path")->required();
    eval->add_option("--data", data_path, "jsonl split to evaluate")->required();
    eval->add_option("--out", eval_out, "eval.json output path");
    eval->add_flag("--no-veto", no_veto, "decide by the concatenated head only");

    auto* explain = app.add_subcommand("explain", "emit the veto decision trace for one record");
    explain->add_option("--model", model_path, "model.bin path")->required();
    explain->add_option("--data", data_path, "jsonl split holding the record")->required();
    explain->add_option("--id", record_id, "record id")->required();
    explain->add_option("--out", trace_out, "trace JSON output path");

    auto* ablate = app.add_subcommand("ablate", "train and evaluate ablation variants");
    ablate->add_option("--config", config_path, "run config file");
    ablate->add_option("--data", data_dir, "directory holding train/val/test.jsonl")->required();
    ablate->add_option("--grid", grid, "comma-separated variant tokens");
    ablate->add_option("--out", out_dir, "output directory")->required();
    ablate->add_option("--seed", seed, "seed override");
    ablate->add_option("--set", sets, "override config entries (key=value)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // bad flags and missing options are config errors
    }

    try {
        if (gen->parsed()) return cmd_gen_data(spec_path, out_dir, seed, sets);
        if (train->parsed()) return cmd_train(config_path, data_dir, out_dir, seed, sets);
        if (eval->parsed()) return cmd_eval(model_path, data_path, no_veto, eval_out);
        if (explain->parsed()) return cmd_explain(model_path, data_path, record_id, trace_out);
        if (ablate->parsed()) return cmd_ablate(config_path, data_dir, grid, out_dir, seed, sets);
    } catch (const gamed::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const gamed::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const gamed::DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return 4;
    } catch (const gamed::VersionError& e) {
        std::cerr << "version error: " << e.what() << "\n";
        return 5;
    } catch (const gamed::LookupError& e) {
        std::cerr << "lookup error: " << e.what() << "\n";
        return 6;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
