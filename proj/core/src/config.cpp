#include "gamed/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "gamed/errors.hpp"

namespace gamed {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                          (s.front() == '\'' && s.back() == '\''))) {
        return s.substr(1, s.size() - 2);
    }
    return s;
}

int to_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        int v = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an integer, got '" + value + "'");
    }
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
    }
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        unsigned long long v = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" +
                          value + "'");
    }
}

bool to_bool(const std::string& key, const std::string& value) {
    std::string v = value;
    std::transform(v.begin(), v.end(), v.begin(), ::tolower);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + value + "'");
}

std::vector<ModuleId> to_subset(const std::string& key, const std::string& value) {
    std::vector<ModuleId> subset;
    std::size_t pos = 0;
    while (pos <= value.size()) {
        std::size_t plus = value.find_first_of("+,", pos);
        if (plus == std::string::npos) plus = value.size();
        std::string part = trim(value.substr(pos, plus - pos));
        if (!part.empty()) {
            try {
                subset.push_back(module_from_name(part));
            } catch (const ConfigError&) {
                throw ConfigError("config key '" + key + "': unknown module '" + part + "'");
            }
        }
        pos = plus + 1;
    }
    std::sort(subset.begin(), subset.end());
    subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
    if (subset.empty()) throw ConfigError("config key '" + key + "': empty module subset");
    return subset;
}

}  // namespace

void RunConfig::finalize() {
    gen.seed = seed;
    train.seed = seed;
    model.enc.vocab = gen.vocab;
    model.enc.grid = gen.grid;
    gen.max_tokens = model.enc.l_t;
    gen.validate();
    model.validate();
    train.validate();
}

std::map<std::string, std::string> parse_kv_text(const std::string& text,
                                                 const std::string& origin) {
    std::map<std::string, std::string> entries;
    std::istringstream is(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = unquote(trim(line.substr(eq + 1)));
        if (key.empty()) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        }
        if (!section.empty()) key = section + "." + key;
        entries[key] = value;
    }
    return entries;
}

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream os;
    os << f.rdbuf();
    return parse_kv_text(os.str(), path);
}

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    // data generation
    if (key == "data.n_train") cfg.gen.n_train = to_int(key, value);
    else if (key == "data.n_val") cfg.gen.n_val = to_int(key, value);
    else if (key == "data.n_test") cfg.gen.n_test = to_int(key, value);
    else if (key == "data.balance") cfg.gen.balance = to_double(key, value);
    else if (key == "data.text_signal") cfg.gen.text_signal = to_double(key, value);
    else if (key == "data.pattern_signal") cfg.gen.pattern_signal = to_double(key, value);
    else if (key == "data.p_inconsistent_fake") cfg.gen.p_inconsistent_fake = to_double(key, value);
    else if (key == "data.p_inconsistent_real") cfg.gen.p_inconsistent_real = to_double(key, value);
    else if (key == "data.topics") cfg.gen.topics = to_int(key, value);
    else if (key == "data.vocab") cfg.gen.vocab = to_int(key, value);
    else if (key == "data.grid") cfg.gen.grid = to_int(key, value);
    // model
    else if (key == "model.d") cfg.model.enc.d = to_int(key, value);
    else if (key == "model.l_t") cfg.model.enc.l_t = to_int(key, value);
    else if (key == "model.l_is") cfg.model.enc.l_is = to_int(key, value);
    else if (key == "model.d_ip") cfg.model.enc.d_ip = to_int(key, value);
    else if (key == "model.kernel") cfg.model.enc.kernel = to_int(key, value);
    else if (key == "model.conv_channels") cfg.model.enc.conv_channels = to_int(key, value);
    else if (key == "model.pad_id") cfg.model.enc.pad_id = to_int(key, value);
    else if (key == "model.aug_hflip") cfg.model.enc.aug_hflip = to_bool(key, value);
    else if (key == "model.aug_rot90") cfg.model.enc.aug_rot90 = to_bool(key, value);
    else if (key == "model.aug_scale") cfg.model.enc.aug_scale = to_bool(key, value);
    else if (key == "model.n_experts") cfg.model.n_experts = to_int(key, value);
    else if (key == "model.attn_hidden") cfg.model.attn_hidden = to_int(key, value);
    else if (key == "model.style_hidden") cfg.model.style_hidden = to_int(key, value);
    else if (key == "model.theta_high") cfg.model.theta_high = to_double(key, value);
    else if (key == "model.theta_low") cfg.model.theta_low = to_double(key, value);
    else if (key == "model.fusion_raw_features") cfg.model.fusion_raw_features = to_bool(key, value);
    // training
    else if (key == "train.epochs") cfg.train.epochs = to_int(key, value);
    else if (key == "train.batch") cfg.train.batch = to_int(key, value);
    else if (key == "train.lr") cfg.train.lr = to_double(key, value);
    else if (key == "train.weight_decay") cfg.train.weight_decay = to_double(key, value);
    else if (key == "train.lambda_consistency") cfg.train.lambda_consistency = to_double(key, value);
    else if (key == "train.augment") cfg.train.augment = to_bool(key, value);
    // ablation
    else if (key == "ablation.disable_adain") cfg.model.ablation.disable_adain = to_bool(key, value);
    else if (key == "ablation.disable_veto") cfg.model.ablation.disable_veto = to_bool(key, value);
    else if (key == "ablation.disable_coarse_constraint")
        cfg.model.ablation.disable_coarse_constraint = to_bool(key, value);
    else if (key == "ablation.disable_consistency")
        cfg.model.ablation.disable_consistency = to_bool(key, value);
    else if (key == "ablation.classic_mmoe_gating")
        cfg.model.ablation.classic_mmoe_gating = to_bool(key, value);
    else if (key == "ablation.module_subset")
        cfg.model.ablation.module_subset = to_subset(key, value);
    // global
    else if (key == "seed") cfg.seed = to_u64(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
}

RunConfig run_config_from_entries(const std::map<std::string, std::string>& entries) {
    RunConfig cfg;
    for (const auto& [key, value] : entries) apply_config_entry(cfg, key, value);
    cfg.finalize();
    return cfg;
}

RunConfig run_config_from_file(const std::string& path) {
    return run_config_from_entries(parse_kv_file(path));
}

}  // namespace gamed
