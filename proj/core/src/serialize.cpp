#include "gamed/serialize.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "gamed/rng.hpp"

namespace gamed {

namespace {

constexpr char kMagic[4] = {'G', 'A', 'M', 'D'};

std::string subset_text(const std::vector<ModuleId>& subset) {
    std::string out;
    for (ModuleId m : subset) {
        if (!out.empty()) out += '+';
        out += module_name(m);
    }
    return out;
}

std::vector<ModuleId> subset_from_text(const std::string& text) {
    std::vector<ModuleId> subset;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t plus = text.find('+', pos);
        if (plus == std::string::npos) plus = text.size();
        std::string part = text.substr(pos, plus - pos);
        if (!part.empty()) subset.push_back(module_from_name(part));
        pos = plus + 1;
    }
    return subset;
}

template <class T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw VersionError("model file truncated");
    return v;
}

void put_string(std::ostream& os, const std::string& s) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
    const auto len = get<std::uint32_t>(is);
    std::string s(len, '\0');
    is.read(s.data(), static_cast<std::streamsize>(len));
    if (!is) throw VersionError("model file truncated");
    return s;
}

}  // namespace

std::string model_config_text(const ModelConfig& cfg) {
    std::ostringstream os;
    os << "ablation.classic_mmoe_gating = " << int(cfg.ablation.classic_mmoe_gating) << '\n'
       << "ablation.disable_adain = " << int(cfg.ablation.disable_adain) << '\n'
       << "ablation.disable_coarse_constraint = " << int(cfg.ablation.disable_coarse_constraint)
       << '\n'
       << "ablation.disable_consistency = " << int(cfg.ablation.disable_consistency) << '\n'
       << "ablation.disable_veto = " << int(cfg.ablation.disable_veto) << '\n'
       << "ablation.module_subset = " << subset_text(cfg.ablation.module_subset) << '\n'
       << "enc.aug_hflip = " << int(cfg.enc.aug_hflip) << '\n'
       << "enc.aug_rot90 = " << int(cfg.enc.aug_rot90) << '\n'
       << "enc.aug_scale = " << int(cfg.enc.aug_scale) << '\n'
       << "enc.conv_channels = " << cfg.enc.conv_channels << '\n'
       << "enc.d = " << cfg.enc.d << '\n'
       << "enc.d_ip = " << cfg.enc.d_ip << '\n'
       << "enc.grid = " << cfg.enc.grid << '\n'
       << "enc.kernel = " << cfg.enc.kernel << '\n'
       << "enc.l_is = " << cfg.enc.l_is << '\n'
       << "enc.l_t = " << cfg.enc.l_t << '\n'
       << "enc.pad_id = " << cfg.enc.pad_id << '\n'
       << "enc.vocab = " << cfg.enc.vocab << '\n'
       << "model.attn_hidden = " << cfg.attn_hidden << '\n'
       << "model.fusion_raw_features = " << int(cfg.fusion_raw_features) << '\n'
       << "model.n_experts = " << cfg.n_experts << '\n'
       << "model.style_hidden = " << cfg.style_hidden << '\n'
       << "model.theta_high = " << cfg.theta_high << '\n'
       << "model.theta_low = " << cfg.theta_low << '\n';
    return os.str();
}

ModelConfig model_config_from_text(const std::string& text) {
    ModelConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) {
            throw VersionError("model config text line " + std::to_string(lineno) + " malformed");
        }
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 3);
        try {
            if (key == "ablation.classic_mmoe_gating") cfg.ablation.classic_mmoe_gating = std::stoi(value);
            else if (key == "ablation.disable_adain") cfg.ablation.disable_adain = std::stoi(value);
            else if (key == "ablation.disable_coarse_constraint") cfg.ablation.disable_coarse_constraint = std::stoi(value);
            else if (key == "ablation.disable_consistency") cfg.ablation.disable_consistency = std::stoi(value);
            else if (key == "ablation.disable_veto") cfg.ablation.disable_veto = std::stoi(value);
            else if (key == "ablation.module_subset") cfg.ablation.module_subset = subset_from_text(value);
            else if (key == "enc.aug_hflip") cfg.enc.aug_hflip = std::stoi(value);
            else if (key == "enc.aug_rot90") cfg.enc.aug_rot90 = std::stoi(value);
            else if (key == "enc.aug_scale") cfg.enc.aug_scale = std::stoi(value);
            else if (key == "enc.conv_channels") cfg.enc.conv_channels = std::stoi(value);
            else if (key == "enc.d") cfg.enc.d = std::stoi(value);
            else if (key == "enc.d_ip") cfg.enc.d_ip = std::stoi(value);
            else if (key == "enc.grid") cfg.enc.grid = std::stoi(value);
            else if (key == "enc.kernel") cfg.enc.kernel = std::stoi(value);
            else if (key == "enc.l_is") cfg.enc.l_is = std::stoi(value);
            else if (key == "enc.l_t") cfg.enc.l_t = std::stoi(value);
            else if (key == "enc.pad_id") cfg.enc.pad_id = std::stoi(value);
            else if (key == "enc.vocab") cfg.enc.vocab = std::stoi(value);
            else if (key == "model.attn_hidden") cfg.attn_hidden = std::stoi(value);
            else if (key == "model.fusion_raw_features") cfg.fusion_raw_features = std::stoi(value);
            else if (key == "model.n_experts") cfg.n_experts = std::stoi(value);
            else if (key == "model.style_hidden") cfg.style_hidden = std::stoi(value);
            else if (key == "model.theta_high") cfg.theta_high = std::stod(value);
            else if (key == "model.theta_low") cfg.theta_low = std::stod(value);
            else throw VersionError("model config text has unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw VersionError("model config text value for '" + key + "' malformed");
        }
    }
    cfg.validate();
    return cfg;
}

void save_model(const std::string& path, GamedModel& model) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open " + path + " for writing");
    os.write(kMagic, 4);
    put<std::uint32_t>(os, kModelFormatVersion);
    const std::string cfg_text = model_config_text(model.cfg);
    put<std::uint64_t>(os, fnv1a(cfg_text));
    put_string(os, cfg_text);

    auto params = model.params();
    put<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
    for (auto* p : params) {
        put_string(os, p->name);
        const auto& shape = p->value.shape();
        put<std::uint32_t>(os, static_cast<std::uint32_t>(shape.size()));
        for (int e : shape) put<std::uint32_t>(os, static_cast<std::uint32_t>(e));
        os.write(reinterpret_cast<const char*>(p->value.values().data()),
                 static_cast<std::streamsize>(sizeof(float) * p->value.values().size()));
    }
    if (!os) throw DataError("write failed for " + path);
}

GamedModel load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path);
    char magic[4] = {};
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw VersionError("not a model file (bad magic): " + path);
    }
    const auto version = get<std::uint32_t>(is);
    if (version != kModelFormatVersion) {
        throw VersionError("model file version " + std::to_string(version) +
                           ", this build supports version " + std::to_string(kModelFormatVersion));
    }
    const auto stored_hash = get<std::uint64_t>(is);
    const std::string cfg_text = get_string(is);
    if (stored_hash != fnv1a(cfg_text)) {
        throw VersionError("model config hash mismatch in " + path);
    }
    GamedModel model(model_config_from_text(cfg_text), 0);

    std::map<std::string, Param*> by_name;
    for (auto* p : model.params()) by_name[p->name] = p;

    const auto n_blocks = get<std::uint32_t>(is);
    if (n_blocks != by_name.size()) {
        throw VersionError("model file holds " + std::to_string(n_blocks) +
                           " parameter blocks, architecture expects " +
                           std::to_string(by_name.size()));
    }
    for (std::uint32_t b = 0; b < n_blocks; ++b) {
        const std::string name = get_string(is);
        auto it = by_name.find(name);
        if (it == by_name.end()) throw VersionError("unknown parameter block '" + name + "'");
        const auto ndim = get<std::uint32_t>(is);
        std::vector<int> shape;
        for (std::uint32_t i = 0; i < ndim; ++i) shape.push_back(int(get<std::uint32_t>(is)));
        if (shape != it->second->value.shape()) {
            throw VersionError("parameter block '" + name + "' shape mismatch");
        }
        std::vector<float> vals(static_cast<std::size_t>(shape_numel(shape)));
        is.read(reinterpret_cast<char*>(vals.data()),
                static_cast<std::streamsize>(sizeof(float) * vals.size()));
        if (!is) throw VersionError("model file truncated in block '" + name + "'");
        it->second->set(Tensor(shape, std::move(vals)));
    }
    return model;
}

}  // namespace gamed
