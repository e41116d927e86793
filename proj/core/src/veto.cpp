#include "gamed/veto.hpp"

#include <algorithm>
#include <cmath>

#include "gamed/errors.hpp"

namespace gamed {

const char* module_name(ModuleId id) {
    switch (id) {
        case ModuleId::kIp: return "ip";
        case ModuleId::kIs: return "is";
        case ModuleId::kT: return "t";
        case ModuleId::kMm: return "mm";
    }
    return "?";
}

ModuleId module_from_name(const std::string& name) {
    if (name == "ip") return ModuleId::kIp;
    if (name == "is") return ModuleId::kIs;
    if (name == "t") return ModuleId::kT;
    if (name == "mm") return ModuleId::kMm;
    throw ConfigError("unknown module name '" + name + "' (expected ip, is, t, mm)");
}

const char* rule_name(VetoRule r) {
    switch (r) {
        case VetoRule::kR2: return "R2";
        case VetoRule::kR3: return "R3";
        case VetoRule::kR4: return "R4";
    }
    return "?";
}

double confidence(double logit) {
    if (logit >= 0.0) return 1.0 / (1.0 + std::exp(-logit));
    double e = std::exp(logit);
    return e / (1.0 + e);
}

std::pair<int, bool> majority_class(const std::vector<double>& p, double p_mix_initial) {
    int ones = 0;
    for (double v : p)
        if (v > 0.5) ++ones;
    int zeros = static_cast<int>(p.size()) - ones;
    if (ones == zeros) return {p_mix_initial > 0.5 ? 1 : 0, true};
    return {ones > zeros ? 1 : 0, false};
}

static void check_input(const VoteInput& in) {
    if (in.module_logits.empty()) throw NumericDomainError("veto_vote: no module logits");
    if (!(in.theta_low > 0.0 && in.theta_low < in.theta_high && in.theta_high < 1.0)) {
        throw NumericDomainError("veto_vote: thresholds must satisfy 0 < theta_low < theta_high < 1");
    }
    int prev = -1;
    for (const auto& [id, logit] : in.module_logits) {
        (void)logit;
        int ord = static_cast<int>(id);
        if (ord <= prev) {
            throw NumericDomainError(
                "veto_vote: modules must appear once each in ip, is, t, mm order");
        }
        prev = ord;
    }
}

VoteResult veto_vote(const VoteInput& input, Rule3Mode rule3) {
    check_input(input);

    const std::size_t n = input.module_logits.size();
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = confidence(input.module_logits[i].second);

    VoteResult out;
    out.trace.p_mix_initial = confidence(input.mix_logit);  // Rule 1
    double p_mix = out.trace.p_mix_initial;

    // Majority is fixed once, before iteration.
    auto [majority, tie] = majority_class(p, p_mix);
    out.trace.majority_class = majority;
    out.trace.tie = tie;

    for (std::size_t i = 0; i < n; ++i) {
        const int decision = p[i] > 0.5 ? 1 : 0;
        VetoRule rule = VetoRule::kR4;
        if (p[i] > input.theta_high && p[i] > p_mix) {
            rule = VetoRule::kR2;
            p_mix = p[i];
        } else if (p[i] < input.theta_low && decision == majority) {
            rule = VetoRule::kR3;
            double best = -1.0;
            if (rule3 == Rule3Mode::kProse) {
                for (std::size_t j = 0; j < n; ++j) {
                    int dj = p[j] > 0.5 ? 1 : 0;
                    if (dj != majority) best = std::max(best, p[j]);
                }
            }
            if (best < 0.0) {  // formula mode, or every module in the majority
                for (double v : p) best = std::max(best, v);
            }
            p_mix = 0.5 * (p_mix + best);
        }
        out.trace.steps.push_back({input.module_logits[i].first, p[i], rule, p_mix});
    }

    out.trace.p_mix_final = p_mix;
    out.p_final = p_mix;
    out.label = p_mix > 0.5 ? 1 : 0;
    return out;
}

}  // namespace gamed
