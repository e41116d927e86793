#pragma once

// Veto voting: per-module confidences vs. high/low thresholds, with replace
// (R2), dilute (R3) and keep (R4) rules over the concatenated prediction.

#include <array>
#include <string>
#include <vector>

namespace gamed {

enum class ModuleId { kIp = 0, kIs = 1, kT = 2, kMm = 3 };

const char* module_name(ModuleId id);
ModuleId module_from_name(const std::string& name);

enum class VetoRule { kR2, kR3, kR4 };

const char* rule_name(VetoRule r);

// Rule 3 as prose ("ignore any output in the majority class") vs. the bare
// formula ("max P_i" over all modules). Prose is the default.
enum class Rule3Mode { kProse, kFormula };

struct VoteInput {
    // (module, logit) pairs in the fixed order ip, is, t, mm. Module-subset
    // runs pass the present subset, still in that order.
    std::vector<std::pair<ModuleId, double>> module_logits;
    double mix_logit = 0.0;
    double theta_high = 0.9;
    double theta_low = 0.1;
};

struct VoteStep {
    ModuleId module;
    double p;             // sigmoid of the module logit
    VetoRule rule;
    double p_mix_after;
};

struct VoteTrace {
    double p_mix_initial = 0.5;
    int majority_class = 0;
    bool tie = false;
    std::vector<VoteStep> steps;
    double p_mix_final = 0.5;
};

struct VoteResult {
    int label = 0;
    double p_final = 0.5;
    VoteTrace trace;
};

double confidence(double logit);

// Majority of per-module decisions (P > 0.5 -> class 1). A 2-2 tie resolves
// to the class implied by the initial concatenated confidence.
std::pair<int, bool> majority_class(const std::vector<double>& p, double p_mix_initial);

VoteResult veto_vote(const VoteInput& input, Rule3Mode rule3 = Rule3Mode::kProse);

}  // namespace gamed
