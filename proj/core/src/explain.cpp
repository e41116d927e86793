#include "gamed/explain.hpp"

#include <cstdio>

#include "json.hpp"  // vendored nlohmann/json

namespace gamed {

namespace {

using nlohmann::json;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

}  // namespace

ExplainResult explain_record(GamedModel& model, const NewsRecord& rec) {
    ForwardOutputs out = forward(model, rec);
    const VoteTrace& trace = out.vote.trace;

    json doc;
    doc["id"] = rec.id;
    doc["theta_high"] = model.cfg.theta_high;
    doc["theta_low"] = model.cfg.theta_low;
    doc["p_mix_initial"] = trace.p_mix_initial;
    doc["majority_class"] = trace.majority_class;
    doc["tie"] = trace.tie;
    json steps = json::array();
    for (const VoteStep& s : trace.steps) {
        steps.push_back({{"module", module_name(s.module)},
                         {"p", s.p},
                         {"rule", rule_name(s.rule)},
                         {"p_mix_after", s.p_mix_after}});
    }
    doc["steps"] = steps;
    doc["p_mix_final"] = trace.p_mix_final;
    doc["label"] = out.vote.label;
    doc["prediction"] = out.vote.label == 1 ? "fake" : "real";

    ExplainResult res;
    res.trace_json = doc.dump(2) + "\n";

    bool any_override = false;
    for (const VoteStep& s : trace.steps) {
        std::string line = std::string("module ") + module_name(s.module) + ": P=" + fmt(s.p);
        switch (s.rule) {
            case VetoRule::kR2:
                line += " above theta_high=" + fmt(model.cfg.theta_high) +
                        " and above P_mix -- replaced concatenated output (R2), P_mix -> " +
                        fmt(s.p_mix_after);
                any_override = true;
                break;
            case VetoRule::kR3:
                line += " below theta_low=" + fmt(model.cfg.theta_low) +
                        " in the majority class -- diluted concatenated output (R3), P_mix -> " +
                        fmt(s.p_mix_after);
                any_override = true;
                break;
            case VetoRule::kR4:
                line += " between thresholds -- concatenated output kept (R4), P_mix = " +
                        fmt(s.p_mix_after);
                break;
        }
        res.summary.push_back(std::move(line));
    }
    std::string verdict = out.vote.label == 1 ? "fake" : "real";
    if (any_override) {
        res.summary.push_back("decision: " + verdict + " (P_final=" + fmt(out.vote.p_final) + ")");
    } else {
        res.summary.push_back("decision: the concatenated prediction decided -- " + verdict +
                              " (P_final=" + fmt(out.vote.p_final) + ")");
    }
    return res;
}

std::string eval_json(const Metrics& m, bool use_veto, const std::string& model_path,
                      const std::string& data_path) {
    json doc;
    doc["model"] = model_path;
    doc["data"] = data_path;
    doc["use_veto"] = use_veto;
    doc["n"] = m.total();
    doc["accuracy"] = m.accuracy;
    doc["precision"] = m.precision;
    doc["recall"] = m.recall;
    doc["f1"] = m.f1;
    doc["counts"] = {{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}};
    return doc.dump(2) + "\n";
}

}  // namespace gamed
