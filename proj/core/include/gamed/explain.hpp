#pragma once

// Machine-readable decision trace plus a short human summary for one record.

#include <string>
#include <vector>

#include "gamed/pipeline.hpp"

namespace gamed {

struct ExplainResult {
    std::string trace_json;
    std::vector<std::string> summary;
};

ExplainResult explain_record(GamedModel& model, const NewsRecord& rec);

// JSON text for the metrics of one evaluation run (the eval.json payload).
std::string eval_json(const Metrics& m, bool use_veto, const std::string& model_path,
                      const std::string& data_path);

}  // namespace gamed
