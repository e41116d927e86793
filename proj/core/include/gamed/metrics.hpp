#pragma once

// Binary classification metrics with class 1 (fake) as the positive class.

#include <cstdint>
#include <vector>

namespace gamed {

struct Metrics {
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    double accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;

    std::int64_t total() const { return tp + fp + tn + fn; }
};

Metrics metrics_from_counts(std::int64_t tp, std::int64_t fp, std::int64_t tn, std::int64_t fn);

// Element-wise comparison of predictions against labels, both in {0,1}.
Metrics compute_metrics(const std::vector<int>& predictions, const std::vector<int>& labels);

}  // namespace gamed
