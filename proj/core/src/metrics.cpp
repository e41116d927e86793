#include "gamed/metrics.hpp"

#include "gamed/errors.hpp"

namespace gamed {

Metrics metrics_from_counts(std::int64_t tp, std::int64_t fp, std::int64_t tn, std::int64_t fn) {
    Metrics m;
    m.tp = tp;
    m.fp = fp;
    m.tn = tn;
    m.fn = fn;
    const double total = static_cast<double>(m.total());
    m.accuracy = total > 0 ? (tp + tn) / total : 0.0;
    m.precision = (tp + fp) > 0 ? double(tp) / double(tp + fp) : 0.0;
    m.recall = (tp + fn) > 0 ? double(tp) / double(tp + fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                        : 0.0;
    return m;
}

Metrics compute_metrics(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size()) {
        throw ShapeError("compute_metrics: prediction/label count mismatch");
    }
    if (predictions.empty()) throw DataError("compute_metrics: empty dataset");
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const bool pred = predictions[i] != 0;
        const bool truth = labels[i] != 0;
        if (pred && truth) ++tp;
        else if (pred && !truth) ++fp;
        else if (!pred && !truth) ++tn;
        else ++fn;
    }
    return metrics_from_counts(tp, fp, tn, fn);
}

}  // namespace gamed
