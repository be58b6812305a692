#include "diffaudit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "diffaudit/errors.hpp"

namespace diffaudit {

double auc_roc(std::span<const LabeledScore> scores) {
    std::size_t n_pos = 0, n_neg = 0;
    for (const auto& s : scores) (s.truth == Truth::member ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0) {
        throw DataError("auc_roc: need at least one member and one nonmember");
    }

    // Rank-sum formulation with midranks for ties; algebraically identical
    // to the all-pairs count.
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a].score < scores[b].score; });

    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]].score == scores[order[i]].score) ++j;
        const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t k = i; k < j; ++k) {
            if (scores[order[k]].truth == Truth::member) pos_rank_sum += midrank;
        }
        i = j;
    }
    const double np = static_cast<double>(n_pos);
    const double nn = static_cast<double>(n_neg);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

MetricsReport classification_metrics(std::span<const LabeledScore> scores, double threshold) {
    if (scores.empty()) throw DataError("classification_metrics: empty score list");
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw ConfigError("classification_metrics: threshold outside (0,1)");
    }

    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (const auto& s : scores) {
        const bool predicted = s.score >= threshold;
        const bool actual = s.truth == Truth::member;
        if (predicted && actual) ++tp;
        else if (predicted && !actual) ++fp;
        else if (!predicted && !actual) ++tn;
        else ++fn;
    }

    MetricsReport r;
    r.threshold = threshold;
    r.n_runs = 1;
    r.accuracy = static_cast<double>(tp + tn) / static_cast<double>(scores.size());
    r.precision = (tp + fp) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    r.recall = (tp + fn) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    const bool both_classes = (tp + fn) > 0 && (fp + tn) > 0;
    r.auc = both_classes ? auc_roc(scores) : std::numeric_limits<double>::quiet_NaN();
    r.per_run.push_back({r.accuracy, r.precision, r.recall, r.auc});
    return r;
}

}  // namespace diffaudit
