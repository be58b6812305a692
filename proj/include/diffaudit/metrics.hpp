#pragma once

#include <span>
#include <string>
#include <vector>

namespace diffaudit {

enum class Truth { member, nonmember };

struct LabeledScore {
    double score = 0.0;
    Truth truth = Truth::nonmember;
    std::string subject;
};

// Mann-Whitney AUC: probability that a random member outscores a random
// nonmember, ties counted 0.5. Needs at least one of each class.
double auc_roc(std::span<const LabeledScore> scores);

struct RunMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double auc = 0.0;
};

struct MetricsReport {
    double accuracy = 0.0;  // means over runs
    double precision = 0.0;
    double recall = 0.0;
    double auc = 0.0;
    double threshold = 0.0;
    int n_runs = 0;
    std::vector<RunMetrics> per_run;
};

// Confusion-matrix metrics with decision score >= threshold => member.
// Precision (and recall) are 0 when their denominator is empty. AUC is
// included when both classes are present, NaN otherwise.
MetricsReport classification_metrics(std::span<const LabeledScore> scores, double threshold);

}  // namespace diffaudit
